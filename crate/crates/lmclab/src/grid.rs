//! Uniform tensor-product grids on boxes, scalar fields on them, and the
//! stencil-shrunk interior fields produced by discrete calculus.
//!
//! Nodes are indexed row-major with the first axis slowest; indexing is
//! deterministic, so reductions over node order reproduce bit-identically.

use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    mins: Vec<T>,
    h: T,
    shape: Vec<usize>,
    strides: Vec<usize>,
}

impl<T: Real> Grid<T> {
    /// Box grid `[-radius, radius]^dim` with `points` nodes per axis.
    pub fn centered(dim: usize, radius: T, points: usize) -> Result<Arc<Self>> {
        if dim == 0 {
            return Err(Error::invalid_input("grid dimension must be >= 1"));
        }
        if points < 2 {
            return Err(Error::invalid_input("grid needs at least 2 points per axis"));
        }
        if !(radius > T::zero()) {
            return Err(Error::invalid_input("grid radius must be positive"));
        }
        let h = T::of(2.0) * radius / T::of((points - 1) as f64);
        let mins = vec![-radius; dim];
        let shape = vec![points; dim];
        Ok(Arc::new(Self::from_parts(dim, mins, h, shape)))
    }

    /// Box grid with per-axis extents; the spacing must come out uniform.
    pub fn from_extents(mins: Vec<T>, maxs: Vec<T>, shape: Vec<usize>) -> Result<Arc<Self>> {
        let dim = mins.len();
        if dim == 0 || maxs.len() != dim || shape.len() != dim {
            return Err(Error::invalid_input("extents and shape must agree in length"));
        }
        if shape.iter().any(|&m| m < 2) {
            return Err(Error::invalid_input("grid needs at least 2 points per axis"));
        }
        let h = (maxs[0] - mins[0]) / T::of((shape[0] - 1) as f64);
        for a in 0..dim {
            let ha = (maxs[a] - mins[a]) / T::of((shape[a] - 1) as f64);
            if !(ha > T::zero()) || ((ha - h).abs() > T::of(1e-12) * h.abs()) {
                return Err(Error::invalid_input(
                    "grid spacing must be uniform and positive across axes",
                ));
            }
        }
        Ok(Arc::new(Self::from_parts(dim, mins, h, shape)))
    }

    fn from_parts(dim: usize, mins: Vec<T>, h: T, shape: Vec<usize>) -> Self {
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Grid { dim, mins, h, shape, strides }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> T {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx;
        (0..self.dim)
            .map(|a| {
                let c = rem / self.strides[a];
                rem %= self.strides[a];
                c
            })
            .collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(&c, &s)| c * s).sum()
    }

    pub fn position(&self, idx: usize) -> Vec<T> {
        self.multi_index(idx)
            .iter()
            .enumerate()
            .map(|(a, &c)| self.mins[a] + self.h * T::of(c as f64))
            .collect()
    }

    /// True when the node sits within `margin` nodes of the boundary.
    pub fn is_within_margin(&self, idx: usize, margin: usize) -> bool {
        self.multi_index(idx)
            .iter()
            .zip(&self.shape)
            .any(|(&c, &m)| c < margin || c + margin >= m)
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.is_within_margin(idx, 1)
    }

    /// Flat indices of nodes at least `margin` nodes away from the boundary,
    /// in ascending (row-major) order.
    pub fn interior_nodes(&self, margin: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| !self.is_within_margin(i, margin))
            .collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_boundary(i)).collect()
    }

    /// Node closest to the origin.
    pub fn center_node(&self) -> usize {
        let mut best = 0usize;
        let mut best_d = T::infinity();
        for i in 0..self.len() {
            let d = self
                .position(i)
                .iter()
                .map(|&v| v * v)
                .sum::<T>();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Grid-sampled scalar values; finite everywhere.
#[derive(Debug, Clone)]
pub struct ScalarField<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid_input(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("field values must be finite"));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid<T>>, mut f: impl FnMut(&[T]) -> T) -> Result<Self> {
        let values: Vec<T> = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![T::zero(); n] }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.values[idx]
    }

    pub fn oscillation(&self) -> T {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in &self.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }

    pub fn sup_diff(&self, other: &ScalarField<T>) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// CSV dump `index,x1..xn,value` in row-major node order,
    /// 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("index");
        for a in 1..=self.grid.dim() {
            out.push_str(&format!(",x{a}"));
        }
        out.push_str(",value\n");
        for i in 0..self.grid.len() {
            out.push_str(&i.to_string());
            for &c in &self.grid.position(i) {
                out.push_str(&format!(",{:.16e}", c));
            }
            out.push_str(&format!(",{:.16e}\n", self.values[i]));
        }
        write_file(path, out.as_bytes())
    }

    /// Binary dump: 16-byte header (u32 dimension, then up to three u32 axis
    /// counts, zero padded) followed by little-endian f64 values in node
    /// order. Grids above three dimensions use the CSV form instead.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let dim = self.grid.dim();
        if dim > 3 {
            return Err(Error::invalid_input(
                "binary dumps support up to 3 dimensions; use CSV",
            ));
        }
        let mut bytes = Vec::with_capacity(16 + 8 * self.values.len());
        bytes.extend_from_slice(&(dim as u32).to_le_bytes());
        for a in 0..3 {
            let m = if a < dim { self.grid.shape()[a] as u32 } else { 0 };
            bytes.extend_from_slice(&m.to_le_bytes());
        }
        for &v in &self.values {
            bytes.extend_from_slice(&v.to_f64_lossy().to_le_bytes());
        }
        write_file(path, &bytes)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Multi-component values on the stencil-shrunk interior; entries outside
/// the margin are zero and must not be read.
#[derive(Debug, Clone)]
pub struct InteriorField<T> {
    grid: Arc<Grid<T>>,
    comps: usize,
    margin: usize,
    data: Vec<T>,
}

impl<T: Real> InteriorField<T> {
    pub fn zeros(grid: Arc<Grid<T>>, comps: usize, margin: usize) -> Self {
        let len = grid.len() * comps;
        InteriorField { grid, comps, margin, data: vec![T::zero(); len] }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn comps(&self) -> usize {
        self.comps
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    #[inline]
    pub fn get(&self, node: usize, c: usize) -> T {
        debug_assert!(c < self.comps);
        self.data[node * self.comps + c]
    }

    #[inline]
    pub fn set(&mut self, node: usize, c: usize, v: T) {
        self.data[node * self.comps + c] = v;
    }

    pub fn node_slice(&self, node: usize) -> &[T] {
        &self.data[node * self.comps..(node + 1) * self.comps]
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.grid.interior_nodes(self.margin)
    }

    pub fn max_abs_over_interior(&self) -> T {
        let mut m = T::zero();
        for node in self.nodes() {
            for c in 0..self.comps {
                m = m.max(self.get(node, c).abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trip() {
        let g = Grid::<f64>::centered(3, 1.0, 5).unwrap();
        assert_eq!(g.len(), 125);
        for idx in [0usize, 7, 62, 124] {
            let m = g.multi_index(idx);
            assert_eq!(g.flat_index(&m), idx);
        }
        assert_eq!(g.spacing(), 0.5);
        let center = g.center_node();
        assert_eq!(g.multi_index(center), vec![2, 2, 2]);
        assert!(g.position(center).iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn boundary_classification() {
        let g = Grid::<f64>::centered(2, 1.0, 5).unwrap();
        let interior = g.interior_nodes(1);
        assert_eq!(interior.len(), 9);
        assert_eq!(g.boundary_nodes().len(), 25 - 9);
        let deep = g.interior_nodes(2);
        assert_eq!(deep.len(), 1);
    }

    #[test]
    fn nonuniform_spacing_rejected() {
        let r = Grid::from_extents(vec![0.0, 0.0], vec![1.0, 2.0], vec![5, 5]);
        assert!(r.is_err());
        let ok = Grid::from_extents(vec![0.0, 0.0], vec![1.0, 2.0], vec![5, 9]);
        assert!(ok.is_ok());
    }

    #[test]
    fn field_validation() {
        let g = Grid::<f64>::centered(1, 1.0, 4).unwrap();
        assert!(ScalarField::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(ScalarField::new(g.clone(), vec![f64::INFINITY; 4]).is_err());
        let f = ScalarField::from_fn(g, |x| x[0] * 2.0).unwrap();
        assert_eq!(f.oscillation(), 4.0);
    }

    #[test]
    fn csv_format() {
        let g = Grid::<f64>::centered(2, 1.0, 2).unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] + x[1]).unwrap();
        let dir = std::env::temp_dir().join("lmclab_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.csv");
        f.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "index,x1,x2,value");
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(1).unwrap().starts_with("0,"));
    }

    #[test]
    fn binary_header() {
        let g = Grid::<f64>::centered(2, 1.0, 3).unwrap();
        let f = ScalarField::zeros(g);
        let dir = std::env::temp_dir().join("lmclab_bin_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("f.bin");
        f.write_binary(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * 9);
        assert_eq!(u32::from_le_bytes(bytes[0..4].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 0);
    }
}
