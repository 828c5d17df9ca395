//! Pointwise spectral layer for the arctangent-eigenvalue operator.
//!
//! Provides symmetric matrices with a cyclic-Jacobi eigen-decomposition, the
//! Lagrangian phase `theta = sum_i arctan(lambda_i)` together with its
//! criticality classification against `(n-2)*pi/2`, the ordered-eigenvalue
//! structure report, elementary symmetric polynomials `sigma_k`, and the
//! traced conformality identity
//!
//! ```text
//!   sum_j V/(1+lambda_j^2)
//!     = cos(theta) * sum_{0<=2k<n}   (-1)^k (n-2k)   sigma_{2k}
//!     - sin(theta) * sum_{0<=2k-1<n} (-1)^k (n-2k+1) sigma_{2k-1}
//! ```
//!
//! with `V = sqrt(prod_i (1+lambda_i^2))`.

use crate::error::{Error, Result};
use crate::linalg::SquareMat;
use crate::scalar::Real;

/// Default tolerance (radians) for classifying a phase as critical.
/// Well above eigenvalue round-off, far below any meaningful margin.
pub const CRITICALITY_TOL: f64 = 1e-9;

/// Dense symmetric matrix; exact entry symmetry is enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    entries: Vec<T>, // row-major n*n
}

impl<T: Real> SymMatrix<T> {
    /// Builds from row-major entries. Rejects non-finite or asymmetric input;
    /// symmetry must hold exactly, not approximately.
    pub fn new(n: usize, entries: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid_input("matrix dimension must be >= 1"));
        }
        if entries.len() != n * n {
            return Err(Error::invalid_input(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid_input("matrix entries must be finite"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::invalid_input(format!(
                        "entries[{i}][{j}] != entries[{j}][{i}]"
                    )));
                }
            }
        }
        Ok(SymMatrix { n, entries })
    }

    /// Builds from the upper triangle of `f`, mirroring below the diagonal.
    pub fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut entries = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn diag(d: &[T]) -> Self {
        let n = d.len();
        let mut entries = vec![T::zero(); n * n];
        for (i, &v) in d.iter().enumerate() {
            entries[i * n + i] = v;
        }
        SymMatrix { n, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self::diag(&vec![T::one(); n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn to_square(&self) -> SquareMat<T> {
        SquareMat::from_fn(self.n, |i, j| self.get(i, j))
    }

    /// Largest absolute eigenvalue (spectral norm).
    pub fn spectral_norm(&self) -> Result<T> {
        let s = eigen_decompose(self)?;
        Ok(s.lambda()
            .iter()
            .fold(T::zero(), |acc, &l| acc.max(l.abs())))
    }
}

/// Sorted eigenvalues (descending) with an orthonormal eigenvector frame.
/// `frame` is row-major with eigenvectors in columns, so that
/// `frame * diag(lambda) * frame^T` reconstructs the source matrix.
#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    lambda: Vec<T>,
    frame: SquareMat<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn frame(&self) -> &SquareMat<T> {
        &self.frame
    }

    pub fn lambda_max(&self) -> T {
        self.lambda[0]
    }

    pub fn lambda_min(&self) -> T {
        self.lambda[self.lambda.len() - 1]
    }

    /// The Lagrangian phase of this spectrum.
    pub fn phase(&self) -> T {
        lagrangian_phase(&self.lambda)
    }

    /// frame * diag(lambda) * frame^T.
    pub fn reconstruct(&self) -> SquareMat<T> {
        let n = self.dim();
        let d = SquareMat::from_fn(n, |i, j| if i == j { self.lambda[i] } else { T::zero() });
        self.frame.matmul(&d).matmul(&self.frame.transpose())
    }

    /// Max-abs deviation of the reconstruction from `m`, relative to the
    /// spectral scale of `m`.
    pub fn reconstruction_error(&self, m: &SymMatrix<T>) -> T {
        let rec = self.reconstruct();
        let mut err = T::zero();
        let mut scale = T::one();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                err = err.max((rec.get(i, j) - m.get(i, j)).abs());
                scale = scale.max(m.get(i, j).abs());
            }
        }
        err / scale
    }

    /// Max-abs deviation of frame^T * frame from the identity.
    pub fn orthogonality_error(&self) -> T {
        let p = self.frame.transpose().matmul(&self.frame);
        let n = self.dim();
        let mut err = T::zero();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { T::one() } else { T::zero() };
                err = err.max((p.get(i, j) - expect).abs());
            }
        }
        err
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending; ties keep the order in which the
/// Jacobi sweep produced them, so results are deterministic.
pub fn eigen_decompose<T: Real>(m: &SymMatrix<T>) -> Result<Spectrum<T>> {
    let n = m.dim();
    let mut a = m.entries.clone();
    let mut v = SquareMat::identity(n);
    let mut d: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();

    if n == 1 {
        return Ok(Spectrum {
            lambda: d,
            frame: v,
        });
    }

    let scale = m
        .entries
        .iter()
        .fold(T::zero(), |acc, &x| acc.max(x.abs()))
        .max(T::one());
    let tol = T::epsilon() * scale * T::of(n as f64);

    let mut b = d.clone();
    let mut z = vec![T::zero(); n];
    const MAX_SWEEPS: usize = 50;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n - 1 {
            for q in p + 1..n {
                off += a[p * n + q].abs();
            }
        }
        if off <= tol {
            let mut order: Vec<usize> = (0..n).collect();
            // stable sort keeps input order among equal eigenvalues
            order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("finite eigenvalues"));
            let lambda: Vec<T> = order.iter().map(|&i| d[i]).collect();
            let frame = SquareMat::from_fn(n, |r, c| v.get(r, order[c]));
            return Ok(Spectrum { lambda, frame });
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if apq.abs() <= h.abs() * T::epsilon() {
                    apq / h
                } else {
                    let theta = T::of(0.5) * h / apq;
                    let mut t = T::one() / (theta.abs() + (T::one() + theta * theta).sqrt());
                    if theta < T::zero() {
                        t = -t;
                    }
                    t
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                let tau = s / (T::one() + c);
                let hpq = t * apq;
                z[p] -= hpq;
                z[q] += hpq;
                d[p] -= hpq;
                d[q] += hpq;
                a[p * n + q] = T::zero();
                let rotate = |a: &mut [T], i1: usize, j1: usize, i2: usize, j2: usize| {
                    let g = a[i1 * n + j1];
                    let h = a[i2 * n + j2];
                    a[i1 * n + j1] = g - s * (h + g * tau);
                    a[i2 * n + j2] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut a, j, p, j, q);
                }
                for j in p + 1..q {
                    rotate(&mut a, p, j, j, q);
                }
                for j in q + 1..n {
                    rotate(&mut a, p, j, q, j);
                }
                for j in 0..n {
                    let g = v.get(j, p);
                    let h = v.get(j, q);
                    v.set(j, p, g - s * (h + g * tau));
                    v.set(j, q, h + s * (g - h * tau));
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            z[p] = T::zero();
            d[p] = b[p];
        }
    }

    Err(Error::EigenNoConvergence)
}

/// The Lagrangian phase `sum_i arctan(lambda_i)`, in `(-n*pi/2, n*pi/2)`.
pub fn lagrangian_phase<T: Real>(lambda: &[T]) -> T {
    lambda.iter().map(|&l| l.atan()).sum()
}

/// Criticality of a phase relative to `(n-2)*pi/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Subcritical,
    Critical,
    Supercritical,
}

/// Phase classification with a signed margin.
///
/// The class is decided by `|theta|` against `(n-2)*pi/2`; the margin is the
/// signed distance from `theta` to the critical value on its own side, so
/// that negating `theta` negates the margin while preserving the class.
/// For non-negative phases: supercritical iff `margin > tol`, critical iff
/// `|margin| <= tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRegime<T> {
    pub class: Criticality,
    pub margin: T,
}

/// Classifies `theta` against the critical value with the default tolerance.
pub fn phase_regime<T: Real>(theta: T, n: usize) -> Result<PhaseRegime<T>> {
    phase_regime_with_tol(theta, n, T::of(CRITICALITY_TOL))
}

pub fn phase_regime_with_tol<T: Real>(theta: T, n: usize, tol: T) -> Result<PhaseRegime<T>> {
    let half_pi = T::FRAC_PI_2();
    let nf = T::of(n as f64);
    if !(theta.abs() < nf * half_pi) {
        return Err(Error::InvalidPhase {
            theta: theta.to_f64_lossy(),
            n,
        });
    }
    let critical = T::of(n as f64 - 2.0) * half_pi;
    let abs_margin = theta.abs() - critical;
    let class = if abs_margin.abs() <= tol {
        Criticality::Critical
    } else if abs_margin > tol {
        Criticality::Supercritical
    } else {
        Criticality::Subcritical
    };
    let margin = if theta < T::zero() {
        -abs_margin
    } else {
        abs_margin
    };
    Ok(PhaseRegime { class, margin })
}

/// Structure report for an ordered eigenvalue tuple at critical or
/// supercritical phase. `applicable == false` (phase below critical, or
/// n < 2) leaves the flags unset-but-true, mirroring a vacuous hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderedEigenReport<T> {
    pub applicable: bool,
    /// lambda_1 >= ... >= lambda_{n-1} > 0 and lambda_{n-1} >= |lambda_n|.
    pub head_positive_and_dominant: bool,
    /// lambda_1 + (n-1) lambda_n >= 0.
    pub trace_balance: bool,
    /// sigma_k >= 0 for 1 <= k <= n-1.
    pub sigmas_nonnegative: bool,
    /// lambda_1 >= tan(pi/2 - pi/n).
    pub lambda_max_floor: bool,
    pub lambda_max_bound: T,
}

impl<T> OrderedEigenReport<T> {
    pub fn all_hold(&self) -> bool {
        self.applicable
            && self.head_positive_and_dominant
            && self.trace_balance
            && self.sigmas_nonnegative
            && self.lambda_max_floor
    }
}

/// Checks the ordered-eigenvalue properties that critical/supercritical
/// spectra satisfy. Inequalities are tested with slack `tol` (1e-12 scale).
///
/// `theta` must be the phase of `lambda`; when `theta < (n-2)*pi/2` or
/// `n < 2` the hypotheses fail and the report is marked not applicable.
pub fn ordered_eigen_properties<T: Real>(
    lambda: &[T],
    theta: T,
    tol: T,
) -> OrderedEigenReport<T> {
    let n = lambda.len();
    let critical = T::of(n as f64 - 2.0) * T::FRAC_PI_2();
    let bound = (T::FRAC_PI_2() - T::PI() / T::of(n as f64)).tan();
    if n < 2 || theta < critical - tol {
        return OrderedEigenReport {
            applicable: false,
            head_positive_and_dominant: true,
            trace_balance: true,
            sigmas_nonnegative: true,
            lambda_max_floor: true,
            lambda_max_bound: bound,
        };
    }

    let mut sorted: Vec<T> = lambda.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));

    let mut head_ok = true;
    for i in 0..n - 1 {
        if !(sorted[i] > -tol) {
            head_ok = false;
        }
    }
    if !(sorted[n - 2] >= sorted[n - 1].abs() - tol) {
        head_ok = false;
    }

    let trace_balance = sorted[0] + T::of(n as f64 - 1.0) * sorted[n - 1] >= -tol;

    let sig = sigma_all(&sorted);
    let sigmas_nonnegative = (1..n).all(|k| sig[k] >= -tol);

    let lambda_max_floor = sorted[0] >= bound - tol;

    OrderedEigenReport {
        applicable: true,
        head_positive_and_dominant: head_ok,
        trace_balance,
        sigmas_nonnegative,
        lambda_max_floor,
        lambda_max_bound: bound,
    }
}

/// All elementary symmetric polynomials `sigma_0..=sigma_n` of `lambda`,
/// computed by the stable coefficient recurrence for `prod_i (1 + t*lambda_i)`.
pub fn sigma_all<T: Real>(lambda: &[T]) -> Vec<T> {
    let n = lambda.len();
    let mut e = vec![T::zero(); n + 1];
    e[0] = T::one();
    for (i, &l) in lambda.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            let prev = e[j - 1];
            e[j] += l * prev;
        }
    }
    e
}

/// The k-th elementary symmetric polynomial; `sigma_0 = 1`, zero above n.
pub fn sigma_k<T: Real>(lambda: &[T], k: usize) -> T {
    if k > lambda.len() {
        return T::zero();
    }
    sigma_all(lambda)[k]
}

/// Both sides of the traced conformality identity.
#[derive(Debug, Clone, Copy)]
pub struct ConformalityTrace<T> {
    pub lhs: T,
    pub rhs: T,
}

impl<T: Real> ConformalityTrace<T> {
    pub fn residual(&self) -> T {
        (self.lhs - self.rhs).abs()
    }

    /// Residual relative to max(1, |lhs|, |rhs|).
    pub fn relative_residual(&self) -> T {
        self.residual() / T::one().max(self.lhs.abs()).max(self.rhs.abs())
    }
}

/// Evaluates both sides of the traced conformality identity:
/// LHS from the metric eigenvalues, RHS from the sigma expansion.
pub fn conformality_trace<T: Real>(lambda: &[T]) -> ConformalityTrace<T> {
    let n = lambda.len();
    let volume = lambda
        .iter()
        .map(|&l| (T::one() + l * l).sqrt())
        .fold(T::one(), |acc, v| acc * v);
    let lhs = lambda
        .iter()
        .map(|&l| T::one() / (T::one() + l * l))
        .sum::<T>()
        * volume;

    let theta = lagrangian_phase(lambda);
    let sig = sigma_all(lambda);

    let mut even = T::zero();
    let mut sign = T::one();
    let mut k = 0usize;
    while 2 * k < n {
        even += sign * T::of((n - 2 * k) as f64) * sig[2 * k];
        sign = -sign;
        k += 1;
    }

    let mut odd = T::zero();
    sign = -T::one(); // (-1)^k starting at k = 1
    k = 1;
    while 2 * k - 1 < n {
        odd += sign * T::of((n - 2 * k + 1) as f64) * sig[2 * k - 1];
        sign = -sign;
        k += 1;
    }

    let rhs = theta.cos() * even - theta.sin() * odd;
    ConformalityTrace { lhs, rhs }
}

/// The conformality residual |LHS - RHS|.
pub fn conformality_trace_residual<T: Real>(lambda: &[T]) -> T {
    conformality_trace(lambda).residual()
}
