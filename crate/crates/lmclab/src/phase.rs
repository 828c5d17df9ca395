//! Phase models `Theta(x, z, p)` and their derivative jets.
//!
//! The built-in variants are the phase families of self-similar Lagrangian
//! mean curvature flows:
//!
//! * `Constant`:          Theta = c                       (special Lagrangian)
//! * `ShrinkerExpander`:  Theta = s1 + s2 (x.p - 2z)
//! * `Translator`:        Theta = g1 + g2.x + g3.p
//! * `Rotator`:           Theta = r1 + (r2/2)(|x|^2 + |p|^2)
//!
//! plus a programmatic `Custom` extension point. All variants expose the full
//! first/second derivative jet in the independent variables (x, z, p); the
//! structure-bound and gradient-condition checkers sample those jets over a
//! region `Gamma_R = B_R x z-range x B_P`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{norm2, SquareMat};
use crate::scalar::Real;
use crate::spectral::{eigen_decompose, SymMatrix};

/// Value and derivative jet of a phase at one point.
/// Second derivatives are stored dense; `dxp` has x-rows and p-columns.
#[derive(Debug, Clone)]
pub struct PhaseEval<T> {
    pub theta: T,
    pub dx: Vec<T>,
    pub dz: T,
    pub dp: Vec<T>,
    pub dxx: SquareMat<T>,
    pub dxz: Vec<T>,
    pub dxp: SquareMat<T>,
    pub dzz: T,
    pub dzp: Vec<T>,
    pub dpp: SquareMat<T>,
}

impl<T: Real> PhaseEval<T> {
    /// Jet of the zero phase, to be filled in by a variant.
    pub fn zero(dim: usize) -> Self {
        PhaseEval {
            theta: T::zero(),
            dx: vec![T::zero(); dim],
            dz: T::zero(),
            dp: vec![T::zero(); dim],
            dxx: SquareMat::zeros(dim),
            dxz: vec![T::zero(); dim],
            dxp: SquareMat::zeros(dim),
            dzz: T::zero(),
            dzp: vec![T::zero(); dim],
            dpp: SquareMat::zeros(dim),
        }
    }
}

/// A user-supplied phase; evaluators must be stateless and reentrant.
pub trait CustomPhase<T: Real>: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[T], z: T, p: &[T]) -> PhaseEval<T>;
    /// Short label used in reports.
    fn label(&self) -> &str {
        "custom"
    }
}

#[derive(Clone)]
pub enum PhaseModel<T: Real> {
    Constant { c: T, dim: usize },
    ShrinkerExpander { s1: T, s2: T, dim: usize },
    Translator { gamma1: T, gamma2: Vec<T>, gamma3: Vec<T> },
    Rotator { r1: T, r2: T, dim: usize },
    Custom(Arc<dyn CustomPhase<T>>),
}

impl<T: Real> std::fmt::Debug for PhaseModel<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PhaseModel::Constant { c, dim } => write!(f, "Constant(c={c}, dim={dim})"),
            PhaseModel::ShrinkerExpander { s1, s2, dim } => {
                write!(f, "ShrinkerExpander(s1={s1}, s2={s2}, dim={dim})")
            }
            PhaseModel::Translator { gamma1, gamma2, gamma3 } => {
                write!(f, "Translator(g1={gamma1}, g2={gamma2:?}, g3={gamma3:?})")
            }
            PhaseModel::Rotator { r1, r2, dim } => write!(f, "Rotator(r1={r1}, r2={r2}, dim={dim})"),
            PhaseModel::Custom(c) => write!(f, "Custom({})", c.label()),
        }
    }
}

impl<T: Real> PhaseModel<T> {
    pub fn constant(c: T, dim: usize) -> Self {
        PhaseModel::Constant { c, dim }
    }

    pub fn shrinker_expander(s1: T, s2: T, dim: usize) -> Self {
        PhaseModel::ShrinkerExpander { s1, s2, dim }
    }

    pub fn translator(gamma1: T, gamma2: Vec<T>, gamma3: Vec<T>) -> Result<Self> {
        if gamma2.len() != gamma3.len() {
            return Err(Error::DimensionMismatch {
                expected: gamma2.len(),
                got: gamma3.len(),
            });
        }
        Ok(PhaseModel::Translator { gamma1, gamma2, gamma3 })
    }

    pub fn rotator(r1: T, r2: T, dim: usize) -> Self {
        PhaseModel::Rotator { r1, r2, dim }
    }

    pub fn custom(phase: Arc<dyn CustomPhase<T>>) -> Self {
        PhaseModel::Custom(phase)
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseModel::Constant { dim, .. } => *dim,
            PhaseModel::ShrinkerExpander { dim, .. } => *dim,
            PhaseModel::Translator { gamma2, .. } => gamma2.len(),
            PhaseModel::Rotator { dim, .. } => *dim,
            PhaseModel::Custom(c) => c.dim(),
        }
    }

    pub fn is_soliton_family(&self) -> bool {
        matches!(
            self,
            PhaseModel::ShrinkerExpander { .. }
                | PhaseModel::Translator { .. }
                | PhaseModel::Rotator { .. }
        )
    }

    /// Theta and all partial derivatives at (x, z, p).
    pub fn eval(&self, x: &[T], z: T, p: &[T]) -> Result<PhaseEval<T>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
        let mut jet = PhaseEval::zero(n);
        match self {
            PhaseModel::Constant { c, .. } => {
                jet.theta = *c;
            }
            PhaseModel::ShrinkerExpander { s1, s2, .. } => {
                let xp: T = x.iter().zip(p).map(|(&a, &b)| a * b).sum();
                jet.theta = *s1 + *s2 * (xp - T::of(2.0) * z);
                for i in 0..n {
                    jet.dx[i] = *s2 * p[i];
                    jet.dp[i] = *s2 * x[i];
                    jet.dxp.set(i, i, *s2);
                }
                jet.dz = -T::of(2.0) * *s2;
            }
            PhaseModel::Translator { gamma1, gamma2, gamma3 } => {
                let gx: T = gamma2.iter().zip(x).map(|(&a, &b)| a * b).sum();
                let gp: T = gamma3.iter().zip(p).map(|(&a, &b)| a * b).sum();
                jet.theta = *gamma1 + gx + gp;
                jet.dx.copy_from_slice(gamma2);
                jet.dp.copy_from_slice(gamma3);
            }
            PhaseModel::Rotator { r1, r2, .. } => {
                let half = T::of(0.5);
                let sq: T = x.iter().map(|&a| a * a).sum::<T>() + p.iter().map(|&a| a * a).sum::<T>();
                jet.theta = *r1 + half * *r2 * sq;
                for i in 0..n {
                    jet.dx[i] = *r2 * x[i];
                    jet.dp[i] = *r2 * p[i];
                    jet.dxx.set(i, i, *r2);
                    jet.dpp.set(i, i, *r2);
                }
            }
            PhaseModel::Custom(c) => {
                jet = c.eval(x, z, p);
            }
        }
        if !jet.theta.is_finite() {
            return Err(Error::invalid_input("phase evaluated to a non-finite value"));
        }
        Ok(jet)
    }

    /// Theta alone.
    pub fn theta(&self, x: &[T], z: T, p: &[T]) -> Result<T> {
        Ok(self.eval(x, z, p)?.theta)
    }
}

/// Sampled region `B_R x [z0, z1] x B_P` with a fixed seed.
///
/// Points are canonical unit draws scaled by the extents, so nested specs
/// with the same seed and count sample along the same rays.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpec<T> {
    pub dim: usize,
    pub x_radius: T,
    pub z_range: (T, T),
    pub p_radius: T,
    pub samples: usize,
    pub seed: u64,
}

impl<T: Real> SampleSpec<T> {
    pub fn new(dim: usize, x_radius: T, z_range: (T, T), p_radius: T, samples: usize, seed: u64) -> Self {
        SampleSpec { dim, x_radius, z_range, p_radius, samples, seed }
    }

    /// Same canonical draws with z and p extents scaled by `factor`
    /// (z range grows around its midpoint).
    pub fn with_zp_scaled(&self, factor: T) -> Self {
        let mid = (self.z_range.0 + self.z_range.1) * T::of(0.5);
        let half = (self.z_range.1 - self.z_range.0) * T::of(0.5) * factor;
        SampleSpec {
            z_range: (mid - half, mid + half),
            p_radius: self.p_radius * factor,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::invalid_input("sample spec must request at least one point"));
        }
        if self.x_radius < T::zero() || self.p_radius < T::zero() || self.z_range.1 < self.z_range.0 {
            return Err(Error::invalid_input("sample spec extents must be non-negative"));
        }
        Ok(())
    }

    /// Deterministic sample triples (x, z, p).
    pub fn points(&self) -> Vec<(Vec<T>, T, Vec<T>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let zmid = (self.z_range.0 + self.z_range.1) * T::of(0.5);
        let zhalf = (self.z_range.1 - self.z_range.0) * T::of(0.5);
        (0..self.samples)
            .map(|_| {
                let xu = unit_ball_point(&mut rng, self.dim);
                let zu = T::of(rng.random_range(-1.0..1.0f64));
                let pu = unit_ball_point(&mut rng, self.dim);
                let x: Vec<T> = xu.iter().map(|&v| T::of(v) * self.x_radius).collect();
                let p: Vec<T> = pu.iter().map(|&v| T::of(v) * self.p_radius).collect();
                (x, zmid + zhalf * zu, p)
            })
            .collect()
    }
}

/// Uniform draw from the unit ball: gaussian direction, radius u^(1/n).
fn unit_ball_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-12 {
            continue;
        }
        let u: f64 = rng.random_range(0.0..1.0f64);
        let r = u.powf(1.0 / dim as f64);
        return g.iter().map(|v| v / norm * r).collect();
    }
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Sampled structure bounds: `nu1` over first partials, `nu2` over the
/// second partials `xx, xz, xp, zz, zp`. Matrix blocks use the operator norm.
#[derive(Debug, Clone)]
pub struct StructureBounds<T> {
    pub nu1: T,
    pub nu2: T,
    pub region: SampleSpec<T>,
}

pub fn structure_bounds<T: Real>(model: &PhaseModel<T>, region: &SampleSpec<T>) -> Result<StructureBounds<T>> {
    region.validate()?;
    if region.dim != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: region.dim });
    }
    let mut nu1 = T::zero();
    let mut nu2 = T::zero();
    for (x, z, p) in region.points() {
        let jet = model.eval(&x, z, &p)?;
        nu1 = nu1
            .max(norm2(&jet.dx))
            .max(jet.dz.abs())
            .max(norm2(&jet.dp));
        nu2 = nu2
            .max(operator_norm(&jet.dxx)?)
            .max(norm2(&jet.dxz))
            .max(operator_norm(&jet.dxp)?)
            .max(jet.dzz.abs())
            .max(norm2(&jet.dzp));
    }
    Ok(StructureBounds { nu1, nu2, region: region.clone() })
}

/// Spectral norm of a (possibly asymmetric) matrix via eigen(M^T M).
fn operator_norm<T: Real>(m: &SquareMat<T>) -> Result<T> {
    let mtm = m.transpose().matmul(m);
    let sym = SymMatrix::from_upper_fn(m.dim(), |i, j| {
        // M^T M is symmetric up to round-off; take the upper triangle
        mtm.get(i, j)
    })?;
    let s = eigen_decompose(&sym)?;
    Ok(s.lambda_max().max(T::zero()).sqrt())
}

/// One sampled counterexample to a gradient-estimate condition.
#[derive(Debug, Clone)]
pub struct Witness<T> {
    pub x: Vec<T>,
    pub z: T,
    pub p: Vec<T>,
    pub lhs: T,
    pub rhs: T,
}

/// Outcome of one condition over the sampled region.
#[derive(Debug, Clone)]
pub struct ConditionFinding<T> {
    pub holds: bool,
    /// max LHS/RHS over admissible samples (0 when nothing was admissible).
    pub worst_ratio: T,
    /// Worst violating sample at the supplied constant, if any.
    pub witness: Option<Witness<T>>,
    /// Smallest constant that would make the condition pass on this sample;
    /// meaningless for the sign condition (b), where it is 0.
    pub minimal_constant: T,
    /// Set when some sample has zero right-hand side but positive left-hand
    /// side, so no finite constant can rescue the condition.
    pub unbounded: bool,
}

/// Report for the three gradient-estimate structure conditions:
/// (a) `|Theta_x| <= C (Theta - (n-2)pi/2)^(1/2)` plus a uniform `Theta_xx` probe,
/// (b) `Theta_z >= 0`,
/// (c) `|p| |Theta_p| <= C (Theta - (n-2)pi/2)`.
#[derive(Debug, Clone)]
pub struct GradientConditionReport<T> {
    pub cond_a: ConditionFinding<T>,
    pub cond_b: ConditionFinding<T>,
    pub cond_c: ConditionFinding<T>,
    /// sup |Theta_xx| over the region, and over the region with z/p doubled.
    pub theta_xx_sup: T,
    pub theta_xx_sup_zp_doubled: T,
    /// False when the doubled-region sup grows by more than 2x: a bounded
    /// second derivative in x cannot keep pace with the sample extents.
    pub theta_xx_uniform: bool,
    /// Samples below the critical phase, excluded from (a) and (c).
    pub skipped_subcritical: usize,
    pub constant_used: T,
}

pub fn gradient_conditions_check<T: Real>(
    model: &PhaseModel<T>,
    region: &SampleSpec<T>,
    n: usize,
    constant: T,
) -> Result<GradientConditionReport<T>> {
    region.validate()?;
    if region.dim != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: region.dim });
    }
    let critical = T::of(n as f64 - 2.0) * T::FRAC_PI_2();
    let tiny = T::of(1e-30);

    let mut a = RunningCondition::new();
    let mut b = RunningCondition::new();
    let mut c = RunningCondition::new();
    let mut skipped = 0usize;
    let mut xx_sup = T::zero();

    for (x, z, p) in region.points() {
        let jet = model.eval(&x, z, &p)?;
        xx_sup = xx_sup.max(operator_norm(&jet.dxx)?);

        // (b) applies everywhere
        b.update(jet.dz, T::zero(), &x, z, &p, |lhs, _| lhs >= T::zero());

        let margin = jet.theta - critical;
        if margin < T::zero() {
            skipped += 1;
            continue;
        }
        let lhs_a = norm2(&jet.dx);
        let rhs_a = constant * margin.sqrt();
        a.update_ratio(lhs_a, rhs_a, margin.sqrt(), &x, z, &p, tiny);

        let lhs_c = norm2(&p) * norm2(&jet.dp);
        let rhs_c = constant * margin;
        c.update_ratio(lhs_c, rhs_c, margin, &x, z, &p, tiny);
    }

    let doubled = region.with_zp_scaled(T::of(2.0));
    let mut xx_sup2 = T::zero();
    for (x, z, p) in doubled.points() {
        let jet = model.eval(&x, z, &p)?;
        xx_sup2 = xx_sup2.max(operator_norm(&jet.dxx)?);
    }
    let theta_xx_uniform = xx_sup2 <= T::of(2.0) * xx_sup + T::of(1e-9);

    Ok(GradientConditionReport {
        cond_a: a.finish_ratio(),
        cond_b: b.finish_sign(),
        cond_c: c.finish_ratio(),
        theta_xx_sup: xx_sup,
        theta_xx_sup_zp_doubled: xx_sup2,
        theta_xx_uniform,
        skipped_subcritical: skipped,
        constant_used: constant,
    })
}

/// Accumulator shared by the ratio conditions (a)/(c) and the sign condition (b).
struct RunningCondition<T> {
    worst_ratio: T,
    minimal_constant: T,
    witness: Option<Witness<T>>,
    worst_violation: T,
    unbounded: bool,
}

impl<T: Real> RunningCondition<T> {
    fn new() -> Self {
        RunningCondition {
            worst_ratio: T::zero(),
            minimal_constant: T::zero(),
            witness: None,
            worst_violation: T::zero(),
            unbounded: false,
        }
    }

    /// Sign condition: lhs must satisfy `ok(lhs)`; violation size is -lhs.
    fn update(&mut self, lhs: T, rhs: T, x: &[T], z: T, p: &[T], ok: impl Fn(T, T) -> bool) {
        if !ok(lhs, rhs) {
            let violation = -lhs;
            if violation > self.worst_violation {
                self.worst_violation = violation;
                self.witness = Some(Witness { x: x.to_vec(), z, p: p.to_vec(), lhs, rhs });
            }
        }
    }

    /// Ratio condition lhs <= rhs, with `scale` the C-free right-hand factor.
    fn update_ratio(&mut self, lhs: T, rhs: T, scale: T, x: &[T], z: T, p: &[T], tiny: T) {
        if scale > tiny {
            self.minimal_constant = self.minimal_constant.max(lhs / scale);
        } else if lhs > T::of(1e-12) {
            self.unbounded = true;
        }
        let ratio = lhs / rhs.max(tiny);
        if ratio > self.worst_ratio {
            self.worst_ratio = ratio;
            if lhs > rhs {
                self.witness = Some(Witness { x: x.to_vec(), z, p: p.to_vec(), lhs, rhs });
            }
        }
    }

    fn finish_ratio(self) -> ConditionFinding<T> {
        ConditionFinding {
            holds: self.worst_ratio <= T::one() && !self.unbounded,
            worst_ratio: self.worst_ratio,
            minimal_constant: self.minimal_constant,
            witness: if self.worst_ratio > T::one() || self.unbounded {
                self.witness
            } else {
                None
            },
            unbounded: self.unbounded,
        }
    }

    fn finish_sign(self) -> ConditionFinding<T> {
        ConditionFinding {
            holds: self.witness.is_none(),
            worst_ratio: self.worst_violation,
            minimal_constant: T::zero(),
            witness: self.witness,
            unbounded: false,
        }
    }
}

/// Result of the partial-convexity scan of `Theta_pp`.
#[derive(Debug, Clone)]
pub struct ConvexityReport<T> {
    pub convex: bool,
    pub min_eigenvalue: T,
    pub witness: Option<(Vec<T>, T, Vec<T>)>,
}

/// Passes iff `Theta_pp` is positive semidefinite (min eigenvalue >= -1e-10)
/// at every sampled point. The jet is symmetrized before decomposition.
pub fn partial_convexity_check<T: Real>(
    model: &PhaseModel<T>,
    region: &SampleSpec<T>,
) -> Result<ConvexityReport<T>> {
    region.validate()?;
    let mut min_eig = T::infinity();
    let mut witness = None;
    for (x, z, p) in region.points() {
        let jet = model.eval(&x, z, &p)?;
        let sym = jet.dpp.symmetrize();
        let m = SymMatrix::new(model.dim(), sym.as_slice().to_vec())?;
        let s = eigen_decompose(&m)?;
        let low = s.lambda_min();
        if low < min_eig {
            min_eig = low;
            witness = Some((x, z, p));
        }
    }
    let convex = min_eig >= -T::of(1e-10);
    Ok(ConvexityReport {
        convex,
        min_eigenvalue: min_eig,
        witness: if convex { None } else { witness },
    })
}

/// Max relative error between the analytic jet and central finite differences
/// over the sampled region. First partials are differenced from `theta`;
/// second partials from the analytic first partials.
pub fn derivative_consistency_check<T: Real>(
    model: &PhaseModel<T>,
    region: &SampleSpec<T>,
) -> Result<T> {
    region.validate()?;
    let n = model.dim();
    let h = T::of(1e-5);
    let two_h = T::of(2e-5);
    let mut worst = T::zero();
    let mut rel = |analytic: T, fd: T, scale: T| {
        let denom = T::one().max(scale.abs());
        let err = (analytic - fd).abs() / denom;
        if err > worst {
            worst = err;
        }
    };

    for (x, z, p) in region.points() {
        let jet = model.eval(&x, z, &p)?;
        // dz and dzz
        let up = model.eval(&x, z + h, &p)?;
        let dn = model.eval(&x, z - h, &p)?;
        rel(jet.dz, (up.theta - dn.theta) / two_h, jet.dz);
        rel(jet.dzz, (up.dz - dn.dz) / two_h, jet.dzz);
        for k in 0..n {
            rel(jet.dzp[k], (up.dp[k] - dn.dp[k]) / two_h, jet.dzp[k]);
        }
        // x-direction partials
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let up = model.eval(&xp, z, &p)?;
            let dn = model.eval(&xm, z, &p)?;
            rel(jet.dx[i], (up.theta - dn.theta) / two_h, jet.dx[i]);
            rel(jet.dxz[i], (up.dz - dn.dz) / two_h, jet.dxz[i]);
            for j in 0..n {
                rel(jet.dxx.get(i, j), (up.dx[j] - dn.dx[j]) / two_h, jet.dxx.get(i, j));
                rel(jet.dxp.get(i, j), (up.dp[j] - dn.dp[j]) / two_h, jet.dxp.get(i, j));
            }
        }
        // p-direction partials
        for i in 0..n {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[i] += h;
            pm[i] -= h;
            let up = model.eval(&x, z, &pp)?;
            let dn = model.eval(&x, z, &pm)?;
            rel(jet.dp[i], (up.theta - dn.theta) / two_h, jet.dp[i]);
            for j in 0..n {
                rel(jet.dpp.get(i, j), (up.dp[j] - dn.dp[j]) / two_h, jet.dpp.get(i, j));
            }
        }
    }
    Ok(worst)
}

/// Loadable phase definition: named variant plus parameter list.
/// `Custom` phases are a programmatic extension point and have no text form.
#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseConfig {
    Constant { c: f64 },
    ShrinkerExpander { s1: f64, s2: f64 },
    Translator { gamma1: f64, gamma2: Vec<f64>, gamma3: Vec<f64> },
    Rotator { r1: f64, r2: f64 },
}

impl PhaseConfig {
    pub fn build<T: Real>(&self, dim: usize) -> Result<PhaseModel<T>> {
        Ok(match self {
            PhaseConfig::Constant { c } => PhaseModel::constant(T::of(*c), dim),
            PhaseConfig::ShrinkerExpander { s1, s2 } => {
                PhaseModel::shrinker_expander(T::of(*s1), T::of(*s2), dim)
            }
            PhaseConfig::Translator { gamma1, gamma2, gamma3 } => {
                if gamma2.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: gamma2.len() });
                }
                PhaseModel::translator(
                    T::of(*gamma1),
                    gamma2.iter().map(|&v| T::of(v)).collect(),
                    gamma3.iter().map(|&v| T::of(v)).collect(),
                )?
            }
            PhaseConfig::Rotator { r1, r2 } => PhaseModel::rotator(T::of(*r1), T::of(*r2), dim),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(dim: usize) -> SampleSpec<f64> {
        SampleSpec::new(dim, 1.0, (-1.0, 1.0), 2.0, 200, 7)
    }

    #[test]
    fn translator_example() {
        let m = PhaseModel::translator(0.0, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let jet = m.eval(&[0.0, 0.0], 3.0, &[5.0, 7.0]).unwrap();
        assert_eq!(jet.theta, 7.0);
        assert_eq!(jet.dx, vec![1.0, 0.0]);
        assert_eq!(jet.dz, 0.0);
        assert_eq!(jet.dp, vec![0.0, 1.0]);
    }

    #[test]
    fn shrinker_example() {
        let m = PhaseModel::shrinker_expander(std::f64::consts::FRAC_PI_2, 1.0, 2);
        let jet = m.eval(&[1.0, 0.0], 0.5, &[2.0, 0.0]).unwrap();
        // x.p - 2z = 2 - 1 = 1
        assert!((jet.theta - (std::f64::consts::FRAC_PI_2 + 1.0)).abs() < 1e-15);
        assert_eq!(jet.dz, -2.0);
        assert_eq!(jet.dx, vec![2.0, 0.0]);
        assert_eq!(jet.dp, vec![1.0, 0.0]);
    }

    #[test]
    fn rotator_example() {
        let m = PhaseModel::<f64>::rotator(0.0, 2.0, 2);
        let jet = m.eval(&[1.0, 1.0], 0.0, &[0.0, 2.0]).unwrap();
        assert!((jet.theta - 6.0).abs() < 1e-15);
        assert_eq!(jet.dx, vec![2.0, 2.0]);
        assert_eq!(jet.dp, vec![0.0, 4.0]);
        assert_eq!(jet.dxp.max_abs(), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = PhaseModel::constant(0.5, 3);
        assert!(m.eval(&[0.0, 0.0], 0.0, &[0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn builtin_jets_match_finite_differences() {
        let models: Vec<PhaseModel<f64>> = vec![
            PhaseModel::constant(0.7, 2),
            PhaseModel::shrinker_expander(0.3, -1.2, 2),
            PhaseModel::translator(0.1, vec![1.0, -0.5], vec![0.25, 2.0]).unwrap(),
            PhaseModel::rotator(-0.2, 1.7, 2),
        ];
        for m in &models {
            let err = derivative_consistency_check(&m, &spec(2)).unwrap();
            assert!(err < 1e-8, "{m:?}: {err}");
        }
    }

    #[test]
    fn structure_bounds_examples() {
        // constant: everything vanishes
        let b = structure_bounds(&PhaseModel::constant(1.0, 2), &spec(2)).unwrap();
        assert_eq!(b.nu1, 0.0);
        assert_eq!(b.nu2, 0.0);

        // translator: constant first partials
        let m = PhaseModel::translator(0.0, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let b = structure_bounds(&m, &spec(2)).unwrap();
        assert!((b.nu1 - 1.0).abs() < 1e-14);
        assert_eq!(b.nu2, 0.0);

        // shrinker on |x|<=1, |z|<=1, |p|<=2: |Theta_z| = 2 dominates nu1,
        // Theta_xp = I gives nu2 = 1
        let m = PhaseModel::shrinker_expander(0.0, 1.0, 2);
        let b = structure_bounds(&m, &spec(2)).unwrap();
        assert!((b.nu1 - 2.0).abs() < 1e-12);
        assert!((b.nu2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn structure_bounds_monotone_on_nested_boxes() {
        let m = PhaseModel::rotator(0.0, 1.5, 2);
        let small = spec(2);
        let big = small.with_zp_scaled(2.0);
        let bs = structure_bounds(&m, &small).unwrap();
        let bb = structure_bounds(&m, &big).unwrap();
        assert!(bb.nu1 >= bs.nu1);
        assert!(bb.nu2 >= bs.nu2);
    }

    #[test]
    fn conditions_on_constant_phase_pass() {
        // constant at the critical value for n = 3
        let m = PhaseModel::constant(std::f64::consts::FRAC_PI_2, 3);
        let rep = gradient_conditions_check(&m, &spec(3), 3, 1.0).unwrap();
        assert!(rep.cond_a.holds);
        assert!(rep.cond_b.holds);
        assert!(rep.cond_c.holds);
        assert!(rep.theta_xx_uniform);
    }

    #[test]
    fn shrinker_fails_monotonicity() {
        let m = PhaseModel::shrinker_expander(2.0, 1.0, 2);
        let rep = gradient_conditions_check(&m, &spec(2), 2, 1.0).unwrap();
        assert!(!rep.cond_b.holds);
        let w = rep.cond_b.witness.unwrap();
        assert!((w.lhs + 2.0).abs() < 1e-15, "Theta_z = -2 s2");
    }

    #[test]
    fn translator_with_gradient_coupling_fails_decay() {
        // points with theta near critical and |p| large break condition (c)
        let m = PhaseModel::translator(0.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let region = SampleSpec::new(2, 1.0, (-1.0, 1.0), 40.0, 4000, 3);
        let rep = gradient_conditions_check(&m, &region, 2, 1.0).unwrap();
        assert!(!rep.cond_c.holds);
        assert!(rep.cond_c.witness.is_some());
    }

    #[test]
    fn convexity_checks() {
        let t = PhaseModel::translator(0.0, vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert!(partial_convexity_check(&t, &spec(2)).unwrap().convex);

        let r = PhaseModel::rotator(0.0, 1.0, 2);
        let rep = partial_convexity_check(&r, &spec(2)).unwrap();
        assert!(rep.convex);
        assert!((rep.min_eigenvalue - 1.0).abs() < 1e-12);

        struct ConcaveInP;
        impl CustomPhase<f64> for ConcaveInP {
            fn dim(&self) -> usize {
                2
            }
            fn eval(&self, _x: &[f64], _z: f64, p: &[f64]) -> PhaseEval<f64> {
                let mut jet = PhaseEval::zero(2);
                jet.theta = -0.5 * (p[0] * p[0] + p[1] * p[1]);
                jet.dp = vec![-p[0], -p[1]];
                jet.dpp.set(0, 0, -1.0);
                jet.dpp.set(1, 1, -1.0);
                jet
            }
        }
        let c = PhaseModel::custom(Arc::new(ConcaveInP));
        let rep = partial_convexity_check(&c, &spec(2)).unwrap();
        assert!(!rep.convex);
        assert!((rep.min_eigenvalue + 1.0).abs() < 1e-12);
        assert!(rep.witness.is_some());
    }

    #[test]
    fn shrinker_identities() {
        // Theta_z = -2 s2 identically; rotator dx = r2 x, dp = r2 p
        let m = PhaseModel::shrinker_expander(0.4, -0.7, 3);
        for (x, z, p) in spec(3).points() {
            let jet = m.eval(&x, z, &p).unwrap();
            assert!((jet.dz - 1.4).abs() < 1e-15);
        }
        let r = PhaseModel::rotator(0.0, 0.9, 3);
        for (x, z, p) in spec(3).points() {
            let jet = r.eval(&x, z, &p).unwrap();
            for i in 0..3 {
                assert!((jet.dx[i] - 0.9 * x[i]).abs() < 1e-15);
                assert!((jet.dp[i] - 0.9 * p[i]).abs() < 1e-15);
            }
            assert_eq!(jet.dxp.max_abs(), 0.0);
        }
    }

    #[test]
    fn phase_config_round_trip() {
        let cfg: PhaseConfig = toml::from_str(
            r#"
            variant = "shrinker_expander"
            s1 = 0.5
            s2 = 1.0
            "#,
        )
        .unwrap();
        let m: PhaseModel<f64> = cfg.build(2).unwrap();
        assert!(matches!(m, PhaseModel::ShrinkerExpander { .. }));

        let cfg: PhaseConfig = toml::from_str(
            r#"
            variant = "translator"
            gamma1 = 0.0
            gamma2 = [1.0, 0.0]
            gamma3 = [0.0, 1.0]
            "#,
        )
        .unwrap();
        assert!(cfg.build::<f64>(3).is_err(), "dimension mismatch");
        assert!(cfg.build::<f64>(2).is_ok());
    }

    #[test]
    fn empty_region_rejected() {
        let mut s = spec(2);
        s.samples = 0;
        assert!(structure_bounds(&PhaseModel::constant(0.0, 2), &s).is_err());
    }
}
