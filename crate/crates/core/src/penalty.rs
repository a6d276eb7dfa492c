//! Penalty functions Ψ, the constraint sets C = argmin Ψ they encode, the
//! conjugate gap h_C = Ψ* − σ_C, and the summability / growth checks built on them.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, SharedSystem};
use crate::series::{classify_tail, fit_line, Verdict};
use crate::stochastic::Schedule;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PenaltyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid penalty parameters: {0}")]
    Parameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

fn check_dim(expected: usize, got: usize) -> Result<(), PenaltyError> {
    if expected == got {
        Ok(())
    } else {
        Err(PenaltyError::Dimension { expected, got })
    }
}

/// 0·∞ is taken as 0 so unbounded box faces contribute nothing when p_i = 0.
fn bound_product(p: f64, bound: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * bound
    }
}

/// The feasible set C.
#[derive(Debug, Clone)]
pub enum ConstraintSpec {
    /// C = ℝ^d.
    Whole { dim: usize },
    /// C = {x : A x = y}, assumed consistent.
    Affine(SharedSystem),
    /// C = {x : x_i = 1 for i < pinned}.
    Pin { dim: usize, pinned: usize },
    /// C = [lower, upper] coordinatewise; infinite bounds allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl ConstraintSpec {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, PenaltyError> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(PenaltyError::Parameter("box needs lower ≤ upper".into()));
        }
        Ok(ConstraintSpec::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSpec::Whole { dim } | ConstraintSpec::Pin { dim, .. } => *dim,
            ConstraintSpec::Affine(sys) => sys.dim(),
            ConstraintSpec::Box { lower, .. } => lower.len(),
        }
    }

    /// A nonnegative violation measure that vanishes exactly on C
    /// (half squared distance, or half squared residual for affine sets).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintSpec::Whole { .. } => 0.0,
            ConstraintSpec::Affine(sys) => 0.5 * linalg::norm_sq(&sys.residual(x)),
            ConstraintSpec::Pin { pinned, .. } => 0.5 * x[..*pinned].iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>(),
            ConstraintSpec::Box { .. } => 0.5 * linalg::dist_sq(x, &self.project(x)),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim() && self.violation(x) <= tol
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConstraintSpec::Whole { .. } => x.to_vec(),
            ConstraintSpec::Affine(sys) => sys.project(x),
            ConstraintSpec::Pin { pinned, .. } => {
                let mut p = x.to_vec();
                p[..*pinned].iter_mut().for_each(|v| *v = 1.0);
                p
            }
            ConstraintSpec::Box { lower, upper } => {
                x.iter().zip(lower.iter().zip(upper)).map(|(v, (l, u))| v.clamp(*l, *u)).collect()
            }
        }
    }

    pub fn distance(&self, x: &[f64]) -> f64 {
        linalg::dist(x, &self.project(x))
    }

    /// Support function σ_C(p) = sup_{x∈C} ⟨p, x⟩, possibly +∞.
    pub fn support(&self, p: &[f64]) -> f64 {
        match self {
            ConstraintSpec::Whole { .. } => {
                if p.iter().all(|v| *v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ConstraintSpec::Affine(sys) => {
                let (w, res) = sys.pinv().solve_transpose(p);
                if res >= 1e-8 * (1.0 + linalg::norm(p)) {
                    f64::INFINITY
                } else {
                    linalg::dot(&w, &sys.rhs)
                }
            }
            ConstraintSpec::Pin { pinned, .. } => {
                if p[*pinned..].iter().any(|v| *v != 0.0) {
                    f64::INFINITY
                } else {
                    p[..*pinned].iter().sum()
                }
            }
            ConstraintSpec::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(pi, (l, u))| bound_product(*pi, *u).max(bound_product(*pi, *l)))
                .sum(),
        }
    }

    /// Draw an element of the normal cone N_C(y). Only boxes get nonzero
    /// elements (their cone is analytic); other sets return 0, which is always valid.
    pub fn sample_normal<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; y.len()];
        if let ConstraintSpec::Box { lower, upper } = self {
            for i in 0..y.len() {
                let at_lo = (y[i] - lower[i]).abs() <= 1e-12 * (1.0 + lower[i].abs());
                let at_hi = (y[i] - upper[i]).abs() <= 1e-12 * (1.0 + upper[i].abs());
                let u: f64 = rng.random();
                p[i] = match (at_lo, at_hi) {
                    (true, true) => 2.0 * u - 1.0,
                    (true, false) => -u,
                    (false, true) => u,
                    _ => 0.0,
                };
            }
        }
        p
    }

    /// A random direction p with p ∈ N_C(x) for some x ∈ C: Gaussian on the
    /// pinned coordinates, Aᵀw for affine sets, a sampled cone element at a
    /// boundary point for boxes, 0 for the whole space.
    pub fn sample_cone_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        match self {
            ConstraintSpec::Whole { .. } => vec![0.0; d],
            ConstraintSpec::Pin { pinned, .. } => {
                let mut p = gaussian_vec(rng, d, 1.0);
                p[*pinned..].iter_mut().for_each(|v| *v = 0.0);
                p
            }
            ConstraintSpec::Affine(sys) => sys.map.apply_transpose(&gaussian_vec(rng, sys.map.rows(), 1.0)),
            ConstraintSpec::Box { .. } => {
                // projecting a far-away point lands on a face
                let far = gaussian_vec(rng, d, 1e6);
                let y = self.project(&far);
                self.sample_normal(&y, rng)
            }
        }
    }

    /// Analytic test of p ∈ N_C(y) (y must lie in C).
    pub fn normal_contains(&self, y: &[f64], p: &[f64], tol: f64) -> bool {
        if !self.contains(y, tol * tol) {
            return false;
        }
        match self {
            ConstraintSpec::Whole { .. } => p.iter().all(|v| v.abs() <= tol),
            ConstraintSpec::Affine(sys) => sys.pinv().solve_transpose(p).1 <= tol * (1.0 + linalg::norm(p)),
            ConstraintSpec::Pin { pinned, .. } => p[*pinned..].iter().all(|v| v.abs() <= tol),
            ConstraintSpec::Box { lower, upper } => (0..y.len()).all(|i| {
                let at_lo = y[i] <= lower[i] + tol;
                let at_hi = y[i] >= upper[i] - tol;
                match (at_lo, at_hi) {
                    (true, true) => true,
                    (true, false) => p[i] <= tol,
                    (false, true) => p[i] >= -tol,
                    _ => p[i].abs() <= tol,
                }
            }),
        }
    }

    /// Checks ⟨p, z − y⟩ ≤ tol·(1+‖z−y‖) for every probe z ∈ C.
    pub fn normal_inequality_holds(&self, y: &[f64], p: &[f64], probes: &[Vec<f64>], tol: f64) -> bool {
        probes.iter().all(|z| {
            let diff = linalg::sub(z, y);
            linalg::dot(p, &diff) <= tol * (1.0 + linalg::norm(&diff) * (1.0 + linalg::norm(p)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzChoice {
    #[default]
    Spectral,
    Frobenius,
}

#[derive(Debug, Clone)]
pub enum PenaltyKind {
    /// ½‖Ax − y‖²
    LeastSquares(SharedSystem),
    /// ½(x₁−1)² + ½Σ_{j=2}^{J}(x_{j−1}−x_j)², other coordinates free.
    ChainedQuadratic { pinned: usize },
    /// ½ dist(x, [lower, upper])²
    HalfSquaredDistanceToBox { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct PenaltyFn {
    pub kind: PenaltyKind,
    dim: usize,
    pub l_spectral: f64,
    pub l_frobenius: Option<f64>,
}

/// Value of a conjugate-type quantity that may be +∞ outside dom Ψ*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugateValue {
    pub value: f64,
    pub in_domain: bool,
}

impl ConjugateValue {
    fn finite(value: f64) -> Self {
        Self { value, in_domain: true }
    }

    fn outside() -> Self {
        Self { value: f64::INFINITY, in_domain: false }
    }
}

const POWER_TOL: f64 = 1e-8;

impl PenaltyFn {
    pub fn least_squares(sys: SharedSystem) -> Self {
        let dim = sys.dim();
        let l_spectral = sys.map.spectral_norm_sq(POWER_TOL, 100_000);
        let l_frobenius = Some(sys.map.frobenius_norm());
        Self { kind: PenaltyKind::LeastSquares(sys), dim, l_spectral, l_frobenius }
    }

    pub fn chained_quadratic(dim: usize, pinned: usize) -> Result<Self, PenaltyError> {
        if pinned == 0 || pinned > dim {
            return Err(PenaltyError::Parameter(format!("need 1 ≤ J ≤ d, got J={pinned}, d={dim}")));
        }
        // Hessian DᵀD has spectrum in (0, 4) by Gershgorin.
        Ok(Self { kind: PenaltyKind::ChainedQuadratic { pinned }, dim, l_spectral: 4.0, l_frobenius: None })
    }

    pub fn half_squared_distance_to_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, PenaltyError> {
        let ConstraintSpec::Box { lower, upper } = ConstraintSpec::boxed(lower, upper)? else { unreachable!() };
        let dim = lower.len();
        Ok(Self { kind: PenaltyKind::HalfSquaredDistanceToBox { lower, upper }, dim, l_spectral: 1.0, l_frobenius: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gradient Lipschitz constant used for schedule scaling. The Frobenius
    /// choice only exists for least squares; other kinds fall back to the spectral value.
    pub fn lipschitz(&self, choice: LipschitzChoice) -> f64 {
        match choice {
            LipschitzChoice::Spectral => self.l_spectral,
            LipschitzChoice::Frobenius => self.l_frobenius.unwrap_or(self.l_spectral),
        }
    }

    /// The set C = argmin Ψ = Ψ⁻¹(0).
    pub fn zero_set(&self) -> ConstraintSpec {
        match &self.kind {
            PenaltyKind::LeastSquares(sys) => ConstraintSpec::Affine(sys.clone()),
            PenaltyKind::ChainedQuadratic { pinned } => ConstraintSpec::Pin { dim: self.dim, pinned: *pinned },
            PenaltyKind::HalfSquaredDistanceToBox { lower, upper } => {
                ConstraintSpec::Box { lower: lower.clone(), upper: upper.clone() }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, PenaltyError> {
        check_dim(self.dim, x.len())?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            PenaltyKind::LeastSquares(sys) => 0.5 * linalg::norm_sq(&sys.residual(x)),
            PenaltyKind::ChainedQuadratic { pinned } => {
                let mut s = (x[0] - 1.0) * (x[0] - 1.0);
                for j in 1..*pinned {
                    s += (x[j - 1] - x[j]) * (x[j - 1] - x[j]);
                }
                0.5 * s
            }
            PenaltyKind::HalfSquaredDistanceToBox { lower, upper } => {
                0.5 * x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(v, (l, u))| {
                        let d = v - v.clamp(*l, *u);
                        d * d
                    })
                    .sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, PenaltyError> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        let mut work = Vec::new();
        self.gradient_into(x, &mut out, &mut work);
        Ok(out)
    }

    /// Allocation-free gradient once `work` has grown to the row count.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64], work: &mut Vec<f64>) {
        match &self.kind {
            PenaltyKind::LeastSquares(sys) => {
                work.resize(sys.rhs.len(), 0.0);
                sys.map.apply_into(x, work);
                for (r, y) in work.iter_mut().zip(&sys.rhs) {
                    *r -= y;
                }
                sys.map.apply_transpose_into(work, out);
            }
            PenaltyKind::ChainedQuadratic { pinned } => {
                let j = *pinned;
                out.iter_mut().for_each(|o| *o = 0.0);
                // residuals r_1 = x_1 − 1, r_k = x_{k−1} − x_k; gradient = Dᵀ r
                out[0] += x[0] - 1.0;
                for k in 1..j {
                    let r = x[k - 1] - x[k];
                    out[k - 1] += r;
                    out[k] -= r;
                }
            }
            PenaltyKind::HalfSquaredDistanceToBox { lower, upper } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = x[i] - x[i].clamp(lower[i], upper[i]);
                }
            }
        }
    }

    /// Solves Dᵀw = q for the chained bidiagonal D (row 1 = e₁, row k = e_{k−1} − e_k).
    fn chained_dual(q: &[f64]) -> Vec<f64> {
        let j = q.len();
        let mut w = vec![0.0; j];
        if j == 1 {
            w[0] = q[0];
            return w;
        }
        w[j - 1] = -q[j - 1];
        for k in (1..j - 1).rev() {
            w[k] = w[k + 1] - q[k];
        }
        w[0] = q[0] - w[1];
        w
    }

    fn free_part_vanishes(p: &[f64], pinned: usize) -> bool {
        let scale = 1.0 + linalg::norm(p);
        p[pinned..].iter().all(|v| v.abs() <= 1e-12 * scale)
    }

    /// Fenchel conjugate Ψ*(p).
    pub fn conjugate(&self, p: &[f64]) -> Result<ConjugateValue, PenaltyError> {
        check_dim(self.dim, p.len())?;
        Ok(match &self.kind {
            PenaltyKind::LeastSquares(sys) => {
                let (w, res) = sys.pinv().solve_transpose(p);
                if res >= 1e-8 * (1.0 + linalg::norm(p)) {
                    ConjugateValue::outside()
                } else {
                    ConjugateValue::finite(linalg::dot(&w, &sys.rhs) + 0.5 * linalg::norm_sq(&w))
                }
            }
            PenaltyKind::ChainedQuadratic { pinned } => {
                if !Self::free_part_vanishes(p, *pinned) {
                    ConjugateValue::outside()
                } else {
                    let w = Self::chained_dual(&p[..*pinned]);
                    ConjugateValue::finite(w[0] + 0.5 * linalg::norm_sq(&w))
                }
            }
            PenaltyKind::HalfSquaredDistanceToBox { .. } => {
                let s = self.zero_set().support(p);
                if s.is_finite() {
                    ConjugateValue::finite(0.5 * linalg::norm_sq(p) + s)
                } else {
                    ConjugateValue::outside()
                }
            }
        })
    }

    fn is_paired_with(&self, c: &ConstraintSpec) -> bool {
        match (&self.kind, c) {
            (PenaltyKind::LeastSquares(a), ConstraintSpec::Affine(b)) => std::sync::Arc::ptr_eq(a, b),
            (PenaltyKind::ChainedQuadratic { pinned }, ConstraintSpec::Pin { dim, pinned: q }) => {
                pinned == q && *dim == self.dim
            }
            (PenaltyKind::HalfSquaredDistanceToBox { lower, upper }, ConstraintSpec::Box { lower: l, upper: u }) => {
                lower == l && upper == u
            }
            _ => false,
        }
    }

    /// h_C(p) = Ψ*(p) − σ_C(p). Closed forms avoid cancellation when C is Ψ's own zero set.
    pub fn conjugate_gap(&self, c: &ConstraintSpec, p: &[f64]) -> Result<ConjugateValue, PenaltyError> {
        check_dim(self.dim, p.len())?;
        check_dim(self.dim, c.dim())?;
        if self.is_paired_with(c) {
            return Ok(match &self.kind {
                PenaltyKind::LeastSquares(sys) => {
                    let (w, res) = sys.pinv().solve_transpose(p);
                    if res >= 1e-8 * (1.0 + linalg::norm(p)) {
                        ConjugateValue::outside()
                    } else {
                        ConjugateValue::finite(0.5 * linalg::norm_sq(&w))
                    }
                }
                PenaltyKind::ChainedQuadratic { pinned } => {
                    if !Self::free_part_vanishes(p, *pinned) {
                        ConjugateValue::outside()
                    } else {
                        ConjugateValue::finite(0.5 * linalg::norm_sq(&Self::chained_dual(&p[..*pinned])))
                    }
                }
                PenaltyKind::HalfSquaredDistanceToBox { .. } => {
                    if c.support(p).is_finite() {
                        ConjugateValue::finite(0.5 * linalg::norm_sq(p))
                    } else {
                        ConjugateValue::outside()
                    }
                }
            });
        }
        let conj = self.conjugate(p)?;
        if !conj.in_domain {
            return Ok(conj);
        }
        let s = c.support(p);
        if !s.is_finite() {
            return Err(PenaltyError::Precondition(
                "σ_C(p) is infinite while Ψ*(p) is finite; C is not contained in argmin Ψ".into(),
            ));
        }
        Ok(ConjugateValue::finite(conj.value - s))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcSampleReport {
    /// (n, S_n) at log-spaced n plus the horizon.
    pub partial_sums: Vec<(u64, f64)>,
    pub final_sum: f64,
    pub decay_exponent: Option<f64>,
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AcReport {
    pub horizon: u64,
    pub samples: Vec<AcSampleReport>,
    pub verdict: Verdict,
}

/// Finite-horizon heuristic for Σ λₙβₙ h_C(p/βₙ) < ∞.
pub fn check_ac_condition(
    schedule: &Schedule,
    psi: &PenaltyFn,
    c: &ConstraintSpec,
    p_samples: &[Vec<f64>],
    horizon: u64,
) -> Result<AcReport, PenaltyError> {
    if horizon < 1000 {
        return Err(PenaltyError::Precondition(format!("horizon must be ≥ 1000, got {horizon}")));
    }
    if p_samples.is_empty() {
        return Err(PenaltyError::Precondition("need at least one p sample".into()));
    }
    let mut samples = Vec::with_capacity(p_samples.len());
    let mut overall = Verdict::Satisfied;
    let mut scratch = vec![0.0; psi.dim()];
    for p in p_samples {
        check_dim(psi.dim(), p.len())?;
        let mut terms = Vec::with_capacity(horizon as usize);
        let mut partial_sums = Vec::new();
        let mut next_mark = 1u64;
        let mut sum = 0.0;
        let mut diagnostic = None;
        for n in 0..horizon {
            let (lambda, beta) = schedule.eval(n);
            for (s, pi) in scratch.iter_mut().zip(p) {
                *s = pi / beta;
            }
            let h = psi.conjugate_gap(c, &scratch)?;
            if !h.in_domain {
                diagnostic = Some(format!("h_C(p/β) is infinite at n={n}: p lies outside dom Ψ*"));
                terms.push(f64::INFINITY);
                sum = f64::INFINITY;
                partial_sums.push((n + 1, sum));
                break;
            }
            let term = lambda * beta * h.value.max(0.0);
            terms.push(term);
            sum += term;
            if n + 1 >= next_mark || n + 1 == horizon {
                partial_sums.push((n + 1, sum));
                next_mark = ((next_mark as f64) * 1.1).ceil().max((next_mark + 1) as f64) as u64;
            }
        }
        let tail = classify_tail(&terms);
        overall = overall.worst(tail.verdict);
        samples.push(AcSampleReport {
            partial_sums,
            final_sum: sum,
            decay_exponent: tail.exponent,
            verdict: tail.verdict,
            diagnostic,
        });
    }
    Ok(AcReport { horizon, samples, verdict: overall })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub tau: f64,
    pub rho: f64,
    pub r_squared: f64,
    pub reliable: bool,
    pub n_points: usize,
}

/// Regresses log Ψ(x) on log dist(x, C) over points at log-uniform distances
/// in [1e−4, 1e2] from random points of C. Ψ ≈ (τ/ρ)·dist^ρ.
pub fn fit_holder_growth<R: Rng + ?Sized>(
    psi: &PenaltyFn,
    c: &ConstraintSpec,
    samples: usize,
    rng: &mut R,
) -> Result<HolderFit, PenaltyError> {
    check_dim(psi.dim(), c.dim())?;
    if matches!(c, ConstraintSpec::Whole { .. }) {
        return Err(PenaltyError::Unsupported("C = ℝ^d has no exterior to fit growth on".into()));
    }
    let d = psi.dim();
    let (mut xs, mut ys) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for _ in 0..samples {
        let z: Vec<f64> = (0..d).map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let base = c.project(&z);
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nu = linalg::norm(&u);
        u.iter_mut().for_each(|v| *v /= nu);
        let r = 10f64.powf(rng.random_range(-4.0..2.0));
        let x = linalg::add(&base, &linalg::scale(&u, r));
        let dist = c.distance(&x);
        let val = psi.eval_unchecked(&x);
        if dist > 1e-12 && val > 0.0 {
            xs.push(dist.ln());
            ys.push(val.ln());
        }
    }
    if xs.len() < 10 {
        return Err(PenaltyError::Precondition(format!("only {} usable growth samples", xs.len())));
    }
    let fit = fit_line(&xs, &ys).ok_or_else(|| PenaltyError::Precondition("degenerate distance sample".into()))?;
    Ok(HolderFit {
        tau: fit.slope * fit.intercept.exp(),
        rho: fit.slope,
        r_squared: fit.r_squared,
        reliable: fit.r_squared >= 0.9,
        n_points: xs.len(),
    })
}

/// Random standard-normal probe points used by graph and normal-cone checks.
pub(crate) fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{AffineSystem, LinearMap};
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn identity_ls(y: Vec<f64>) -> PenaltyFn {
        let d = y.len();
        PenaltyFn::least_squares(Arc::new(AffineSystem::new(LinearMap::Dense(DMatrix::identity(d, d)), y)))
    }

    #[test]
    fn eval_examples() {
        let q = PenaltyFn::chained_quadratic(3, 2).unwrap();
        assert_eq!(q.eval(&[1.0, 1.0, 7.0]).unwrap(), 0.0);
        assert_eq!(identity_ls(vec![1.0, 0.0]).eval(&[0.0, 0.0]).unwrap(), 0.5);
        let q3 = PenaltyFn::chained_quadratic(3, 3).unwrap();
        assert_eq!(q3.eval(&[0.0, 0.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(q3.eval(&[0.0]), Err(PenaltyError::Dimension { .. })));
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(identity_ls(vec![0.0, 0.0]).gradient(&[3.0, -2.0]).unwrap(), vec![3.0, -2.0]);
        let q = PenaltyFn::chained_quadratic(3, 2).unwrap();
        assert_eq!(q.gradient(&[2.0, 0.0, 5.0]).unwrap(), vec![3.0, -2.0, 0.0]);
        assert_eq!(q.gradient(&[1.0, 1.0, -4.0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn conjugate_gap_examples() {
        let b = PenaltyFn::half_squared_distance_to_box(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let c = b.zero_set();
        let h = b.conjugate_gap(&c, &[3.0, -4.0]).unwrap();
        assert_eq!(h.value, 12.5);
        assert_eq!(b.conjugate_gap(&c, &[0.0, 0.0]).unwrap().value, 0.0);
        let ls = identity_ls(vec![0.0, 0.0]);
        let h = ls.conjugate_gap(&ls.zero_set(), &[1.0, 1.0]).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
        // generic path with a separately described constraint agrees
        let h2 = ls.conjugate_gap(&ConstraintSpec::boxed(vec![0.0; 2], vec![0.0; 2]).unwrap(), &[1.0, 1.0]).unwrap();
        assert!((h2.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn conjugate_outside_domain_is_flagged() {
        let sys = Arc::new(AffineSystem::new(LinearMap::Dense(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])), vec![2.0]));
        let ls = PenaltyFn::least_squares(sys);
        let h = ls.conjugate_gap(&ls.zero_set(), &[1.0, -1.0]).unwrap();
        assert!(!h.in_domain && h.value.is_infinite());
        let q = PenaltyFn::chained_quadratic(3, 2).unwrap();
        assert!(!q.conjugate_gap(&q.zero_set(), &[0.0, 0.0, 1.0]).unwrap().in_domain);
    }

    #[test]
    fn chained_conjugate_matches_brute_force() {
        // Ψ*(p) = sup_x ⟨p,x⟩ − Ψ(x); maximizer solves ∇Ψ(x) = p.
        let q = PenaltyFn::chained_quadratic(4, 3).unwrap();
        let p = [0.7, -0.2, 0.4, 0.0];
        let conj = q.conjugate(&p).unwrap().value;
        // Hessian DᵀD is invertible on the pinned block; solve by Newton (one step, quadratic).
        let h = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let g0 = q.gradient(&[0.0; 4]).unwrap();
        let rhs = nalgebra::DVector::from_vec(vec![p[0] - g0[0], p[1] - g0[1], p[2] - g0[2]]);
        let xs = h.lu().solve(&rhs).unwrap();
        let x = [xs[0], xs[1], xs[2], 0.0];
        let val = linalg::dot(&p, &x) - q.eval(&x).unwrap();
        assert!((conj - val).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_choice() {
        let ls = identity_ls(vec![0.0; 3]);
        assert!((ls.lipschitz(LipschitzChoice::Spectral) - 1.0).abs() < 1e-8);
        assert!((ls.lipschitz(LipschitzChoice::Frobenius) - 3f64.sqrt()).abs() < 1e-12);
        let q = PenaltyFn::chained_quadratic(3, 2).unwrap();
        assert_eq!(q.lipschitz(LipschitzChoice::Frobenius), 4.0);
    }

    #[test]
    fn holder_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = PenaltyFn::half_squared_distance_to_box(vec![-1.0; 4], vec![1.0; 4]).unwrap();
        let f = fit_holder_growth(&b, &b.zero_set(), 400, &mut rng).unwrap();
        assert!((f.rho - 2.0).abs() < 0.05 && (f.tau - 1.0).abs() < 0.05 && f.reliable);
        let q = PenaltyFn::chained_quadratic(3, 2).unwrap();
        let f = fit_holder_growth(&q, &q.zero_set(), 400, &mut rng).unwrap();
        assert!((f.rho - 2.0).abs() < 0.1 && f.reliable);
        assert!(matches!(
            fit_holder_growth(&q, &ConstraintSpec::Whole { dim: 3 }, 10, &mut rng),
            Err(PenaltyError::Unsupported(_))
        ));
    }

    #[test]
    fn support_functions() {
        let bx = ConstraintSpec::boxed(vec![0.0, f64::NEG_INFINITY], vec![1.0, 2.0]).unwrap();
        assert_eq!(bx.support(&[1.0, 0.0]), 1.0);
        assert_eq!(bx.support(&[-1.0, 1.0]), 2.0);
        assert!(bx.support(&[0.0, -1.0]).is_infinite());
        let pin = ConstraintSpec::Pin { dim: 3, pinned: 2 };
        assert_eq!(pin.support(&[2.0, -0.5, 0.0]), 1.5);
        assert!(pin.support(&[0.0, 0.0, 1.0]).is_infinite());
    }
}
