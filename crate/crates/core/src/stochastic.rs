//! Seeded randomness: Brownian increments, diffusion models, minibatch
//! gradients, and the step-size / penalty-weight schedules.
//!
//! Every replicate draws from its own ChaCha8 stream, selected by
//! `(master_seed, replicate_index)`; Gaussians use the ziggurat sampler of
//! `rand_distr::StandardNormal`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::penalty::{PenaltyFn, PenaltyKind};
use crate::series::{classify_tail, TailDecay};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StochasticError {
    #[error("negative time increment {0}")]
    NegativeDt(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("minibatch: {0}")]
    Batch(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("step rule violated at n={n}: λβ = {product:.6e} is not < 2/L = {bound:.6e}")]
    StepRule { n: u64, product: f64, bound: f64 },
}

pub type Rng64 = ChaCha8Rng;

/// Independent, reproducible stream for one replicate.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> Rng64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

pub fn brownian_increment<R: Rng + ?Sized>(rng: &mut R, dt: f64, m: usize) -> Result<Vec<f64>, StochasticError> {
    let mut out = vec![0.0; m];
    brownian_increment_into(rng, dt, &mut out)?;
    Ok(out)
}

pub fn brownian_increment_into<R: Rng + ?Sized>(rng: &mut R, dt: f64, out: &mut [f64]) -> Result<(), StochasticError> {
    if dt < 0.0 || dt.is_nan() {
        return Err(StochasticError::NegativeDt(dt));
    }
    let sd = dt.sqrt();
    for o in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *o = sd * z;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum NoiseRegime {
    Off,
    /// σ(t,x) = scale·I (isotropic-constant).
    Ubv { scale: f64 },
    /// σ(t,x) = σ₀(1+t)^{−q}·I (isotropic-decaying), q > ½.
    Asv { sigma0: f64, q: f64 },
}

/// State-independent isotropic diffusion, so its Lipschitz modulus ℓ(t) is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub regime: NoiseRegime,
    pub dim: usize,
}

impl NoiseModel {
    pub fn off(dim: usize) -> Self {
        Self { regime: NoiseRegime::Off, dim }
    }

    pub fn ubv(scale: f64, dim: usize) -> Result<Self, StochasticError> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(StochasticError::Noise(format!("UBV scale must be finite and ≥ 0, got {scale}")));
        }
        Ok(Self { regime: NoiseRegime::Ubv { scale }, dim })
    }

    pub fn asv(sigma0: f64, q: f64, dim: usize) -> Result<Self, StochasticError> {
        if !(sigma0 >= 0.0 && sigma0.is_finite()) {
            return Err(StochasticError::Noise(format!("ASV σ₀ must be finite and ≥ 0, got {sigma0}")));
        }
        if !(q > 0.5) {
            return Err(StochasticError::Noise(format!(
                "ASV envelope (1+t)^(-q) needs q > 1/2 for ∫Σ² < ∞, got q={q}"
            )));
        }
        Ok(Self { regime: NoiseRegime::Asv { sigma0, q }, dim })
    }

    pub fn validate(&self) -> Result<(), StochasticError> {
        match self.regime {
            NoiseRegime::Off => Ok(()),
            NoiseRegime::Ubv { scale } => Self::ubv(scale, self.dim).map(|_| ()),
            NoiseRegime::Asv { sigma0, q } => Self::asv(sigma0, q, self.dim).map(|_| ()),
        }
    }

    pub fn is_off(&self) -> bool {
        matches!(self.regime, NoiseRegime::Off)
    }

    /// Per-coordinate multiplier s(t) so that σ(t,x) = s(t)·I.
    pub fn scale_at(&self, t: f64) -> f64 {
        match self.regime {
            NoiseRegime::Off => 0.0,
            NoiseRegime::Ubv { scale } => scale,
            NoiseRegime::Asv { sigma0, q } => sigma0 * (1.0 + t).powf(-q),
        }
    }

    /// Σ(t) = sup_x ‖σ(t,x)‖_F.
    pub fn envelope(&self, t: f64) -> f64 {
        self.scale_at(t) * (self.dim as f64).sqrt()
    }

    /// UBV bound σ* on the Frobenius norm (the envelope at t = 0 for ASV).
    pub fn sigma_star(&self) -> f64 {
        self.envelope(0.0)
    }

    pub fn lipschitz_modulus(&self) -> f64 {
        0.0
    }
}

/// σ(t,x)·dW.
pub fn diffusion_apply(model: &NoiseModel, t: f64, x: &[f64], dw: &[f64]) -> Result<Vec<f64>, StochasticError> {
    if x.len() != model.dim || dw.len() != model.dim {
        return Err(StochasticError::Dimension { expected: model.dim, got: if x.len() != model.dim { x.len() } else { dw.len() } });
    }
    let s = model.scale_at(t);
    Ok(dw.iter().map(|w| s * w).collect())
}

/// (m/|B|)·Σ_{j∈B} a_j (Ax − y)_j, unbiased for ∇Ψ under uniform batches.
pub fn minibatch_gradient(psi: &PenaltyFn, batch: &[usize], x: &[f64]) -> Result<Vec<f64>, StochasticError> {
    if x.len() != psi.dim() {
        return Err(StochasticError::Dimension { expected: psi.dim(), got: x.len() });
    }
    let mut out = vec![0.0; psi.dim()];
    minibatch_gradient_into(psi, batch, x, &mut out)?;
    Ok(out)
}

pub fn minibatch_gradient_into(psi: &PenaltyFn, batch: &[usize], x: &[f64], out: &mut [f64]) -> Result<(), StochasticError> {
    let PenaltyKind::LeastSquares(sys) = &psi.kind else {
        return Err(StochasticError::Batch("minibatching needs a least-squares penalty".into()));
    };
    if batch.is_empty() {
        return Err(StochasticError::Batch("empty batch".into()));
    }
    let m = sys.rhs.len();
    if let Some(&bad) = batch.iter().find(|&&j| j >= m) {
        return Err(StochasticError::Batch(format!("row index {bad} out of range for {m} rows")));
    }
    let w = m as f64 / batch.len() as f64;
    out.iter_mut().for_each(|o| *o = 0.0);
    for &j in batch {
        let r = sys.map.row_dot(j, x) - sys.rhs[j];
        sys.map.row_axpy(j, w * r, out);
    }
    Ok(())
}

/// Draws `b` distinct rows uniformly by a partial Fisher–Yates shuffle of a
/// persistent permutation buffer; the batch is `perm[..b]`.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, perm: &mut [usize], b: usize) {
    let m = perm.len();
    for i in 0..b.min(m) {
        let j = rng.random_range(i..m);
        perm.swap(i, j);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BetaForm {
    /// βₙ = scale·(n+n₀)^a / L, β(t) = scale·(1+t)^a / L.
    Power { scale: f64, a: f64, n0: f64 },
    /// βₙ = β(t) = value.
    Constant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum LambdaForm {
    /// λₙβₙ = c / L.
    ProductConst { c: f64 },
    /// λₙ = value.
    Constant { value: f64 },
}

/// Step sizes λₙ and penalty weights βₙ. `l_scale` is the Lipschitz value
/// used to scale the parametric forms; the step rule λβ < 2/L is always
/// judged against `l_rule`, the true gradient Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub beta: BetaForm,
    pub lambda: LambdaForm,
    pub l_scale: f64,
    pub l_rule: f64,
}

impl Schedule {
    /// βₙ = (n+10)^{0.75}/L, λₙβₙ = 1/L.
    pub fn paper(l: f64) -> Self {
        Self::power_product(1.0, 0.75, 10.0, 1.0, l)
    }

    pub fn power_product(scale: f64, a: f64, n0: f64, c: f64, l: f64) -> Self {
        Self { beta: BetaForm::Power { scale, a, n0 }, lambda: LambdaForm::ProductConst { c }, l_scale: l, l_rule: l }
    }

    pub fn beta_n(&self, n: u64) -> f64 {
        match self.beta {
            BetaForm::Power { scale, a, n0 } => scale * (n as f64 + n0).powf(a) / self.l_scale,
            BetaForm::Constant { value } => value,
        }
    }

    /// (λₙ, βₙ).
    pub fn eval(&self, n: u64) -> (f64, f64) {
        let beta = self.beta_n(n);
        let lambda = match self.lambda {
            LambdaForm::ProductConst { c } => c / (self.l_scale * beta),
            LambdaForm::Constant { value } => value,
        };
        (lambda, beta)
    }

    /// Continuous β(t) for partition-driven paths.
    pub fn beta_t(&self, t: f64) -> f64 {
        match self.beta {
            BetaForm::Power { scale, a, .. } => scale * (1.0 + t).powf(a) / self.l_scale,
            BetaForm::Constant { value } => value,
        }
    }

    /// Checks positivity, monotone βₙ and, when `enforce_step_rule`, λₙβₙ < 2/L
    /// for n ≤ horizon. For the parametric forms λβ is monotone in n, so the
    /// two endpoints bound it.
    pub fn validate(&self, horizon: u64, enforce_step_rule: bool) -> Result<(), Vec<StochasticError>> {
        let mut errs = Vec::new();
        if !(self.l_scale > 0.0 && self.l_scale.is_finite()) || !(self.l_rule > 0.0 && self.l_rule.is_finite()) {
            errs.push(StochasticError::Schedule("Lipschitz constants must be positive and finite".into()));
            return Err(errs);
        }
        match self.beta {
            BetaForm::Power { scale, a, n0 } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    errs.push(StochasticError::Schedule(format!("beta scale must be > 0, got {scale}")));
                }
                if !(a >= 0.0) || !a.is_finite() {
                    errs.push(StochasticError::Schedule(format!("beta exponent a must be ≥ 0 for nondecreasing βₙ, got {a}")));
                }
                if !(n0 > 0.0) || !n0.is_finite() {
                    errs.push(StochasticError::Schedule(format!("beta offset n0 must be > 0, got {n0}")));
                }
            }
            BetaForm::Constant { value } => {
                if !(value > 0.0) || !value.is_finite() {
                    errs.push(StochasticError::Schedule(format!("beta must be > 0, got {value}")));
                }
            }
        }
        match self.lambda {
            LambdaForm::ProductConst { c } if !(c > 0.0) || !c.is_finite() => {
                errs.push(StochasticError::Schedule(format!("λβ constant c must be > 0, got {c}")));
            }
            LambdaForm::Constant { value } if !(value > 0.0) || !value.is_finite() => {
                errs.push(StochasticError::Schedule(format!("λ must be > 0, got {value}")));
            }
            _ => {}
        }
        if errs.is_empty() && enforce_step_rule {
            let bound = 2.0 / self.l_rule;
            for n in [0, horizon] {
                let (l, b) = self.eval(n);
                if !(l * b < bound) {
                    errs.push(StochasticError::StepRule { n, product: l * b, bound });
                    break;
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

/// Heuristic check of Σ λₙ² Σ(tₙ)² < ∞ along the schedule.
pub fn check_noise_summability(schedule: &Schedule, noise: &NoiseModel, horizon: u64) -> TailDecay {
    let mut t = 0.0;
    let mut terms = Vec::with_capacity(horizon as usize);
    for n in 0..horizon {
        let (lambda, _) = schedule.eval(n);
        let s = noise.envelope(t);
        terms.push(lambda * lambda * s * s);
        t += lambda;
    }
    classify_tail(&terms)
}

/// Mean and unbiased variance, for moment checks.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
