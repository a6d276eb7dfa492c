//! Convergence measurements: restricted merit gap, objective gap, log-log rate
//! fits and the concentration comparison against exp(−ε²/4).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::operators::GraphSampleSet;
use crate::penalty::ConstraintSpec;
use crate::problems::ProblemInstance;
use crate::series::fit_line;
use crate::solver::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("no graph samples supplied")]
    EmptySamples,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("missing data: {0}")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// max over samples of ⟨v, x − y⟩, clipped at 0 when x lies in the ball.
    pub value: f64,
    pub raw_max: f64,
    pub n_samples: usize,
    pub delta: f64,
    pub anchor: Vec<f64>,
}

/// Sample-based lower estimate of the restricted merit function
/// sup{⟨v, x − y⟩ : y ∈ B_δ, v ∈ (A + N_C)(y)}.
pub fn restricted_gap(x: &[f64], samples: &GraphSampleSet) -> Result<GapEstimate, DiagnosticsError> {
    if samples.samples.is_empty() {
        return Err(DiagnosticsError::EmptySamples);
    }
    if x.len() != samples.anchor.len() {
        return Err(DiagnosticsError::Dimension { expected: samples.anchor.len(), got: x.len() });
    }
    let mut raw = f64::NEG_INFINITY;
    for s in &samples.samples {
        let mut acc = 0.0;
        for ((v, xi), yi) in s.value.iter().zip(x).zip(&s.point) {
            acc += v * (xi - yi);
        }
        raw = raw.max(acc);
    }
    // the supremum is ≥ 0 for points of the ball (take y = x)
    let value = if samples.in_ball(x) { raw.max(0.0) } else { raw };
    Ok(GapEstimate { value, raw_max: raw, n_samples: samples.samples.len(), delta: samples.delta, anchor: samples.anchor.clone() })
}

/// Half the distance from `anchor` to the nearest finite face of a box. Sets
/// without interior (pins, affine subspaces, the whole space) need a user δ.
pub fn default_delta(constraint: &ConstraintSpec, anchor: &[f64]) -> Option<f64> {
    match constraint {
        ConstraintSpec::Box { lower, upper } => {
            let mut m = f64::INFINITY;
            for ((l, u), a) in lower.iter().zip(upper).zip(anchor) {
                m = m.min(a - l).min(u - a);
            }
            (m.is_finite() && m > 0.0).then_some(0.5 * m)
        }
        _ => None,
    }
}

pub fn objective_gap(problem: &ProblemInstance, x: &[f64]) -> Result<f64, DiagnosticsError> {
    problem.objective_gap(x).map_err(|e| DiagnosticsError::Unsupported(e.to_string()))
}

pub fn feasibility_residual(problem: &ProblemInstance, x: &[f64]) -> f64 {
    problem.feasibility_residual(x)
}

pub fn dist_to_solution(problem: &ProblemInstance, x: &[f64]) -> Result<f64, DiagnosticsError> {
    problem.dist_to_solution(x).map_err(|e| DiagnosticsError::Unsupported(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares fit of log v against log t over the last 80% of the usable
/// (positive, finite) points. Needs at least 10 of them.
pub fn rate_fit(series: &[(f64, f64)]) -> Result<RateFit, DiagnosticsError> {
    let pts: Vec<(f64, f64)> =
        series.iter().copied().filter(|(t, v)| t.is_finite() && v.is_finite() && *t > 0.0 && *v > 0.0).collect();
    if pts.len() < 10 {
        return Err(DiagnosticsError::InsufficientData(format!("{} usable points, need 10", pts.len())));
    }
    let tail = &pts[pts.len() / 5..];
    let xs: Vec<f64> = tail.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let f = fit_line(&xs, &ys).ok_or_else(|| DiagnosticsError::InsufficientData("all times coincide".into()))?;
    Ok(RateFit { slope: f.slope, intercept: f.intercept, r_squared: f.r_squared, n_points: tail.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub epsilon: f64,
    pub exceed_fraction: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub n_replicates: usize,
    pub horizon_t: f64,
    /// Per replicate: Φ(X̄) − Φ(z), Q₀ = (c + ‖X₀ − z‖²)/t, Q₁ = √δ / t.
    pub gaps: Vec<f64>,
    pub q0: Vec<f64>,
    pub q1: Vec<f64>,
    pub rows: Vec<ConcentrationRow>,
}

/// Empirical P(Φ(X̄ₜ) − Φ(z) ≥ Q₀ + εQ₁) across replicates, next to exp(−ε²/4).
/// `z` is a feasible comparison point (typically the solution).
pub fn concentration_report(
    problem: &ProblemInstance,
    trajectories: &[Trajectory],
    z: &[f64],
    epsilons: &[f64],
) -> Result<ConcentrationReport, DiagnosticsError> {
    if trajectories.is_empty() {
        return Err(DiagnosticsError::InsufficientData("no replicates".into()));
    }
    let phi_z = problem.phi(z).ok_or_else(|| DiagnosticsError::Unsupported("operator has no potential Φ".into()))?;
    let (mut gaps, mut q0, mut q1) = (Vec::new(), Vec::new(), Vec::new());
    let mut horizon = f64::INFINITY;
    for tr in trajectories {
        if tr.divergence.is_some() {
            return Err(DiagnosticsError::Missing("a replicate diverged; its accumulators are incomplete".into()));
        }
        let st = &tr.final_state;
        if st.t <= 0.0 {
            return Err(DiagnosticsError::Missing("a replicate has no steps".into()));
        }
        if tr.x0.len() != z.len() {
            return Err(DiagnosticsError::Dimension { expected: z.len(), got: tr.x0.len() });
        }
        let phi = problem.phi(&st.x_bar).unwrap_or(f64::NAN);
        gaps.push(phi - phi_z);
        q0.push((st.c_acc + linalg::dist_sq(&tr.x0, z)) / st.t);
        q1.push(st.delta_acc.sqrt() / st.t);
        horizon = horizon.min(st.t);
    }
    let n = gaps.len() as f64;
    let rows = epsilons
        .iter()
        .map(|&eps| {
            let hits = gaps.iter().zip(&q0).zip(&q1).filter(|((g, a), b)| **g >= **a + eps * **b).count();
            ConcentrationRow { epsilon: eps, exceed_fraction: hits as f64 / n, bound: (-eps * eps / 4.0).exp() }
        })
        .collect();
    Ok(ConcentrationReport { n_replicates: trajectories.len(), horizon_t: horizon, gaps, q0, q1, rows })
}
