//! Instance builders: sparse recovery (basis pursuit), the chained bilevel
//! quadratic with a closed-form solution, tomographic reconstruction, and
//! small affine variational inequalities.

pub mod radon;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, AffineSystem, LinearMap};
use crate::operators::MonotoneOp;
use crate::penalty::{ConstraintSpec, PenaltyFn};
use crate::stochastic::replicate_rng;

pub use radon::{radon_matrix, radon_row, Phantom};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("instance audit failed: {0}")]
    Audit(String),
    #[error("unsupported for this instance: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub dim: usize,
    pub rows: Option<usize>,
    pub seed: Option<u64>,
}

/// The triple (A, Ψ, C) with optional ground truth.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub operator: MonotoneOp,
    pub penalty: PenaltyFn,
    pub constraint: ConstraintSpec,
    /// Analytic min_C Φ, when known.
    pub phi_min: Option<f64>,
    pub known_solution: Option<Vec<f64>>,
    /// v ∈ A(x*) with −v ∈ N_C(x*).
    pub witness: Option<Vec<f64>>,
    /// Reconstruction target that is not a certified solution (x_true, phantom).
    pub reference: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub meta: ProblemMeta,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.penalty.dim()
    }

    pub fn initial_point(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; self.dim()])
    }

    /// Φ(x) when A = ∂Φ.
    pub fn phi(&self, x: &[f64]) -> Option<f64> {
        self.operator.potential(x)
    }

    /// Φ(x) − min_C Φ, signed.
    pub fn objective_gap(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let phi = self.phi(x).ok_or_else(|| ProblemError::Unsupported("operator has no potential Φ".into()))?;
        let min = self.phi_min.ok_or_else(|| ProblemError::Unsupported("min_C Φ is not known analytically".into()))?;
        Ok(phi - min)
    }

    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        self.penalty.eval_unchecked(x)
    }

    pub fn dist_to_solution(&self, x: &[f64]) -> Result<f64, ProblemError> {
        let s = self.known_solution.as_ref().ok_or_else(|| ProblemError::Unsupported("solution set unknown".into()))?;
        Ok(linalg::dist(x, s))
    }

    /// Construction-time consistency checks.
    pub fn audit(&self) -> Result<(), ProblemError> {
        let d = self.dim();
        if self.operator.dim() != d || self.constraint.dim() != d {
            return Err(ProblemError::Audit("operator, penalty and constraint dimensions differ".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != d {
                return Err(ProblemError::Audit("initial point has the wrong dimension".into()));
            }
        }
        if let Some(xs) = &self.known_solution {
            let r = self.feasibility_residual(xs);
            if r > 1e-10 {
                return Err(ProblemError::Audit(format!("known solution has Ψ = {r:.3e} > 1e-10")));
            }
            if let Some(v) = &self.witness {
                if !self.operator.contains(xs, v, 1e-10) {
                    return Err(ProblemError::Audit("witness is not in A(x*)".into()));
                }
                let neg: Vec<f64> = v.iter().map(|a| -a).collect();
                if !self.constraint.normal_contains(xs, &neg, 1e-10) {
                    return Err(ProblemError::Audit("−witness is not in N_C(x*)".into()));
                }
            }
            if let (Some(min), Some(phi)) = (self.phi_min, self.phi(xs)) {
                if (phi - min).abs() > 1e-9 * (1.0 + min.abs()) {
                    return Err(ProblemError::Audit("Φ(x*) disagrees with min_C Φ".into()));
                }
            }
        }
        if let Some(r) = &self.reference {
            if r.len() != d {
                return Err(ProblemError::Audit("reference has the wrong dimension".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Entries N(0, 1/m).
    #[default]
    Gaussian,
    /// Orthonormal rows (AAᵀ = I), so AᵀA is a projection.
    Orthonormal,
}

/// min ‖x‖₁ over argmin ½‖Ax − y‖², with y = A·x_true + noise.
pub fn make_basis_pursuit(
    m: usize,
    d: usize,
    sparsity: usize,
    noise_sigma: f64,
    seed: u64,
    design: Design,
) -> Result<ProblemInstance, ProblemError> {
    if m == 0 || d == 0 || m > d || sparsity > d {
        return Err(ProblemError::Dimensions(format!("need 1 ≤ m ≤ d and sparsity ≤ d (m={m}, d={d}, s={sparsity})")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(ProblemError::Dimensions(format!("noise_sigma must be finite and ≥ 0, got {noise_sigma}")));
    }
    let mut rng = replicate_rng(seed, 0);
    let gauss = |rng: &mut _| -> f64 { Rng::sample(rng, StandardNormal) };
    let a = match design {
        Design::Gaussian => {
            let sd = 1.0 / (m as f64).sqrt();
            DMatrix::from_fn(m, d, |_, _| sd * gauss(&mut rng))
        }
        Design::Orthonormal => {
            let g = DMatrix::from_fn(d, m, |_, _| gauss(&mut rng));
            g.qr().q().transpose()
        }
    };
    let mut x_true = vec![0.0; d];
    for idx in sample_indices(&mut rng, d, sparsity) {
        x_true[idx] = gauss(&mut rng);
    }
    let mut y: Vec<f64> = (&a * nalgebra::DVector::from_column_slice(&x_true)).iter().cloned().collect();
    if noise_sigma > 0.0 {
        y.iter_mut().for_each(|v| *v += noise_sigma * gauss(&mut rng));
    }
    let sys = Arc::new(AffineSystem::new(LinearMap::Dense(a), y));
    let penalty = PenaltyFn::least_squares(sys.clone());
    let inst = ProblemInstance {
        operator: MonotoneOp::L1 { dim: d },
        penalty,
        constraint: ConstraintSpec::Affine(sys),
        phi_min: None,
        known_solution: None,
        witness: None,
        reference: Some(x_true),
        x0: None,
        meta: ProblemMeta { name: "basis_pursuit".into(), dim: d, rows: Some(m), seed: Some(seed) },
    };
    inst.audit()?;
    Ok(inst)
}

pub const BILEVEL_CENTER: f64 = 50.0;

/// min ‖x − 50·1‖₁ over argmin ½(x₁−1)² + ½Σ_{j=2}^{J}(x_{j−1}−x_j)².
pub fn make_bilevel_quadratic(d: usize, pinned: usize) -> Result<ProblemInstance, ProblemError> {
    if pinned == 0 || pinned >= d {
        return Err(ProblemError::Dimensions(format!("need 1 ≤ J < d, got J={pinned}, d={d}")));
    }
    let penalty = PenaltyFn::chained_quadratic(d, pinned).map_err(|e| ProblemError::Dimensions(e.to_string()))?;
    let x_star: Vec<f64> = (0..d).map(|i| if i < pinned { 1.0 } else { BILEVEL_CENTER }).collect();
    // ∂‖·−x̂‖₁ at x*: −1 on pinned coordinates (x* < x̂), 0 chosen at the kinks.
    let witness: Vec<f64> = (0..d).map(|i| if i < pinned { -1.0 } else { 0.0 }).collect();
    let inst = ProblemInstance {
        operator: MonotoneOp::TranslatedL1 { center: vec![BILEVEL_CENTER; d] },
        penalty,
        constraint: ConstraintSpec::Pin { dim: d, pinned },
        phi_min: Some(pinned as f64 * (BILEVEL_CENTER - 1.0)),
        known_solution: Some(x_star),
        witness: Some(witness),
        reference: None,
        x0: None,
        meta: ProblemMeta { name: "bilevel_quadratic".into(), dim: d, rows: None, seed: None },
    };
    inst.audit()?;
    Ok(inst)
}

/// min ‖x‖₁ over argmin ½‖Ax − y‖² for a Radon matrix A and y = A·phantom.
pub fn make_radon(
    image_side: usize,
    n_angles: usize,
    n_detectors: usize,
    phantom: Phantom,
    seed: u64,
) -> Result<ProblemInstance, ProblemError> {
    if image_side < 8 || n_angles == 0 || n_detectors == 0 {
        return Err(ProblemError::Dimensions(format!(
            "need image_side ≥ 8 and positive angle/detector counts (got {image_side}, {n_angles}, {n_detectors})"
        )));
    }
    let a = radon_matrix(image_side, n_angles, n_detectors);
    let img = radon::phantom_image(phantom, image_side);
    let y = a.matvec(&img);
    let d = image_side * image_side;
    let rows = a.rows();
    let sys = Arc::new(AffineSystem::new(LinearMap::Sparse(a), y));
    let inst = ProblemInstance {
        operator: MonotoneOp::L1 { dim: d },
        penalty: PenaltyFn::least_squares(sys.clone()),
        constraint: ConstraintSpec::Affine(sys),
        phi_min: None,
        known_solution: None,
        witness: None,
        reference: Some(img),
        x0: None,
        meta: ProblemMeta { name: "radon".into(), dim: d, rows: Some(rows), seed: Some(seed) },
    };
    inst.audit()?;
    Ok(inst)
}

/// Affine VI over a box: find x ∈ [lo, hi] with 0 ∈ Mx + q + N_box(x), encoded with
/// A = Mx + q, Ψ = ½dist(·, box)². The solution is supplied by a projected
/// fixed-point solve of x = P(x − γ(Mx + q)) run to machine precision.
pub fn make_affine_vi(m: DMatrix<f64>, q: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<ProblemInstance, ProblemError> {
    let d = q.len();
    if m.nrows() != d || m.ncols() != d || lower.len() != d || upper.len() != d {
        return Err(ProblemError::Dimensions("M, q and box bounds must agree".into()));
    }
    let operator = MonotoneOp::affine(m.clone(), q.clone()).map_err(|e| ProblemError::Dimensions(e.to_string()))?;
    let penalty = PenaltyFn::half_squared_distance_to_box(lower.clone(), upper.clone())
        .map_err(|e| ProblemError::Dimensions(e.to_string()))?;
    let constraint = penalty.zero_set();
    let solution = solve_box_vi(&m, &q, &constraint);
    let inst = ProblemInstance {
        operator,
        penalty,
        constraint,
        phi_min: None,
        witness: solution.as_ref().map(|x| {
            let mx = &m * nalgebra::DVector::from_column_slice(x);
            mx.iter().zip(&q).map(|(a, b)| a + b).collect()
        }),
        known_solution: solution,
        reference: None,
        x0: None,
        meta: ProblemMeta { name: "affine_vi".into(), dim: d, rows: None, seed: None },
    };
    inst.audit()?;
    Ok(inst)
}

/// Extragradient iteration for a monotone affine VI over a box; None if it
/// does not reach a fixed point.
fn solve_box_vi(m: &DMatrix<f64>, q: &[f64], c: &ConstraintSpec) -> Option<Vec<f64>> {
    let d = q.len();
    let lip = m.clone().svd(false, false).singular_values.max().max(1e-12);
    let gamma = 0.5 / lip;
    let field = |x: &[f64]| -> Vec<f64> {
        let mx = m * nalgebra::DVector::from_column_slice(x);
        mx.iter().zip(q).map(|(a, b)| a + b).collect()
    };
    let mut x = c.project(&vec![0.0; d]);
    for _ in 0..1_000_000 {
        let y = c.project(&linalg::sub(&x, &linalg::scale(&field(&x), gamma)));
        let next = c.project(&linalg::sub(&x, &linalg::scale(&field(&y), gamma)));
        let step = linalg::dist(&next, &x);
        x = next;
        if step <= 1e-15 * (1.0 + linalg::norm(&x)) {
            let res = linalg::dist(&x, &c.project(&linalg::sub(&x, &field(&x))));
            return (res <= 1e-11).then_some(x);
        }
    }
    None
}
