//! Maximally monotone operators represented by closed-form resolvents and
//! analytic graph elements.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::penalty::{gaussian_vec, ConstraintSpec};

/// Dense LU is used for affine resolvents up to this dimension.
pub const AFFINE_MAX_DIM: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("step size must be positive and finite, got {0}")]
    Lambda(f64),
    #[error("input contains NaN or infinite values")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid operator parameters: {0}")]
    Parameter(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone)]
pub enum MonotoneOp {
    Zero { dim: usize },
    /// ∂‖x‖₁
    L1 { dim: usize },
    /// ∂Σ wᵢ|xᵢ|, w ≥ 0
    WeightedL1 { weights: Vec<f64> },
    /// ∂‖x − x̂‖₁
    TranslatedL1 { center: Vec<f64> },
    /// N_{[lower, upper]}
    BoxNormalCone { lower: Vec<f64>, upper: Vec<f64> },
    /// x ↦ Mx + q with M + Mᵀ ⪰ 0
    Affine { m: DMatrix<f64>, q: Vec<f64> },
    /// Block-separable sum: each operator acts on its own coordinate range;
    /// uncovered coordinates carry the zero operator.
    Blocks { dim: usize, parts: Vec<(Range<usize>, MonotoneOp)> },
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// Uniform element of ∂|·| at `v`: sign(v), or uniform in [−1,1] at the kink.
fn abs_subgradient<R: Rng + ?Sized>(v: f64, rng: &mut R) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        rng.random_range(-1.0..=1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmNonexpansiveReport {
    pub max_violation: f64,
    pub n_pairs: usize,
    pub passed: bool,
}

pub const FIRM_NONEXPANSIVE_TOL: f64 = 1e-9;
pub const GRAPH_TOL: f64 = 1e-8;

impl MonotoneOp {
    pub fn weighted_l1(weights: Vec<f64>) -> Result<Self, OperatorError> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(OperatorError::Parameter("l1 weights must be finite and ≥ 0".into()));
        }
        Ok(MonotoneOp::WeightedL1 { weights })
    }

    pub fn box_normal_cone(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, OperatorError> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(OperatorError::Parameter("box needs matching lengths and lower ≤ upper".into()));
        }
        Ok(MonotoneOp::BoxNormalCone { lower, upper })
    }

    pub fn affine(m: DMatrix<f64>, q: Vec<f64>) -> Result<Self, OperatorError> {
        let d = m.nrows();
        if m.ncols() != d || q.len() != d {
            return Err(OperatorError::Parameter("affine operator needs square M and matching q".into()));
        }
        if d > AFFINE_MAX_DIM {
            return Err(OperatorError::Unsupported(format!("affine resolvent limited to d ≤ {AFFINE_MAX_DIM}")));
        }
        if m.iter().chain(&q).any(|v| !v.is_finite()) {
            return Err(OperatorError::NonFinite);
        }
        let sym = (&m + m.transpose()) * 0.5;
        let min_eig = sym.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * (1.0 + m.norm()) {
            return Err(OperatorError::Parameter(format!("M + Mᵀ is not positive semidefinite (min eigenvalue {min_eig:.3e})")));
        }
        Ok(MonotoneOp::Affine { m, q })
    }

    pub fn blocks(dim: usize, mut parts: Vec<(Range<usize>, MonotoneOp)>) -> Result<Self, OperatorError> {
        parts.sort_by_key(|p| p.0.start);
        let mut end = 0;
        for (r, op) in &parts {
            if r.start < end || r.end > dim || r.start >= r.end {
                return Err(OperatorError::Parameter("block ranges must be nonempty, disjoint and inside 0..dim".into()));
            }
            if op.dim() != r.len() {
                return Err(OperatorError::Dimension { expected: r.len(), got: op.dim() });
            }
            end = r.end;
        }
        Ok(MonotoneOp::Blocks { dim, parts })
    }

    pub fn dim(&self) -> usize {
        match self {
            MonotoneOp::Zero { dim } | MonotoneOp::L1 { dim } | MonotoneOp::Blocks { dim, .. } => *dim,
            MonotoneOp::WeightedL1 { weights } => weights.len(),
            MonotoneOp::TranslatedL1 { center } => center.len(),
            MonotoneOp::BoxNormalCone { lower, .. } => lower.len(),
            MonotoneOp::Affine { q, .. } => q.len(),
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), OperatorError> {
        if x.len() != self.dim() {
            return Err(OperatorError::Dimension { expected: self.dim(), got: x.len() });
        }
        if !linalg::all_finite(x) {
            return Err(OperatorError::NonFinite);
        }
        Ok(())
    }

    /// p = (Id + λA)⁻¹ x.
    pub fn resolvent(&self, lambda: f64, x: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(OperatorError::Lambda(lambda));
        }
        self.check(x)?;
        let mut out = x.to_vec();
        self.resolvent_in_place(lambda, &mut out);
        Ok(out)
    }

    /// In-place resolvent without validation, for the hot loop.
    pub fn resolvent_in_place(&self, lambda: f64, x: &mut [f64]) {
        match self {
            MonotoneOp::Zero { .. } => {}
            MonotoneOp::L1 { .. } => x.iter_mut().for_each(|v| *v = soft(*v, lambda)),
            MonotoneOp::WeightedL1 { weights } => {
                for (v, w) in x.iter_mut().zip(weights) {
                    *v = soft(*v, lambda * w);
                }
            }
            MonotoneOp::TranslatedL1 { center } => {
                for (v, c) in x.iter_mut().zip(center) {
                    *v = c + soft(*v - c, lambda);
                }
            }
            MonotoneOp::BoxNormalCone { lower, upper } => {
                for (v, (l, u)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                    *v = v.clamp(*l, *u);
                }
            }
            MonotoneOp::Affine { m, q } => {
                let d = q.len();
                let lhs = DMatrix::identity(d, d) + m * lambda;
                let rhs = DVector::from_iterator(d, x.iter().zip(q).map(|(v, qi)| v - lambda * qi));
                // I + λM has positive semidefinite symmetric part plus I, hence invertible.
                let p = lhs.lu().solve(&rhs).expect("I + λM is invertible for monotone M");
                x.copy_from_slice(p.as_slice());
            }
            MonotoneOp::Blocks { parts, .. } => {
                for (r, op) in parts {
                    op.resolvent_in_place(lambda, &mut x[r.clone()]);
                }
            }
        }
    }

    /// Φ with A = ∂Φ, when A is a subdifferential (symmetric M for affine kinds).
    pub fn potential(&self, x: &[f64]) -> Option<f64> {
        match self {
            MonotoneOp::Zero { .. } => Some(0.0),
            MonotoneOp::L1 { .. } => Some(linalg::l1_norm(x)),
            MonotoneOp::WeightedL1 { weights } => Some(x.iter().zip(weights).map(|(v, w)| w * v.abs()).sum()),
            MonotoneOp::TranslatedL1 { center } => Some(x.iter().zip(center).map(|(v, c)| (v - c).abs()).sum()),
            MonotoneOp::BoxNormalCone { lower, upper } => {
                let inside = x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| v >= l && v <= u);
                Some(if inside { 0.0 } else { f64::INFINITY })
            }
            MonotoneOp::Affine { m, q } => {
                if (m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm()) {
                    return None;
                }
                let xv = DVector::from_column_slice(x);
                Some(0.5 * xv.dot(&(m * &xv)) + linalg::dot(q, x))
            }
            MonotoneOp::Blocks { parts, .. } => {
                let mut s = 0.0;
                for (r, op) in parts {
                    s += op.potential(&x[r.clone()])?;
                }
                Some(s)
            }
        }
    }

    /// An element of A(y), drawn uniformly on kinks. Errors if A(y) is empty.
    pub fn element_at<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Result<Vec<f64>, OperatorError> {
        self.check(y)?;
        let mut v = vec![0.0; y.len()];
        self.element_into(y, rng, &mut v)?;
        Ok(v)
    }

    fn element_into<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R, v: &mut [f64]) -> Result<(), OperatorError> {
        match self {
            MonotoneOp::Zero { .. } => v.iter_mut().for_each(|o| *o = 0.0),
            MonotoneOp::L1 { .. } => {
                for (o, yi) in v.iter_mut().zip(y) {
                    *o = abs_subgradient(*yi, rng);
                }
            }
            MonotoneOp::WeightedL1 { weights } => {
                for ((o, yi), w) in v.iter_mut().zip(y).zip(weights) {
                    *o = w * abs_subgradient(*yi, rng);
                }
            }
            MonotoneOp::TranslatedL1 { center } => {
                for ((o, yi), c) in v.iter_mut().zip(y).zip(center) {
                    *o = abs_subgradient(yi - c, rng);
                }
            }
            MonotoneOp::BoxNormalCone { lower, upper } => {
                let c = ConstraintSpec::Box { lower: lower.clone(), upper: upper.clone() };
                if !c.contains(y, 0.0) {
                    return Err(OperatorError::Precondition("normal cone is empty outside the box".into()));
                }
                v.copy_from_slice(&c.sample_normal(y, rng));
            }
            MonotoneOp::Affine { m, q } => {
                let p = m * DVector::from_column_slice(y);
                for ((o, pi), qi) in v.iter_mut().zip(p.iter()).zip(q) {
                    *o = pi + qi;
                }
            }
            MonotoneOp::Blocks { parts, .. } => {
                v.iter_mut().for_each(|o| *o = 0.0);
                for (r, op) in parts {
                    op.element_into(&y[r.clone()], rng, &mut v[r.clone()])?;
                }
            }
        }
        Ok(())
    }

    /// Exact analytic test of u ∈ A(y) up to `tol`.
    pub fn contains(&self, y: &[f64], u: &[f64], tol: f64) -> bool {
        if y.len() != self.dim() || u.len() != self.dim() {
            return false;
        }
        let abs_ok = |yi: f64, ui: f64, w: f64| {
            if yi > 0.0 {
                (ui - w).abs() <= tol
            } else if yi < 0.0 {
                (ui + w).abs() <= tol
            } else {
                ui.abs() <= w + tol
            }
        };
        match self {
            MonotoneOp::Zero { .. } => u.iter().all(|v| v.abs() <= tol),
            MonotoneOp::L1 { .. } => y.iter().zip(u).all(|(a, b)| abs_ok(*a, *b, 1.0)),
            MonotoneOp::WeightedL1 { weights } => y.iter().zip(u).zip(weights).all(|((a, b), w)| abs_ok(*a, *b, *w)),
            MonotoneOp::TranslatedL1 { center } => y.iter().zip(u).zip(center).all(|((a, b), c)| abs_ok(a - c, *b, 1.0)),
            MonotoneOp::BoxNormalCone { lower, upper } => y.iter().zip(u).zip(lower.iter().zip(upper)).all(|((yi, ui), (l, up))| {
                if *yi < l - tol || *yi > up + tol {
                    return false;
                }
                let at_lo = *yi <= l + tol;
                let at_hi = *yi >= up - tol;
                match (at_lo, at_hi) {
                    (true, true) => true,
                    (true, false) => *ui <= tol,
                    (false, true) => *ui >= -tol,
                    _ => ui.abs() <= tol,
                }
            }),
            MonotoneOp::Affine { m, q } => {
                let p = m * DVector::from_column_slice(y);
                p.iter().zip(q).zip(u).all(|((pi, qi), ui)| (pi + qi - ui).abs() <= tol * (1.0 + ui.abs()))
            }
            MonotoneOp::Blocks { parts, .. } => {
                let mut covered = vec![false; y.len()];
                for (r, op) in parts {
                    if !op.contains(&y[r.clone()], &u[r.clone()], tol) {
                        return false;
                    }
                    covered[r.clone()].iter_mut().for_each(|c| *c = true);
                }
                covered.iter().zip(u).all(|(c, ui)| *c || ui.abs() <= tol)
            }
        }
    }

    /// Probe test of u ∈ A(y): the subgradient inequality Φ(z) ≥ Φ(y) + ⟨u, z−y⟩
    /// for potential kinds, and the monotonicity inequality against (z, A z) for
    /// nonsymmetric affine kinds. Box probes are projected into the box.
    pub fn probe_check(&self, y: &[f64], u: &[f64], probes: &[Vec<f64>], tol: f64) -> bool {
        let probes: Vec<Vec<f64>> = match self {
            MonotoneOp::BoxNormalCone { lower, upper } => {
                let c = ConstraintSpec::Box { lower: lower.clone(), upper: upper.clone() };
                probes.iter().map(|z| c.project(z)).collect()
            }
            _ => probes.to_vec(),
        };
        match self.potential(y) {
            Some(fy) if fy.is_finite() => probes.iter().all(|z| {
                let fz = self.potential(z).unwrap_or(f64::INFINITY);
                let diff = linalg::sub(z, y);
                fz >= fy + linalg::dot(u, &diff) - tol * (1.0 + fz.abs() + fy.abs())
            }),
            Some(_) => false,
            None => {
                let MonotoneOp::Affine { m, q } = self else { return false };
                probes.iter().all(|z| {
                    let az: Vec<f64> = (m * DVector::from_column_slice(z)).iter().zip(q).map(|(a, b)| a + b).collect();
                    let du = linalg::sub(u, &az);
                    let dx = linalg::sub(y, z);
                    linalg::dot(&du, &dx) >= -tol * (1.0 + linalg::norm(&du) * linalg::norm(&dx))
                })
            }
        }
    }
}

/// max over pairs of ‖Jx−Jy‖² − ⟨Jx−Jy, x−y⟩ for J = (Id+λA)⁻¹.
pub fn check_firm_nonexpansive(
    op: &MonotoneOp,
    lambda: f64,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> Result<FirmNonexpansiveReport, OperatorError> {
    let mut max_violation = f64::NEG_INFINITY;
    for (x, y) in pairs {
        let jx = op.resolvent(lambda, x)?;
        let jy = op.resolvent(lambda, y)?;
        let dj = linalg::sub(&jx, &jy);
        let dx = linalg::sub(x, y);
        max_violation = max_violation.max(linalg::norm_sq(&dj) - linalg::dot(&dj, &dx));
    }
    if pairs.is_empty() {
        max_violation = 0.0;
    }
    Ok(FirmNonexpansiveReport { max_violation, n_pairs: pairs.len(), passed: max_violation <= FIRM_NONEXPANSIVE_TOL })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    pub point: Vec<f64>,
    /// An element of (A + N_C)(point).
    pub value: Vec<f64>,
    pub anchor_distance: f64,
}

#[derive(Debug, Clone)]
pub struct GraphSampleSet {
    pub anchor: Vec<f64>,
    pub delta: f64,
    pub constraint: ConstraintSpec,
    pub samples: Vec<GraphSample>,
}

impl GraphSampleSet {
    /// x ∈ B_δ = {x ∈ C : ‖x − anchor‖ ≤ δ}.
    pub fn in_ball(&self, x: &[f64]) -> bool {
        linalg::dist(x, &self.anchor) <= self.delta * (1.0 + 1e-10) + 1e-10 && self.constraint.contains(x, 1e-12)
    }
}

/// Draws `count` points of B_δ around a feasible anchor and pairs each with a
/// verified element of (A + N_C) there.
pub fn sample_graph<R: Rng + ?Sized>(
    op: &MonotoneOp,
    constraint: &ConstraintSpec,
    anchor: &[f64],
    delta: f64,
    count: usize,
    rng: &mut R,
) -> Result<GraphSampleSet, OperatorError> {
    let d = op.dim();
    if anchor.len() != d || constraint.dim() != d {
        return Err(OperatorError::Dimension { expected: d, got: anchor.len().min(constraint.dim()) });
    }
    if !linalg::all_finite(anchor) {
        return Err(OperatorError::NonFinite);
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(OperatorError::Parameter(format!("delta must be finite and ≥ 0, got {delta}")));
    }
    if constraint.violation(anchor) > 1e-12 {
        return Err(OperatorError::Precondition("anchor is not feasible (Ψ(anchor) > 1e-12)".into()));
    }
    if let (MonotoneOp::BoxNormalCone { .. }, ConstraintSpec::Affine(_)) = (op, constraint) {
        return Err(OperatorError::Unsupported("normal cone of a box intersected with an affine set".into()));
    }
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mut dir = gaussian_vec(rng, d, 1.0);
        let nd = linalg::norm(&dir).max(1e-300);
        let r = delta * rng.random::<f64>().powf(1.0 / d as f64);
        dir.iter_mut().for_each(|v| *v *= r / nd);
        let raw = linalg::add(anchor, &dir);
        // Projection is nonexpansive and fixes the anchor, so the point stays in B_δ.
        let mut point = constraint.project(&raw);
        if let MonotoneOp::BoxNormalCone { lower, upper } = op {
            for (v, (l, u)) in point.iter_mut().zip(lower.iter().zip(upper)) {
                *v = v.clamp(*l, *u);
            }
        }
        let a = op.element_at(&point, rng)?;
        let nc = constraint.sample_normal(&point, rng);
        let probes: Vec<Vec<f64>> = (0..8).map(|_| linalg::add(&point, &gaussian_vec(rng, d, 1.0))).collect();
        let feasible_probes: Vec<Vec<f64>> = probes.iter().map(|z| constraint.project(z)).collect();
        if !op.contains(&point, &a, GRAPH_TOL)
            || !op.probe_check(&point, &a, &probes, GRAPH_TOL)
            || !constraint.normal_inequality_holds(&point, &nc, &feasible_probes, GRAPH_TOL)
        {
            return Err(OperatorError::Unsupported("could not certify a graph element at a sampled point".into()));
        }
        let anchor_distance = linalg::dist(&point, anchor);
        samples.push(GraphSample { point, value: linalg::add(&a, &nc), anchor_distance });
    }
    Ok(GraphSampleSet { anchor: anchor.to_vec(), delta, constraint: constraint.clone(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resolvent_examples() {
        assert_eq!(MonotoneOp::Zero { dim: 2 }.resolvent(0.7, &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert_eq!(MonotoneOp::L1 { dim: 3 }.resolvent(1.0, &[2.0, -0.5, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        let bx = MonotoneOp::box_normal_cone(vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert_eq!(bx.resolvent(2.0, &[2.0, -1.0]).unwrap(), vec![1.0, 0.0]);
        let t = MonotoneOp::TranslatedL1 { center: vec![50.0] };
        assert_eq!(t.resolvent(1.0, &[5.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn resolvent_errors() {
        let op = MonotoneOp::L1 { dim: 2 };
        assert_eq!(op.resolvent(0.0, &[1.0, 1.0]), Err(OperatorError::Lambda(0.0)));
        assert_eq!(op.resolvent(-1.0, &[1.0, 1.0]), Err(OperatorError::Lambda(-1.0)));
        assert_eq!(op.resolvent(1.0, &[f64::NAN, 1.0]), Err(OperatorError::NonFinite));
        assert!(matches!(op.resolvent(1.0, &[1.0]), Err(OperatorError::Dimension { .. })));
    }

    #[test]
    fn affine_resolvent_and_rejection() {
        // rotation generator: skew-symmetric, monotone but not a gradient
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let op = MonotoneOp::affine(m, vec![0.5, 0.0]).unwrap();
        let x = [1.0, 2.0];
        let p = op.resolvent(0.5, &x).unwrap();
        let u: Vec<f64> = x.iter().zip(&p).map(|(a, b)| (a - b) / 0.5).collect();
        assert!(op.contains(&p, &u, 1e-10));
        assert!(op.potential(&p).is_none());
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(MonotoneOp::affine(bad, vec![0.0; 2]).is_err());
    }

    #[test]
    fn blocks_compose() {
        let op = MonotoneOp::blocks(
            4,
            vec![(0..2, MonotoneOp::L1 { dim: 2 }), (3..4, MonotoneOp::box_normal_cone(vec![0.0], vec![1.0]).unwrap())],
        )
        .unwrap();
        assert_eq!(op.resolvent(1.0, &[3.0, 0.5, 7.0, 4.0]).unwrap(), vec![2.0, 0.0, 7.0, 1.0]);
        assert!(MonotoneOp::blocks(3, vec![(0..2, MonotoneOp::L1 { dim: 2 }), (1..3, MonotoneOp::L1 { dim: 2 })]).is_err());
    }

    #[test]
    fn firm_nonexpansive_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
            .map(|_| {
                let x = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
                let y = (0..10).map(|_| rng.random_range(-5.0..5.0)).collect();
                (x, y)
            })
            .collect();
        let r = check_firm_nonexpansive(&MonotoneOp::Zero { dim: 10 }, 1.0, &pairs).unwrap();
        assert!(r.max_violation <= 0.0 + 1e-12 && r.passed);
        let r = check_firm_nonexpansive(&MonotoneOp::L1 { dim: 10 }, 0.8, &pairs).unwrap();
        assert!(r.max_violation <= 1e-9);
        let x = vec![1.0; 10];
        let r = check_firm_nonexpansive(&MonotoneOp::L1 { dim: 10 }, 0.8, &[(x.clone(), x)]).unwrap();
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn sample_graph_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set = sample_graph(&MonotoneOp::Zero { dim: 3 }, &ConstraintSpec::Whole { dim: 3 }, &[1.0, 2.0, 3.0], 0.5, 5, &mut rng)
            .unwrap();
        assert_eq!(set.samples.len(), 5);
        assert!(set.samples.iter().all(|s| s.value.iter().all(|v| *v == 0.0) && s.anchor_distance <= 0.5 + 1e-10));

        let bx = ConstraintSpec::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let set = sample_graph(&MonotoneOp::L1 { dim: 2 }, &bx, &[0.0, 1.0], 0.3, 20, &mut rng).unwrap();
        assert_eq!(set.samples.len(), 20);
        for s in &set.samples {
            // ‖z‖₁ ≥ ‖y‖₁ + ⟨v_A, z − y⟩ on a 64-point grid, with v_A = v − (normal part),
            // and the normal part checked for z in the box; both are implied by the
            // combined inequality over grid points inside C.
            for i in 0..8 {
                for j in 0..8 {
                    let z = [-1.0 + 2.0 * i as f64 / 7.0, -1.0 + 2.0 * j as f64 / 7.0];
                    let lhs = linalg::l1_norm(&z);
                    let rhs = linalg::l1_norm(&s.point) + linalg::dot(&s.value, &linalg::sub(&z, &s.point));
                    assert!(lhs >= rhs - 1e-8);
                }
            }
        }

        let set = sample_graph(&MonotoneOp::L1 { dim: 2 }, &bx, &[0.2, 0.3], 0.0, 4, &mut rng).unwrap();
        assert!(set.samples.iter().all(|s| s.point == vec![0.2, 0.3]));

        let err = sample_graph(&MonotoneOp::L1 { dim: 2 }, &bx, &[3.0, 0.0], 0.1, 1, &mut rng).unwrap_err();
        assert!(matches!(err, OperatorError::Precondition(_)));
    }
}
