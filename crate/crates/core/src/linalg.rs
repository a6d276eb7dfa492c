//! Small dense-vector helpers and the linear maps used by least-squares penalties.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;

use crate::sparse::CsrMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

pub fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// A linear map `R^cols -> R^rows`, stored densely or in CSR form.
#[derive(Debug, Clone)]
pub enum LinearMap {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl LinearMap {
    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.nrows(),
            LinearMap::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.ncols(),
            LinearMap::Sparse(m) => m.cols(),
        }
    }

    /// `out = A x`
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LinearMap::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            LinearMap::Sparse(m) => m.matvec_into(x, out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    /// `out = A^T u`
    pub fn apply_transpose_into(&self, u: &[f64], out: &mut [f64]) {
        match self {
            LinearMap::Dense(m) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for (i, ui) in u.iter().enumerate() {
                    if *ui == 0.0 {
                        continue;
                    }
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += m[(i, j)] * ui;
                    }
                }
            }
            LinearMap::Sparse(m) => m.transpose_matvec_into(u, out),
        }
    }

    pub fn apply_transpose(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.apply_transpose_into(u, &mut out);
        out
    }

    /// `<a_row, x>`
    pub fn row_dot(&self, row: usize, x: &[f64]) -> f64 {
        match self {
            LinearMap::Dense(m) => m.row(row).iter().zip(x).map(|(a, b)| a * b).sum(),
            LinearMap::Sparse(m) => m.row_dot(row, x),
        }
    }

    /// `out += alpha * a_row`
    pub fn row_axpy(&self, row: usize, alpha: f64, out: &mut [f64]) {
        match self {
            LinearMap::Dense(m) => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += alpha * m[(row, j)];
                }
            }
            LinearMap::Sparse(m) => m.row_axpy(row, alpha, out),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match self {
            LinearMap::Dense(m) => m.norm(),
            LinearMap::Sparse(m) => m.values().iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            LinearMap::Dense(m) => m.clone(),
            LinearMap::Sparse(m) => m.to_dense(),
        }
    }

    /// Largest eigenvalue of `A^T A` by power iteration, stopping once the
    /// relative change of the Rayleigh quotient drops below `tol`.
    pub fn spectral_norm_sq(&self, tol: f64, max_iter: usize) -> f64 {
        let n = self.cols();
        if n == 0 || self.rows() == 0 {
            return 0.0;
        }
        // Deterministic, non-degenerate start vector.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract()).collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut av = vec![0.0; self.rows()];
        let mut w = vec![0.0; n];
        let mut estimate = 0.0;
        for _ in 0..max_iter {
            self.apply_into(&v, &mut av);
            self.apply_transpose_into(&av, &mut w);
            let next = dot(&v, &w);
            let nw = norm(&w);
            if nw == 0.0 {
                return 0.0;
            }
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
            let done = (next - estimate).abs() <= tol * next.abs().max(f64::MIN_POSITIVE);
            estimate = next;
            if done {
                break;
            }
        }
        // One more Rayleigh quotient at the converged direction.
        self.apply_into(&v, &mut av);
        estimate.max(norm_sq(&av))
    }
}

/// Shared handle so penalties, constraints and minibatch oracles reference one matrix.
pub type SharedMap = Arc<LinearMap>;

/// Minimum-norm solution of `M w = rhs` via SVD, with the residual norm.
pub fn min_norm_solve(m: &DMatrix<f64>, rhs: &[f64]) -> (Vec<f64>, f64) {
    let svd = m.clone().svd(true, true);
    let b = nalgebra::DVector::from_column_slice(rhs);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = 1e-12 * max_sv.max(1.0) * (m.nrows().max(m.ncols()) as f64);
    let w = svd.solve(&b, eps).expect("svd computed with u and v");
    let res = (m * &w - &b).norm();
    (w.iter().cloned().collect(), res)
}

/// Thin SVD factors of a matrix with numerically zero singular values dropped.
#[derive(Debug, Clone)]
pub struct Pinv {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
}

impl Pinv {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let svd = m.clone().svd(true, true);
        let u_full = svd.u.expect("u requested");
        let vt_full = svd.v_t.expect("v_t requested");
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cutoff = 1e-12 * smax.max(1e-300) * (m.nrows().max(m.ncols()) as f64);
        let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > cutoff).collect();
        let u = DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u_full[(r, keep[c])]);
        let v = DMatrix::from_fn(m.ncols(), keep.len(), |r, c| vt_full[(keep[c], r)]);
        let s = keep.iter().map(|&i| svd.singular_values[i]).collect();
        Self { u, s, v }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Min-norm `x` with `M x ≈ b` (that is `M⁺ b`).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let b = nalgebra::DVector::from_column_slice(b);
        let mut coef = self.u.tr_mul(&b);
        for (c, s) in coef.iter_mut().zip(&self.s) {
            *c /= s;
        }
        (&self.v * coef).iter().cloned().collect()
    }

    /// Min-norm `w` with `Mᵀ w ≈ p`, plus the residual `‖p − Mᵀw‖`.
    pub fn solve_transpose(&self, p: &[f64]) -> (Vec<f64>, f64) {
        let pv = nalgebra::DVector::from_column_slice(p);
        let coef = self.v.tr_mul(&pv);
        let residual = (&pv - &self.v * &coef).norm();
        let mut scaled = coef;
        for (c, s) in scaled.iter_mut().zip(&self.s) {
            *c /= s;
        }
        ((&self.u * scaled).iter().cloned().collect(), residual)
    }
}

/// The consistent linear system `A x = y`, shared between a least-squares
/// penalty and the affine constraint set it defines.
#[derive(Debug)]
pub struct AffineSystem {
    pub map: LinearMap,
    pub rhs: Vec<f64>,
    pinv: OnceLock<Pinv>,
}

impl AffineSystem {
    pub fn new(map: LinearMap, rhs: Vec<f64>) -> Self {
        assert_eq!(map.rows(), rhs.len(), "rhs length must equal the number of rows");
        Self { map, rhs, pinv: OnceLock::new() }
    }

    pub fn dim(&self) -> usize {
        self.map.cols()
    }

    /// Lazily factored; the SVD is only paid for by callers that need it.
    pub fn pinv(&self) -> &Pinv {
        self.pinv.get_or_init(|| Pinv::new(&self.map.to_dense()))
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.map.apply(x);
        for (ri, yi) in r.iter_mut().zip(&self.rhs) {
            *ri -= yi;
        }
        r
    }

    /// Euclidean projection onto `{x : A x = y}`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let corr = self.pinv().solve(&self.residual(x));
        sub(x, &corr)
    }
}

pub type SharedSystem = Arc<AffineSystem>;

/// Serde adapter writing non-finite floats as `null` (JSON has no NaN) and
/// reading `null` back as NaN.
pub mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_svd() {
        let m = DMatrix::<f64>::from_row_slice(3, 2, &[1.0, 2.0, 0.5, -1.0, 3.0, 0.25]);
        let exact = m.clone().svd(false, false).singular_values.max().powi(2);
        let est = LinearMap::Dense(m).spectral_norm_sq(1e-12, 10_000);
        assert!((est - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn min_norm_solve_underdetermined() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (w, res) = min_norm_solve(&m, &[2.0]);
        assert!(res < 1e-12);
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pinv_projection_lands_on_set() {
        let sys = AffineSystem::new(
            LinearMap::Dense(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0])),
            vec![1.0, 2.0],
        );
        let p = sys.project(&[3.0, -1.0, 0.5]);
        assert!(norm(&sys.residual(&p)) < 1e-12);
        // second projection is a no-op
        assert!(dist(&sys.project(&p), &p) < 1e-12);
        let (w, res) = sys.pinv().solve_transpose(&sys.map.apply_transpose(&[0.3, -0.2]));
        assert!(res < 1e-12);
        assert!((w[0] - 0.3).abs() < 1e-12 && (w[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn transpose_dense_consistent() {
        let m = LinearMap::Dense(DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]));
        let x = [0.3, -0.7, 1.1];
        let u = [2.0, -0.5];
        assert!((dot(&m.apply(&x), &u) - dot(&x, &m.apply_transpose(&u))).abs() < 1e-14);
    }
}
