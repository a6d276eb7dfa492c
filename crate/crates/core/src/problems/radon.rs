//! Parallel-beam Radon projector with exact pixel intersection lengths.
//!
//! The image occupies the square [−n/2, n/2]² with unit pixels; pixel
//! (row i, column j) covers y ∈ [i − n/2, i + 1 − n/2], x ∈ [j − n/2, j + 1 − n/2]
//! and has index i·n + j. The ray for (θ, t) is {t·(−sin θ, cos θ) + s·(cos θ, sin θ)}.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::CsrMatrix;

const PARALLEL_EPS: f64 = 1e-15;

/// Parameter interval [s_lo, s_hi] of the ray inside the image square (Liang–Barsky).
pub fn clip_to_square(angle: f64, offset: f64, side: usize) -> Option<(f64, f64)> {
    let (s, c) = angle.sin_cos();
    let h = side as f64 / 2.0;
    let (px, py) = (-offset * s, offset * c);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (p, dir) in [(px, c), (py, s)] {
        if dir.abs() < PARALLEL_EPS {
            if p < -h || p > h {
                return None;
            }
        } else {
            let (a, b) = ((-h - p) / dir, (h - p) / dir);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (hi > lo).then_some((lo, hi))
}

/// Sparse row of (pixel index, intersection length) for one ray, sorted by index.
pub fn radon_row(angle: f64, detector_offset: f64, image_side: usize) -> Vec<(usize, f64)> {
    let n = image_side;
    let Some((lo, hi)) = clip_to_square(angle, detector_offset, n) else {
        return Vec::new();
    };
    let (s, c) = angle.sin_cos();
    let h = n as f64 / 2.0;
    let (px, py) = (-detector_offset * s, detector_offset * c);
    let mut cuts = Vec::with_capacity(2 * n + 4);
    cuts.push(lo);
    cuts.push(hi);
    for (p, dir) in [(px, c), (py, s)] {
        if dir.abs() >= PARALLEL_EPS {
            for k in 0..=n {
                let u = (-h + k as f64 - p) / dir;
                if u > lo && u < hi {
                    cuts.push(u);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-14 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let (x, y) = (px + mid * c, py + mid * s);
        let i = ((y + h).floor().max(0.0) as usize).min(n - 1);
        let j = ((x + h).floor().max(0.0) as usize).min(n - 1);
        entries.push((i * n + j, len));
    }
    entries.sort_by_key(|e| e.0);
    // merge repeats (possible only for rays running along grid lines)
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (idx, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == idx => last.1 += w,
            _ => merged.push((idx, w)),
        }
    }
    merged
}

pub fn angles(n_angles: usize) -> Vec<f64> {
    (0..n_angles).map(|a| PI * a as f64 / n_angles as f64).collect()
}

/// Detector offsets equispaced across the image diagonal.
pub fn detector_offsets(image_side: usize, n_detectors: usize) -> Vec<f64> {
    let span = image_side as f64 * 2f64.sqrt();
    (0..n_detectors).map(|k| -span / 2.0 + (k as f64 + 0.5) * span / n_detectors as f64).collect()
}

/// Row a·K + k holds the ray (angle a, detector k).
pub fn radon_matrix(image_side: usize, n_angles: usize, n_detectors: usize) -> CsrMatrix {
    let th = angles(n_angles);
    let ts = detector_offsets(image_side, n_detectors);
    let rows: Vec<Vec<(usize, f64)>> = (0..n_angles * n_detectors)
        .into_par_iter()
        .map(|r| radon_row(th[r / n_detectors], ts[r % n_detectors], image_side))
        .collect();
    CsrMatrix::from_rows(image_side * image_side, &rows).expect("ray weights are finite and in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phantom {
    Blocks,
    SheppLoganLike,
    Zero,
    /// Centered disk of radius side/4, used for rotation sanity checks.
    Disk,
}

/// Row-major image (index i·n + j) for the given phantom.
pub fn phantom_image(kind: Phantom, side: usize) -> Vec<f64> {
    let n = side;
    let mut img = vec![0.0; n * n];
    let f = n as f64 / 32.0;
    let sc = |v: usize| ((v as f64) * f).round() as usize;
    match kind {
        Phantom::Zero => {}
        Phantom::Blocks => {
            // three rectangles: (rows, cols, value), laid out on a 32-pixel reference grid
            for (r0, r1, c0, c1, v) in [(8, 14, 6, 20, 1.0), (18, 26, 12, 18, 0.5), (20, 24, 22, 28, 0.8)] {
                for i in sc(r0)..sc(r1).min(n) {
                    for j in sc(c0)..sc(c1).min(n) {
                        img[i * n + j] = v;
                    }
                }
            }
        }
        Phantom::SheppLoganLike => {
            // (value, semi-axis a, semi-axis b, center x, center y, rotation degrees) in [-1,1]² units
            let ellipses = [
                (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
                (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
                (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
                (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
                (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
                (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
            ];
            for i in 0..n {
                for j in 0..n {
                    let x = (j as f64 + 0.5) / n as f64 * 2.0 - 1.0;
                    let y = (i as f64 + 0.5) / n as f64 * 2.0 - 1.0;
                    let mut v = 0.0;
                    for (val, a, b, cx, cy, deg) in ellipses {
                        let (s, c) = f64::to_radians(deg).sin_cos();
                        let (dx, dy) = (x - cx, y - cy);
                        let (u, w) = (c * dx + s * dy, -s * dx + c * dy);
                        if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
                            v += val;
                        }
                    }
                    img[i * n + j] = v;
                }
            }
        }
        Phantom::Disk => {
            let r = n as f64 / 4.0;
            let h = n as f64 / 2.0;
            // supersampled coverage so the sinogram is nearly rotation invariant
            let ss = 8;
            for i in 0..n {
                for j in 0..n {
                    let mut hits = 0;
                    for a in 0..ss {
                        for b in 0..ss {
                            let x = j as f64 + (b as f64 + 0.5) / ss as f64 - h;
                            let y = i as f64 + (a as f64 + 0.5) / ss as f64 - h;
                            if x * x + y * y <= r * r {
                                hits += 1;
                            }
                        }
                    }
                    img[i * n + j] = hits as f64 / (ss * ss) as f64;
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned_rows() {
        let n = 8;
        // angle 0: horizontal ray at height t through the middle of pixel row 5
        let row = radon_row(0.0, 5.0 + 0.5 - 4.0, n);
        assert_eq!(row.len(), n);
        assert!(row.iter().all(|(idx, w)| idx / n == 5 && (w - 1.0).abs() < 1e-12));
        // angle π/2: vertical ray; offset t maps to x = −t
        let row = radon_row(PI / 2.0, -(2.0 + 0.5 - 4.0), n);
        assert_eq!(row.len(), n);
        assert!(row.iter().all(|(idx, w)| idx % n == 2 && (w - 1.0).abs() < 1e-12));
        let total: f64 = row.iter().map(|e| e.1).sum();
        assert!((total - n as f64).abs() < 1e-12);
    }

    #[test]
    fn misses_outside() {
        assert!(radon_row(0.3, 100.0, 8).is_empty());
    }

    #[test]
    fn desk_shape() {
        let a = radon_matrix(32, 16, 48);
        assert_eq!((a.rows(), a.cols()), (768, 1024));
        assert!(a.values().iter().all(|v| *v > 0.0));
    }
}
