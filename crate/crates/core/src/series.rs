//! Least-squares line fits and tail-decay classification of nonnegative series.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`. Needs at least two distinct x.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Inconclusive,
}

impl Verdict {
    /// Combining per-sample verdicts: any violation dominates, then inconclusive.
    pub fn worst(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Satisfied,
        }
    }
}

/// Decay exponent `s` of `terms[n-1] ~ n^{-s}` fitted over the last decade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailDecay {
    pub exponent: Option<f64>,
    pub verdict: Verdict,
}

pub const SUMMABLE_EXPONENT: f64 = 1.05;

/// Heuristic summability test. Terms are indexed from n = 1.
/// Exponent > 1.05 → satisfied, ≤ 1 → violated (partial sums grow at least
/// logarithmically), otherwise inconclusive. An identically zero tail is summable.
pub fn classify_tail(terms: &[f64]) -> TailDecay {
    let n = terms.len();
    if n == 0 {
        return TailDecay { exponent: None, verdict: Verdict::Inconclusive };
    }
    if terms.iter().any(|t| !t.is_finite()) {
        return TailDecay { exponent: None, verdict: Verdict::Violated };
    }
    let start = (n / 10).max(1);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, &t) in terms.iter().enumerate().skip(start - 1) {
        if t > 0.0 {
            xs.push(((i + 1) as f64).ln());
            ys.push(t.ln());
        }
    }
    if xs.is_empty() {
        return TailDecay { exponent: None, verdict: Verdict::Satisfied };
    }
    let Some(fit) = fit_line(&xs, &ys) else {
        return TailDecay { exponent: None, verdict: Verdict::Inconclusive };
    };
    let s = -fit.slope;
    let verdict = if s > SUMMABLE_EXPONENT {
        Verdict::Satisfied
    } else if s <= 1.0 + 1e-6 {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    };
    TailDecay { exponent: Some(s), verdict }
}
