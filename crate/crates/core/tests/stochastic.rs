use std::sync::Arc;

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use penfb::linalg::{self, AffineSystem, LinearMap};
use penfb::penalty::PenaltyFn;
use penfb::series::Verdict;
use penfb::stochastic::{
    brownian_increment, check_noise_summability, diffusion_apply, mean_var, minibatch_gradient, replicate_rng,
    sample_batch, NoiseModel, Schedule, StochasticError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(m: usize, d: usize) -> Arc<AffineSystem> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let a = DMatrix::from_fn(m, d, |_, _| rng.random_range(-1.0..1.0));
    let y = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    Arc::new(AffineSystem::new(LinearMap::Dense(a), y))
}

#[test]
fn brownian_increments() {
    let mut rng = replicate_rng(1, 0);
    assert_eq!(brownian_increment(&mut rng, 0.0, 4).unwrap(), vec![0.0; 4]);
    assert_eq!(brownian_increment(&mut rng, -0.1, 4), Err(StochasticError::NegativeDt(-0.1)));

    let draws = brownian_increment(&mut rng, 0.25, 100_000).unwrap();
    let (mean, var) = mean_var(&draws);
    // 5 standard errors
    assert!(mean.abs() < 5.0 * (0.25f64 / 1e5).sqrt(), "mean {mean}");
    assert!((var - 0.25).abs() < 5.0 * 0.25 * (2.0f64 / 1e5).sqrt(), "var {var}");
}

#[test]
fn replicate_streams_are_deterministic_and_distinct() {
    let a = brownian_increment(&mut replicate_rng(9, 3), 1.0, 8).unwrap();
    let b = brownian_increment(&mut replicate_rng(9, 3), 1.0, 8).unwrap();
    let c = brownian_increment(&mut replicate_rng(9, 4), 1.0, 8).unwrap();
    let d = brownian_increment(&mut replicate_rng(10, 3), 1.0, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
}

#[test]
fn diffusion_regimes() {
    let ubv = NoiseModel::ubv(0.3, 2).unwrap();
    let s = diffusion_apply(&ubv, 123.0, &[5.0, 5.0], &[2.0, 0.0]).unwrap();
    assert_relative_eq!(s[0], 0.6, max_relative = 1e-15);
    assert_eq!(s[1], 0.0);

    let asv = NoiseModel::asv(0.5, 0.75, 4).unwrap();
    let t = 15.0;
    let expect = 0.5 * 16f64.powf(-0.75);
    assert_relative_eq!(asv.scale_at(t), expect, max_relative = 1e-14);
    let out = diffusion_apply(&asv, t, &[0.0; 4], &[1.0; 4]).unwrap();
    // Frobenius norm of s(t)·I equals the envelope
    assert_relative_eq!(linalg::norm(&out), asv.envelope(t), max_relative = 1e-14);

    let off = NoiseModel::off(3);
    assert_eq!(diffusion_apply(&off, 0.0, &[1.0; 3], &[4.0; 3]).unwrap(), vec![0.0; 3]);
    assert!(diffusion_apply(&off, 0.0, &[1.0; 2], &[4.0; 3]).is_err());

    assert!(NoiseModel::asv(1.0, 0.5, 3).is_err());
    assert!(NoiseModel::asv(1.0, 0.2, 3).is_err());
    assert!(NoiseModel::ubv(-1.0, 3).is_err());
}

#[test]
fn minibatch_gradient_properties() {
    let psi = PenaltyFn::least_squares(system(6, 4));
    let x = [0.3, -1.0, 2.0, 0.5];
    let full = psi.gradient(&x).unwrap();
    let all: Vec<usize> = (0..6).collect();
    let g = minibatch_gradient(&psi, &all, &x).unwrap();
    for (a, b) in g.iter().zip(&full) {
        assert!((a - b).abs() < 1e-12);
    }

    // average over every batch of size 3 is unbiased
    let mut sum = vec![0.0; 4];
    let mut count = 0.0;
    for i in 0..6 {
        for j in i + 1..6 {
            for k in j + 1..6 {
                let g = minibatch_gradient(&psi, &[i, j, k], &x).unwrap();
                linalg::axpy(1.0, &g, &mut sum);
                count += 1.0;
            }
        }
    }
    for (s, f) in sum.iter().zip(&full) {
        assert!((s / count - f).abs() < 1e-12);
    }

    // zero residual gives zero gradient for any batch
    let under = system(3, 4);
    let psi_u = PenaltyFn::least_squares(under.clone());
    let x0 = under.project(&[0.0; 4]);
    let g = minibatch_gradient(&psi_u, &[0, 2], &x0).unwrap();
    assert!(linalg::norm(&g) < 1e-10);

    assert!(minibatch_gradient(&psi, &[], &x).is_err());
    assert!(minibatch_gradient(&psi, &[6], &x).is_err());
    assert!(minibatch_gradient(&PenaltyFn::chained_quadratic(4, 2).unwrap(), &[0], &x).is_err());
}

#[test]
fn batches_are_distinct_rows() {
    let mut rng = replicate_rng(5, 0);
    let mut perm: Vec<usize> = (0..10).collect();
    let mut hits = [0usize; 10];
    for _ in 0..5000 {
        sample_batch(&mut rng, &mut perm, 3);
        let mut b = perm[..3].to_vec();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 3);
        for &j in &b {
            hits[j] += 1;
        }
    }
    // each row is picked with probability 3/10
    for h in hits {
        assert!((h as f64 / 5000.0 - 0.3).abs() < 0.03, "{hits:?}");
    }
}

#[test]
fn schedules() {
    let s = Schedule::paper(1.0);
    let (l0, b0) = s.eval(0);
    assert_relative_eq!(b0, 10f64.powf(0.75), max_relative = 1e-14);
    assert_relative_eq!(b0, 5.6234, max_relative = 1e-4);
    assert_relative_eq!(l0 * b0, 1.0, max_relative = 1e-14);
    assert!(s.validate(100_000, true).is_ok());
    for n in [1, 10, 1000] {
        assert!(s.beta_n(n) > s.beta_n(n - 1));
    }

    let bad = Schedule::power_product(1.0, 0.75, 10.0, 3.0, 1.0);
    let errs = bad.validate(10, true).unwrap_err();
    assert!(matches!(errs[0], StochasticError::StepRule { n: 0, .. }));
    assert!(bad.validate(10, false).is_ok());
    assert!(Schedule::power_product(-1.0, 0.75, 10.0, 1.0, 1.0).validate(10, true).is_err());
    assert!(Schedule::power_product(1.0, -0.5, 10.0, 1.0, 1.0).validate(10, true).is_err());
}

#[test]
fn noise_summability_verdicts() {
    let s = Schedule::paper(4.0);
    let asv = NoiseModel::asv(0.5, 0.75, 20).unwrap();
    assert_eq!(check_noise_summability(&s, &asv, 100_000).verdict, Verdict::Satisfied);
    let off = NoiseModel::off(20);
    assert_eq!(check_noise_summability(&s, &off, 10_000).verdict, Verdict::Satisfied);
    // constant steps with constant noise are not summable
    let flat = Schedule::power_product(1.0, 0.0, 10.0, 1.0, 4.0);
    let ubv = NoiseModel::ubv(0.1, 20).unwrap();
    assert_eq!(check_noise_summability(&flat, &ubv, 100_000).verdict, Verdict::Violated);
}
