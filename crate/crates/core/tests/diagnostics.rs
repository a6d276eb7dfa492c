use approx::assert_abs_diff_eq;
use penfb::diagnostics::{
    concentration_report, default_delta, dist_to_solution, feasibility_residual, objective_gap, rate_fit, restricted_gap,
};
use penfb::linalg;
use penfb::operators::sample_graph;
use penfb::penalty::ConstraintSpec;
use penfb::problems::{make_basis_pursuit, make_bilevel_quadratic, Design};
use penfb::solver::{run, RecordPlan, SolverOptions};
use penfb::stochastic::{replicate_rng, NoiseModel, Schedule};

fn bilevel_samples(count: usize, delta: f64) -> penfb::operators::GraphSampleSet {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let xs = p.known_solution.clone().unwrap();
    sample_graph(&p.operator, &p.constraint, &xs, delta, count, &mut replicate_rng(17, 0)).unwrap()
}

#[test]
fn gap_at_sample_point_pairs_to_zero() {
    let set = bilevel_samples(1, 0.5);
    let s = &set.samples[0];
    let v = linalg::dot(&s.value, &linalg::sub(&s.point, &s.point));
    assert_eq!(v, 0.0);
    let g = restricted_gap(&s.point, &set).unwrap();
    assert_eq!(g.raw_max, 0.0);
    assert_eq!(g.value, 0.0);
}

#[test]
fn gap_vanishes_at_solution() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let xs = p.known_solution.clone().unwrap();
    let set = bilevel_samples(1000, 0.5);
    let g = restricted_gap(&xs, &set).unwrap();
    assert!(g.value <= 1e-6 * (1.0 + linalg::norm(&xs)), "{g:?}");
    assert_eq!(g.n_samples, 1000);
}

#[test]
fn gap_is_brute_force_max() {
    let set = bilevel_samples(20, 1.0);
    let x = [1.0, 1.0, 49.5, 50.3, 50.0];
    let brute = set.samples.iter().map(|s| linalg::dot(&s.value, &linalg::sub(&x, &s.point))).fold(f64::NEG_INFINITY, f64::max);
    let g = restricted_gap(&x, &set).unwrap();
    assert!((g.raw_max - brute).abs() <= 1e-12);
    assert!((g.value - brute.max(0.0)).abs() <= 1e-12);
}

#[test]
fn gap_grows_with_more_samples() {
    let full = bilevel_samples(200, 1.0);
    let x = [1.2, 0.9, 48.0, 51.0, 50.5];
    let mut prev = f64::NEG_INFINITY;
    for k in [1, 5, 20, 80, 200] {
        let mut sub = full.clone();
        sub.samples.truncate(k);
        let g = restricted_gap(&x, &sub).unwrap().raw_max;
        assert!(g >= prev);
        prev = g;
    }
}

#[test]
fn gap_rejects_bad_inputs() {
    let mut set = bilevel_samples(3, 0.5);
    assert!(restricted_gap(&[0.0; 4], &set).is_err());
    set.samples.clear();
    assert!(restricted_gap(&[0.0; 5], &set).is_err());
}

#[test]
fn default_ball_radius() {
    let c = ConstraintSpec::boxed(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
    assert_eq!(default_delta(&c, &[0.2, 2.0]), Some(0.1));
    assert_eq!(default_delta(&ConstraintSpec::Pin { dim: 3, pinned: 1 }, &[1.0, 0.0, 0.0]), None);
}

#[test]
fn objective_feasibility_distance_values() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let xs = p.known_solution.clone().unwrap();
    assert_eq!(objective_gap(&p, &xs).unwrap(), 0.0);
    assert_eq!(objective_gap(&p, &[50.0; 5]).unwrap(), -98.0);
    assert!(objective_gap(&p, &[1.0, 1.0, 50.0, 50.0, 49.0]).unwrap() > 0.0);
    assert_eq!(feasibility_residual(&p, &xs), 0.0);
    assert_eq!(feasibility_residual(&p, &[1.0, 1.0, 3.0, -2.0, 0.0]), 0.0);
    assert_eq!(dist_to_solution(&p, &xs).unwrap(), 0.0);
    assert_abs_diff_eq!(dist_to_solution(&p, &[0.0; 5]).unwrap(), (2.0f64 + 7500.0).sqrt(), epsilon = 1e-12);
    assert_abs_diff_eq!(dist_to_solution(&p, &[0.0; 5]).unwrap(), 86.6, epsilon = 0.05);

    let chain = make_bilevel_quadratic(4, 3).unwrap();
    assert_eq!(feasibility_residual(&chain, &[0.0; 4]), 0.5);

    let bp = make_basis_pursuit(10, 20, 3, 0.0, 1, Design::Gaussian).unwrap();
    let xt = bp.reference.clone().unwrap();
    assert!(feasibility_residual(&bp, &xt) < 1e-20);
    assert!(dist_to_solution(&bp, &xt).is_err());
    assert!(objective_gap(&bp, &xt).is_err());
}

#[test]
fn rate_fit_exact_power_laws() {
    let ts: Vec<f64> = (0..50).map(|i| 10f64.powf(1.0 + 3.0 * i as f64 / 49.0)).collect();
    let f = rate_fit(&ts.iter().map(|t| (*t, 7.0 / t)).collect::<Vec<_>>()).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-6);
    assert!(f.r_squared > 1.0 - 1e-9);
    assert_eq!(f.n_points, 40);
    let f = rate_fit(&ts.iter().map(|t| (*t, 3.0 / t.sqrt())).collect::<Vec<_>>()).unwrap();
    assert!((f.slope + 0.5).abs() < 1e-6);

    // non-positive values are dropped; too few left is an error
    let mut pts: Vec<(f64, f64)> = ts.iter().map(|t| (*t, -1.0)).collect();
    pts.extend(ts.iter().take(5).map(|t| (*t, 1.0 / t)));
    assert!(rate_fit(&pts).is_err());
}

#[test]
fn concentration_bounds_and_noiseless_case() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let xs = p.known_solution.clone().unwrap();
    let s = Schedule::paper(4.0);
    let trajs: Vec<_> = (0..3)
        .map(|r| run(&p, &s, &NoiseModel::off(5), &SolverOptions::default(), 2000, &mut replicate_rng(1, r), &RecordPlan::default(), None).unwrap())
        .collect();
    let rep = concentration_report(&p, &trajs, &xs, &[2.0, 3.0]).unwrap();
    assert_abs_diff_eq!(rep.rows[0].bound, 0.3679, epsilon = 1e-4);
    assert_abs_diff_eq!(rep.rows[1].bound, 0.1054, epsilon = 1e-4);
    assert!(rep.q1.iter().all(|q| *q == 0.0));
    assert!(trajs.iter().all(|t| t.final_state.delta_acc == 0.0 && t.final_state.c_acc == 0.0));
    // deterministic: every replicate is identical, so the fraction is 0 or 1
    for row in &rep.rows {
        assert!(row.exceed_fraction == 0.0 || row.exceed_fraction == 1.0);
    }
    let expect = if rep.gaps[0] >= rep.q0[0] { 1.0 } else { 0.0 };
    assert_eq!(rep.rows[0].exceed_fraction, expect);

    assert!(concentration_report(&p, &[], &xs, &[2.0]).is_err());
}

#[test]
fn concentration_with_noise_counts_exceedances() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let xs = p.known_solution.clone().unwrap();
    let s = Schedule::paper(4.0);
    let noise = NoiseModel::asv(0.5, 0.75, 5).unwrap();
    let trajs: Vec<_> = (0..40)
        .map(|r| run(&p, &s, &noise, &SolverOptions::default(), 3000, &mut replicate_rng(2, r), &RecordPlan::default(), None).unwrap())
        .collect();
    let rep = concentration_report(&p, &trajs, &xs, &[0.0, 2.0]).unwrap();
    assert_eq!(rep.n_replicates, 40);
    assert!(rep.q1.iter().all(|q| *q > 0.0));
    for row in &rep.rows {
        let hits = (0..40).filter(|&i| rep.gaps[i] >= rep.q0[i] + row.epsilon * rep.q1[i]).count();
        assert_eq!(row.exceed_fraction, hits as f64 / 40.0);
    }
    assert!(rep.rows[1].exceed_fraction <= rep.rows[0].exceed_fraction);
}
