use penfb::linalg;
use penfb::operators::MonotoneOp;
use penfb::penalty::{ConstraintSpec, LipschitzChoice, PenaltyFn};
use penfb::problems::{make_bilevel_quadratic, ProblemInstance, ProblemMeta};
use penfb::solver::{cesaro_update, run, step, RecordPlan, SolverOptions, SolverState, Workspace};
use penfb::stochastic::{replicate_rng, BetaForm, LambdaForm, NoiseModel, Schedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn paper_schedule(p: &ProblemInstance) -> Schedule {
    Schedule::paper(p.penalty.lipschitz(LipschitzChoice::Spectral))
}

#[test]
fn deterministic_bilevel_reaches_solution() {
    // from X₀ = 0 the free coordinates travel 50 while tₙ ≈ 4n^{1/4}: 10⁵ steps give t ≈ 64
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let tr = run(&p, &paper_schedule(&p), &NoiseModel::off(5), &SolverOptions::default(), 100_000, &mut replicate_rng(1, 0), &RecordPlan::every(1000), None)
        .unwrap();
    assert!(tr.divergence.is_none());
    let d = p.dist_to_solution(&tr.final_state.x).unwrap();
    assert!(d < 0.1, "dist {d}");
    assert_eq!(tr.records.first().unwrap().n, 0);
    assert_eq!(tr.records.last().unwrap().n, 100_000);
}

#[test]
fn noisy_bilevel_median_distance_decreases() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let s = paper_schedule(&p);
    let noise = NoiseModel::asv(0.5, 0.75, 5).unwrap();
    let plan = RecordPlan { steps: vec![1_000, 10_000, 100_000], ..Default::default() };
    let mut at: [Vec<f64>; 3] = Default::default();
    for seed in 0..20 {
        let tr = run(&p, &s, &noise, &SolverOptions::default(), 100_000, &mut replicate_rng(42, seed), &plan, None).unwrap();
        for (k, n) in [1_000u64, 10_000, 100_000].iter().enumerate() {
            let r = tr.records.iter().find(|r| r.n == *n).unwrap();
            at[k].push(r.dist);
        }
    }
    let med: Vec<f64> = at.into_iter().map(median).collect();
    assert!(med[0] > med[1] && med[1] > med[2], "{med:?}");
}

#[test]
fn feasibility_improves_in_most_runs() {
    let p = make_bilevel_quadratic(20, 5).unwrap();
    let s = paper_schedule(&p);
    let noise = NoiseModel::asv(0.5, 0.75, 20).unwrap();
    let psi0 = p.feasibility_residual(&p.initial_point());
    let mut improved = 0;
    for seed in 0..50 {
        let tr = run(&p, &s, &noise, &SolverOptions::default(), 100_000, &mut replicate_rng(7, seed), &RecordPlan::default(), None).unwrap();
        if tr.records.last().unwrap().psi < psi0 / 100.0 {
            improved += 1;
        }
    }
    assert!(improved >= 45, "{improved}/50");
}

#[test]
fn cesaro_recursion_matches_direct_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 4;
    let xs: Vec<(Vec<f64>, f64)> =
        (0..1000).map(|_| ((0..d).map(|_| rng.random_range(-10.0..10.0)).collect(), rng.random_range(0.01..2.0))).collect();
    let (mut bar, mut w) = (vec![0.0; d], 0.0);
    for (x, l) in &xs {
        (bar, w) = cesaro_update(&bar, w, x, *l);
    }
    let total: f64 = xs.iter().map(|p| p.1).sum();
    for i in 0..d {
        let direct = xs.iter().map(|(x, l)| l * x[i]).sum::<f64>() / total;
        assert!((bar[i] - direct).abs() < 1e-12, "{} vs {direct}", bar[i]);
    }
    assert!((w - total).abs() < 1e-9);

    let (bar, _) = cesaro_update(&[1.0], 1.0, &[2.0], 3.0);
    assert_eq!(bar, vec![1.75]);
}

#[test]
fn run_bookkeeping() {
    let p = make_bilevel_quadratic(5, 2).unwrap();
    let s = paper_schedule(&p);
    let noise = NoiseModel::asv(0.5, 0.75, 5).unwrap();
    let opts = SolverOptions::default();
    assert!(run(&p, &s, &noise, &opts, 0, &mut replicate_rng(0, 0), &RecordPlan::every(1), None).is_err());

    let tr = run(&p, &s, &noise, &opts, 1, &mut replicate_rng(0, 0), &RecordPlan::every(0), None).unwrap();
    assert_eq!(tr.records.iter().map(|r| r.n).collect::<Vec<_>>(), vec![0, 1]);
    let (l0, _) = s.eval(0);
    assert_eq!(tr.final_state.t, l0);
    assert_eq!(tr.final_state.sum_lambda, l0);
    // c accumulates ½ s(0)² d λ₀ with the left-endpoint rule; δ starts from Z₀ = X₀
    let expect_c = 0.5 * noise.scale_at(0.0).powi(2) * 5.0 * l0;
    assert!((tr.final_state.c_acc - expect_c).abs() < 1e-15);
    assert_eq!(tr.final_state.delta_acc, 0.0);

    let plan = RecordPlan { every: 0, snapshot_steps: vec![3, 7], times: vec![0.5], store_x: true, ..Default::default() };
    let tr = run(&p, &s, &noise, &opts, 10, &mut replicate_rng(0, 0), &plan, None).unwrap();
    assert_eq!(tr.snapshots.iter().map(|s| s.n).collect::<Vec<_>>(), vec![3, 7]);
    assert!(tr.records.iter().all(|r| r.x.is_some()));
    let first_after = tr.records.iter().find(|r| r.n > 0 && r.n < 10).unwrap();
    assert!(first_after.t >= 0.5);
}

#[test]
fn same_seed_same_trajectory() {
    let p = make_bilevel_quadratic(8, 3).unwrap();
    let s = paper_schedule(&p);
    let noise = NoiseModel::ubv(0.2, 8).unwrap();
    let plan = RecordPlan::every(50);
    let a = run(&p, &s, &noise, &SolverOptions::default(), 2000, &mut replicate_rng(5, 2), &plan, None).unwrap();
    let b = run(&p, &s, &noise, &SolverOptions::default(), 2000, &mut replicate_rng(5, 2), &plan, None).unwrap();
    let c = run(&p, &s, &noise, &SolverOptions::default(), 2000, &mut replicate_rng(5, 3), &plan, None).unwrap();
    assert_eq!(format!("{:?}", a.final_state), format!("{:?}", b.final_state));
    assert_ne!(a.final_state.x, c.final_state.x);
}

#[test]
fn divergence_is_reported_with_last_finite_state() {
    // λβ = 3 > 2/L on Ψ = ½‖x‖²: the iterate grows by a factor 2 each step
    let d = 2;
    let p = ProblemInstance {
        operator: MonotoneOp::Zero { dim: d },
        penalty: PenaltyFn::half_squared_distance_to_box(vec![0.0; d], vec![0.0; d]).unwrap(),
        constraint: ConstraintSpec::boxed(vec![0.0; d], vec![0.0; d]).unwrap(),
        phi_min: None,
        known_solution: None,
        witness: None,
        reference: None,
        x0: Some(vec![1.0, -1.0]),
        meta: ProblemMeta { name: "toy".into(), dim: d, rows: None, seed: None },
    };
    let s = Schedule { beta: BetaForm::Constant { value: 1.0 }, lambda: LambdaForm::Constant { value: 3.0 }, l_scale: 1.0, l_rule: 1.0 };
    let tr = run(&p, &s, &NoiseModel::off(d), &SolverOptions::default(), 1000, &mut replicate_rng(0, 0), &RecordPlan::every(1), None).unwrap();
    let div = tr.divergence.as_ref().expect("must diverge");
    assert!(div.n < 1000);
    assert!(linalg::all_finite(&tr.final_state.x));
    assert!(linalg::norm(&tr.final_state.x) <= 1e12);
    assert_eq!(tr.final_state.n, div.n);
}

#[test]
fn single_step_matches_hand_computation() {
    // A = ∂|·|, feasible start: one step is a soft threshold of 5 by λ = 1
    let p = ProblemInstance {
        operator: MonotoneOp::L1 { dim: 1 },
        penalty: PenaltyFn::half_squared_distance_to_box(vec![0.0], vec![10.0]).unwrap(),
        constraint: ConstraintSpec::boxed(vec![0.0], vec![10.0]).unwrap(),
        phi_min: None,
        known_solution: None,
        witness: None,
        reference: None,
        x0: Some(vec![5.0]),
        meta: ProblemMeta { name: "toy".into(), dim: 1, rows: None, seed: None },
    };
    let s = Schedule { beta: BetaForm::Constant { value: 1.0 }, lambda: LambdaForm::Constant { value: 1.0 }, l_scale: 1.0, l_rule: 1.0 };
    let mut st = SolverState::new(vec![5.0]);
    let mut ws = Workspace::new(&p);
    step(&mut st, &p, &s, &NoiseModel::off(1), &SolverOptions::default(), &mut replicate_rng(0, 0), &mut ws).unwrap();
    assert_eq!(st.x, vec![4.0]);
    assert_eq!(st.n, 1);
    assert_eq!(st.t, 1.0);
}

#[test]
fn minibatch_and_uniform_weights_run() {
    let p = penfb::problems::make_basis_pursuit(20, 40, 3, 0.0, 9, penfb::problems::Design::Gaussian).unwrap();
    let s = Schedule::power_product(1.0, 0.75, 10.0, 0.1, p.penalty.l_spectral);
    let opts = SolverOptions { batch_size: Some(4), uniform_cesaro: true, beta_scales_noise: false };
    let tr = run(&p, &s, &NoiseModel::off(40), &opts, 3000, &mut replicate_rng(1, 0), &RecordPlan::every(500), None).unwrap();
    assert!(tr.divergence.is_none());
    assert_eq!(tr.final_state.sum_weight, 3000.0);
    let first = tr.records.first().unwrap().psi;
    assert!(tr.records.last().unwrap().psi < first);
    let bad = SolverOptions { batch_size: Some(0), ..opts };
    assert!(run(&p, &s, &NoiseModel::off(40), &bad, 10, &mut replicate_rng(1, 0), &RecordPlan::every(5), None).is_err());
}
