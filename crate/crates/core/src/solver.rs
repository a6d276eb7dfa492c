//! The penalty-regulated stochastic forward-backward iteration
//!
//!   Vₙ₊₁ = βₙ∇Ψ(Xₙ) + σ(tₙ)ΔWₙ₊₁,   Xₙ₊₁ = (I + λₙA)⁻¹(Xₙ − λₙVₙ₊₁),
//!
//! with ΔWₙ₊₁ ~ N(0, λₙI), plus the partition-driven Euler–Maruyama variant
//! used for mesh-refinement studies.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::restricted_gap;
use crate::linalg;
use crate::operators::GraphSampleSet;
use crate::problems::ProblemInstance;
use crate::stochastic::{brownian_increment_into, minibatch_gradient_into, sample_batch, NoiseModel, Schedule};

/// ‖Xₙ‖ above this counts as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Error, Clone)]
pub enum SolverError {
    #[error("iterate diverged at step {n}: {reason}")]
    Diverged { n: u64, reason: String, last_state: Box<SolverState> },
    #[error("invalid solver input: {0}")]
    Input(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Use V = β(∇Ψ + σΔW) instead of V = β∇Ψ + σΔW.
    pub beta_scales_noise: bool,
    /// Cesàro weights 1 instead of λₙ.
    pub uniform_cesaro: bool,
    /// Minibatch size for least-squares penalties; None = full gradient.
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub n: u64,
    /// tₙ = Σ_{i<n} λᵢ
    pub t: f64,
    pub x: Vec<f64>,
    pub x_bar: Vec<f64>,
    /// Zₙ = X₀ − Σ σ(tᵢ)ΔWᵢ₊₁
    pub z_aux: Vec<f64>,
    pub sum_lambda: f64,
    /// Total Cesàro weight (equals `sum_lambda` unless uniform weights are used).
    pub sum_weight: f64,
    /// c(t) = ½Σ‖σ(tᵢ)‖²_F λᵢ
    pub c_acc: f64,
    /// δ(t) = Σ Σ(tᵢ)²‖Zᵢ − Xᵢ‖² λᵢ
    pub delta_acc: f64,
}

impl SolverState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            n: 0,
            t: 0.0,
            x_bar: x0.clone(),
            z_aux: x0.clone(),
            x: x0,
            sum_lambda: 0.0,
            sum_weight: 0.0,
            c_acc: 0.0,
            delta_acc: 0.0,
        }
    }
}

/// Weighted running mean: returns (x̄', W') with x̄' = (W x̄ + w x)/(W + w).
pub fn cesaro_update(x_bar: &[f64], sum_weight: f64, x_new: &[f64], weight: f64) -> (Vec<f64>, f64) {
    let mut out = x_bar.to_vec();
    let w = cesaro_update_in_place(&mut out, sum_weight, x_new, weight);
    (out, w)
}

pub fn cesaro_update_in_place(x_bar: &mut [f64], sum_weight: f64, x_new: &[f64], weight: f64) -> f64 {
    let total = sum_weight + weight;
    if total > 0.0 {
        let r = weight / total;
        for (b, x) in x_bar.iter_mut().zip(x_new) {
            *b += r * (x - *b);
        }
    }
    total
}

/// Scratch buffers so that `step` does not allocate.
#[derive(Debug, Clone)]
pub struct Workspace {
    grad: Vec<f64>,
    work: Vec<f64>,
    dw: Vec<f64>,
    next: Vec<f64>,
    perm: Vec<usize>,
}

impl Workspace {
    pub fn new(problem: &ProblemInstance) -> Self {
        let d = problem.dim();
        let rows = problem.meta.rows.unwrap_or(0);
        Self { grad: vec![0.0; d], work: vec![0.0; rows], dw: vec![0.0; d], next: vec![0.0; d], perm: (0..rows).collect() }
    }
}

pub fn validate_inputs(
    problem: &ProblemInstance,
    noise: &NoiseModel,
    opts: &SolverOptions,
    x0: &[f64],
) -> Result<(), SolverError> {
    let d = problem.dim();
    if x0.len() != d {
        return Err(SolverError::Input(format!("initial point has dimension {}, expected {d}", x0.len())));
    }
    if !linalg::all_finite(x0) {
        return Err(SolverError::Input("initial point is not finite".into()));
    }
    if !noise.is_off() && noise.dim != d {
        return Err(SolverError::Input(format!("noise dimension {} differs from problem dimension {d}", noise.dim)));
    }
    noise.validate().map_err(|e| SolverError::Input(e.to_string()))?;
    if let Some(b) = opts.batch_size {
        let rows = problem.meta.rows.unwrap_or(0);
        if !matches!(problem.penalty.kind, crate::penalty::PenaltyKind::LeastSquares(_)) {
            return Err(SolverError::Input("minibatching requires a least-squares penalty".into()));
        }
        if b == 0 || b > rows {
            return Err(SolverError::Input(format!("batch size {b} must be in 1..={rows}")));
        }
    }
    Ok(())
}

/// One iteration. On divergence the state is left untouched (it is the last
/// finite state) and a copy travels with the error.
pub fn step<R: Rng + ?Sized>(
    state: &mut SolverState,
    problem: &ProblemInstance,
    schedule: &Schedule,
    noise: &NoiseModel,
    opts: &SolverOptions,
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<(), SolverError> {
    let (lambda, beta) = schedule.eval(state.n);
    match opts.batch_size {
        Some(b) => {
            sample_batch(rng, &mut ws.perm, b);
            minibatch_gradient_into(&problem.penalty, &ws.perm[..b], &state.x, &mut ws.grad)
                .map_err(|e| SolverError::Input(e.to_string()))?;
        }
        None => problem.penalty.gradient_into(&state.x, &mut ws.grad, &mut ws.work),
    }
    let s = noise.scale_at(state.t);
    let noisy = !noise.is_off();
    if noisy {
        brownian_increment_into(rng, lambda, &mut ws.dw).map_err(|e| SolverError::Input(e.to_string()))?;
    }
    for i in 0..ws.next.len() {
        let db = if noisy { s * ws.dw[i] } else { 0.0 };
        let v = if opts.beta_scales_noise { beta * (ws.grad[i] + db) } else { beta * ws.grad[i] + db };
        ws.next[i] = state.x[i] - lambda * v;
    }
    problem.operator.resolvent_in_place(lambda, &mut ws.next);

    if !linalg::all_finite(&ws.next) {
        return Err(SolverError::Diverged { n: state.n, reason: "non-finite iterate".into(), last_state: Box::new(state.clone()) });
    }
    let nrm = linalg::norm(&ws.next);
    if nrm > DIVERGENCE_NORM {
        return Err(SolverError::Diverged {
            n: state.n,
            reason: format!("‖X‖ = {nrm:.3e} exceeds {DIVERGENCE_NORM:.0e}"),
            last_state: Box::new(state.clone()),
        });
    }

    // Left-endpoint quadrature for the running averages and accumulators.
    let weight = if opts.uniform_cesaro { 1.0 } else { lambda };
    state.sum_weight = cesaro_update_in_place(&mut state.x_bar, state.sum_weight, &state.x, weight);
    if noisy {
        let frob_sq = s * s * noise.dim as f64;
        state.c_acc += 0.5 * frob_sq * lambda;
        state.delta_acc += frob_sq * linalg::dist_sq(&state.z_aux, &state.x) * lambda;
        for (z, w) in state.z_aux.iter_mut().zip(&ws.dw) {
            *z -= s * w;
        }
    }
    std::mem::swap(&mut state.x, &mut ws.next);
    state.n += 1;
    state.t += lambda;
    state.sum_lambda += lambda;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: u64,
    #[serde(with = "linalg::nan_as_null")]
    pub t: f64,
    #[serde(with = "linalg::nan_as_null")]
    pub psi: f64,
    /// Φ(Xₙ), NaN when A has no potential.
    #[serde(with = "linalg::nan_as_null")]
    pub objective: f64,
    /// Distance to the known solution, or to the reference point if no solution is known.
    #[serde(with = "linalg::nan_as_null")]
    pub dist: f64,
    /// Sampled restricted gap at the Cesàro average, NaN when no samples were supplied.
    #[serde(with = "linalg::nan_as_null")]
    pub gap_estimate: f64,
    /// Φ(X̄ₙ).
    #[serde(with = "linalg::nan_as_null")]
    pub x_bar_objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    pub t: f64,
    pub x: Vec<f64>,
    pub x_bar: Vec<f64>,
}

/// Which steps get a record. Step 0 and the final step are always recorded.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordPlan {
    /// Record every k-th step (0 disables).
    pub every: u64,
    /// Extra steps to record.
    pub steps: Vec<u64>,
    /// Record the first step whose time tₙ reaches each of these.
    pub times: Vec<f64>,
    /// Steps at which full x and x̄ snapshots are kept.
    pub snapshot_steps: Vec<u64>,
    /// Keep x inside every record.
    pub store_x: bool,
}

impl RecordPlan {
    pub fn every(k: u64) -> Self {
        Self { every: k, ..Default::default() }
    }

    /// `count` log-spaced times in [t_lo, t_hi].
    pub fn log_times(t_lo: f64, t_hi: f64, count: usize) -> Vec<f64> {
        let (a, b) = (t_lo.ln(), t_hi.ln());
        (0..count).map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub n: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x0: Vec<f64>,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SolverState,
    pub divergence: Option<Divergence>,
    pub seed: Option<u64>,
    pub replicate: Option<u64>,
    pub config_hash: Option<String>,
}

fn make_record(problem: &ProblemInstance, state: &SolverState, gap: Option<&GraphSampleSet>, store_x: bool) -> Record {
    let dist = problem
        .known_solution
        .as_ref()
        .or(problem.reference.as_ref())
        .map(|s| linalg::dist(&state.x, s))
        .unwrap_or(f64::NAN);
    Record {
        n: state.n,
        t: state.t,
        psi: problem.feasibility_residual(&state.x),
        objective: problem.phi(&state.x).unwrap_or(f64::NAN),
        dist,
        gap_estimate: gap.and_then(|g| restricted_gap(&state.x_bar, g).ok()).map(|g| g.value).unwrap_or(f64::NAN),
        x_bar_objective: problem.phi(&state.x_bar).unwrap_or(f64::NAN),
        x: store_x.then(|| state.x.clone()),
    }
}

/// Runs `n_steps` iterations from the problem's initial point. Divergence ends
/// the run early and is reported in the trajectory rather than as an error.
#[allow(clippy::too_many_arguments)]
pub fn run<R: Rng + ?Sized>(
    problem: &ProblemInstance,
    schedule: &Schedule,
    noise: &NoiseModel,
    opts: &SolverOptions,
    n_steps: u64,
    rng: &mut R,
    plan: &RecordPlan,
    gap_samples: Option<&GraphSampleSet>,
) -> Result<Trajectory, SolverError> {
    if n_steps == 0 {
        return Err(SolverError::Input("n_steps must be ≥ 1".into()));
    }
    let x0 = problem.initial_point();
    validate_inputs(problem, noise, opts, &x0)?;
    let mut steps = plan.steps.clone();
    steps.sort_unstable();
    let mut snaps = plan.snapshot_steps.clone();
    snaps.sort_unstable();
    let mut times = plan.times.clone();
    times.sort_by(f64::total_cmp);
    let (mut si, mut pi, mut ti) = (0usize, 0usize, 0usize);

    let mut state = SolverState::new(x0.clone());
    let mut ws = Workspace::new(problem);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut divergence = None;

    let mut due = |state: &SolverState, last: bool| -> (bool, bool) {
        let n = state.n;
        let mut rec = n == 0 || last || (plan.every > 0 && n.is_multiple_of(plan.every));
        while si < steps.len() && steps[si] <= n {
            rec |= steps[si] == n;
            si += 1;
        }
        while ti < times.len() && times[ti] <= state.t {
            rec = true;
            ti += 1;
        }
        let mut snap = false;
        while pi < snaps.len() && snaps[pi] <= n {
            snap |= snaps[pi] == n;
            pi += 1;
        }
        (rec, snap)
    };

    let (rec, snap) = due(&state, false);
    if rec {
        records.push(make_record(problem, &state, gap_samples, plan.store_x));
    }
    if snap {
        snapshots.push(Snapshot { n: 0, t: 0.0, x: state.x.clone(), x_bar: state.x_bar.clone() });
    }
    for _ in 0..n_steps {
        match step(&mut state, problem, schedule, noise, opts, rng, &mut ws) {
            Ok(()) => {}
            Err(SolverError::Diverged { n, reason, .. }) => {
                divergence = Some(Divergence { n, reason });
                break;
            }
            Err(e) => return Err(e),
        }
        let last = state.n == n_steps;
        let (rec, snap) = due(&state, last);
        if rec {
            records.push(make_record(problem, &state, gap_samples, plan.store_x));
        }
        if snap {
            snapshots.push(Snapshot { n: state.n, t: state.t, x: state.x.clone(), x_bar: state.x_bar.clone() });
        }
    }
    if divergence.is_some() && records.last().map(|r| r.n) != Some(state.n) {
        records.push(make_record(problem, &state, gap_samples, plan.store_x));
    }
    Ok(Trajectory { x0, records, snapshots, final_state: state, divergence, seed: None, replicate: None, config_hash: None })
}

/// Cumulative Brownian motion sampled on a fixed grid; coarser partitions
/// drawn from the grid see exactly the same Wiener increments.
#[derive(Debug, Clone)]
pub struct BrownianPath {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

fn check_partition(p: &[f64]) -> Result<(), SolverError> {
    if p.len() < 2 || p[0] != 0.0 {
        return Err(SolverError::Input("partition must start at 0 and contain at least two times".into()));
    }
    if p.windows(2).any(|w| !(w[1] > w[0])) || !p.iter().all(|t| t.is_finite()) {
        return Err(SolverError::Input("partition must be strictly increasing".into()));
    }
    Ok(())
}

impl BrownianPath {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, times: &[f64], dim: usize) -> Result<Self, SolverError> {
        check_partition(times)?;
        let mut values = Vec::with_capacity(times.len());
        let mut w = vec![0.0; dim];
        let mut inc = vec![0.0; dim];
        values.push(w.clone());
        for pair in times.windows(2) {
            brownian_increment_into(rng, pair[1] - pair[0], &mut inc).map_err(|e| SolverError::Input(e.to_string()))?;
            linalg::axpy(1.0, &inc, &mut w);
            values.push(w.clone());
        }
        Ok(Self { times: times.to_vec(), values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn at(&self, t: f64) -> Option<&[f64]> {
        let tol = 1e-12 * (1.0 + t.abs());
        let i = self.times.partition_point(|s| *s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then(|| self.values[i].as_slice())
    }
}

/// Uniform partition of [0, T] into `steps` intervals.
pub fn uniform_partition(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| horizon * k as f64 / steps as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath {
    pub times: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
}

impl PiecewiseLinearPath {
    /// Linear interpolation between nodes; clamps outside the partition.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|s| *s <= t);
        if k == 0 {
            return self.nodes[0].clone();
        }
        if k >= self.times.len() {
            return self.nodes.last().unwrap().clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let r = (t - t0) / (t1 - t0);
        self.nodes[k - 1].iter().zip(&self.nodes[k]).map(|(a, b)| a + r * (b - a)).collect()
    }

    /// sup over `grid` of ‖self(t) − other(t)‖².
    pub fn sup_dist_sq(&self, other: &PiecewiseLinearPath, grid: &[f64]) -> f64 {
        grid.iter().map(|t| linalg::dist_sq(&self.at(*t), &other.at(*t))).fold(0.0, f64::max)
    }

    pub fn endpoint(&self) -> &[f64] {
        self.nodes.last().unwrap()
    }
}

/// Partition-driven scheme with Δtₙ = tₙ₊₁ − tₙ, βₙ = β(tₙ) from the continuous
/// schedule and Wiener increments read from `brownian` (fresh draws when None).
pub fn euler_maruyama_path<R: Rng + ?Sized>(
    problem: &ProblemInstance,
    schedule: &Schedule,
    noise: &NoiseModel,
    opts: &SolverOptions,
    partition: &[f64],
    brownian: Option<&BrownianPath>,
    rng: &mut R,
) -> Result<PiecewiseLinearPath, SolverError> {
    check_partition(partition)?;
    let x0 = problem.initial_point();
    validate_inputs(problem, noise, &SolverOptions { batch_size: None, ..*opts }, &x0)?;
    let d = problem.dim();
    let mut x = x0;
    let mut grad = vec![0.0; d];
    let mut work = Vec::new();
    let mut dw = vec![0.0; d];
    let mut nodes = Vec::with_capacity(partition.len());
    nodes.push(x.clone());
    for pair in partition.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let dt = t1 - t0;
        let beta = schedule.beta_t(t0);
        problem.penalty.gradient_into(&x, &mut grad, &mut work);
        let s = noise.scale_at(t0);
        if !noise.is_off() {
            match brownian {
                Some(path) => {
                    let (w0, w1) = path
                        .at(t0)
                        .zip(path.at(t1))
                        .ok_or_else(|| SolverError::Input(format!("time {t0} or {t1} is not on the Brownian grid")))?;
                    for i in 0..d {
                        dw[i] = w1[i] - w0[i];
                    }
                }
                None => brownian_increment_into(rng, dt, &mut dw).map_err(|e| SolverError::Input(e.to_string()))?,
            }
        }
        for i in 0..d {
            let db = s * dw[i];
            let v = if opts.beta_scales_noise { beta * (grad[i] + db) } else { beta * grad[i] + db };
            x[i] -= dt * v;
        }
        problem.operator.resolvent_in_place(dt, &mut x);
        if !linalg::all_finite(&x) || linalg::norm(&x) > DIVERGENCE_NORM {
            return Err(SolverError::Diverged {
                n: nodes.len() as u64 - 1,
                reason: "Euler–Maruyama path left the finite range".into(),
                last_state: Box::new(SolverState::new(nodes.last().unwrap().clone())),
            });
        }
        nodes.push(x.clone());
    }
    Ok(PiecewiseLinearPath { times: partition.to_vec(), nodes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub burn_in: u64,
    pub checked: u64,
    /// max of (lhs − rhs)/max(‖Xₙ − z‖², 1) over checked steps.
    pub max_scaled_violation: f64,
}

/// Deterministic check of ‖Xₙ₊₁−z‖² − ‖Xₙ−z‖² ≤ 2λₙ⟨v, z−Xₙ⟩ + c₂λₙ²‖v‖² for the
/// problem's known solution z and witness v, noise off, full gradients.
pub fn check_energy_inequality(
    problem: &ProblemInstance,
    schedule: &Schedule,
    n_steps: u64,
    c2: f64,
) -> Result<EnergyReport, SolverError> {
    let z = problem.known_solution.as_ref().ok_or_else(|| SolverError::Input("needs a known solution".into()))?;
    let v = problem.witness.as_ref().ok_or_else(|| SolverError::Input("needs a solution witness".into()))?;
    let noise = NoiseModel::off(problem.dim());
    let opts = SolverOptions::default();
    let mut state = SolverState::new(problem.initial_point());
    let mut ws = Workspace::new(problem);
    let mut rng = crate::stochastic::replicate_rng(0, 0);
    let bound = 2.0 / schedule.l_rule;
    let burn_in = (0..n_steps).find(|&n| {
        let (l, b) = schedule.eval(n);
        l * b < bound
    });
    let Some(burn_in) = burn_in else {
        return Ok(EnergyReport { burn_in: n_steps, checked: 0, max_scaled_violation: f64::NEG_INFINITY });
    };
    let vv = linalg::norm_sq(v);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0;
    while state.n < n_steps {
        let before = linalg::dist_sq(&state.x, z);
        let zx = linalg::sub(z, &state.x);
        let (lambda, _) = schedule.eval(state.n);
        let n = state.n;
        step(&mut state, problem, schedule, &noise, &opts, &mut rng, &mut ws)?;
        if n >= burn_in {
            let lhs = linalg::dist_sq(&state.x, z) - before;
            let rhs = 2.0 * lambda * linalg::dot(v, &zx) + c2 * lambda * lambda * vv;
            worst = worst.max((lhs - rhs) / before.max(1.0));
            checked += 1;
        }
    }
    Ok(EnergyReport { burn_in, checked, max_scaled_violation: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::MonotoneOp;
    use crate::penalty::{ConstraintSpec, PenaltyFn};
    use crate::problems::{make_bilevel_quadratic, ProblemMeta};
    use crate::stochastic::{replicate_rng, BetaForm, LambdaForm};

    fn toy(op: MonotoneOp, center: f64, d: usize) -> ProblemInstance {
        let penalty = PenaltyFn::half_squared_distance_to_box(vec![center; d], vec![center; d]).unwrap();
        ProblemInstance {
            operator: op,
            constraint: penalty.zero_set(),
            penalty,
            phi_min: None,
            known_solution: None,
            witness: None,
            reference: None,
            x0: None,
            meta: ProblemMeta { name: "toy".into(), dim: d, rows: None, seed: None },
        }
    }

    fn constant(lambda: f64, beta: f64) -> Schedule {
        Schedule { beta: BetaForm::Constant { value: beta }, lambda: LambdaForm::Constant { value: lambda }, l_scale: 1.0, l_rule: 1.0 }
    }

    #[test]
    fn gradient_descent_contraction() {
        let mut p = toy(MonotoneOp::Zero { dim: 2 }, 3.0, 2);
        p.x0 = Some(vec![1.0, 5.0]);
        let mut st = SolverState::new(p.initial_point());
        let mut ws = Workspace::new(&p);
        let mut rng = replicate_rng(0, 0);
        step(&mut st, &p, &constant(0.5, 0.8), &NoiseModel::off(2), &SolverOptions::default(), &mut rng, &mut ws).unwrap();
        // s = λβ = 0.4: x − 0.4(x − c)
        assert!((st.x[0] - (1.0 - 0.4 * (1.0 - 3.0))).abs() < 1e-15);
        assert!((st.x[1] - (5.0 - 0.4 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn soft_threshold_step() {
        let mut p = toy(MonotoneOp::L1 { dim: 1 }, 5.0, 1);
        p.x0 = Some(vec![5.0]);
        let mut st = SolverState::new(p.initial_point());
        let mut ws = Workspace::new(&p);
        step(&mut st, &p, &constant(1.0, 1.0), &NoiseModel::off(1), &SolverOptions::default(), &mut replicate_rng(0, 0), &mut ws)
            .unwrap();
        assert_eq!(st.x, vec![4.0]);
    }

    #[test]
    fn fixed_point_is_kept() {
        // x* = c is a zero of A + β∇Ψ for every β when A = 0
        let mut p = toy(MonotoneOp::Zero { dim: 3 }, 2.0, 3);
        p.x0 = Some(vec![2.0; 3]);
        let tr = run(&p, &Schedule::paper(1.0), &NoiseModel::off(3), &SolverOptions::default(), 50, &mut replicate_rng(0, 0), &RecordPlan::every(10), None)
            .unwrap();
        assert_eq!(tr.final_state.x, vec![2.0; 3]);
        assert_eq!(tr.final_state.x_bar, vec![2.0; 3]);
    }

    #[test]
    fn bookkeeping_one_step() {
        let p = make_bilevel_quadratic(5, 2).unwrap();
        let tr = run(&p, &Schedule::paper(4.0), &NoiseModel::off(5), &SolverOptions::default(), 1, &mut replicate_rng(0, 0), &RecordPlan::every(1000), None)
            .unwrap();
        assert_eq!(tr.records.iter().map(|r| r.n).collect::<Vec<_>>(), vec![0, 1]);
        assert!(run(&p, &Schedule::paper(4.0), &NoiseModel::off(5), &SolverOptions::default(), 0, &mut replicate_rng(0, 0), &RecordPlan::default(), None).is_err());
    }

    #[test]
    fn divergence_keeps_last_finite_state() {
        let p = toy(MonotoneOp::Zero { dim: 1 }, 0.0, 1);
        let mut p = p;
        p.x0 = Some(vec![1.0]);
        // λβ = 3 ⇒ x ← −2x, blows past 1e12 after ~40 steps
        let tr = run(&p, &constant(1.0, 3.0), &NoiseModel::off(1), &SolverOptions::default(), 1000, &mut replicate_rng(0, 0), &RecordPlan::every(1), None)
            .unwrap();
        let div = tr.divergence.expect("diverges");
        assert!(div.n < 1000);
        assert!(tr.final_state.x[0].abs() <= DIVERGENCE_NORM && tr.final_state.x[0].is_finite());
        assert_eq!(tr.records.last().unwrap().n, tr.final_state.n);
    }

    #[test]
    fn cesaro_examples() {
        let (b, w) = cesaro_update(&[0.0, 0.0], 0.0, &[1.0, 2.0], 1.0);
        let (b, w) = cesaro_update(&b, w, &[5.0, -2.0], 3.0);
        assert_eq!(w, 4.0);
        assert!((b[0] - (1.0 + 15.0) / 4.0).abs() < 1e-15 && (b[1] - (2.0 - 6.0) / 4.0).abs() < 1e-15);
        let (c, _) = cesaro_update(&[2.0], 7.0, &[2.0], 0.3);
        assert_eq!(c, vec![2.0]);
    }

    #[test]
    fn cesaro_matches_recomputation_in_run() {
        let p = make_bilevel_quadratic(6, 3).unwrap();
        let s = Schedule::paper(4.0);
        let noise = NoiseModel::asv(0.5, 0.75, 6).unwrap();
        let plan = RecordPlan { every: 1, store_x: true, ..Default::default() };
        let tr = run(&p, &s, &noise, &SolverOptions::default(), 300, &mut replicate_rng(1, 2), &plan, None).unwrap();
        let mut num = vec![0.0; 6];
        let mut den = 0.0;
        for r in &tr.records[..tr.records.len() - 1] {
            let (l, _) = s.eval(r.n);
            linalg::axpy(l, r.x.as_ref().unwrap(), &mut num);
            den += l;
        }
        let scratch: Vec<f64> = num.iter().map(|v| v / den).collect();
        assert!(linalg::dist(&scratch, &tr.final_state.x_bar) < 1e-10);
        assert!((den - tr.final_state.sum_lambda).abs() < 1e-10 * den);
    }

    #[test]
    fn deterministic_bitwise() {
        let p = make_bilevel_quadratic(5, 2).unwrap();
        let s = Schedule::paper(4.0);
        let noise = NoiseModel::asv(0.5, 0.75, 5).unwrap();
        let a = run(&p, &s, &noise, &SolverOptions::default(), 500, &mut replicate_rng(3, 1), &RecordPlan::every(50), None).unwrap();
        let b = run(&p, &s, &noise, &SolverOptions::default(), 500, &mut replicate_rng(3, 1), &RecordPlan::every(50), None).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn single_step_partition_is_explicit_euler() {
        let mut p = toy(MonotoneOp::Zero { dim: 1 }, 0.0, 1);
        p.x0 = Some(vec![2.0]);
        let path = euler_maruyama_path(&p, &constant(1.0, 1.0), &NoiseModel::off(1), &SolverOptions::default(), &[0.0, 0.25], None, &mut replicate_rng(0, 0))
            .unwrap();
        assert_eq!(path.endpoint(), &[2.0 - 0.25 * 2.0]);
        assert!(euler_maruyama_path(&p, &constant(1.0, 1.0), &NoiseModel::off(1), &SolverOptions::default(), &[0.0, 0.5, 0.5], None, &mut replicate_rng(0, 0))
            .is_err());
    }

    #[test]
    fn brownian_path_coupling() {
        let fine = uniform_partition(1.0, 8);
        let path = BrownianPath::sample(&mut replicate_rng(0, 0), &fine, 2).unwrap();
        assert_eq!(path.at(0.0).unwrap(), &[0.0, 0.0]);
        assert!(path.at(0.5).is_some() && path.at(0.3).is_none());
    }

    #[test]
    fn energy_inequality_bilevel() {
        let p = make_bilevel_quadratic(20, 5).unwrap();
        let rep = check_energy_inequality(&p, &Schedule::paper(4.0), 20_000, 8.0).unwrap();
        assert_eq!(rep.burn_in, 0);
        assert!(rep.max_scaled_violation <= 1e-8, "{rep:?}");
    }

    #[test]
    fn constraint_is_box_for_toy() {
        let p = toy(MonotoneOp::Zero { dim: 2 }, 1.0, 2);
        assert!(matches!(p.constraint, ConstraintSpec::Box { .. }));
    }
}
