use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gap_samples, io, HarnessError, RunConfig};
use crate::diagnostics::{concentration_report, rate_fit, restricted_gap, ConcentrationRow, RateFit};
use crate::linalg;
use crate::problems::{ProblemInstance, ProblemMeta};
use crate::solver::{run, Divergence, Record, SolverError, Trajectory};
use crate::stochastic::replicate_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary of the finite entries (linear interpolation between order statistics).
pub fn quantiles(values: &[f64]) -> Option<Quantiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (v.len() - 1) as f64;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quantiles {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: q(0.5),
        q25: q(0.25),
        q75: q(0.75),
        min: v[0],
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateConcentration {
    /// Φ(X̄) − Φ(z_ref)
    pub delta_phi_bar: f64,
    pub q0: f64,
    pub q1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub steps_completed: u64,
    pub final_t: f64,
    pub divergence: Option<Divergence>,
    #[serde(with = "linalg::nan_as_null")]
    pub final_psi: f64,
    #[serde(with = "linalg::nan_as_null")]
    pub final_objective: f64,
    #[serde(with = "linalg::nan_as_null")]
    pub final_x_bar_objective: f64,
    #[serde(with = "linalg::nan_as_null")]
    pub final_dist: f64,
    #[serde(with = "linalg::nan_as_null")]
    pub final_gap_estimate: f64,
    pub relative_error: Option<f64>,
    pub concentration: Option<ReplicateConcentration>,
    pub trace: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointAggregate {
    pub n: u64,
    pub t: f64,
    pub dist: Option<Quantiles>,
    pub psi: Option<Quantiles>,
    pub objective_gap: Option<Quantiles>,
    pub x_bar_objective_gap: Option<Quantiles>,
    pub gap_estimate: Option<Quantiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub n_replicates: usize,
    /// z_ref was the best feasible final iterate rather than a known solution.
    pub empirical_reference: bool,
    pub rows: Vec<ConcentrationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_replicates: usize,
    pub n_diverged: usize,
    /// min_C Φ, or the best objective seen across replicates when flagged empirical.
    pub objective_reference: Option<f64>,
    pub objective_reference_empirical: bool,
    pub final_dist: Option<Quantiles>,
    pub final_psi: Option<Quantiles>,
    pub final_objective_gap: Option<Quantiles>,
    pub final_x_bar_objective_gap: Option<Quantiles>,
    pub final_relative_error: Option<Quantiles>,
    /// Record steps shared by every non-diverged replicate.
    pub checkpoints: Vec<CheckpointAggregate>,
    /// log-log fit of the mean Cesàro objective gap against t.
    pub rate_fit: Option<RateFit>,
    pub rate_fit_error: Option<String>,
    /// log-log fit of the mean restricted gap estimate against t.
    pub gap_rate_fit: Option<RateFit>,
    pub concentration: Option<ConcentrationTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_hash: String,
    pub config: RunConfig,
    pub problem: ProblemMeta,
    pub phi_min: Option<f64>,
    /// What `dist` measures: "solution", "reference" or "none".
    pub dist_kind: String,
    pub concentration_empirical_reference: bool,
    pub replicates: Vec<ReplicateRow>,
    pub aggregate: Aggregate,
    pub total_steps: u64,
    pub wall_clock_seconds: f64,
}

/// Pure function of the rows, so pooled reports recompute it exactly.
pub fn compute_aggregate(rows: &[ReplicateRow], phi_min: Option<f64>, epsilons: &[f64], empirical_conc: bool) -> Aggregate {
    let ok: Vec<&ReplicateRow> = rows.iter().filter(|r| r.divergence.is_none()).collect();
    let (reference, empirical) = match phi_min {
        Some(v) => (Some(v), false),
        None => {
            let best = rows
                .iter()
                .flat_map(|r| [r.final_objective, r.final_x_bar_objective])
                .filter(|v| v.is_finite())
                .fold(f64::INFINITY, f64::min);
            (best.is_finite().then_some(best), true)
        }
    };
    let gap_of = |v: f64| reference.map(|r| v - r).unwrap_or(f64::NAN);
    let col = |f: &dyn Fn(&ReplicateRow) -> f64| quantiles(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());

    let mut common: Option<BTreeSet<u64>> = None;
    for r in &ok {
        let ns: BTreeSet<u64> = r.trace.iter().map(|x| x.n).collect();
        common = Some(match common {
            None => ns,
            Some(c) => c.intersection(&ns).copied().collect(),
        });
    }
    let mut checkpoints = Vec::new();
    for n in common.unwrap_or_default() {
        let at: Vec<&Record> = ok.iter().map(|r| r.trace.iter().find(|x| x.n == n).expect("common step")).collect();
        let pick = |f: &dyn Fn(&Record) -> f64| quantiles(&at.iter().map(|x| f(x)).collect::<Vec<_>>());
        checkpoints.push(CheckpointAggregate {
            n,
            t: at[0].t,
            dist: pick(&|x| x.dist),
            psi: pick(&|x| x.psi),
            objective_gap: pick(&|x| gap_of(x.objective)),
            x_bar_objective_gap: pick(&|x| gap_of(x.x_bar_objective)),
            gap_estimate: pick(&|x| x.gap_estimate),
        });
    }
    let series = |f: &dyn Fn(&CheckpointAggregate) -> Option<Quantiles>| -> Vec<(f64, f64)> {
        checkpoints.iter().filter_map(|c| f(c).map(|q| (c.t, q.mean))).collect()
    };
    let (rate, rate_err) = match rate_fit(&series(&|c| c.x_bar_objective_gap)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let gap_rate = rate_fit(&series(&|c| c.gap_estimate)).ok();

    let conc: Vec<ReplicateConcentration> = ok.iter().filter_map(|r| r.concentration).collect();
    let concentration = (!conc.is_empty()).then(|| ConcentrationTable {
        n_replicates: conc.len(),
        empirical_reference: empirical_conc,
        rows: epsilons
            .iter()
            .map(|&eps| {
                let hits = conc.iter().filter(|c| c.delta_phi_bar >= c.q0 + eps * c.q1).count();
                ConcentrationRow { epsilon: eps, exceed_fraction: hits as f64 / conc.len() as f64, bound: (-eps * eps / 4.0).exp() }
            })
            .collect(),
    });

    Aggregate {
        n_replicates: rows.len(),
        n_diverged: rows.len() - ok.len(),
        objective_reference: reference,
        objective_reference_empirical: empirical,
        final_dist: col(&|r| r.final_dist),
        final_psi: col(&|r| r.final_psi),
        final_objective_gap: col(&|r| gap_of(r.final_objective)),
        final_x_bar_objective_gap: col(&|r| gap_of(r.final_x_bar_objective)),
        final_relative_error: col(&|r| r.relative_error.unwrap_or(f64::NAN)),
        checkpoints,
        rate_fit: rate,
        rate_fit_error: rate_err,
        gap_rate_fit: gap_rate,
        concentration,
    }
}

/// Pools replicate rows of reports that share a config hash.
pub fn replicate_aggregate(reports: &[RunReport]) -> Result<RunReport, HarnessError> {
    let first = reports.first().ok_or_else(|| HarnessError::Run("no reports to aggregate".into()))?;
    for r in &reports[1..] {
        if r.config_hash != first.config_hash {
            return Err(HarnessError::MixedHashes(first.config_hash.clone(), r.config_hash.clone()));
        }
    }
    let rows: Vec<ReplicateRow> = reports.iter().flat_map(|r| r.replicates.iter().cloned()).collect();
    let empirical = reports.iter().any(|r| r.concentration_empirical_reference);
    let mut out = first.clone();
    out.aggregate = compute_aggregate(&rows, first.phi_min, &first.config.epsilons, empirical);
    out.replicates = rows;
    out.concentration_empirical_reference = empirical;
    out.total_steps = reports.iter().map(|r| r.total_steps).sum();
    out.wall_clock_seconds = reports.iter().map(|r| r.wall_clock_seconds).sum();
    Ok(out)
}

/// Comparison point for the concentration table: the known solution, else the
/// final iterate with the smallest Φ among those within 10× of the best Ψ.
fn concentration_reference(problem: &ProblemInstance, trajs: &[&Trajectory]) -> Option<(Vec<f64>, bool)> {
    problem.phi(&problem.initial_point())?;
    if let Some(x) = &problem.known_solution {
        return Some((x.clone(), false));
    }
    let psi: Vec<f64> = trajs.iter().map(|t| problem.feasibility_residual(&t.final_state.x)).collect();
    let best = psi.iter().copied().fold(f64::INFINITY, f64::min);
    trajs
        .iter()
        .zip(&psi)
        .filter(|(_, p)| **p <= 10.0 * best)
        .map(|(t, _)| &t.final_state.x)
        .min_by(|a, b| problem.phi(a).unwrap_or(f64::INFINITY).total_cmp(&problem.phi(b).unwrap_or(f64::INFINITY)))
        .map(|x| (x.clone(), true))
}

/// Runs every replicate (in a pool of `threads` workers; None = all cores),
/// merging results in replicate order.
pub fn run_experiment(cfg: &RunConfig, threads: Option<usize>) -> Result<(RunReport, Vec<Trajectory>), HarnessError> {
    let setup = cfg.setup()?;
    let hash = cfg.hash();
    let gap = gap_samples(cfg, &setup.problem)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Run(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let results: Vec<Result<Trajectory, SolverError>> = pool.install(|| {
        (0..cfg.n_replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(cfg.master_seed, r);
                let mut tr = run(&setup.problem, &setup.schedule, &setup.noise, &setup.opts, cfg.n_steps, &mut rng, &setup.plan, gap.as_ref())?;
                tr.seed = Some(cfg.master_seed);
                tr.replicate = Some(r);
                tr.config_hash = Some(hash.clone());
                Ok(tr)
            })
            .collect()
    });
    let trajs: Vec<Trajectory> =
        results.into_iter().collect::<Result<_, _>>().map_err(|e| HarnessError::Run(e.to_string()))?;
    let wall = start.elapsed().as_secs_f64();

    let p = &setup.problem;
    let ok: Vec<&Trajectory> = trajs.iter().filter(|t| t.divergence.is_none()).collect();
    let conc_ref = if ok.is_empty() { None } else { concentration_reference(p, &ok) };
    let conc_values = match &conc_ref {
        Some((z, _)) => {
            let owned: Vec<Trajectory> = ok.iter().map(|t| (*t).clone()).collect();
            concentration_report(p, &owned, z, &[]).ok()
        }
        None => None,
    };
    let ref_norm = p.reference.as_ref().map(|r| linalg::norm(r));
    let mut ok_index = 0;
    let rows: Vec<ReplicateRow> = trajs
        .iter()
        .map(|t| {
            let st = &t.final_state;
            let concentration = if t.divergence.is_none() {
                let c = conc_values.as_ref().map(|c| ReplicateConcentration {
                    delta_phi_bar: c.gaps[ok_index],
                    q0: c.q0[ok_index],
                    q1: c.q1[ok_index],
                });
                ok_index += 1;
                c
            } else {
                None
            };
            let last = t.records.last().expect("run records the final step");
            ReplicateRow {
                replicate: t.replicate.unwrap_or(0),
                steps_completed: st.n,
                final_t: st.t,
                divergence: t.divergence.clone(),
                final_psi: last.psi,
                final_objective: last.objective,
                final_x_bar_objective: last.x_bar_objective,
                final_dist: last.dist,
                final_gap_estimate: gap.as_ref().and_then(|g| restricted_gap(&st.x_bar, g).ok()).map_or(f64::NAN, |g| g.value),
                relative_error: match (&p.reference, ref_norm) {
                    (Some(r), Some(nr)) if nr > 0.0 => Some(linalg::dist(&st.x, r) / nr),
                    _ => None,
                },
                concentration,
                trace: t.records.iter().map(|r| Record { x: None, ..r.clone() }).collect(),
            }
        })
        .collect();
    let empirical = conc_ref.as_ref().is_some_and(|c| c.1);
    let report = RunReport {
        config_hash: hash,
        config: cfg.clone(),
        problem: p.meta.clone(),
        phi_min: p.phi_min,
        dist_kind: if p.known_solution.is_some() {
            "solution"
        } else if p.reference.is_some() {
            "reference"
        } else {
            "none"
        }
        .into(),
        concentration_empirical_reference: empirical,
        aggregate: compute_aggregate(&rows, p.phi_min, &cfg.epsilons, empirical),
        replicates: rows,
        total_steps: trajs.iter().map(|t| t.final_state.n).sum(),
        wall_clock_seconds: wall,
    };
    Ok((report, trajs))
}

/// trace_rNNN.csv, snapshots/, final iterates and report.json under `dir`.
pub fn write_outputs(dir: &Path, report: &RunReport, trajectories: &[Trajectory]) -> Result<(), HarnessError> {
    for t in trajectories {
        let r = t.replicate.unwrap_or(0);
        io::write_file(&dir.join(format!("trace_r{r:03}.csv")), &io::trace_csv(&t.records, &report.config_hash))?;
        for s in &t.snapshots {
            io::write_file(&dir.join(format!("snapshots/r{r:03}_n{:06}_x.txt", s.n)), &io::vector_text(&s.x))?;
            io::write_file(&dir.join(format!("snapshots/r{r:03}_n{:06}_xbar.txt", s.n)), &io::vector_text(&s.x_bar))?;
        }
        io::write_file(&dir.join(format!("final/r{r:03}_x.txt")), &io::vector_text(&t.final_state.x))?;
        io::write_file(&dir.join(format!("final/r{r:03}_xbar.txt")), &io::vector_text(&t.final_state.x_bar))?;
    }
    let json = serde_json::to_string_pretty(report).map_err(|e| HarnessError::Format(e.to_string()))?;
    io::write_file(&dir.join("report.json"), &json)?;
    io::write_file(&dir.join("config_hash.txt"), &format!("{}\n", report.config_hash))
}
