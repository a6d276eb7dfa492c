//! Configuration, replicate orchestration and persistent outputs.

mod config;
pub mod io;
mod report;

use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{parse_config, parse_config_str, AcSpec, Flags, GapSpec, ProblemSpec, RunConfig, ScheduleSpec, Setup, FIGURE_SNAPSHOTS};
pub use report::{
    compute_aggregate, quantiles, replicate_aggregate, run_experiment, write_outputs, Aggregate, CheckpointAggregate,
    ConcentrationTable, Quantiles, ReplicateConcentration, ReplicateRow, RunReport,
};

use crate::diagnostics::{default_delta, restricted_gap, GapEstimate};
use crate::linalg;
use crate::operators::{sample_graph, GraphSampleSet};
use crate::penalty::{check_ac_condition, AcReport, PenaltyKind};
use crate::problems::ProblemInstance;
use crate::stochastic::Rng64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("I/O error: {0}")]
    Io(String),
    #[error("configuration error:\n  - {}", .0.join("\n  - "))]
    Config(Vec<String>),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("run failed: {0}")]
    Run(String),
    #[error("cannot aggregate reports with different config hashes: {0} vs {1}")]
    MixedHashes(String, String),
}

/// Graph samples around the known solution for the restricted gap, or None
/// when the config has no `[gap]` table.
pub fn gap_samples(cfg: &RunConfig, problem: &ProblemInstance) -> Result<Option<GraphSampleSet>, HarnessError> {
    let Some(spec) = &cfg.gap else {
        return Ok(None);
    };
    let anchor = problem
        .known_solution
        .as_ref()
        .ok_or_else(|| HarnessError::Config(vec!["[gap] needs a problem with a known solution to anchor the ball".into()]))?;
    let delta = spec
        .delta
        .or_else(|| default_delta(&problem.constraint, anchor))
        .ok_or_else(|| HarnessError::Config(vec!["[gap] needs an explicit delta for this constraint set".into()]))?;
    let mut rng = Rng64::seed_from_u64(spec.seed);
    rng.set_stream(u64::MAX);
    let set = sample_graph(&problem.operator, &problem.constraint, anchor, delta, spec.samples, &mut rng)
        .map_err(|e| HarnessError::Run(format!("graph sampling: {e}")))?;
    Ok(Some(set))
}

/// Runs the AC-condition checker on the configured schedule with random
/// directions from the normal cone of C.
pub fn check_ac(cfg: &RunConfig) -> Result<AcReport, HarnessError> {
    let setup = cfg.setup()?;
    let mut rng = Rng64::seed_from_u64(cfg.ac.seed);
    let c = &setup.problem.constraint;
    let samples: Vec<Vec<f64>> = (0..cfg.ac.samples).map(|_| c.sample_cone_direction(&mut rng)).collect();
    check_ac_condition(&setup.schedule, &setup.problem.penalty, c, &samples, cfg.ac.horizon)
        .map_err(|e| HarnessError::Run(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    #[serde(with = "linalg::nan_as_null")]
    pub psi: f64,
    pub objective: Option<f64>,
    pub objective_gap: Option<f64>,
    pub dist_to_solution: Option<f64>,
    pub dist_to_reference: Option<f64>,
    pub restricted_gap: Option<GapEstimate>,
}

/// Diagnostics at a saved point.
pub fn evaluate_point(cfg: &RunConfig, x: &[f64]) -> Result<PointReport, HarnessError> {
    let setup = cfg.setup()?;
    let p = &setup.problem;
    if x.len() != p.dim() {
        return Err(HarnessError::Format(format!("point has {} entries, problem dimension is {}", x.len(), p.dim())));
    }
    let gap = match gap_samples(cfg, p)? {
        Some(set) => Some(restricted_gap(x, &set).map_err(|e| HarnessError::Run(e.to_string()))?),
        None => None,
    };
    Ok(PointReport {
        psi: p.feasibility_residual(x),
        objective: p.phi(x),
        objective_gap: p.objective_gap(x).ok(),
        dist_to_solution: p.dist_to_solution(x).ok(),
        dist_to_reference: p.reference.as_ref().map(|r| linalg::dist(x, r)),
        restricted_gap: gap,
    })
}

/// Coordinate text of the least-squares design matrix (Radon or Gaussian).
pub fn export_matrix(cfg: &RunConfig) -> Result<String, HarnessError> {
    let problem = cfg.problem.build()?;
    match &problem.penalty.kind {
        PenaltyKind::LeastSquares(sys) => Ok(io::linear_map_text(&sys.map)),
        _ => Err(HarnessError::Config(vec!["problem has no design matrix to export".into()])),
    }
}

/// Writes the design matrix, the data vector and the reference image (if any).
pub fn export_instance(cfg: &RunConfig, dir: &Path) -> Result<(), HarnessError> {
    let problem = cfg.problem.build()?;
    let PenaltyKind::LeastSquares(sys) = &problem.penalty.kind else {
        return Err(HarnessError::Config(vec!["problem has no design matrix to export".into()]));
    };
    io::write_file(&dir.join("matrix.txt"), &io::linear_map_text(&sys.map))?;
    io::write_file(&dir.join("rhs.txt"), &io::vector_text(&sys.rhs))?;
    if let Some(r) = &problem.reference {
        io::write_file(&dir.join("reference.txt"), &io::vector_text(r))?;
    }
    Ok(())
}
