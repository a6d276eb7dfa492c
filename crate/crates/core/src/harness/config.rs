//! TOML run configuration: strict schema walk (every violation reported),
//! defaults, hashing, and construction of the solver inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use super::HarnessError;
use crate::penalty::LipschitzChoice;
use crate::problems::{make_basis_pursuit, make_bilevel_quadratic, make_radon, Design, Phantom, ProblemInstance};
use crate::solver::{RecordPlan, SolverOptions};
use crate::stochastic::{BetaForm, LambdaForm, NoiseModel, NoiseRegime, Schedule};

/// Steps at which full snapshots are always kept (when within the horizon).
pub const FIGURE_SNAPSHOTS: [u64; 4] = [100, 200, 1000, 5000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    BilevelQuadratic { d: usize, pinned: usize },
    BasisPursuit { m: usize, d: usize, sparsity: usize, noise_sigma: f64, seed: u64, design: Design },
    Radon { image_side: usize, n_angles: usize, n_detectors: usize, phantom: Phantom, seed: u64 },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance, HarnessError> {
        let r = match *self {
            ProblemSpec::BilevelQuadratic { d, pinned } => make_bilevel_quadratic(d, pinned),
            ProblemSpec::BasisPursuit { m, d, sparsity, noise_sigma, seed, design } => {
                make_basis_pursuit(m, d, sparsity, noise_sigma, seed, design)
            }
            ProblemSpec::Radon { image_side, n_angles, n_detectors, phantom, seed } => {
                make_radon(image_side, n_angles, n_detectors, phantom, seed)
            }
        };
        r.map_err(|e| HarnessError::Config(vec![format!("problem: {e}")]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// βₙ = scale·(n+n0)^a / L, λₙβₙ = c / L.
    PowerProduct { scale: f64, a: f64, n0: f64, c: f64 },
    Constant { lambda: f64, beta: f64 },
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::PowerProduct { scale: 1.0, a: 0.75, n0: 10.0, c: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    pub beta_scales_noise: bool,
    pub uniform_cesaro: bool,
    pub enforce_step_rule: bool,
    pub l_constant_choice: LipschitzChoice,
}

impl Default for Flags {
    fn default() -> Self {
        Self { beta_scales_noise: false, uniform_cesaro: false, enforce_step_rule: true, l_constant_choice: LipschitzChoice::Spectral }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSpec {
    pub samples: usize,
    /// Ball radius; defaults from the constraint geometry when possible.
    pub delta: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcSpec {
    pub horizon: u64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AcSpec {
    fn default() -> Self {
        Self { horizon: 10_000, samples: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub x0: Option<Vec<f64>>,
    pub schedule: ScheduleSpec,
    pub noise: NoiseRegime,
    pub n_steps: u64,
    pub record_every: u64,
    pub record_times: Vec<f64>,
    pub snapshot_steps: Vec<u64>,
    pub store_x: bool,
    pub n_replicates: u64,
    pub master_seed: u64,
    pub batch_size: Option<usize>,
    pub output_dir: Option<String>,
    pub epsilons: Vec<f64>,
    pub flags: Flags,
    pub gap: Option<GapSpec>,
    pub ac: AcSpec,
}

/// Everything the solver needs, built from a config.
pub struct Setup {
    pub problem: ProblemInstance,
    pub schedule: Schedule,
    pub noise: NoiseModel,
    pub opts: SolverOptions,
    pub plan: RecordPlan,
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form, ignoring where outputs go.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn setup(&self) -> Result<Setup, HarnessError> {
        let mut problem = self.problem.build()?;
        if let Some(x0) = &self.x0 {
            if x0.len() != problem.dim() {
                return Err(HarnessError::Config(vec![format!(
                    "x0 has length {}, problem dimension is {}",
                    x0.len(),
                    problem.dim()
                )]));
            }
            problem.x0 = Some(x0.clone());
        }
        let l_rule = problem.penalty.lipschitz(LipschitzChoice::Spectral);
        let l_scale = problem.penalty.lipschitz(self.flags.l_constant_choice);
        let schedule = match self.schedule {
            ScheduleSpec::PowerProduct { scale, a, n0, c } => {
                Schedule { beta: BetaForm::Power { scale, a, n0 }, lambda: LambdaForm::ProductConst { c }, l_scale, l_rule }
            }
            ScheduleSpec::Constant { lambda, beta } => Schedule {
                beta: BetaForm::Constant { value: beta },
                lambda: LambdaForm::Constant { value: lambda },
                l_scale,
                l_rule,
            },
        };
        if let Err(errs) = schedule.validate(self.n_steps, self.flags.enforce_step_rule) {
            return Err(HarnessError::Config(
                errs.into_iter().map(|e| format!("schedule: {e} (the step rule requires λₙβₙ < 2/L_Ψ)")).collect(),
            ));
        }
        let noise = NoiseModel { regime: self.noise, dim: problem.dim() };
        noise.validate().map_err(|e| HarnessError::Config(vec![format!("noise: {e}")]))?;
        let mut snaps: Vec<u64> = FIGURE_SNAPSHOTS.iter().copied().chain(self.snapshot_steps.iter().copied()).collect();
        snaps.retain(|&s| s <= self.n_steps);
        snaps.sort_unstable();
        snaps.dedup();
        let plan = RecordPlan {
            every: self.record_every,
            steps: Vec::new(),
            times: self.record_times.clone(),
            snapshot_steps: snaps,
            store_x: self.store_x,
        };
        let opts = SolverOptions {
            beta_scales_noise: self.flags.beta_scales_noise,
            uniform_cesaro: self.flags.uniform_cesaro,
            batch_size: self.batch_size,
        };
        crate::solver::validate_inputs(&problem, &noise, &opts, &problem.initial_point())
            .map_err(|e| HarnessError::Config(vec![e.to_string()]))?;
        Ok(Setup { problem, schedule, noise, opts, plan })
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Parses and fully validates; on failure lists every violation found.
pub fn parse_config_str(text: &str) -> Result<RunConfig, HarnessError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(vec![format!("syntax: {e}")]))?;
    let mut errs = Vec::new();
    let cfg = walk_root(&root, &mut errs);
    match cfg {
        Some(cfg) if errs.is_empty() => {
            // semantic checks that need the built problem (step rule, dimensions)
            cfg.setup()?;
            Ok(cfg)
        }
        _ => Err(HarnessError::Config(errs)),
    }
}

struct Section<'v> {
    path: String,
    table: &'v Table,
}

impl<'v> Section<'v> {
    fn new(path: &str, table: &'v Table, allowed: &[&str], errs: &mut Vec<String>) -> Self {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                errs.push(format!("unknown key \"{full}\""));
            }
        }
        Self { path: path.to_string(), table }
    }

    fn name(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn raw(&self, key: &str) -> Option<&'v Value> {
        self.table.get(key)
    }

    fn missing(&self, key: &str, errs: &mut Vec<String>) {
        errs.push(format!("missing required key \"{}\"", self.name(key)));
    }

    fn f64(&self, key: &str, errs: &mut Vec<String>) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                errs.push(format!("\"{}\" must be a number", self.name(key)));
                None
            }
        }
    }

    fn u64(&self, key: &str, errs: &mut Vec<String>) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                errs.push(format!("\"{}\" must be a nonnegative integer", self.name(key)));
                None
            }
        }
    }

    fn bool(&self, key: &str, errs: &mut Vec<String>) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                errs.push(format!("\"{}\" must be true or false", self.name(key)));
                None
            }
        }
    }

    fn str(&self, key: &str, errs: &mut Vec<String>) -> Option<&'v str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                errs.push(format!("\"{}\" must be a string", self.name(key)));
                None
            }
        }
    }

    fn f64_list(&self, key: &str, errs: &mut Vec<String>) -> Option<Vec<f64>> {
        let Value::Array(a) = self.raw(key)? else {
            errs.push(format!("\"{}\" must be an array of numbers", self.name(key)));
            return None;
        };
        let mut out = Vec::with_capacity(a.len());
        for v in a {
            match v {
                Value::Float(f) => out.push(*f),
                Value::Integer(i) => out.push(*i as f64),
                _ => {
                    errs.push(format!("\"{}\" must be an array of numbers", self.name(key)));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn u64_list(&self, key: &str, errs: &mut Vec<String>) -> Option<Vec<u64>> {
        let Value::Array(a) = self.raw(key)? else {
            errs.push(format!("\"{}\" must be an array of integers", self.name(key)));
            return None;
        };
        let mut out = Vec::with_capacity(a.len());
        for v in a {
            match v {
                Value::Integer(i) if *i >= 0 => out.push(*i as u64),
                _ => {
                    errs.push(format!("\"{}\" must be an array of nonnegative integers", self.name(key)));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn sub(&self, key: &str, allowed: &[&str], errs: &mut Vec<String>) -> Option<Section<'v>> {
        match self.raw(key)? {
            Value::Table(t) => Some(Section::new(&self.name(key), t, allowed, errs)),
            _ => {
                errs.push(format!("\"{}\" must be a table", self.name(key)));
                None
            }
        }
    }

    fn req_f64(&self, key: &str, errs: &mut Vec<String>) -> Option<f64> {
        if self.raw(key).is_none() {
            self.missing(key, errs);
        }
        self.f64(key, errs)
    }

    fn req_usize(&self, key: &str, errs: &mut Vec<String>) -> Option<usize> {
        if self.raw(key).is_none() {
            self.missing(key, errs);
        }
        self.u64(key, errs).map(|v| v as usize)
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String, errs: &mut Vec<String>) {
    if !cond {
        errs.push(msg());
    }
}

const ROOT_KEYS: &[&str] = &[
    "problem",
    "x0",
    "schedule",
    "noise",
    "n_steps",
    "record_every",
    "record_times",
    "snapshot_steps",
    "store_x",
    "n_replicates",
    "master_seed",
    "batch_size",
    "output_dir",
    "epsilons",
    "flags",
    "gap",
    "ac",
];

fn walk_root(root: &Table, errs: &mut Vec<String>) -> Option<RunConfig> {
    let top = Section::new("", root, ROOT_KEYS, errs);
    let problem = match top.raw("problem") {
        None => {
            top.missing("problem", errs);
            None
        }
        Some(_) => walk_problem(&top, errs),
    };
    let schedule = walk_schedule(&top, errs);
    let noise = walk_noise(&top, errs);
    let n_steps = top.u64("n_steps", errs);
    if top.raw("n_steps").is_none() {
        top.missing("n_steps", errs);
    }
    if let Some(n) = n_steps {
        check(n >= 1, || "\"n_steps\" must be ≥ 1".into(), errs);
    }
    let n = n_steps.unwrap_or(1);
    let record_every = top.u64("record_every", errs).unwrap_or((n / 100).max(1));
    let record_times = top.f64_list("record_times", errs).unwrap_or_default();
    check(record_times.iter().all(|t| t.is_finite() && *t >= 0.0), || "\"record_times\" must be finite and ≥ 0".into(), errs);
    let snapshot_steps = top.u64_list("snapshot_steps", errs).unwrap_or_default();
    let store_x = top.bool("store_x", errs).unwrap_or(false);
    let n_replicates = top.u64("n_replicates", errs).unwrap_or(1);
    check(n_replicates >= 1, || "\"n_replicates\" must be ≥ 1".into(), errs);
    let master_seed = top.u64("master_seed", errs).unwrap_or(0);
    let batch_size = top.u64("batch_size", errs).map(|b| b as usize);
    if let Some(b) = batch_size {
        check(b >= 1, || "\"batch_size\" must be ≥ 1".into(), errs);
    }
    let output_dir = top.str("output_dir", errs).map(str::to_string);
    let epsilons = top.f64_list("epsilons", errs).unwrap_or_else(|| vec![1.0, 2.0, 3.0]);
    check(epsilons.iter().all(|e| e.is_finite() && *e > 0.0), || "\"epsilons\" must be positive".into(), errs);
    let x0 = top.f64_list("x0", errs);
    if let Some(x0) = &x0 {
        check(x0.iter().all(|v| v.is_finite()), || "\"x0\" must be finite".into(), errs);
    }

    let mut flags = Flags::default();
    if let Some(f) = top.sub("flags", &["beta_scales_noise", "uniform_cesaro", "enforce_step_rule", "l_constant_choice"], errs) {
        flags.beta_scales_noise = f.bool("beta_scales_noise", errs).unwrap_or(false);
        flags.uniform_cesaro = f.bool("uniform_cesaro", errs).unwrap_or(false);
        flags.enforce_step_rule = f.bool("enforce_step_rule", errs).unwrap_or(true);
        flags.l_constant_choice = match f.str("l_constant_choice", errs) {
            None | Some("spectral") => LipschitzChoice::Spectral,
            Some("frobenius") => LipschitzChoice::Frobenius,
            Some(other) => {
                errs.push(format!("\"flags.l_constant_choice\" must be \"spectral\" or \"frobenius\", got \"{other}\""));
                LipschitzChoice::Spectral
            }
        };
    }
    let gap = top.sub("gap", &["samples", "delta", "seed"], errs).map(|g| {
        let samples = g.u64("samples", errs).unwrap_or(1000) as usize;
        check(samples >= 1, || "\"gap.samples\" must be ≥ 1".into(), errs);
        let delta = g.f64("delta", errs);
        if let Some(d) = delta {
            check(d > 0.0 && d.is_finite(), || "\"gap.delta\" must be > 0".into(), errs);
        }
        GapSpec { samples, delta, seed: g.u64("seed", errs).unwrap_or(0) }
    });
    let mut ac = AcSpec::default();
    if let Some(a) = top.sub("ac", &["horizon", "samples", "seed"], errs) {
        ac.horizon = a.u64("horizon", errs).unwrap_or(ac.horizon);
        ac.samples = a.u64("samples", errs).map(|v| v as usize).unwrap_or(ac.samples);
        ac.seed = a.u64("seed", errs).unwrap_or(0);
        check(ac.horizon >= 1000, || "\"ac.horizon\" must be ≥ 1000".into(), errs);
        check(ac.samples >= 1, || "\"ac.samples\" must be ≥ 1".into(), errs);
    }

    Some(RunConfig {
        problem: problem?,
        x0,
        schedule: schedule?,
        noise: noise?,
        n_steps: n_steps?,
        record_every,
        record_times,
        snapshot_steps,
        store_x,
        n_replicates,
        master_seed,
        batch_size,
        output_dir,
        epsilons,
        flags,
        gap,
        ac,
    })
}

fn walk_problem(top: &Section, errs: &mut Vec<String>) -> Option<ProblemSpec> {
    let keys = [
        "family",
        "d",
        "pinned",
        "m",
        "sparsity",
        "noise_sigma",
        "seed",
        "design",
        "image_side",
        "n_angles",
        "n_detectors",
        "phantom",
    ];
    let p = top.sub("problem", &keys, errs)?;
    let family = p.str("family", errs);
    if p.raw("family").is_none() {
        p.missing("family", errs);
    }
    let allowed: &[&str] = match family? {
        "bilevel_quadratic" => &["family", "d", "pinned"],
        "basis_pursuit" => &["family", "m", "d", "sparsity", "noise_sigma", "seed", "design"],
        "radon" => &["family", "image_side", "n_angles", "n_detectors", "phantom", "seed"],
        other => {
            errs.push(format!(
                "\"problem.family\" must be one of bilevel_quadratic, basis_pursuit, radon; got \"{other}\""
            ));
            return None;
        }
    };
    for k in p.table.keys() {
        if keys.contains(&k.as_str()) && !allowed.contains(&k.as_str()) {
            errs.push(format!("key \"problem.{k}\" does not apply to family \"{}\"", family?));
        }
    }
    let seed = p.u64("seed", errs).unwrap_or(0);
    match family? {
        "bilevel_quadratic" => {
            let d = p.req_usize("d", errs);
            let pinned = p.req_usize("pinned", errs);
            if let (Some(d), Some(j)) = (d, pinned) {
                check(j >= 1 && j < d, || format!("need 1 ≤ problem.pinned < problem.d, got pinned={j}, d={d}"), errs);
            }
            Some(ProblemSpec::BilevelQuadratic { d: d?, pinned: pinned? })
        }
        "basis_pursuit" => {
            let m = p.req_usize("m", errs);
            let d = p.req_usize("d", errs);
            let sparsity = p.u64("sparsity", errs).map(|v| v as usize).unwrap_or(5);
            let noise_sigma = p.f64("noise_sigma", errs).unwrap_or(0.0);
            check(noise_sigma >= 0.0 && noise_sigma.is_finite(), || "\"problem.noise_sigma\" must be ≥ 0".into(), errs);
            let design = match p.str("design", errs) {
                None | Some("gaussian") => Design::Gaussian,
                Some("orthonormal") => Design::Orthonormal,
                Some(other) => {
                    errs.push(format!("\"problem.design\" must be \"gaussian\" or \"orthonormal\", got \"{other}\""));
                    Design::Gaussian
                }
            };
            if let (Some(m), Some(d)) = (m, d) {
                check(m >= 1 && m <= d, || format!("need 1 ≤ problem.m ≤ problem.d, got m={m}, d={d}"), errs);
                check(sparsity <= d, || format!("problem.sparsity={sparsity} exceeds d={d}"), errs);
            }
            Some(ProblemSpec::BasisPursuit { m: m?, d: d?, sparsity, noise_sigma, seed, design })
        }
        _ => {
            let image_side = p.req_usize("image_side", errs);
            let n_angles = p.req_usize("n_angles", errs);
            let n_detectors = p.req_usize("n_detectors", errs);
            if let Some(s) = image_side {
                check(s >= 8, || format!("\"problem.image_side\" must be ≥ 8, got {s}"), errs);
            }
            check(n_angles != Some(0) && n_detectors != Some(0), || "angle and detector counts must be ≥ 1".into(), errs);
            let phantom = match p.str("phantom", errs) {
                None | Some("blocks") => Phantom::Blocks,
                Some("shepp-logan-like") => Phantom::SheppLoganLike,
                Some("zero") => Phantom::Zero,
                Some("disk") => Phantom::Disk,
                Some(other) => {
                    errs.push(format!(
                        "\"problem.phantom\" must be one of blocks, shepp-logan-like, zero, disk; got \"{other}\""
                    ));
                    Phantom::Blocks
                }
            };
            Some(ProblemSpec::Radon { image_side: image_side?, n_angles: n_angles?, n_detectors: n_detectors?, phantom, seed })
        }
    }
}

fn walk_schedule(top: &Section, errs: &mut Vec<String>) -> Option<ScheduleSpec> {
    let Some(s) = top.sub("schedule", &["form", "scale", "a", "n0", "c", "lambda", "beta"], errs) else {
        return top.raw("schedule").is_none().then(ScheduleSpec::default);
    };
    match s.str("form", errs).unwrap_or("power_product") {
        "power_product" => {
            for k in ["lambda", "beta"] {
                if s.raw(k).is_some() {
                    errs.push(format!("key \"schedule.{k}\" does not apply to form \"power_product\""));
                }
            }
            let scale = s.f64("scale", errs).unwrap_or(1.0);
            let a = s.f64("a", errs).unwrap_or(0.75);
            let n0 = s.f64("n0", errs).unwrap_or(10.0);
            let c = s.f64("c", errs).unwrap_or(1.0);
            check(scale > 0.0 && scale.is_finite(), || "\"schedule.scale\" must be > 0".into(), errs);
            check(a >= 0.0 && a.is_finite(), || "\"schedule.a\" must be ≥ 0".into(), errs);
            check(n0 > 0.0 && n0.is_finite(), || "\"schedule.n0\" must be > 0".into(), errs);
            check(c > 0.0 && c.is_finite(), || "\"schedule.c\" must be > 0".into(), errs);
            Some(ScheduleSpec::PowerProduct { scale, a, n0, c })
        }
        "constant" => {
            for k in ["scale", "a", "n0", "c"] {
                if s.raw(k).is_some() {
                    errs.push(format!("key \"schedule.{k}\" does not apply to form \"constant\""));
                }
            }
            let lambda = s.req_f64("lambda", errs);
            let beta = s.req_f64("beta", errs);
            check(lambda.is_none_or(|v| v > 0.0 && v.is_finite()), || "\"schedule.lambda\" must be > 0".into(), errs);
            check(beta.is_none_or(|v| v > 0.0 && v.is_finite()), || "\"schedule.beta\" must be > 0".into(), errs);
            Some(ScheduleSpec::Constant { lambda: lambda?, beta: beta? })
        }
        other => {
            errs.push(format!("\"schedule.form\" must be \"power_product\" or \"constant\", got \"{other}\""));
            None
        }
    }
}

fn walk_noise(top: &Section, errs: &mut Vec<String>) -> Option<NoiseRegime> {
    let Some(s) = top.sub("noise", &["regime", "scale", "sigma0", "q"], errs) else {
        return top.raw("noise").is_none().then_some(NoiseRegime::Off);
    };
    let regime = s.str("regime", errs).unwrap_or("off");
    let stray = |keys: &[&str], errs: &mut Vec<String>| {
        for k in keys {
            if s.raw(k).is_some() {
                errs.push(format!("key \"noise.{k}\" does not apply to regime \"{regime}\""));
            }
        }
    };
    match regime {
        "off" => {
            stray(&["scale", "sigma0", "q"], errs);
            Some(NoiseRegime::Off)
        }
        "ubv" => {
            stray(&["sigma0", "q"], errs);
            let scale = s.req_f64("scale", errs)?;
            check(scale >= 0.0 && scale.is_finite(), || "\"noise.scale\" must be ≥ 0".into(), errs);
            Some(NoiseRegime::Ubv { scale })
        }
        "asv" => {
            stray(&["scale"], errs);
            let sigma0 = s.req_f64("sigma0", errs);
            let q = s.req_f64("q", errs);
            check(sigma0.is_none_or(|v| v >= 0.0 && v.is_finite()), || "\"noise.sigma0\" must be ≥ 0".into(), errs);
            check(q.is_none_or(|v| v > 0.5 && v.is_finite()), || "\"noise.q\" must exceed 1/2 (square-integrable decay)".into(), errs);
            Some(NoiseRegime::Asv { sigma0: sigma0?, q: q? })
        }
        other => {
            errs.push(format!("\"noise.regime\" must be one of off, ubv, asv; got \"{other}\""));
            None
        }
    }
}
