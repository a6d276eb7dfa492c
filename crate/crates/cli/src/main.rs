use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use penfb::harness::{self, io, HarnessError};

/// Penalty-regulated stochastic forward-backward solver.
#[derive(Parser)]
#[command(name = "penfb", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run all replicates of a config and write traces, snapshots and report.json.
    Solve {
        config: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
        /// Override master_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: output_dir from the config, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the AC-condition checker and print the verdict table.
    CheckAc { config: PathBuf },
    /// Evaluate diagnostics at a saved point (vector file).
    Gap {
        config: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// Dump the design matrix in coordinate text format ("row col value").
    RadonExport {
        config: PathBuf,
        /// Write matrix.txt, rhs.txt and reference.txt here instead of printing the matrix.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ALL_DIVERGED: u8 = 3;

fn fail(e: HarnessError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        HarnessError::Config(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => fail(e),
    }
}

fn run(cmd: Cmd) -> Result<ExitCode, HarnessError> {
    match cmd {
        Cmd::Solve { config, threads, seed, out } => {
            let mut cfg = harness::parse_config(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let dir = out.or_else(|| cfg.output_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
            let (report, trajs) = harness::run_experiment(&cfg, threads)?;
            harness::write_outputs(&dir, &report, &trajs)?;
            let agg = &report.aggregate;
            println!("config_hash {}", report.config_hash);
            println!("replicates {} (diverged {})", agg.n_replicates, agg.n_diverged);
            if let Some(q) = &agg.final_dist {
                println!("final {} median {:.6e}", report.dist_kind, q.median);
            }
            if let Some(q) = &agg.final_psi {
                println!("final psi median {:.6e}", q.median);
            }
            if let Some(q) = &agg.final_relative_error {
                println!("final relative error median {:.6e}", q.median);
            }
            if let Some(f) = &agg.rate_fit {
                println!("rate fit slope {:.4} (R² {:.4})", f.slope, f.r_squared);
            }
            println!("wrote {}", dir.display());
            if agg.n_diverged == agg.n_replicates {
                eprintln!("error: every replicate diverged");
                return Ok(ExitCode::from(EXIT_ALL_DIVERGED));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::CheckAc { config } => {
            let cfg = harness::parse_config(&config)?;
            let rep = harness::check_ac(&cfg)?;
            println!("{:>6}  {:>16}  {:>9}  verdict", "sample", "partial sum", "exponent");
            for (i, s) in rep.samples.iter().enumerate() {
                let exp = s.decay_exponent.map_or("-".to_string(), |e| format!("{e:.4}"));
                println!("{i:>6}  {:>16.8e}  {exp:>9}  {:?}", s.final_sum, s.verdict);
                if let Some(d) = &s.diagnostic {
                    println!("        {d}");
                }
            }
            println!("overall (horizon {}): {:?}", rep.horizon, rep.verdict);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Gap { config, point } => {
            let cfg = harness::parse_config(&config)?;
            let x = io::read_vector(&point)?;
            let rep = harness::evaluate_point(&cfg, &x)?;
            println!("{}", serde_json::to_string_pretty(&rep).map_err(|e| HarnessError::Format(e.to_string()))?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::RadonExport { config, out } => {
            let cfg = harness::parse_config(&config)?;
            match out {
                Some(dir) => {
                    harness::export_instance(&cfg, &dir)?;
                    println!("wrote {}", dir.display());
                }
                None => print!("{}", harness::export_matrix(&cfg)?),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
