use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sojourn_core::experiments::{self, ExperimentConfig, Run};

#[derive(Parser)]
#[command(name = "sojourn", version, about = "Monte Carlo studies of chi-square sojourn functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study named in the config.
    Run(RunArgs),
    /// Coefficient and asymptote audits.
    Audit(RunArgs),
    /// Theoretical variance predictions only; prints JSON.
    Predict {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Worker threads for the replication sweep.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn execute(args: &RunArgs, audit: bool) -> Result<bool, String> {
    let cfg = load(&args.config, args.seed)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let run: Run = pool
        .install(|| if audit { experiments::run_audit(&cfg) } else { experiments::run(&cfg) })
        .map_err(|e| e.to_string())?;
    let dir = cfg.resolved_output_dir();
    let files = experiments::write_outputs(&run, &dir, args.plots).map_err(|e| e.to_string())?;
    eprintln!("finished in {:.1} s with {} workers", start.elapsed().as_secs_f64(), pool.current_num_threads());
    for f in &files {
        eprintln!("wrote {}", f.display());
    }
    for g in &run.result.gates {
        eprintln!("[{}] {}: {}", if g.passed { "pass" } else { "FAIL" }, g.name, g.detail);
    }
    let failures = run.result.failures();
    if !failures.is_empty() {
        emit(&json!({ "failures": failures }).to_string());
    }
    Ok(failures.is_empty())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => execute(args, false),
        Command::Audit(args) => execute(args, true),
        Command::Predict { config } => load(config, None).and_then(|cfg| {
            let report = experiments::predict(&cfg).map_err(|e| e.to_string())?;
            emit(&serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?);
            Ok(true)
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
