//! `qbsde`: run experiment configs or a manifest of them and write JSON
//! reports plus plot-ready CSV tables.
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 config error,
//! 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Parser};
use rayon::prelude::*;

use config::{load_manifest, ExperimentConfig};
use report::{write_reports, write_summary, SummaryRow};
use run::{RunError, EXIT_CONFIG, EXIT_PASS, EXIT_VERDICT};

const DEFAULT_OUT: &str = "qbsde-out";

#[derive(Parser, Debug)]
#[command(name = "qbsde", version, about = "Run quadratic g-expectation experiments from JSON configs")]
#[command(group(ArgGroup::new("input").required(true).args(["config", "manifest"])))]
struct Args {
    /// A single experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// A manifest listing experiments; writes summary.csv.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Overrides the seed of every experiment.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "QBSDE_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every verdict tolerance.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

struct Finished {
    row: SummaryRow,
    code: u8,
}

fn execute(cfg: &ExperimentConfig, out: &Path) -> Finished {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run::run(cfg))).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(RunError { code: run::EXIT_NUMERICAL, message: format!("internal panic: {}", msg.unwrap_or_default()) })
    });
    let seconds = start.elapsed().as_secs_f64();
    let mut code = match &outcome {
        Ok(o) if o.verdict.passed() => EXIT_PASS,
        Ok(_) => EXIT_VERDICT,
        Err(e) => e.code,
    };
    if let Err(e) = write_reports(out, cfg, &outcome) {
        eprintln!("{}: cannot write reports to {}: {e}", cfg.name, out.display());
        code = code.max(EXIT_CONFIG);
    }
    let (verdict, gap, tolerance) = match &outcome {
        Ok(o) => (if o.verdict.passed() { "pass" } else { "fail" }, o.gap, o.tolerance),
        Err(e) => {
            eprintln!("{}: {}", cfg.name, e.message);
            ("error", None, None)
        }
    };
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3e}")).unwrap_or_else(|| "-".into());
    println!("{:<28} {:<5} gap {:>10} tol {:>10} {:>8.2} s", cfg.name, verdict, fmt(gap), fmt(tolerance), seconds);
    Finished { row: SummaryRow { name: cfg.name.clone(), verdict: verdict.into(), gap, tolerance, seconds }, code }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if !(args.tolerance_scale > 0.0 && args.tolerance_scale.is_finite()) {
        eprintln!("--tolerance-scale must be positive and finite");
        return ExitCode::from(EXIT_CONFIG);
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot start the worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let (configs, summary) = match (&args.config, &args.manifest) {
        (Some(path), _) => (ExperimentConfig::load(path).map(|c| vec![c]), false),
        (None, Some(path)) => (load_manifest(path), true),
        (None, None) => unreachable!("clap requires one input"),
    };
    let configs: Vec<ExperimentConfig> = match configs {
        Ok(c) => c.into_iter().map(|c| c.resolve(args.seed, args.tolerance_scale)).collect(),
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out_for = |cfg: &ExperimentConfig| -> PathBuf {
        args.out.clone().or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| DEFAULT_OUT.into())
    };

    // Experiments write distinct files, so reports never share a file.
    let finished: Vec<Finished> = pool.install(|| configs.par_iter().map(|c| execute(c, &out_for(c))).collect());
    let mut code = finished.iter().map(|f| f.code).max().unwrap_or(EXIT_PASS);
    if summary {
        let dir = args.out.clone().unwrap_or_else(|| DEFAULT_OUT.into());
        let rows: Vec<SummaryRow> = finished.into_iter().map(|f| f.row).collect();
        if let Err(e) = write_summary(&dir.join("summary.csv"), &rows) {
            eprintln!("cannot write summary to {}: {e}", dir.display());
            code = code.max(EXIT_CONFIG);
        }
    }
    ExitCode::from(code)
}
