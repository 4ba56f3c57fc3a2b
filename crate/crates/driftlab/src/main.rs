//! Command line driver for the drift detection laboratory.
//!
//! Configuration is resolved in three layers: built-in defaults, an
//! optional flat `key = value` file (`--config`), then individual flags.
//! The only environment variable honored is `DRIFTLAB_WORKERS`, which
//! caps the worker threads; results are identical for any worker count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use driftlab::error::{Error, Result};
use driftlab::experiment::csvio::fmt_sig6;
use driftlab::experiment::figures::run_figures;
use driftlab::experiment::runner::{
    run_calibrate, run_collapse, run_delta_min, run_power, run_table, CalibrateSummary,
    DeltaMinSummary, PowerSummary,
};
use driftlab::experiment::verify::run_verify;
use driftlab::experiment::{ExperimentConfig, ProvenanceChoice};

#[derive(Parser)]
#[command(
    name = "driftlab",
    version,
    about = "Detectability laboratory for mean-preserving drift in Bernoulli blocks"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Master seed; every job seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nominal test level in (0, 1).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Power level the minimal amplitude is probed at, in (0, 1).
    #[arg(long, global = true)]
    target_power: Option<f64>,
    /// Null replications per threshold calibration.
    #[arg(long, global = true)]
    m0: Option<usize>,
    /// Replications per power point.
    #[arg(long, global = true)]
    m1: Option<usize>,
    /// Comma-separated block lengths, e.g. 250,500,1000.
    #[arg(long, global = true, value_name = "LIST")]
    block_sizes: Option<String>,
    /// Comma-separated baseline rates, e.g. 0.02,0.05,0.1.
    #[arg(long, global = true, value_name = "LIST")]
    e0: Option<String>,
    /// Comma-separated drift shapes: linear, sinusoidal, step.
    #[arg(long, global = true, value_name = "LIST")]
    profiles: Option<String>,
    /// Threshold source: monte-carlo or asymptotic.
    #[arg(long, global = true)]
    provenance: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate critical values for every (n, e0) pair.
    Calibrate,
    /// Simulate power curves over theory-guided amplitude grids.
    Power,
    /// Interpolate minimal detectable amplitudes and fit their scaling.
    DeltaMin,
    /// Full pipeline: calibrate, power, delta-min.
    Table,
    /// Rescale power curves onto the collapse coordinates.
    Collapse,
    /// Render the standard figures from the reports.
    Figures,
    /// Run the numeric verification suite; nonzero exit on any failure.
    Verify {
        /// Add a deliberately broken zero critical value to demonstrate
        /// that the suite catches it.
        #[arg(long)]
        inject_zero_threshold: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    init_workers()?;
    let cfg = build_config(&cli.overrides)?;
    match cli.command {
        Command::Calibrate => print_calibrate(&run_calibrate(&cfg)?),
        Command::Power => print_power(&run_power(&cfg)?),
        Command::DeltaMin => print_delta_min(&run_delta_min(&cfg)?),
        Command::Table => {
            let summary = run_table(&cfg)?;
            print_calibrate(&summary.calibrate);
            print_power(&summary.power);
            print_delta_min(&summary.delta_min);
        }
        Command::Collapse => {
            let summary = run_collapse(&cfg)?;
            println!(
                "collapse dataset: {} rows -> {}",
                summary.rows,
                summary.path.display()
            );
        }
        Command::Figures => {
            let summary = run_figures(&cfg)?;
            for path in &summary.written {
                println!("figure -> {}", path.display());
            }
        }
        Command::Verify { inject_zero_threshold } => {
            let report = run_verify(&cfg, inject_zero_threshold)?;
            for c in &report.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                let rule = match c.cmp.as_str() {
                    "within" => format!(
                        "{} within {} of {}",
                        fmt_sig6(c.lhs),
                        fmt_sig6(c.tolerance),
                        fmt_sig6(c.rhs)
                    ),
                    cmp => format!("{} {cmp} {}", fmt_sig6(c.lhs), fmt_sig6(c.rhs)),
                };
                println!("[{tag}] {}: {rule}", c.name);
            }
            let passed = report.checks.iter().filter(|c| c.pass).count();
            println!(
                "{passed} of {} checks passed -> {}",
                report.checks.len(),
                cfg.out_dir.join("verification.json").display()
            );
            if !report.all_pass {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// Defaults, then the config file, then individual flags.
fn build_config(ov: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match &ov.config {
        Some(path) => ExperimentConfig::from_flat_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &ov.block_sizes {
        cfg.apply_kv("block_sizes", v)?;
    }
    if let Some(v) = &ov.e0 {
        cfg.apply_kv("e0", v)?;
    }
    if let Some(v) = &ov.profiles {
        cfg.apply_kv("profiles", v)?;
    }
    if let Some(v) = ov.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = ov.target_power {
        cfg.target_power = v;
    }
    if let Some(v) = ov.m0 {
        cfg.m0 = v;
    }
    if let Some(v) = ov.m1 {
        cfg.m1 = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = &ov.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &ov.provenance {
        cfg.provenance = ProvenanceChoice::parse(v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers() -> Result<()> {
    if let Ok(raw) = std::env::var("DRIFTLAB_WORKERS") {
        let workers: usize = raw.trim().parse().map_err(|_| {
            Error::Config(format!(
                "DRIFTLAB_WORKERS must be a positive integer, got {raw:?}"
            ))
        })?;
        if workers == 0 {
            return Err(Error::Config("DRIFTLAB_WORKERS must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn print_calibrate(s: &CalibrateSummary) {
    for t in &s.thresholds {
        let e0 = t.e0.map(fmt_sig6).unwrap_or_else(|| "-".into());
        let size = t
            .achieved_size
            .as_ref()
            .map(|a| fmt_sig6(a.rate))
            .unwrap_or_else(|| "-".into());
        println!(
            "threshold n={} e0={e0} tau={} achieved_size={size}",
            t.n,
            fmt_sig6(t.tau)
        );
    }
    println!(
        "calibration: {} computed, {} reused -> {}",
        s.computed,
        s.reused,
        s.path.display()
    );
}

fn print_power(s: &PowerSummary) {
    println!(
        "power: {} cells computed, {} reused -> {}",
        s.computed_cells,
        s.reused_cells,
        s.report_path.display()
    );
}

fn print_delta_min(s: &DeltaMinSummary) {
    for o in &s.outcomes {
        let value = o
            .estimate
            .as_ref()
            .and_then(|e| e.value())
            .map(fmt_sig6)
            .unwrap_or_else(|| "--".into());
        let note = if o.reason.is_empty() {
            String::new()
        } else {
            format!(" ({})", o.reason)
        };
        println!(
            "delta_min n={} e0={} {}: {value}{note}",
            o.n,
            fmt_sig6(o.e0),
            o.label
        );
    }
    for f in &s.fits {
        match &f.fit {
            Some(fit) => println!(
                "scaling e0={} {}: slope={} intercept={} over {} points",
                fmt_sig6(f.e0),
                f.label,
                fmt_sig6(fit.slope),
                fmt_sig6(fit.intercept),
                fit.points.len()
            ),
            None => println!(
                "scaling e0={} {}: skipped ({} reached, need 3)",
                fmt_sig6(f.e0),
                f.label,
                f.reached
            ),
        }
    }
    println!(
        "delta-min -> {} and {}",
        s.delta_min_path.display(),
        s.scaling_path.display()
    );
}
