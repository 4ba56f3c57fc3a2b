//! Sweep orchestration: threshold caching, per-cell power curves, report
//! files, and resumable output directories.
//!
//! Layout of an output directory:
//!
//! ```text
//! out/
//!   manifest.json        what was run, with per-job seeds and artifacts
//!   thresholds.csv       Monte Carlo critical-value cache (full precision)
//!   cells/cell_*.csv     one power curve per (n, e0, profile), full precision
//!   power_curves.csv     report over all cells (6 significant digits)
//!   delta_min.csv        interpolated minimal amplitudes + reasons
//!   scaling_fit.csv      log-log slope per (e0, profile) family
//!   collapse.csv         curves rescaled onto the collapse coordinates
//!   fig_*.svg            figures
//!   verification.json    numeric invariant checks
//! ```
//!
//! Cell files are the source of truth; every report is derived from them.
//! A cell is reused only when its rows pass integrity checks (matching
//! configuration and reproducible per-point seeds), so editing the config
//! or the master seed invalidates stale cells automatically, while an
//! interrupted sweep picks up after the last finished cell.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::calibration::{self, CalibratedThreshold, ThresholdTable};
use crate::error::{Error, Result};
use crate::power::{
    self, DeltaMinEstimate, DeltaMinStatus, GridSpec, PowerCurve, PowerPoint, ScalingFit,
};
use crate::profiles::DriftProfile;
use crate::rng::{f64_key, job_seed};

use super::config::{ExperimentConfig, ProvenanceChoice};
use super::csvio::{self, fmt_sig6};
use super::manifest::RunManifest;

// ---------------------------------------------------------------------------
// Output layout

#[derive(Debug, Clone)]
pub struct OutPaths {
    root: PathBuf,
}

impl OutPaths {
    pub fn new(root: &Path) -> Self {
        OutPaths { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn thresholds(&self) -> PathBuf {
        self.root.join("thresholds.csv")
    }

    pub fn cells_dir(&self) -> PathBuf {
        self.root.join("cells")
    }

    pub fn cell(&self, n: usize, e0: f64, label: &str) -> PathBuf {
        self.cells_dir().join(format!("cell_{n}_{e0}_{label}.csv"))
    }

    pub fn power_curves(&self) -> PathBuf {
        self.root.join("power_curves.csv")
    }

    pub fn delta_min(&self) -> PathBuf {
        self.root.join("delta_min.csv")
    }

    pub fn scaling_fit(&self) -> PathBuf {
        self.root.join("scaling_fit.csv")
    }

    pub fn collapse(&self) -> PathBuf {
        self.root.join("collapse.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn verification(&self) -> PathBuf {
        self.root.join("verification.json")
    }

    pub fn figure(&self, stem: &str) -> PathBuf {
        self.root.join(format!("{stem}.svg"))
    }

    /// Path relative to the output root, for manifest records.
    pub fn rel(&self, path: &Path) -> String {
        path.strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned()
    }
}

/// Create the output directory and prove it is writable before any
/// simulation starts, so a bad destination fails in milliseconds.
pub fn preflight_out_dir(root: &Path) -> Result<()> {
    std::fs::create_dir_all(root)?;
    std::fs::create_dir_all(root.join("cells"))?;
    let probe = root.join(".write-probe");
    std::fs::write(&probe, b"ok")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Threshold provisioning

fn calibrate_seed(cfg: &ExperimentConfig, n: usize, e0: f64) -> u64 {
    job_seed(cfg.seed, &["calibrate", &n.to_string(), &f64_key(e0)])
}

/// Fetch the threshold for (n, e0), producing and caching it if needed.
/// Returns the threshold and whether a simulation ran.
fn ensure_threshold(
    cfg: &ExperimentConfig,
    table: &mut ThresholdTable,
    table_path: &Path,
    manifest: &mut RunManifest,
    n: usize,
    e0: f64,
) -> Result<(CalibratedThreshold, bool)> {
    match cfg.provenance {
        ProvenanceChoice::Asymptotic => {
            Ok((calibration::asymptotic_threshold(n, cfg.alpha)?, false))
        }
        ProvenanceChoice::MonteCarlo => {
            let seed = calibrate_seed(cfg, n, e0);
            manifest.upsert_job(&format!("calibrate n={n} e0={e0}"), seed);
            if let Some(t) = table.lookup(n, e0, cfg.alpha, cfg.m0, seed) {
                return Ok((t, false));
            }
            let t = calibration::mc_threshold(n, e0, cfg.alpha, cfg.m0, seed)?;
            table.insert(&t)?;
            // Persist immediately so an interrupted sweep keeps it.
            table.save(table_path)?;
            Ok((t, true))
        }
    }
}

// ---------------------------------------------------------------------------
// Cell files

const CELL_HEADER: &str = "n,e0,profile,delta,power,se,m1,seed";

fn write_cell(path: &Path, curve: &PowerCurve) -> Result<()> {
    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                p.e0.to_string(),
                curve.profile.label().to_string(),
                p.delta.to_string(),
                p.power.to_string(),
                p.se.to_string(),
                p.m1.to_string(),
                p.seed.to_string(),
            ]
        })
        .collect();
    csvio::write_csv(path, CELL_HEADER, &rows)
}

/// Parse a cell file and verify it belongs to the given configuration:
/// identity columns must match and every per-point seed must equal the
/// seed this sweep would derive for that amplitude.
fn load_cell_strict(
    path: &Path,
    cfg: &ExperimentConfig,
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    curve_seed: u64,
) -> Result<Vec<PowerPoint>> {
    let rows = csvio::read_csv(path, CELL_HEADER)?;
    let mut points = Vec::with_capacity(rows.len());
    for fields in &rows {
        let row_n = csvio::field_usize(fields, 0, "n")?;
        let row_e0 = csvio::field_f64(fields, 1, "e0")?;
        let label = &fields[2];
        let delta = csvio::field_f64(fields, 3, "delta")?;
        let power = csvio::field_f64(fields, 4, "power")?;
        let se = csvio::field_f64(fields, 5, "se")?;
        let m1 = csvio::field_usize(fields, 6, "m1")?;
        let seed = csvio::field_u64(fields, 7, "seed")?;
        if row_n != n || row_e0 != e0 || label != profile.label() {
            return Err(Error::Parse(format!(
                "{}: row identity ({row_n}, {row_e0}, {label}) does not match \
                 cell ({n}, {e0}, {})",
                path.display(),
                profile.label()
            )));
        }
        if m1 != cfg.m1 {
            return Err(Error::Parse(format!(
                "{}: cell was produced with m1 = {m1}, configuration says {}",
                path.display(),
                cfg.m1
            )));
        }
        let expect = job_seed(curve_seed, &["power-point", &f64_key(delta)]);
        if seed != expect {
            return Err(Error::Parse(format!(
                "{}: per-point seed {seed} does not match the derived seed \
                 {expect}; the cell belongs to a different sweep",
                path.display()
            )));
        }
        if !(delta > 0.0 && delta.is_finite()) || !(0.0..=1.0).contains(&power) || se < 0.0 {
            return Err(Error::Parse(format!(
                "{}: out-of-range row (delta {delta}, power {power}, se {se})",
                path.display()
            )));
        }
        points.push(PowerPoint {
            n,
            e0,
            profile: profile.clone(),
            delta,
            power,
            se,
            m1,
            seed,
        });
    }
    for w in points.windows(2) {
        if w[1].delta <= w[0].delta {
            return Err(Error::Parse(format!(
                "{}: amplitudes are not strictly increasing",
                path.display()
            )));
        }
    }
    Ok(points)
}

/// Rebuild the curve wrapper around loaded points. Grid feasibility flags
/// are recomputed from the configuration; they never depend on samples.
fn rebuild_curve(
    cfg: &ExperimentConfig,
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    points: Vec<PowerPoint>,
) -> Result<PowerCurve> {
    let plan = power::amplitude_grid(n, e0, profile, cfg.alpha, &grid_spec(cfg))?;
    Ok(PowerCurve {
        n,
        e0,
        profile: profile.clone(),
        points,
        clipped: plan.clipped,
        infeasible: plan.infeasible,
    })
}

fn grid_spec(cfg: &ExperimentConfig) -> GridSpec {
    GridSpec { target_power: cfg.target_power, ..GridSpec::default() }
}

fn curve_seed(cfg: &ExperimentConfig, n: usize, e0: f64, label: &str) -> u64 {
    job_seed(cfg.seed, &["power-curve", &n.to_string(), &f64_key(e0), label])
}

// ---------------------------------------------------------------------------
// Subcommand: calibrate

#[derive(Debug)]
pub struct CalibrateSummary {
    pub thresholds: Vec<CalibratedThreshold>,
    pub computed: usize,
    pub reused: usize,
    pub path: PathBuf,
}

pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<CalibrateSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);
    let mut manifest = RunManifest::load_or_new(&paths.manifest(), cfg)?;
    let mut table = ThresholdTable::load(&paths.thresholds())?;
    let mut thresholds = Vec::new();
    let mut computed = 0;
    let mut reused = 0;
    let t0 = Instant::now();
    for &n in &cfg.block_sizes {
        for &e0 in &cfg.e0 {
            let (thr, ran) =
                ensure_threshold(cfg, &mut table, &paths.thresholds(), &mut manifest, n, e0)?;
            if ran {
                computed += 1;
            } else {
                reused += 1;
            }
            thresholds.push(thr);
        }
    }
    if cfg.provenance == ProvenanceChoice::MonteCarlo {
        table.save(&paths.thresholds())?;
        let status = if computed > 0 { "written" } else { "reused" };
        manifest.upsert_artifact(
            "thresholds",
            &paths.rel(&paths.thresholds()),
            t0.elapsed().as_millis() as u64,
            status,
        );
    }
    manifest.save(&paths.manifest())?;
    Ok(CalibrateSummary { thresholds, computed, reused, path: paths.thresholds() })
}

// ---------------------------------------------------------------------------
// Subcommand: power

#[derive(Debug)]
pub struct PowerSummary {
    pub curves: Vec<PowerCurve>,
    pub computed_cells: usize,
    pub reused_cells: usize,
    pub report_path: PathBuf,
}

pub fn run_power(cfg: &ExperimentConfig) -> Result<PowerSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);
    let mut manifest = RunManifest::load_or_new(&paths.manifest(), cfg)?;
    let mut table = ThresholdTable::load(&paths.thresholds())?;
    let profiles = cfg.resolved_profiles()?;
    let spec = grid_spec(cfg);
    let mut curves = Vec::new();
    let mut computed_cells = 0;
    let mut reused_cells = 0;
    for &n in &cfg.block_sizes {
        for &e0 in &cfg.e0 {
            let (thr, _) =
                ensure_threshold(cfg, &mut table, &paths.thresholds(), &mut manifest, n, e0)?;
            for profile in &profiles {
                let label = profile.label();
                let seed = curve_seed(cfg, n, e0, label);
                manifest.upsert_job(&format!("power-curve n={n} e0={e0} profile={label}"), seed);
                let cell_path = paths.cell(n, e0, label);
                let t0 = Instant::now();
                // Any defect in an existing cell file (torn write, foreign
                // sweep, edited config) falls through to a clean recompute.
                let loaded = if cell_path.exists() {
                    load_cell_strict(&cell_path, cfg, n, e0, profile, seed).ok()
                } else {
                    None
                };
                let (curve, status) = match loaded {
                    Some(points) => {
                        reused_cells += 1;
                        (rebuild_curve(cfg, n, e0, profile, points)?, "reused")
                    }
                    None => {
                        let c = power::power_curve(n, e0, profile, &thr, &spec, cfg.m1, seed)?;
                        write_cell(&cell_path, &c)?;
                        computed_cells += 1;
                        (c, "written")
                    }
                };
                manifest.upsert_artifact(
                    "power-cell",
                    &paths.rel(&cell_path),
                    t0.elapsed().as_millis() as u64,
                    status,
                );
                manifest.save(&paths.manifest())?;
                curves.push(curve);
            }
        }
    }
    let t0 = Instant::now();
    let rows: Vec<Vec<String>> = curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| {
                vec![
                    p.n.to_string(),
                    fmt_sig6(p.e0),
                    c.profile.label().to_string(),
                    fmt_sig6(p.delta),
                    fmt_sig6(p.power),
                    fmt_sig6(p.se),
                    p.m1.to_string(),
                    p.seed.to_string(),
                ]
            })
        })
        .collect();
    csvio::write_csv(&paths.power_curves(), "n,e0,profile,delta,power,se,m1,seed", &rows)?;
    manifest.upsert_artifact(
        "power-curves",
        &paths.rel(&paths.power_curves()),
        t0.elapsed().as_millis() as u64,
        "written",
    );
    manifest.save(&paths.manifest())?;
    Ok(PowerSummary {
        curves,
        computed_cells,
        reused_cells,
        report_path: paths.power_curves(),
    })
}

// ---------------------------------------------------------------------------
// Reading cells back (delta-min, collapse, figures)

/// Load every configured cell from disk without simulating anything.
/// Missing cells point at the subcommand that produces them.
pub fn load_all_curves(cfg: &ExperimentConfig) -> Result<Vec<PowerCurve>> {
    let paths = OutPaths::new(&cfg.out_dir);
    let profiles = cfg.resolved_profiles()?;
    let mut curves = Vec::new();
    for &n in &cfg.block_sizes {
        for &e0 in &cfg.e0 {
            for profile in &profiles {
                let label = profile.label();
                let cell_path = paths.cell(n, e0, label);
                if !cell_path.exists() {
                    return Err(Error::MissingDependency {
                        needed: paths.rel(&cell_path),
                        produced_by: "power".into(),
                    });
                }
                let seed = curve_seed(cfg, n, e0, label);
                let points = load_cell_strict(&cell_path, cfg, n, e0, profile, seed)?;
                let curve = rebuild_curve(cfg, n, e0, profile, points)?;
                if curve.points.is_empty() && !curve.infeasible {
                    return Err(Error::Parse(format!(
                        "{}: no rows, but the amplitude grid is feasible",
                        cell_path.display()
                    )));
                }
                curves.push(curve);
            }
        }
    }
    Ok(curves)
}

// ---------------------------------------------------------------------------
// Subcommand: delta-min

/// Outcome of one sweep cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub n: usize,
    pub e0: f64,
    pub label: String,
    /// None when the amplitude grid was infeasible.
    pub estimate: Option<DeltaMinEstimate>,
    /// Empty for a clean estimate; otherwise why the value is missing or
    /// one-sided: "not-reached", "left-censored", "infeasible".
    pub reason: &'static str,
}

/// Scaling fit for one (e0, profile) family.
#[derive(Debug, Clone)]
pub struct FamilyFit {
    pub e0: f64,
    pub label: String,
    pub reached: usize,
    /// None when fewer than three block lengths reached the target.
    pub fit: Option<ScalingFit>,
}

#[derive(Debug)]
pub struct DeltaMinSummary {
    pub outcomes: Vec<CellOutcome>,
    pub fits: Vec<FamilyFit>,
    pub delta_min_path: PathBuf,
    pub scaling_path: PathBuf,
}

pub fn run_delta_min(cfg: &ExperimentConfig) -> Result<DeltaMinSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);
    let mut manifest = RunManifest::load_or_new(&paths.manifest(), cfg)?;
    let curves = load_all_curves(cfg)?;
    let t0 = Instant::now();

    let mut outcomes = Vec::new();
    for curve in &curves {
        let label = curve.profile.label().to_string();
        let (estimate, reason) = if curve.infeasible {
            (None, "infeasible")
        } else {
            let est = power::delta_min_hat(&curve.points, cfg.target_power)?;
            let reason = match est.status {
                DeltaMinStatus::Reached { .. } => "",
                DeltaMinStatus::LeftCensored { .. } => "left-censored",
                DeltaMinStatus::NotReached { .. } => "not-reached",
            };
            (Some(est), reason)
        };
        outcomes.push(CellOutcome { n: curve.n, e0: curve.e0, label, estimate, reason });
    }

    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .map(|o| {
            let value = o
                .estimate
                .as_ref()
                .and_then(|e| e.value())
                .map(fmt_sig6)
                .unwrap_or_default();
            vec![
                o.n.to_string(),
                fmt_sig6(o.e0),
                o.label.clone(),
                fmt_sig6(cfg.target_power),
                cfg.m0.to_string(),
                cfg.m1.to_string(),
                value,
                o.reason.to_string(),
            ]
        })
        .collect();
    csvio::write_csv(
        &paths.delta_min(),
        "n,e0,profile,target_power,m0,m1,delta_min,reason",
        &rows,
    )?;

    // One fit per (e0, profile) family, in configuration order.
    let profiles = cfg.resolved_profiles()?;
    let mut fits = Vec::new();
    for &e0 in &cfg.e0 {
        for profile in &profiles {
            let label = profile.label();
            let family: Vec<DeltaMinEstimate> = outcomes
                .iter()
                .filter(|o| o.e0 == e0 && o.label == label)
                .filter_map(|o| o.estimate.clone())
                .collect();
            let reached = family
                .iter()
                .filter(|e| matches!(e.status, DeltaMinStatus::Reached { .. }))
                .count();
            let fit = match power::scaling_slope(&family) {
                Ok(f) => Some(f),
                Err(Error::InsufficientData(_)) => None,
                Err(e) => return Err(e),
            };
            fits.push(FamilyFit { e0, label: label.to_string(), reached, fit });
        }
    }
    let fit_rows: Vec<Vec<String>> = fits
        .iter()
        .map(|f| {
            let (slope, intercept, resid) = match &f.fit {
                Some(fit) => (
                    fmt_sig6(fit.slope),
                    fmt_sig6(fit.intercept),
                    fmt_sig6(fit.max_abs_residual()),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            vec![
                fmt_sig6(f.e0),
                f.label.clone(),
                f.reached.to_string(),
                slope,
                intercept,
                resid,
            ]
        })
        .collect();
    csvio::write_csv(
        &paths.scaling_fit(),
        "e0,profile,points,slope,intercept,max_abs_residual",
        &fit_rows,
    )?;

    let ms = t0.elapsed().as_millis() as u64;
    manifest.upsert_artifact("delta-min", &paths.rel(&paths.delta_min()), ms, "written");
    manifest.upsert_artifact("scaling-fit", &paths.rel(&paths.scaling_fit()), ms, "written");
    manifest.save(&paths.manifest())?;
    Ok(DeltaMinSummary {
        outcomes,
        fits,
        delta_min_path: paths.delta_min(),
        scaling_path: paths.scaling_fit(),
    })
}

// ---------------------------------------------------------------------------
// Subcommand: collapse

#[derive(Debug)]
pub struct CollapseSummary {
    pub rows: usize,
    pub path: PathBuf,
}

pub fn run_collapse(cfg: &ExperimentConfig) -> Result<CollapseSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);
    let mut manifest = RunManifest::load_or_new(&paths.manifest(), cfg)?;
    let curves = load_all_curves(cfg)?;
    let t0 = Instant::now();
    let rows = power::collapse_dataset(&curves)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.profile.clone(),
                r.n.to_string(),
                fmt_sig6(r.e0),
                fmt_sig6(r.delta),
                fmt_sig6(r.delta_sqrt_n),
                fmt_sig6(r.snr),
                fmt_sig6(r.power),
                fmt_sig6(r.se),
            ]
        })
        .collect();
    csvio::write_csv(
        &paths.collapse(),
        "profile,n,e0,delta,delta_sqrt_n,snr,power,se",
        &csv_rows,
    )?;
    manifest.upsert_artifact(
        "collapse",
        &paths.rel(&paths.collapse()),
        t0.elapsed().as_millis() as u64,
        "written",
    );
    manifest.save(&paths.manifest())?;
    Ok(CollapseSummary { rows: rows.len(), path: paths.collapse() })
}

// ---------------------------------------------------------------------------
// Subcommand: table

#[derive(Debug)]
pub struct TableSummary {
    pub calibrate: CalibrateSummary,
    pub power: PowerSummary,
    pub delta_min: DeltaMinSummary,
}

/// The full pipeline: thresholds, power cells, minimal amplitudes and
/// scaling fits, all resumable.
pub fn run_table(cfg: &ExperimentConfig) -> Result<TableSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let calibrate = run_calibrate(cfg)?;
    let power = run_power(cfg)?;
    let delta_min = run_delta_min(cfg)?;
    Ok(TableSummary { calibrate, power, delta_min })
}

// ---------------------------------------------------------------------------
