//! The four standard figures, rendered as deterministic SVG.
//!
//! Scaling and collapse figures are drawn from the report CSVs and fail
//! with a pointer at the producing subcommand when those are missing. The
//! trajectory and trade-off figures are self-contained.

use std::path::PathBuf;
use std::time::Instant;

use crate::cusum::partial_sums;
use crate::error::{Error, Result};
use crate::model::{sample_block, ModelParams};
use crate::profiles::DriftProfile;
use crate::rng::job_seed;
use crate::theory::required_delta;

use super::config::ExperimentConfig;
use super::csvio::{self, fmt_sig6};
use super::manifest::RunManifest;
use super::runner::{preflight_out_dir, OutPaths};
use super::svg::{self, Panel, Series, GREY, PALETTE};

#[derive(Debug)]
pub struct FiguresSummary {
    pub written: Vec<PathBuf>,
}

pub fn run_figures(cfg: &ExperimentConfig) -> Result<FiguresSummary> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);
    let mut manifest = RunManifest::load_or_new(&paths.manifest(), cfg)?;
    let mut written = Vec::new();
    let jobs: [(&str, fn(&ExperimentConfig, &OutPaths) -> Result<String>); 4] = [
        ("fig_scaling", fig_scaling),
        ("fig_collapse", fig_collapse),
        ("fig_trajectory", fig_trajectory),
        ("fig_tradeoff", fig_tradeoff),
    ];
    for (stem, render) in jobs {
        let t0 = Instant::now();
        let svg = render(cfg, &paths)?;
        let path = paths.figure(stem);
        std::fs::write(&path, svg)?;
        manifest.upsert_artifact(
            "figure",
            &paths.rel(&path),
            t0.elapsed().as_millis() as u64,
            "written",
        );
        written.push(path);
    }
    manifest.save(&paths.manifest())?;
    Ok(FiguresSummary { written })
}

// ---------------------------------------------------------------------------
// Scaling figure: delta_min against n on log-log axes

fn fig_scaling(cfg: &ExperimentConfig, paths: &OutPaths) -> Result<String> {
    let report = paths.delta_min();
    if !report.exists() {
        return Err(Error::MissingDependency {
            needed: paths.rel(&report),
            produced_by: "delta-min".into(),
        });
    }
    let rows = csvio::read_csv(&report, "n,e0,profile,target_power,m0,m1,delta_min,reason")?;
    let focus = fmt_sig6(cfg.focus_e0());
    let mut series = Vec::new();
    let mut all: Vec<(f64, f64)> = Vec::new();
    for (i, name) in cfg.profiles.iter().enumerate() {
        let mut pts = Vec::new();
        for r in &rows {
            if r[1] == focus && &r[2] == name && r[7].is_empty() {
                let n = csvio::field_f64(r, 0, "n")?;
                let d = csvio::field_f64(r, 6, "delta_min")?;
                pts.push((n, d));
            }
        }
        all.extend(pts.iter().copied());
        series.push(Series {
            label: name.clone(),
            color: PALETTE[i % PALETTE.len()].into(),
            dashed: false,
            markers: true,
            points: pts,
        });
    }
    // Reference slope -1/2 through the geometric center of all points.
    if all.len() >= 2 {
        let lc = all
            .iter()
            .map(|&(n, d)| d.ln() + 0.5 * n.ln())
            .sum::<f64>()
            / all.len() as f64;
        let n_lo = all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let n_hi = all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let refline = |n: f64| (lc - 0.5 * n.ln()).exp();
        series.push(Series {
            label: "slope -1/2".into(),
            color: GREY.into(),
            dashed: true,
            markers: false,
            points: vec![(n_lo, refline(n_lo)), (n_hi, refline(n_hi))],
        });
    }
    let panel = Panel {
        title: format!("Minimal detectable amplitude, e0 = {focus}"),
        x_label: "block length n".into(),
        y_label: "delta_min".into(),
        log_x: true,
        log_y: true,
        x_range: None,
        y_range: None,
        series,
    };
    Ok(svg::render(&[panel], 420.0, 320.0))
}

// ---------------------------------------------------------------------------
// Collapse figure: power against delta sqrt(n), one panel per profile

fn fig_collapse(cfg: &ExperimentConfig, paths: &OutPaths) -> Result<String> {
    let report = paths.collapse();
    if !report.exists() {
        return Err(Error::MissingDependency {
            needed: paths.rel(&report),
            produced_by: "collapse".into(),
        });
    }
    let rows = csvio::read_csv(&report, "profile,n,e0,delta,delta_sqrt_n,snr,power,se")?;
    let focus = fmt_sig6(cfg.focus_e0());
    let mut panels = Vec::new();
    for name in &cfg.profiles {
        let mut series = Vec::new();
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        for (i, &n) in cfg.block_sizes.iter().enumerate() {
            let n_str = n.to_string();
            let mut pts = Vec::new();
            for r in &rows {
                if &r[0] == name && r[1] == n_str && r[2] == focus {
                    let x = csvio::field_f64(r, 4, "delta_sqrt_n")?;
                    let y = csvio::field_f64(r, 6, "power")?;
                    pts.push((x, y));
                }
            }
            for &(x, _) in &pts {
                x_min = x_min.min(x);
                x_max = x_max.max(x);
            }
            series.push(Series {
                label: format!("n = {n}"),
                color: PALETTE[i % PALETTE.len()].into(),
                dashed: false,
                markers: true,
                points: pts,
            });
        }
        if x_min.is_finite() && x_max > x_min {
            series.push(Series {
                label: String::new(),
                color: GREY.into(),
                dashed: true,
                markers: false,
                points: vec![(x_min, cfg.target_power), (x_max, cfg.target_power)],
            });
        }
        panels.push(Panel {
            title: format!("{name}, e0 = {focus}"),
            x_label: "delta sqrt(n)".into(),
            y_label: "power".into(),
            log_x: true,
            log_y: false,
            x_range: None,
            y_range: Some((0.0, 1.0)),
            series,
        });
    }
    Ok(svg::render(&panels, 340.0, 300.0))
}

// ---------------------------------------------------------------------------
// Trajectory figure: one flat and one drifted partial-sum path

const TRAJECTORY_N: usize = 1000;
const TRAJECTORY_E0: f64 = 0.05;
const TRAJECTORY_DELTA: f64 = 0.04;

fn fig_trajectory(cfg: &ExperimentConfig, _paths: &OutPaths) -> Result<String> {
    let n = TRAJECTORY_N;
    let seed = job_seed(cfg.seed, &["figure-trajectory"]);
    let profile = DriftProfile::from_name("sinusoidal")?;
    let null = ModelParams::null_model(TRAJECTORY_E0, n)?;
    let alt = ModelParams::with_drift(TRAJECTORY_E0, TRAJECTORY_DELTA, profile.clone(), n)?;

    let path_of = |params: &ModelParams, rep: u64| -> Result<Vec<(f64, f64)>> {
        let block = sample_block(params, seed, rep)?;
        let trace = partial_sums(&block)?;
        let mut pts = vec![(0.0, 0.0)];
        pts.extend(
            trace
                .sums
                .iter()
                .enumerate()
                .map(|(i, &s)| ((i + 1) as f64, s)),
        );
        Ok(pts)
    };
    let flat = path_of(&null, 0)?;
    let drifted = path_of(&alt, 1)?;

    // Expected drifted excursion delta n G(k/n).
    let mut expected = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / n as f64;
        expected.push((k as f64, TRAJECTORY_DELTA * n as f64 * profile.cumulative(t)?));
    }

    let panel = Panel {
        title: format!(
            "Partial sums, n = {n}, e0 = {TRAJECTORY_E0}, delta = {TRAJECTORY_DELTA}"
        ),
        x_label: "trial k".into(),
        y_label: "S_k".into(),
        log_x: false,
        log_y: false,
        x_range: Some((0.0, n as f64)),
        y_range: None,
        series: vec![
            Series {
                label: "flat".into(),
                color: GREY.into(),
                dashed: false,
                markers: false,
                points: flat,
            },
            Series {
                label: "drifted".into(),
                color: PALETTE[1].into(),
                dashed: false,
                markers: false,
                points: drifted,
            },
            Series {
                label: "expected drift".into(),
                color: PALETTE[0].into(),
                dashed: true,
                markers: false,
                points: expected,
            },
        ],
    };
    Ok(svg::render(&[panel], 520.0, 320.0))
}

// ---------------------------------------------------------------------------
// Trade-off figure: estimation variance and detectable amplitude vs n

fn fig_tradeoff(cfg: &ExperimentConfig, _paths: &OutPaths) -> Result<String> {
    let e0 = cfg.focus_e0();
    let sigma0_sq = e0 * (1.0 - e0);
    let a_step = DriftProfile::from_name("step")?.signal_constant();
    let beta = 1.0 - cfg.target_power;
    let mut var_pts = Vec::new();
    let mut delta_pts = Vec::new();
    let mut n = 100usize;
    while n <= 10_000 {
        var_pts.push((n as f64, sigma0_sq / n as f64));
        delta_pts.push((n as f64, required_delta(n, e0, cfg.alpha, beta, a_step)?));
        n = (n as f64 * 1.25).round() as usize;
    }
    let panel = Panel {
        title: format!("Accuracy against detectability, e0 = {}", fmt_sig6(e0)),
        x_label: "block length n".into(),
        y_label: "value".into(),
        log_x: true,
        log_y: true,
        x_range: None,
        y_range: None,
        series: vec![
            Series {
                label: "rate-estimate variance (slope -1)".into(),
                color: PALETTE[0].into(),
                dashed: false,
                markers: false,
                points: var_pts,
            },
            Series {
                label: "detectable amplitude (slope -1/2)".into(),
                color: PALETTE[1].into(),
                dashed: false,
                markers: false,
                points: delta_pts,
            },
        ],
    };
    Ok(svg::render(&[panel], 420.0, 320.0))
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(dir: &std::path::Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.block_sizes = vec![60, 120];
        cfg.e0 = vec![0.2];
        cfg.profiles = vec!["step".into()];
        cfg.m0 = 1000;
        cfg.m1 = 200;
        cfg.seed = 7;
        cfg.out_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn figures_need_their_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        match run_figures(&cfg) {
            Err(Error::MissingDependency { produced_by, .. }) => {
                assert_eq!(produced_by, "delta-min");
            }
            other => panic!("expected MissingDependency, got {other:?}"),
        }
    }

    #[test]
    fn figures_render_deterministically_after_the_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        super::super::runner::run_table(&cfg).unwrap();
        super::super::runner::run_collapse(&cfg).unwrap();
        let summary = run_figures(&cfg).unwrap();
        assert_eq!(summary.written.len(), 4);
        let first: Vec<String> = summary
            .written
            .iter()
            .map(|p| std::fs::read_to_string(p).unwrap())
            .collect();
        run_figures(&cfg).unwrap();
        for (path, before) in summary.written.iter().zip(&first) {
            let after = std::fs::read_to_string(path).unwrap();
            assert_eq!(&after, before, "{} changed between runs", path.display());
            assert!(after.starts_with("<svg"));
        }
    }

    #[test]
    fn trajectory_and_tradeoff_are_self_contained() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_config(dir.path());
        let paths = OutPaths::new(dir.path());
        let svg = fig_trajectory(&cfg, &paths).unwrap();
        assert!(svg.contains("expected drift"));
        let svg = fig_tradeoff(&cfg, &paths).unwrap();
        assert!(svg.contains("slope -1/2"));
    }
}
