//! Power curves, minimal detectable amplitude, and scaling analysis.
//!
//! For each (n, e0, profile) the lab estimates the rejection probability
//! along an amplitude grid centered on the theoretical transition point
//!
//! ```text
//! delta_c = sigma0 (q_alpha + z_target) / (A(g) sqrt(n)),
//! ```
//!
//! interpolates the smallest amplitude whose power reaches the target,
//! fits the log-log scaling law delta_min ~ n^slope, and rescales curves
//! onto the collapse coordinate delta sqrt(n).
//!
//! Every power point is an independent job with a seed derived from the
//! curve seed and the amplitude alone, so any subset rerun reproduces
//! identical values.

use rayon::prelude::*;

use crate::calibration::{bridge_quantile, CalibratedThreshold};
use crate::cusum::t_from_ones;
use crate::error::{Error, Result};
use crate::model::{sample_ones_into, ModelParams};
use crate::profiles::{delta_max, DriftProfile};
use crate::rng::{f64_key, job_seed, CounterRng};
use crate::theory::normal_quantile;

// ---------------------------------------------------------------------------
// Types

/// Amplitude grid layout around the theoretical transition point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Power level the curve is probed around (1 - beta).
    pub target_power: f64,
    /// Geometric steps on each side of the center.
    pub points_per_side: usize,
    /// Ratio between the center and each grid endpoint.
    pub span: f64,
    /// Insert one extra point at the target crossing after the first pass.
    pub refine: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { target_power: 0.8, points_per_side: 6, span: 4.0, refine: true }
    }
}

/// One estimated rejection probability.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub n: usize,
    pub e0: f64,
    pub profile: DriftProfile,
    pub delta: f64,
    pub power: f64,
    /// Binomial standard error sqrt(power (1 - power) / m1).
    pub se: f64,
    pub m1: usize,
    pub seed: u64,
}

/// A power curve over the amplitude grid, sorted by delta.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub n: usize,
    pub e0: f64,
    pub profile: DriftProfile,
    pub points: Vec<PowerPoint>,
    /// Some planned grid points exceeded delta_max and were dropped.
    pub clipped: bool,
    /// The whole grid exceeded delta_max; the curve is empty.
    pub infeasible: bool,
}

/// The planned amplitudes before simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPlan {
    pub deltas: Vec<f64>,
    pub clipped: bool,
    pub infeasible: bool,
}

/// Where the interpolated curve crosses the target, if it does.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaMinStatus {
    /// Crossed between two grid points; brackets are (delta, power).
    Reached {
        delta_min: f64,
        bracket_low: (f64, f64),
        bracket_high: (f64, f64),
    },
    /// Already at or above target at the smallest probed amplitude.
    LeftCensored { delta_min: f64 },
    /// Never reached the target anywhere on the grid.
    NotReached { max_power: f64 },
}

/// Interpolated minimal detectable amplitude for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMinEstimate {
    pub n: usize,
    pub e0: f64,
    pub profile: DriftProfile,
    pub target_power: f64,
    pub status: DeltaMinStatus,
    /// Interpolation rule used between grid points.
    pub method: &'static str,
}

impl DeltaMinEstimate {
    /// The numeric estimate when one exists.
    pub fn value(&self) -> Option<f64> {
        match self.status {
            DeltaMinStatus::Reached { delta_min, .. } => Some(delta_min),
            DeltaMinStatus::LeftCensored { delta_min } => Some(delta_min),
            DeltaMinStatus::NotReached { .. } => None,
        }
    }
}

/// Least-squares fit of log delta_min against log n.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// (n, delta_min) pairs entering the fit.
    pub points: Vec<(f64, f64)>,
    /// Log-space residuals, one per point.
    pub residuals: Vec<f64>,
}

impl ScalingFit {
    pub fn max_abs_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// One row of the rescaled overlay dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseRow {
    pub profile: String,
    pub n: usize,
    pub e0: f64,
    pub delta: f64,
    /// Collapse coordinate delta sqrt(n).
    pub delta_sqrt_n: f64,
    /// Cross-profile coordinate A(g) delta sqrt(n) / sigma0.
    pub snr: f64,
    pub power: f64,
    pub se: f64,
}

/// Worst vertical deviation from the reference curve for one block length.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpread {
    /// Reference block length (the largest n).
    pub n_ref: usize,
    pub n_other: usize,
    /// None when the two curves share no collapse-coordinate overlap.
    pub max_dev: Option<f64>,
}

/// Spread of a curve family in the transition band.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadReport {
    pub pairs: Vec<PairSpread>,
    /// Power band defining the transition region on the reference curve.
    pub band: (f64, f64),
    /// Collapse coordinates where the reference curve crosses the band.
    pub x_lo: f64,
    pub x_hi: f64,
}

// ---------------------------------------------------------------------------
// Power estimation

/// Fraction of m1 drifted blocks rejected by `threshold`, with its
/// binomial standard error. Deterministic in (seed, replication).
pub fn estimate_power(
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    delta: f64,
    threshold: &CalibratedThreshold,
    m1: usize,
    seed: u64,
) -> Result<PowerPoint> {
    threshold.check_applies(n, e0)?;
    if m1 == 0 {
        return Err(Error::InsufficientData("need at least one replication".into()));
    }
    let params = ModelParams::with_drift(e0, delta, profile.clone(), n)?;
    let table = params.probability_table()?;
    let tau = threshold.tau;
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Config(format!("invalid tau = {tau}")));
    }
    let rejects: usize = (0..m1)
        .into_par_iter()
        .map_init(Vec::new, |ones, r| {
            let rng = CounterRng::new(seed, r as u64);
            sample_ones_into(&table, &rng, ones);
            usize::from(t_from_ones(n, ones) > tau)
        })
        .sum();
    let power = rejects as f64 / m1 as f64;
    Ok(PowerPoint {
        n,
        e0,
        profile: profile.clone(),
        delta,
        power,
        se: (power * (1.0 - power) / m1 as f64).sqrt(),
        m1,
        seed,
    })
}

/// Amplitude grid: geometric ladder around the theoretical transition
/// point, clipped to (0, delta_max]. When clipping removes the top of the
/// ladder but not all of it, delta_max itself joins the grid so the curve
/// still probes the admissible ceiling.
pub fn amplitude_grid(
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    alpha: f64,
    spec: &GridSpec,
) -> Result<GridPlan> {
    if n == 0 {
        return Err(Error::Domain("block size n must be >= 1".into()));
    }
    if !(spec.target_power > 0.0 && spec.target_power < 1.0) {
        return Err(Error::Domain(format!(
            "target power must lie in (0, 1), got {}",
            spec.target_power
        )));
    }
    if spec.points_per_side == 0 || !(spec.span > 1.0) {
        return Err(Error::Config(format!(
            "grid needs points_per_side >= 1 and span > 1, got {} and {}",
            spec.points_per_side, spec.span
        )));
    }
    let d_max = delta_max(e0)?;
    let sigma0 = (e0 * (1.0 - e0)).sqrt();
    let a = profile.signal_constant_estimate().value;
    let center = sigma0 * (bridge_quantile(alpha)? + normal_quantile(spec.target_power)?)
        / (a * (n as f64).sqrt());
    let ratio = spec.span.powf(1.0 / spec.points_per_side as f64);
    let side = spec.points_per_side as i32;
    let mut deltas = Vec::new();
    let mut clipped = false;
    for j in -side..=side {
        let d = center * ratio.powi(j);
        if d <= d_max {
            deltas.push(d);
        } else {
            clipped = true;
        }
    }
    if deltas.is_empty() {
        return Ok(GridPlan { deltas, clipped: true, infeasible: true });
    }
    if clipped {
        deltas.push(d_max);
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).expect("amplitudes are finite"));
    deltas.dedup_by(|a, b| a.to_bits() == b.to_bits());
    Ok(GridPlan { deltas, clipped, infeasible: false })
}

/// Simulate one point per planned amplitude; per-point seeds depend only
/// on (curve seed, amplitude).
fn evaluate_points(
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    deltas: &[f64],
    threshold: &CalibratedThreshold,
    m1: usize,
    curve_seed: u64,
) -> Result<Vec<PowerPoint>> {
    deltas
        .iter()
        .map(|&d| {
            let seed = job_seed(curve_seed, &["power-point", &f64_key(d)]);
            estimate_power(n, e0, profile, d, threshold, m1, seed)
        })
        .collect()
}

/// Full power curve: theory-guided grid, one simulation pass, and one
/// log-space bisection of the first target crossing.
pub fn power_curve(
    n: usize,
    e0: f64,
    profile: &DriftProfile,
    threshold: &CalibratedThreshold,
    spec: &GridSpec,
    m1: usize,
    curve_seed: u64,
) -> Result<PowerCurve> {
    threshold.check_applies(n, e0)?;
    let plan = amplitude_grid(n, e0, profile, threshold.alpha, spec)?;
    if plan.infeasible {
        return Ok(PowerCurve {
            n,
            e0,
            profile: profile.clone(),
            points: Vec::new(),
            clipped: plan.clipped,
            infeasible: true,
        });
    }
    let mut points = evaluate_points(n, e0, profile, &plan.deltas, threshold, m1, curve_seed)?;
    if spec.refine {
        if let Some(i) = first_crossing(&points, spec.target_power) {
            // Geometric midpoint: bisection in the grid's own log spacing.
            let mid = (points[i - 1].delta * points[i].delta).sqrt();
            if mid.to_bits() != points[i - 1].delta.to_bits()
                && mid.to_bits() != points[i].delta.to_bits()
            {
                let extra =
                    evaluate_points(n, e0, profile, &[mid], threshold, m1, curve_seed)?;
                points.insert(i, extra.into_iter().next().expect("one point evaluated"));
            }
        }
    }
    Ok(PowerCurve {
        n,
        e0,
        profile: profile.clone(),
        points,
        clipped: plan.clipped,
        infeasible: false,
    })
}

/// Index i of the first adjacent pair with power[i-1] < target <= power[i].
fn first_crossing(points: &[PowerPoint], target: f64) -> Option<usize> {
    (1..points.len())
        .find(|&i| points[i - 1].power < target && points[i].power >= target)
}

// ---------------------------------------------------------------------------
// Minimal detectable amplitude

/// Interpolate the smallest amplitude whose power reaches `target` on a
/// curve sorted by amplitude. The first crossing wins when Monte Carlo
/// noise produces several.
pub fn delta_min_hat(points: &[PowerPoint], target: f64) -> Result<DeltaMinEstimate> {
    if points.is_empty() {
        return Err(Error::Input("empty power curve".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Domain(format!(
            "target power must lie in (0, 1), got {target}"
        )));
    }
    let first = &points[0];
    for w in points.windows(2) {
        if w[1].delta <= w[0].delta {
            return Err(Error::Input(format!(
                "curve must be strictly increasing in delta: {} then {}",
                w[0].delta, w[1].delta
            )));
        }
        if w[1].n != first.n || w[1].e0 != first.e0 || w[1].profile != first.profile {
            return Err(Error::Input(
                "curve mixes points from different configurations".into(),
            ));
        }
    }
    let base = |status| DeltaMinEstimate {
        n: first.n,
        e0: first.e0,
        profile: first.profile.clone(),
        target_power: target,
        status,
        method: "piecewise-linear",
    };
    if first.power >= target {
        return Ok(base(DeltaMinStatus::LeftCensored { delta_min: first.delta }));
    }
    if let Some(i) = first_crossing(points, target) {
        let (lo, hi) = (&points[i - 1], &points[i]);
        let fraction = (target - lo.power) / (hi.power - lo.power);
        let delta_min = lo.delta + fraction * (hi.delta - lo.delta);
        return Ok(base(DeltaMinStatus::Reached {
            delta_min,
            bracket_low: (lo.delta, lo.power),
            bracket_high: (hi.delta, hi.power),
        }));
    }
    let max_power = points.iter().fold(0.0f64, |m, p| m.max(p.power));
    Ok(base(DeltaMinStatus::NotReached { max_power }))
}

// ---------------------------------------------------------------------------
// Scaling fit

/// Ordinary least squares of log delta_min on log n over the reached
/// estimates of one (e0, profile) family.
pub fn scaling_slope(estimates: &[DeltaMinEstimate]) -> Result<ScalingFit> {
    let mut pts: Vec<(usize, f64)> = Vec::new();
    let mut family: Option<(f64, &DriftProfile)> = None;
    for est in estimates {
        match family {
            None => family = Some((est.e0, &est.profile)),
            Some((e0, profile)) => {
                if est.e0 != e0 || est.profile != *profile {
                    return Err(Error::Input(
                        "scaling fit mixes (e0, profile) families".into(),
                    ));
                }
            }
        }
        if let DeltaMinStatus::Reached { delta_min, .. } = est.status {
            pts.push((est.n, delta_min));
        }
    }
    pts.sort_by_key(|&(n, _)| n);
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Input("scaling fit has duplicate block lengths".into()));
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs >= 3 reached estimates, got {}",
            pts.len()
        )));
    }
    let logs: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(n, d)| ((n as f64).ln(), d.ln()))
        .collect();
    let m = logs.len() as f64;
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = logs
        .iter()
        .map(|&(x, y)| y - (intercept + slope * x))
        .collect();
    Ok(ScalingFit {
        slope,
        intercept,
        points: pts.iter().map(|&(n, d)| (n as f64, d)).collect(),
        residuals,
    })
}

// ---------------------------------------------------------------------------
// Scaling collapse

/// Rescale a curve family onto the collapse coordinates, sorted by
/// (profile, n, delta). Empty and infeasible curves contribute nothing.
pub fn collapse_dataset(curves: &[PowerCurve]) -> Result<Vec<CollapseRow>> {
    let mut rows = Vec::new();
    for curve in curves {
        let a = curve.profile.signal_constant_estimate().value;
        let sigma0 = (curve.e0 * (1.0 - curve.e0)).sqrt();
        let sqrt_n = (curve.n as f64).sqrt();
        for p in &curve.points {
            rows.push(CollapseRow {
                profile: curve.profile.label().to_string(),
                n: curve.n,
                e0: curve.e0,
                delta: p.delta,
                delta_sqrt_n: p.delta * sqrt_n,
                snr: a * p.delta * sqrt_n / sigma0,
                power: p.power,
                se: p.se,
            });
        }
    }
    rows.sort_by(|a, b| {
        (a.profile.as_str(), a.n)
            .cmp(&(b.profile.as_str(), b.n))
            .then(a.delta.partial_cmp(&b.delta).expect("amplitudes are finite"))
    });
    Ok(rows)
}

/// Piecewise-linear interpolation of ys over sorted xs; x must lie inside
/// the hull.
fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert!(xs.len() >= 2 && x >= xs[0] && x <= xs[xs.len() - 1]);
    let j = match xs.binary_search_by(|v| v.partial_cmp(&x).expect("finite")) {
        Ok(j) => return ys[j],
        Err(j) => j,
    };
    let (x0, x1) = (xs[j - 1], xs[j]);
    let (y0, y1) = (ys[j - 1], ys[j]);
    y0 + (x - x0) / (x1 - x0) * (y1 - y0)
}

/// First collapse coordinate where the interpolated curve reaches level
/// `y`, scanning left to right.
fn crossing_x(xs: &[f64], ys: &[f64], y: f64) -> Option<f64> {
    if ys[0] >= y {
        return Some(xs[0]);
    }
    for i in 1..xs.len() {
        if ys[i - 1] < y && ys[i] >= y {
            let f = (y - ys[i - 1]) / (ys[i] - ys[i - 1]);
            // f <= 1, but rounding may still push the sum past xs[i].
            return Some((xs[i - 1] + f * (xs[i] - xs[i - 1])).min(xs[i]));
        }
    }
    None
}

/// Maximum vertical deviation of each curve from the largest-n reference
/// over the transition band, all in the collapse coordinate delta sqrt(n).
///
/// The band is located on the reference curve: x_lo and x_hi are where
/// its interpolated power crosses band.0 and band.1. Deviations are taken
/// on a 201-point grid over the part of [x_lo, x_hi] both curves cover.
pub fn collapse_spread(curves: &[PowerCurve], band: (f64, f64)) -> Result<SpreadReport> {
    if !(0.0 < band.0 && band.0 < band.1 && band.1 < 1.0) {
        return Err(Error::Domain(format!(
            "band must satisfy 0 < lo < hi < 1, got ({}, {})",
            band.0, band.1
        )));
    }
    let usable: Vec<&PowerCurve> = curves
        .iter()
        .filter(|c| !c.infeasible && c.points.len() >= 2)
        .collect();
    if usable.len() < 2 {
        return Err(Error::InsufficientData(
            "spread needs at least two non-empty curves".into(),
        ));
    }
    let first = usable[0];
    if usable
        .iter()
        .any(|c| c.e0 != first.e0 || c.profile != first.profile)
    {
        return Err(Error::Input("spread mixes (e0, profile) families".into()));
    }
    let coords = |c: &PowerCurve| -> (Vec<f64>, Vec<f64>) {
        let sqrt_n = (c.n as f64).sqrt();
        (
            c.points.iter().map(|p| p.delta * sqrt_n).collect(),
            c.points.iter().map(|p| p.power).collect(),
        )
    };
    let reference = *usable
        .iter()
        .max_by_key(|c| c.n)
        .expect("at least two curves");
    let (rx, ry) = coords(reference);
    let x_lo = crossing_x(&rx, &ry, band.0);
    let x_hi = crossing_x(&rx, &ry, band.1);
    let (x_lo, x_hi) = match (x_lo, x_hi) {
        (Some(a), Some(b)) if a < b => (a, b),
        _ => {
            return Err(Error::InsufficientData(format!(
                "reference curve (n = {}) does not span the band ({}, {})",
                reference.n, band.0, band.1
            )))
        }
    };
    let mut pairs = Vec::new();
    for c in usable.iter().filter(|c| c.n != reference.n) {
        let (cx, cy) = coords(c);
        let lo = x_lo.max(cx[0]);
        let hi = x_hi.min(cx[cx.len() - 1]);
        if lo >= hi {
            pairs.push(PairSpread { n_ref: reference.n, n_other: c.n, max_dev: None });
            continue;
        }
        let mut max_dev = 0.0f64;
        for k in 0..=200 {
            // Clamp: at k = 200 the sum can round one ulp past hi.
            let x = (lo + (hi - lo) * k as f64 / 200.0).clamp(lo, hi);
            let dev = (interp(&rx, &ry, x) - interp(&cx, &cy, x)).abs();
            max_dev = max_dev.max(dev);
        }
        pairs.push(PairSpread {
            n_ref: reference.n,
            n_other: c.n,
            max_dev: Some(max_dev),
        });
    }
    Ok(SpreadReport { pairs, band, x_lo, x_hi })
}

// ---------------------------------------------------------------------------
