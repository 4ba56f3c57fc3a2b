//! Numeric verification harness: machine-checkable invariants of the
//! pipeline, written to `verification.json`.
//!
//! Each check compares a measured quantity against a reference with an
//! explicit comparison rule, so a failure names the exact arithmetic that
//! broke. Monte Carlo checks derive their seeds from the configured
//! master seed but use dedicated salts, so they are reproducible yet
//! independent of the sweep's own draws.
//!
//! One check is expected to fail at present: `bridge_ks_n4000` asks the
//! full null law of the statistic at n = 4000 to match its limiting
//! Brownian-bridge law to within 0.02 in Kolmogorov-Smirnov distance.
//! The maximum over n discrete partial sums sits systematically below
//! the bridge supremum (the path between grid points is unobserved), and
//! at n = 4000 that deficit is still slightly above the bound. The check
//! states the intended contract and reports the honest distance.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    self, bridge_quantile, bridge_sup_cdf, mc_threshold, null_rejection_rate, CalibratedThreshold,
};
use crate::cusum::{expected_excursion, partial_sums_from_bits, statistic_from_bits};
use crate::error::Result;
use crate::model::{sample_block, ModelParams};
use crate::power::estimate_power;
use crate::profiles::{delta_max, DriftProfile, DEFAULT_ENERGY_FLOOR, DEFAULT_LIPSCHITZ_BOUND};
use crate::rng::{f64_key, job_seed};
use crate::theory::{
    exact_enumeration, exact_size_threshold, indistinguishability_trend, kl_block,
    kl_quadratic_approx, pinsker_tv_bound, required_delta,
};

use super::config::{ExperimentConfig, ProvenanceChoice};
use super::runner::{preflight_out_dir, OutPaths};

// ---------------------------------------------------------------------------
// Report types

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Measured quantity.
    pub lhs: f64,
    /// Reference value or bound.
    pub rhs: f64,
    /// Allowed |lhs - rhs| for the "within" rule; 0 otherwise.
    pub tolerance: f64,
    /// One of "within", "<", "<=", ">".
    pub cmp: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub version: String,
    pub all_pass: bool,
    pub checks: Vec<CheckResult>,
}

fn within(name: &str, lhs: f64, rhs: f64, tol: f64, detail: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        lhs,
        rhs,
        tolerance: tol,
        cmp: "within".into(),
        pass: (lhs - rhs).abs() <= tol,
        detail: detail.into(),
    }
}

fn le(name: &str, lhs: f64, rhs: f64, detail: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        lhs,
        rhs,
        tolerance: 0.0,
        cmp: "<=".into(),
        pass: lhs <= rhs,
        detail: detail.into(),
    }
}

fn lt(name: &str, lhs: f64, rhs: f64, detail: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        lhs,
        rhs,
        tolerance: 0.0,
        cmp: "<".into(),
        pass: lhs < rhs,
        detail: detail.into(),
    }
}

fn gt(name: &str, lhs: f64, rhs: f64, detail: &str) -> CheckResult {
    CheckResult {
        name: name.into(),
        lhs,
        rhs,
        tolerance: 0.0,
        cmp: ">".into(),
        pass: lhs > rhs,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// The suite

/// Run every check, write `verification.json` into the output directory,
/// and return the report. `inject_zero_threshold` adds a deliberately
/// broken manual threshold to demonstrate that the harness catches a
/// sabotaged critical value.
pub fn run_verify(
    cfg: &ExperimentConfig,
    inject_zero_threshold: bool,
) -> Result<VerificationReport> {
    cfg.validate()?;
    preflight_out_dir(&cfg.out_dir)?;
    let paths = OutPaths::new(&cfg.out_dir);

    let canonical = [DriftProfile::Linear, DriftProfile::Sinusoidal, DriftProfile::Step];
    let mut checks = Vec::new();

    checks.extend(profile_checks(&canonical)?);
    checks.push(model_mean_preservation(cfg, &canonical)?);
    checks.extend(bridge_law_checks()?);
    checks.push(mc_matches_asymptotic(cfg)?);
    checks.extend(size_control_checks(cfg)?);
    checks.push(zero_delta_power_matches_size(cfg)?);
    checks.push(bridge_ks_check(cfg)?);
    checks.extend(symmetry_checks(cfg)?);
    checks.push(excursion_check(cfg)?);
    checks.extend(divergence_checks()?);
    checks.extend(enumeration_vs_mc_checks(cfg)?);
    checks.extend(required_delta_checks()?);
    checks.push(trend_check(&canonical)?);
    if inject_zero_threshold {
        checks.push(injected_zero_threshold(cfg)?);
    }

    let report = VerificationReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    };
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| crate::error::Error::Config(format!("report serialization: {e}")))?;
    std::fs::write(paths.verification(), text + "\n")?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Profile and model identities

fn profile_checks(canonical: &[DriftProfile]) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();

    let mut worst_mean = 0.0f64;
    let mut admissible = 0usize;
    for p in canonical {
        let report = p.check_admissible(DEFAULT_LIPSCHITZ_BOUND, DEFAULT_ENERGY_FLOOR);
        worst_mean = worst_mean.max(report.mean_abs);
        if report.admissible() {
            admissible += 1;
        }
    }
    out.push(le(
        "profile_mean_zero",
        worst_mean,
        1e-9,
        "grid mean of every canonical shape vanishes",
    ));
    out.push(within(
        "profile_admissible_defaults",
        admissible as f64,
        canonical.len() as f64,
        0.0,
        "all canonical shapes pass the admissibility gate at default bounds",
    ));

    // Closed-form peak of |G| against a fine grid scan.
    let mut worst_peak = 0.0f64;
    let mut worst_end = 0.0f64;
    for p in canonical {
        let mut sup = 0.0f64;
        let grid = 100_000usize;
        for j in 0..=grid {
            let t = j as f64 / grid as f64;
            sup = sup.max(p.cumulative(t)?.abs());
        }
        worst_peak = worst_peak.max((sup - p.signal_constant()).abs());
        worst_end = worst_end.max(p.cumulative(1.0)?.abs());
    }
    out.push(le(
        "profile_signal_constant_grid",
        worst_peak,
        1e-6,
        "closed-form sup |G| matches a 1e5-point scan",
    ));
    out.push(le(
        "profile_cumulative_endpoint",
        worst_end,
        1e-12,
        "mean preservation forces G(1) = 0",
    ));
    Ok(out)
}

fn model_mean_preservation(
    cfg: &ExperimentConfig,
    canonical: &[DriftProfile],
) -> Result<CheckResult> {
    let n = 1000;
    let e0 = cfg.focus_e0();
    let delta = (0.8 * delta_max(e0)?).min(0.04);
    let mut worst = 0.0f64;
    for p in canonical {
        let params = ModelParams::with_drift(e0, delta, p.clone(), n)?;
        let table = params.probability_table()?;
        let mean = table.iter().sum::<f64>() / n as f64;
        worst = worst.max((mean - e0).abs());
    }
    Ok(le(
        "model_mean_preservation",
        worst,
        1e-4,
        "per-trial probabilities average back to the baseline rate",
    ))
}

// ---------------------------------------------------------------------------
// Bridge law and calibration

fn bridge_law_checks() -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    out.push(within(
        "bridge_quantile_05",
        bridge_quantile(0.05)?,
        1.3581,
        1e-4,
        "upper 5% point of sup |B0|",
    ));
    let mut worst = 0.0f64;
    for alpha in [0.2, 0.1, 0.05, 0.02, 0.01] {
        worst = worst.max((bridge_sup_cdf(bridge_quantile(alpha)?)? - (1.0 - alpha)).abs());
    }
    out.push(le(
        "bridge_quantile_roundtrip",
        worst,
        1e-7,
        "distribution function inverts its own quantiles",
    ));
    Ok(out)
}

fn mc_matches_asymptotic(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let seed = job_seed(cfg.seed, &["verify", "mc-asymptotic"]);
    let tau = mc_threshold(4000, 0.05, 0.05, 10_000, seed)?.tau;
    Ok(within(
        "mc_matches_asymptotic",
        tau,
        bridge_quantile(0.05)?,
        0.05,
        "simulated critical value at n = 4000 approaches the bridge quantile",
    ))
}

fn size_control_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let m = 10_000usize;
    let band = 3.0 * (cfg.alpha * (1.0 - cfg.alpha) / m as f64).sqrt();
    let mut out = Vec::new();
    for &n in &cfg.block_sizes {
        for &e0 in &cfg.e0 {
            let thr = verify_threshold(cfg, n, e0)?;
            let seed =
                job_seed(cfg.seed, &["verify", "size", &n.to_string(), &f64_key(e0)]);
            let est = null_rejection_rate(n, e0, &thr, m, seed)?;
            let name = format!("size_control_n{n}_e0{e0}");
            let check = match cfg.provenance {
                ProvenanceChoice::MonteCarlo => within(
                    &name,
                    est.rate,
                    cfg.alpha,
                    band,
                    "fresh-seed null rejection rate stays at the nominal level",
                ),
                ProvenanceChoice::Asymptotic => le(
                    &name,
                    est.rate,
                    cfg.alpha + band,
                    "asymptotic threshold rejects at most the nominal level",
                ),
            };
            out.push(check);
        }
    }
    Ok(out)
}

fn verify_threshold(cfg: &ExperimentConfig, n: usize, e0: f64) -> Result<CalibratedThreshold> {
    match cfg.provenance {
        ProvenanceChoice::Asymptotic => calibration::asymptotic_threshold(n, cfg.alpha),
        ProvenanceChoice::MonteCarlo => {
            // Same derivation as the sweep, so the checked threshold is
            // the one a run with this configuration would use.
            let seed = job_seed(cfg.seed, &["calibrate", &n.to_string(), &f64_key(e0)]);
            mc_threshold(n, e0, cfg.alpha, cfg.m0, seed)
        }
    }
}

fn zero_delta_power_matches_size(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let n = *cfg.block_sizes.iter().min().expect("validated non-empty");
    let e0 = cfg.focus_e0();
    let m0 = cfg.m0.max(2000);
    let cal_seed = job_seed(cfg.seed, &["verify", "zero-delta-cal"]);
    let thr = mc_threshold(n, e0, cfg.alpha, m0, cal_seed)?;
    let achieved = thr.achieved_size.expect("Monte Carlo threshold");
    let seed = job_seed(cfg.seed, &["verify", "zero-delta"]);
    let point = estimate_power(n, e0, &DriftProfile::Linear, 0.0, &thr, 10_000, seed)?;
    let pooled = (achieved.se * achieved.se + point.se * point.se).sqrt();
    Ok(within(
        "zero_delta_power_matches_size",
        point.power,
        achieved.rate,
        3.0 * pooled,
        "the power harness at zero amplitude reproduces the calibrated size",
    ))
}

// ---------------------------------------------------------------------------
// Distributional shape at finite n

fn bridge_ks_check(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let m = 10_000usize;
    let seed = job_seed(cfg.seed, &["verify", "ks"]);
    let mut sample = calibration::simulate_null_stats(4000, 0.05, m, seed)?;
    sample.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let mut ks = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = bridge_sup_cdf(x)?;
        ks = ks.max(f - i as f64 / m as f64);
        ks = ks.max((i + 1) as f64 / m as f64 - f);
    }
    Ok(lt(
        "bridge_ks_n4000",
        ks,
        0.02,
        "Kolmogorov-Smirnov distance of the null statistic at n = 4000 from \
         the limiting bridge law. Known to fail: the maximum over n discrete \
         partial sums undershoots the bridge supremum between grid points, a \
         systematic finite-n deficit of about 0.02-0.03 at this block length \
         that no seed choice removes. The statement is kept as the intended \
         contract; calibration therefore never relies on the limit law.",
    ))
}

fn symmetry_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let m = 10_000u64;
    let n = 500usize;
    let e0 = 0.3;
    let seed = job_seed(cfg.seed, &["verify", "symmetry"]);
    let null = ModelParams::null_model(e0, n)?;
    let drift =
        ModelParams::with_drift(e0, 0.15, DriftProfile::Sinusoidal, n)?;
    let mut violations = 0usize;
    let mut worst_endpoint = 0.0f64;
    for rep in 0..m {
        let params = if rep % 2 == 0 { &null } else { &drift };
        let block = sample_block(params, seed, rep)?;
        let t = statistic_from_bits(&block.bits)?.t_stat;
        let complement: Vec<u8> = block.bits.iter().map(|&b| 1 - b).collect();
        let reversed: Vec<u8> = block.bits.iter().rev().copied().collect();
        if statistic_from_bits(&complement)?.t_stat.to_bits() != t.to_bits() {
            violations += 1;
        }
        if statistic_from_bits(&reversed)?.t_stat.to_bits() != t.to_bits() {
            violations += 1;
        }
        let sums = partial_sums_from_bits(&block.bits)?.sums;
        worst_endpoint = worst_endpoint.max(sums[n - 1].abs());
    }
    Ok(vec![
        le(
            "symmetry_exactness",
            violations as f64,
            0.0,
            "bit-for-bit equality of the statistic under complement and reversal",
        ),
        le(
            "bridge_sn_zero",
            worst_endpoint,
            1e-9,
            "centering at the plug-in rate pins the final partial sum to zero",
        ),
    ])
}

fn excursion_check(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let (n, e0, delta, reps) = (4000usize, 0.05, 0.02, 2000u64);
    let seed = job_seed(cfg.seed, &["verify", "excursion"]);
    let drift = ModelParams::with_drift(e0, delta, DriftProfile::Step, n)?;
    let predicted = expected_excursion(n, delta, &DriftProfile::Step)?;
    let mut peak_sum = 0.0;
    for rep in 0..reps {
        let block = sample_block(&drift, seed, rep)?;
        let sums = partial_sums_from_bits(&block.bits)?.sums;
        peak_sum += sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    }
    let ratio = peak_sum / reps as f64 / predicted;
    Ok(within(
        "signal_excursion_ratio",
        ratio,
        1.0,
        0.15,
        "mean peak excursion under drift tracks delta n sup |G|",
    ))
}

// ---------------------------------------------------------------------------
// Divergences and exact enumeration

fn divergence_checks() -> Result<Vec<CheckResult>> {
    let canonical = [DriftProfile::Linear, DriftProfile::Sinusoidal, DriftProfile::Step];
    let mut out = Vec::new();

    let mut worst_ratio = 0.0f64;
    for p in &canonical {
        let kl = kl_block(0.05, 0.01, p, 1000)?;
        let quad = kl_quadratic_approx(0.05, 0.01, p, 1000)?;
        worst_ratio = worst_ratio.max((kl - quad).abs() / kl);
    }
    out.push(lt(
        "kl_quadratic_ratio",
        worst_ratio,
        0.05,
        "small-amplitude divergence matches its quadratic form",
    ));

    let mut worst_riemann = 0.0f64;
    for p in [DriftProfile::Linear, DriftProfile::Sinusoidal] {
        let l2sq = match p {
            DriftProfile::Linear => 1.0 / 3.0,
            _ => 0.5,
        };
        for n in [100usize, 1000, 10_000] {
            let mut acc = 0.0;
            for i in 1..=n {
                let g = p.eval(i as f64 / n as f64)?;
                acc += g * g;
            }
            worst_riemann = worst_riemann.max(n as f64 * (acc / n as f64 - l2sq).abs());
        }
    }
    out.push(le(
        "riemann_energy_constant",
        worst_riemann,
        1.0,
        "grid energy converges to the square norm at rate 1/n",
    ));

    let law = exact_enumeration(12, 0.3, 0.25, &DriftProfile::Step, 1.0)?;
    out.push(le(
        "tv_pinsker_enumerated",
        law.tv_distance,
        pinsker_tv_bound(law.kl_divergence)?,
        "exact total variation sits under the Pinsker bound",
    ));

    let mut worst_fact = 0.0f64;
    for n in [8usize, 12, 14] {
        for p in &canonical {
            let enumerated = exact_enumeration(n, 0.3, 0.15, p, 1.0)?.kl_divergence;
            let direct = kl_block(0.3, 0.15, p, n)?;
            worst_fact = worst_fact.max((enumerated - direct).abs());
        }
    }
    out.push(le(
        "joint_kl_factorization",
        worst_fact,
        1e-10,
        "divergence of the joint law equals the sum of per-trial terms",
    ));
    Ok(out)
}

fn enumeration_vs_mc_checks(cfg: &ExperimentConfig) -> Result<Vec<CheckResult>> {
    let (n, e0, delta, m) = (12usize, 0.3, 0.2, 20_000usize);
    let (tau, exact_size) = exact_size_threshold(n, e0, 0.05)?;
    let law = exact_enumeration(n, e0, delta, &DriftProfile::Step, tau)?;
    let manual = CalibratedThreshold::manual(tau, n, 0.05);

    let size_seed = job_seed(cfg.seed, &["verify", "enum-size"]);
    let est = null_rejection_rate(n, e0, &manual, m, size_seed)?;
    let size_band = 3.0 * (exact_size * (1.0 - exact_size) / m as f64).sqrt();

    let power_seed = job_seed(cfg.seed, &["verify", "enum-power"]);
    let point =
        estimate_power(n, e0, &DriftProfile::Step, delta, &manual, m, power_seed)?;
    let power_band = 3.0 * (law.power * (1.0 - law.power) / m as f64).sqrt();

    Ok(vec![
        within(
            "enumeration_vs_mc_size",
            est.rate,
            exact_size,
            size_band,
            "sampled size agrees with the exhaustive law",
        ),
        within(
            "enumeration_vs_mc_power",
            point.power,
            law.power,
            power_band,
            "sampled power agrees with the exhaustive law",
        ),
    ])
}

// ---------------------------------------------------------------------------
// Bound arithmetic and the vanishing-signal trend

fn required_delta_checks() -> Result<Vec<CheckResult>> {
    let rd = required_delta(4000, 0.05, 0.05, 0.2, 0.5)?;
    Ok(vec![
        within(
            "required_delta_value",
            rd,
            0.0152,
            5e-5,
            "closed-form detectable amplitude at the reference settings",
        ),
        gt(
            "required_delta_conservative",
            rd,
            0.0107,
            "the bound with exact constants stays above the empirical \
             crossing observed for the sharpest shape at the same settings",
        ),
    ])
}

fn trend_check(canonical: &[DriftProfile]) -> Result<CheckResult> {
    let points = indistinguishability_trend(0.2, 0.05, 0.5, 0.75, &[8, 12, 16, 20], canonical)?;
    let gaps: Vec<f64> = points
        .iter()
        .map(|p| (p.power_mixture - 0.05).abs())
        .collect();
    let worst_step = gaps
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(lt(
        "indistinguishability_trend",
        worst_step,
        0.0,
        "with n delta_n^2 -> 0 the exact power sinks monotonically toward \
         the size along the probed block lengths",
    ))
}

// ---------------------------------------------------------------------------
// Fault injection

fn injected_zero_threshold(cfg: &ExperimentConfig) -> Result<CheckResult> {
    let (n, e0, m) = (500usize, 0.1, 10_000usize);
    let manual = CalibratedThreshold::manual(0.0, n, cfg.alpha);
    let seed = job_seed(cfg.seed, &["verify", "inject-zero"]);
    let est = null_rejection_rate(n, e0, &manual, m, seed)?;
    let band = 3.0 * (cfg.alpha * (1.0 - cfg.alpha) / m as f64).sqrt();
    Ok(le(
        "injected_zero_threshold_size",
        est.rate,
        cfg.alpha + band,
        "deliberate sabotage: a zero critical value rejects every block \
         with a nonzero excursion, so the size check must flag it",
    ))
}

// ---------------------------------------------------------------------------
