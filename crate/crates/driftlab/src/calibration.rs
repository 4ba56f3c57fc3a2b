//! Level-alpha threshold calibration for the block CUSUM statistic.
//!
//! Two routes produce a critical value tau:
//!
//! * Monte Carlo: simulate M0 null statistics and take the conservative
//!   empirical quantile, the smallest simulated value with at most an
//!   alpha fraction strictly above it. On the calibration sample the
//!   achieved size is then <= alpha by construction.
//! * Asymptotic: the statistic converges in law to the supremum of a
//!   standard Brownian bridge; tau is the upper-alpha quantile of that
//!   law, computed from Kolmogorov's series.
//!
//! The statistic is discrete, so exact level alpha is unattainable;
//! conservative calibration is chosen over randomized tests.

use std::path::Path;

use rayon::prelude::*;

use crate::cusum::t_from_ones;
use crate::error::{Error, Result};
use crate::model::{sample_ones_into, ModelParams};
use crate::rng::CounterRng;

/// How a threshold was produced.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdProvenance {
    MonteCarlo {
        m0: usize,
        seed: u64,
        /// Fraction of calibration blocks that were degenerate (all bits
        /// equal, statistic 0 by convention).
        degenerate_fraction: f64,
    },
    Asymptotic,
    /// Externally supplied critical value; used for limit cases and fault
    /// injection, never produced by calibration itself.
    Manual,
}

/// A rejection-rate estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeEstimate {
    pub rate: f64,
    pub se: f64,
    pub replications: usize,
}

/// Level-alpha critical value for block length n.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedThreshold {
    pub tau: f64,
    pub alpha: f64,
    pub n: usize,
    /// Baseline rate used for calibration; Monte Carlo provenance only.
    pub e0: Option<f64>,
    pub provenance: ThresholdProvenance,
    /// Size achieved on the calibration sample itself; Monte Carlo only.
    pub achieved_size: Option<SizeEstimate>,
}

impl CalibratedThreshold {
    /// Threshold with an externally chosen critical value.
    pub fn manual(tau: f64, n: usize, alpha: f64) -> Self {
        CalibratedThreshold {
            tau,
            alpha,
            n,
            e0: None,
            provenance: ThresholdProvenance::Manual,
            achieved_size: None,
        }
    }

    /// Check that this threshold may be applied to a test at (n, e0).
    /// Monte Carlo thresholds are tied to their calibration pair; the
    /// asymptotic and manual kinds only pin n.
    pub fn check_applies(&self, n: usize, e0: f64) -> Result<()> {
        if self.n != n {
            return Err(Error::Config(format!(
                "threshold calibrated for n = {} applied to n = {n}",
                self.n
            )));
        }
        if let ThresholdProvenance::MonteCarlo { .. } = self.provenance {
            if self.e0 != Some(e0) {
                return Err(Error::Config(format!(
                    "threshold calibrated at e0 = {:?} applied to e0 = {e0}",
                    self.e0
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Brownian bridge supremum law

/// Truncation bound for Kolmogorov's series.
const SERIES_TOL: f64 = 1e-12;

/// Below this point the distribution function is far beneath double
/// precision; short-circuiting also bounds the series length.
const CDF_UNDERFLOW_X: f64 = 0.05;

/// P(sup |B0| <= x) via Kolmogorov's alternating series
/// 1 - 2 sum_{k>=1} (-1)^{k+1} exp(-2 k^2 x^2), truncated once a term
/// falls below 1e-12.
pub fn bridge_sup_cdf(x: f64) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("bridge CDF needs x >= 0, got {x}")));
    }
    if x < CDF_UNDERFLOW_X {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut k = 1.0f64;
    loop {
        let term = (-2.0 * k * k * x * x).exp();
        if term < SERIES_TOL {
            break;
        }
        sum += sign * term;
        sign = -sign;
        k += 1.0;
    }
    let f = (1.0 - 2.0 * sum).clamp(0.0, 1.0);
    // Below the truncation resolution the alternating sum is pure
    // cancellation noise; report an exact zero so the tail stays monotone.
    Ok(if f < SERIES_TOL { 0.0 } else { f })
}

/// Upper-tail quantile q_alpha of sup |B0|: the x with
/// P(sup |B0| > x) = alpha, found by bisection to 1e-8.
pub fn bridge_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "bridge quantile needs alpha in (0, 1), got {alpha}"
        )));
    }
    let target = 1.0 - alpha;
    let mut lo = CDF_UNDERFLOW_X;
    let mut hi = 4.0;
    while bridge_sup_cdf(hi)? < target {
        hi += 2.0;
        if hi > 12.0 {
            return Err(Error::Domain(format!("alpha = {alpha} too small to bracket")));
        }
    }
    while hi - lo > 1e-8 {
        let mid = 0.5 * (lo + hi);
        if bridge_sup_cdf(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Monte Carlo calibration

/// Simulate m independent null statistics T_n at (n, e0), replication
/// index r drawing from the counter stream (seed, r). Order and values
/// are independent of worker count.
pub fn simulate_null_stats(n: usize, e0: f64, m: usize, seed: u64) -> Result<Vec<f64>> {
    let params = ModelParams::null_model(e0, n)?;
    let table = params.probability_table()?;
    let stats = (0..m)
        .into_par_iter()
        .map_init(Vec::new, |ones, r| {
            let rng = CounterRng::new(seed, r as u64);
            sample_ones_into(&table, &rng, ones);
            t_from_ones(n, ones)
        })
        .collect();
    Ok(stats)
}

/// Monte Carlo threshold at level alpha from M0 null replications.
///
/// tau is the conservative empirical quantile: with k = min(floor(alpha
/// M0), M0 - 1) sample points allowed above, tau is the (M0 - k)-th order
/// statistic, so the fraction strictly above tau is at most alpha.
pub fn mc_threshold(
    n: usize,
    e0: f64,
    alpha: f64,
    m0: usize,
    seed: u64,
) -> Result<CalibratedThreshold> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if m0 < 1000 {
        return Err(Error::Config(format!(
            "Monte Carlo calibration needs M0 >= 1000, got {m0}"
        )));
    }
    let mut stats = simulate_null_stats(n, e0, m0, seed)?;
    let degenerate = stats.iter().filter(|&&t| t == 0.0).count();
    let degenerate_fraction = degenerate as f64 / m0 as f64;
    if degenerate_fraction > 0.5 {
        return Err(Error::Calibration(format!(
            "{:.1}% of null blocks at (n = {n}, e0 = {e0}) are degenerate; \
             e0 is too extreme for this block length",
            100.0 * degenerate_fraction
        )));
    }
    stats.sort_unstable_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let k_allow = ((alpha * m0 as f64).floor() as usize).min(m0 - 1);
    let tau = stats[m0 - 1 - k_allow];
    if tau <= 0.0 {
        return Err(Error::Calibration(format!(
            "calibrated tau = {tau} at (n = {n}, e0 = {e0}); a positive \
             critical value is required"
        )));
    }
    let above = stats.iter().filter(|&&t| t > tau).count();
    let rate = above as f64 / m0 as f64;
    Ok(CalibratedThreshold {
        tau,
        alpha,
        n,
        e0: Some(e0),
        provenance: ThresholdProvenance::MonteCarlo { m0, seed, degenerate_fraction },
        achieved_size: Some(SizeEstimate {
            rate,
            se: (rate * (1.0 - rate) / m0 as f64).sqrt(),
            replications: m0,
        }),
    })
}

/// Threshold from the limiting Brownian bridge supremum law.
pub fn asymptotic_threshold(n: usize, alpha: f64) -> Result<CalibratedThreshold> {
    if n == 0 {
        return Err(Error::Domain("block size n must be >= 1".into()));
    }
    Ok(CalibratedThreshold {
        tau: bridge_quantile(alpha)?,
        alpha,
        n,
        e0: None,
        provenance: ThresholdProvenance::Asymptotic,
        achieved_size: None,
    })
}

/// Fresh-seed estimate of the null rejection rate of `threshold` at
/// (n, e0) over m replications.
pub fn null_rejection_rate(
    n: usize,
    e0: f64,
    threshold: &CalibratedThreshold,
    m: usize,
    seed: u64,
) -> Result<SizeEstimate> {
    if threshold.n != n {
        return Err(Error::Config(format!(
            "threshold calibrated for n = {} used to validate n = {n}",
            threshold.n
        )));
    }
    if threshold.tau.is_nan() || threshold.tau < 0.0 {
        return Err(Error::Config(format!("invalid tau = {}", threshold.tau)));
    }
    if m == 0 {
        return Err(Error::InsufficientData("need at least one replication".into()));
    }
    let params = ModelParams::null_model(e0, n)?;
    let table = params.probability_table()?;
    let tau = threshold.tau;
    let rejects: usize = (0..m)
        .into_par_iter()
        .map_init(Vec::new, |ones, r| {
            let rng = CounterRng::new(seed, r as u64);
            sample_ones_into(&table, &rng, ones);
            usize::from(t_from_ones(n, ones) > tau)
        })
        .sum();
    let rate = rejects as f64 / m as f64;
    Ok(SizeEstimate {
        rate,
        se: (rate * (1.0 - rate) / m as f64).sqrt(),
        replications: m,
    })
}

// ---------------------------------------------------------------------------
// Threshold cache

/// One cached Monte Carlo calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRecord {
    pub n: usize,
    pub e0: f64,
    pub alpha: f64,
    pub m0: usize,
    pub seed: u64,
    pub tau: f64,
    pub achieved_size: f64,
    pub achieved_se: f64,
    pub degenerate_fraction: f64,
}

/// File-backed table of Monte Carlo thresholds, keyed exactly by
/// (n, e0, alpha, M0, seed). Values are stored at full round-trip
/// precision: a cache hit must reproduce the in-memory threshold bit for
/// bit, or reruns would not be byte-identical.
#[derive(Debug, Default, Clone)]
pub struct ThresholdTable {
    rows: Vec<ThresholdRecord>,
}

const THRESHOLD_HEADER: &str =
    "n,e0,alpha,m0,seed,tau,achieved_size,achieved_se,degenerate_fraction";

impl ThresholdTable {
    /// Load a table; a missing file yields an empty table.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Ok(ThresholdTable::default())
            }
            Err(e) => return Err(e.into()),
        };
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 {
                if line != THRESHOLD_HEADER {
                    return Err(Error::Parse(format!(
                        "unexpected threshold table header: {line:?}"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(Error::Parse(format!(
                    "threshold row {idx} has {} fields, expected 9",
                    f.len()
                )));
            }
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad {what} in threshold row {idx}: {s:?}")))
            };
            let parse_u = |s: &str, what: &str| -> Result<u64> {
                s.parse::<u64>()
                    .map_err(|_| Error::Parse(format!("bad {what} in threshold row {idx}: {s:?}")))
            };
            rows.push(ThresholdRecord {
                n: parse_u(f[0], "n")? as usize,
                e0: parse_f(f[1], "e0")?,
                alpha: parse_f(f[2], "alpha")?,
                m0: parse_u(f[3], "m0")? as usize,
                seed: parse_u(f[4], "seed")?,
                tau: parse_f(f[5], "tau")?,
                achieved_size: parse_f(f[6], "achieved_size")?,
                achieved_se: parse_f(f[7], "achieved_se")?,
                degenerate_fraction: parse_f(f[8], "degenerate_fraction")?,
            });
        }
        Ok(ThresholdTable { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut out = String::from(THRESHOLD_HEADER);
        out.push('\n');
        for r in &self.rows {
            // Display of f64 is the shortest string that parses back to
            // the same bits, so the cache round-trips exactly.
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.n, r.e0, r.alpha, r.m0, r.seed, r.tau, r.achieved_size, r.achieved_se,
                r.degenerate_fraction
            ));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Exact-key lookup, reconstructing the threshold with its provenance.
    pub fn lookup(
        &self,
        n: usize,
        e0: f64,
        alpha: f64,
        m0: usize,
        seed: u64,
    ) -> Option<CalibratedThreshold> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.e0 == e0 && r.alpha == alpha && r.m0 == m0 && r.seed == seed)
            .map(|r| CalibratedThreshold {
                tau: r.tau,
                alpha: r.alpha,
                n: r.n,
                e0: Some(r.e0),
                provenance: ThresholdProvenance::MonteCarlo {
                    m0: r.m0,
                    seed: r.seed,
                    degenerate_fraction: r.degenerate_fraction,
                },
                achieved_size: Some(SizeEstimate {
                    rate: r.achieved_size,
                    se: r.achieved_se,
                    replications: r.m0,
                }),
            })
    }

    /// Insert or replace the record for a Monte Carlo threshold.
    pub fn insert(&mut self, t: &CalibratedThreshold) -> Result<()> {
        let (m0, seed, degenerate_fraction) = match t.provenance {
            ThresholdProvenance::MonteCarlo { m0, seed, degenerate_fraction } => {
                (m0, seed, degenerate_fraction)
            }
            _ => {
                return Err(Error::Config(
                    "only Monte Carlo thresholds are cached".into(),
                ))
            }
        };
        let e0 = t.e0.ok_or_else(|| {
            Error::Config("Monte Carlo threshold is missing its e0".into())
        })?;
        let size = t
            .achieved_size
            .as_ref()
            .ok_or_else(|| Error::Config("Monte Carlo threshold is missing achieved size".into()))?;
        let rec = ThresholdRecord {
            n: t.n,
            e0,
            alpha: t.alpha,
            m0,
            seed,
            tau: t.tau,
            achieved_size: size.rate,
            achieved_se: size.se,
            degenerate_fraction,
        };
        if let Some(existing) = self.rows.iter_mut().find(|r| {
            r.n == rec.n && r.e0 == rec.e0 && r.alpha == rec.alpha && r.m0 == rec.m0
                && r.seed == rec.seed
        }) {
            *existing = rec;
        } else {
            self.rows.push(rec);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
