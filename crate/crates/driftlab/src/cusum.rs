//! Centered partial-sum (CUSUM) monitor for a single block.
//!
//! Given bits x_1, ..., x_n with block count c_k = x_1 + ... + x_k and
//! plug-in rate e_hat = c_n / n, the monitor tracks
//!
//! ```text
//! S_k = c_k - k * e_hat,
//! T_n = max_k |S_k| / sqrt(n * e_hat * (1 - e_hat)).
//! ```
//!
//! Centering at the block's own mean forces S_n = 0: the path is a bridge,
//! and only intra-block rearrangement of errors can move it. All path
//! arithmetic runs on the integers D_k = n * c_k - k * c_n = n * S_k, so
//! the bridge identity D_n = 0 and the complement and reversal symmetries
//! hold exactly, not merely to rounding.
//!
//! Degenerate blocks (c_n = 0 or c_n = n) carry no rearrangement
//! information; their statistic is defined as 0.

use crate::calibration::CalibratedThreshold;
use crate::error::{Error, Result};
use crate::model::TrialBlock;
use crate::profiles::DriftProfile;

/// Unnormalized centered partial sums S_1, ..., S_n.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSumTrace {
    pub e_hat: f64,
    /// sums[k - 1] holds S_k.
    pub sums: Vec<f64>,
}

/// Full monitor output for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumTrace {
    pub n: usize,
    pub e_hat: f64,
    /// sums[k - 1] holds S_k.
    pub sums: Vec<f64>,
    /// sqrt(n * e_hat * (1 - e_hat)); 0 for degenerate blocks.
    pub normalizer: f64,
    pub t_stat: f64,
    /// Smallest k attaining max |S_k|; 1 for degenerate blocks.
    pub argmax_k: usize,
}

/// Outcome of comparing a statistic against a calibrated threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDecision {
    pub reject: bool,
    pub t_stat: f64,
    pub threshold: f64,
}

fn validate_bits(bits: &[u8]) -> Result<()> {
    if bits.is_empty() {
        return Err(Error::Input("empty block".into()));
    }
    if let Some(j) = bits.iter().position(|&b| b > 1) {
        return Err(Error::Input(format!(
            "bit {} has value {}, expected 0 or 1",
            j + 1,
            bits[j]
        )));
    }
    Ok(())
}

/// Centered partial sums of a sampled block, without normalization.
pub fn partial_sums(block: &TrialBlock) -> Result<PartialSumTrace> {
    partial_sums_from_bits(&block.bits)
}

/// Centered partial sums of a raw bit block.
pub fn partial_sums_from_bits(bits: &[u8]) -> Result<PartialSumTrace> {
    validate_bits(bits)?;
    let n = bits.len();
    let cn: i64 = bits.iter().map(|&b| b as i64).sum();
    let nf = n as f64;
    let mut sums = Vec::with_capacity(n);
    let mut ck: i64 = 0;
    for (k, &b) in bits.iter().enumerate() {
        ck += b as i64;
        let d = n as i64 * ck - (k as i64 + 1) * cn;
        sums.push(d as f64 / nf);
    }
    Ok(PartialSumTrace { e_hat: cn as f64 / nf, sums })
}

/// Shared final map from the integer path maximum to the statistic. The
/// normalizer squared is n * c * (n - c) computed with a fixed operation
/// order so that complementing c to n - c cannot change a single bit.
fn t_value(n: usize, cn: i64, max_abs_d: i64) -> f64 {
    let nf = n as f64;
    let a = cn as f64;
    let b = (n as i64 - cn) as f64;
    max_abs_d as f64 / (nf * (a * b)).sqrt()
}

/// Full monitor pass over a bit block.
pub fn statistic_from_bits(bits: &[u8]) -> Result<CusumTrace> {
    validate_bits(bits)?;
    let n = bits.len();
    let cn: i64 = bits.iter().map(|&b| b as i64).sum();
    let nf = n as f64;
    if cn == 0 || cn == n as i64 {
        return Ok(CusumTrace {
            n,
            e_hat: cn as f64 / nf,
            sums: vec![0.0; n],
            normalizer: 0.0,
            t_stat: 0.0,
            argmax_k: 1,
        });
    }
    let mut sums = Vec::with_capacity(n);
    let mut ck: i64 = 0;
    let mut best: i64 = -1;
    let mut argmax_k = 1usize;
    for (k, &b) in bits.iter().enumerate() {
        ck += b as i64;
        let d = n as i64 * ck - (k as i64 + 1) * cn;
        if d.abs() > best {
            best = d.abs();
            argmax_k = k + 1;
        }
        sums.push(d as f64 / nf);
    }
    let a = cn as f64;
    let bb = (n as i64 - cn) as f64;
    Ok(CusumTrace {
        n,
        e_hat: cn as f64 / nf,
        sums,
        normalizer: (a * bb / nf).sqrt(),
        t_stat: t_value(n, cn, best),
        argmax_k,
    })
}

/// Monitor pass over a sampled block.
pub fn statistic(block: &TrialBlock) -> Result<CusumTrace> {
    statistic_from_bits(&block.bits)
}

/// Statistic from the sorted 1-based positions of firing trials.
///
/// Between firings the integer path D_k moves in constant steps of -c_n,
/// so |D| is extremal only at segment endpoints: just before a firing,
/// at a firing, or at k = n where D vanishes. Scanning those candidates
/// reproduces the full-scan maximum exactly. Hot path for Monte Carlo.
pub(crate) fn t_from_ones(n: usize, ones: &[u32]) -> f64 {
    let cn = ones.len() as i64;
    if cn == 0 || cn == n as i64 {
        return 0.0;
    }
    let ni = n as i64;
    let mut best: i64 = 0;
    for (j, &p) in ones.iter().enumerate() {
        let c_at = j as i64 + 1;
        let p = p as i64;
        if p > 1 {
            let d = ni * (c_at - 1) - (p - 1) * cn;
            best = best.max(d.abs());
        }
        let d = ni * c_at - p * cn;
        best = best.max(d.abs());
    }
    t_value(n, cn, best)
}

/// Compare a monitor trace against a calibrated threshold.
///
/// Rejection is strict: T > tau. Ties accept, which keeps the Monte Carlo
/// calibration conservative on its own sample.
pub fn decide(trace: &CusumTrace, threshold: &CalibratedThreshold) -> Result<TestDecision> {
    if trace.n != threshold.n {
        return Err(Error::Config(format!(
            "trace has n = {} but threshold was calibrated for n = {}",
            trace.n, threshold.n
        )));
    }
    // A +infinity cutoff (never reject) is a legitimate limit case; NaN
    // and negative cutoffs are not.
    if threshold.tau.is_nan() || threshold.tau < 0.0 {
        return Err(Error::Config(format!(
            "threshold tau = {} is not a valid critical value",
            threshold.tau
        )));
    }
    Ok(TestDecision {
        reject: trace.t_stat > threshold.tau,
        t_stat: trace.t_stat,
        threshold: threshold.tau,
    })
}

/// Peak deterministic excursion of the centered path under drift:
/// delta * n * A(g). The stochastic part adds fluctuations of order
/// sqrt(n), so drift dominates once delta * sqrt(n) * A(g) is large
/// against the baseline standard deviation.
pub fn expected_excursion(n: usize, delta: f64, profile: &DriftProfile) -> Result<f64> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::Domain(format!("delta must be finite and >= 0, got {delta}")));
    }
    Ok(delta * n as f64 * profile.signal_constant())
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_block, ModelParams};
    use crate::rng::CounterRng;

    fn random_bits(seed: u64, rep: u64, n: usize, p: f64) -> Vec<u8> {
        let rng = CounterRng::new(seed, rep);
        (0..n).map(|i| u8::from(rng.uniform(i as u64) < p)).collect()
    }

    #[test]
    fn bridge_property_holds_exactly() {
        for rep in 0..200 {
            let bits = random_bits(3, rep, 157, 0.23);
            let trace = partial_sums_from_bits(&bits).unwrap();
            assert_eq!(*trace.sums.last().unwrap(), 0.0, "S_n must vanish exactly");
        }
    }

    #[test]
    fn partial_sums_hand_examples() {
        let a = partial_sums_from_bits(&[1, 0, 0, 1]).unwrap();
        assert_eq!(a.e_hat, 0.5);
        assert_eq!(a.sums, vec![0.5, 0.0, -0.5, 0.0]);
        let b = partial_sums_from_bits(&[1, 1, 0, 0]).unwrap();
        assert_eq!(b.sums, vec![0.5, 1.0, 0.5, 0.0]);
        // T for the first block: max |S| = 0.5 over sqrt(4 * 0.5 * 0.5) = 1.
        let t = statistic_from_bits(&[1, 0, 0, 1]).unwrap();
        assert!((t.t_stat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_blocks_are_degenerate() {
        for bits in [vec![0u8; 64], vec![1u8; 64]] {
            let trace = statistic_from_bits(&bits).unwrap();
            assert_eq!(trace.t_stat, 0.0);
            assert_eq!(trace.normalizer, 0.0);
            assert!(trace.sums.iter().all(|&s| s == 0.0));
            let ps = partial_sums_from_bits(&bits).unwrap();
            assert!(ps.sums.iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn hand_computed_small_block() {
        // bits 0 1 0 0: c = (0,1,1,1), e_hat = 1/4.
        // S = (-1/4, 1/2, 1/4, 0); max |S| = 1/2 at k = 2.
        // normalizer = sqrt(4 * 1/4 * 3/4) = sqrt(3)/2.
        let trace = statistic_from_bits(&[0, 1, 0, 0]).unwrap();
        assert_eq!(trace.e_hat, 0.25);
        assert_eq!(trace.sums, vec![-0.25, 0.5, 0.25, 0.0]);
        assert_eq!(trace.argmax_k, 2);
        let expect = 0.5 / (3.0f64.sqrt() / 2.0);
        assert!((trace.t_stat - expect).abs() < 1e-15);
        assert!((trace.normalizer - 3.0f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn t_stat_is_max_abs_sum_over_normalizer() {
        for rep in 0..100 {
            let bits = random_bits(8, rep, 211, 0.4);
            let trace = statistic_from_bits(&bits).unwrap();
            if trace.normalizer == 0.0 {
                continue;
            }
            let max_abs = trace.sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            assert!(
                (trace.t_stat - max_abs / trace.normalizer).abs() < 1e-12,
                "rep {rep}"
            );
            let k = trace.argmax_k;
            assert!((trace.sums[k - 1].abs() - max_abs).abs() < 1e-12);
        }
    }

    #[test]
    fn ones_scan_matches_full_scan_exactly() {
        for rep in 0..400 {
            let bits = random_bits(17, rep, 193, 0.07);
            let ones: Vec<u32> = bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(j, _)| j as u32 + 1)
                .collect();
            let full = statistic_from_bits(&bits).unwrap().t_stat;
            let fast = t_from_ones(bits.len(), &ones);
            assert_eq!(full.to_bits(), fast.to_bits(), "rep {rep}");
        }
    }

    #[test]
    fn complement_and_reversal_leave_t_unchanged_bit_for_bit() {
        for rep in 0..300 {
            let bits = random_bits(29, rep, 178, 0.31);
            let t = statistic_from_bits(&bits).unwrap().t_stat;
            let flipped: Vec<u8> = bits.iter().map(|&b| 1 - b).collect();
            let reversed: Vec<u8> = bits.iter().rev().copied().collect();
            let tf = statistic_from_bits(&flipped).unwrap().t_stat;
            let tr = statistic_from_bits(&reversed).unwrap().t_stat;
            assert_eq!(t.to_bits(), tf.to_bits(), "complement, rep {rep}");
            assert_eq!(t.to_bits(), tr.to_bits(), "reversal, rep {rep}");
        }
    }

    #[test]
    fn rejects_malformed_bits() {
        assert!(statistic_from_bits(&[]).is_err());
        assert!(statistic_from_bits(&[0, 2, 1]).is_err());
        assert!(partial_sums_from_bits(&[]).is_err());
    }

    #[test]
    fn decision_uses_strict_inequality_and_checks_pairing() {
        let bits = random_bits(4, 0, 120, 0.3);
        let trace = statistic_from_bits(&bits).unwrap();
        let tie = CalibratedThreshold::manual(trace.t_stat, 120, 0.05);
        assert!(!decide(&trace, &tie).unwrap().reject, "tie must accept");
        let below = CalibratedThreshold::manual(trace.t_stat * 0.999, 120, 0.05);
        assert!(decide(&trace, &below).unwrap().reject);
        let never = CalibratedThreshold::manual(f64::INFINITY, 120, 0.05);
        assert!(!decide(&trace, &never).unwrap().reject);
        let always = CalibratedThreshold::manual(0.0, 120, 0.05);
        assert!(decide(&trace, &always).unwrap().reject || trace.t_stat == 0.0);
        let wrong_n = CalibratedThreshold::manual(1.0, 121, 0.05);
        assert!(decide(&trace, &wrong_n).is_err());
        let bad_tau = CalibratedThreshold::manual(f64::NAN, 120, 0.05);
        assert!(decide(&trace, &bad_tau).is_err());
        let negative = CalibratedThreshold::manual(-0.5, 120, 0.05);
        assert!(decide(&trace, &negative).is_err());
    }

    #[test]
    fn null_statistic_mean_matches_bridge_supremum_law() {
        // E sup |bridge| = sqrt(pi/2) ln 2 = 0.8687, approached from below
        // by the discrete maximum.
        let n = 2000;
        let params = ModelParams::null_model(0.1, n).unwrap();
        let table = params.probability_table().unwrap();
        let reps = 3000u64;
        let mut sum = 0.0;
        let mut ones = Vec::new();
        for r in 0..reps {
            let rng = CounterRng::new(77, r);
            crate::model::sample_ones_into(&table, &rng, &mut ones);
            sum += t_from_ones(n, &ones);
        }
        let mean = sum / reps as f64;
        let target = (std::f64::consts::PI / 2.0).sqrt() * std::f64::consts::LN_2;
        assert!((mean - target).abs() < 0.04, "mean T = {mean}, limit = {target}");
    }

    #[test]
    fn strong_drift_inflates_the_statistic() {
        let n = 2000;
        let e0 = 0.1;
        let null = ModelParams::null_model(e0, n).unwrap();
        let drift = ModelParams::with_drift(e0, 0.08, DriftProfile::Step, n).unwrap();
        let mut mean_null = 0.0;
        let mut mean_drift = 0.0;
        let reps = 400;
        for r in 0..reps {
            mean_null += statistic(&sample_block(&null, 31, r).unwrap()).unwrap().t_stat;
            mean_drift += statistic(&sample_block(&drift, 31, r).unwrap()).unwrap().t_stat;
        }
        mean_null /= reps as f64;
        mean_drift /= reps as f64;
        assert!(
            mean_drift > 3.0 * mean_null,
            "drift mean {mean_drift} vs null mean {mean_null}"
        );
    }

    #[test]
    fn excursion_values() {
        let e = expected_excursion(1000, 0.02, &DriftProfile::Linear).unwrap();
        assert!((e - 5.0).abs() < 1e-12);
        let s = expected_excursion(4000, 0.0107, &DriftProfile::Step).unwrap();
        assert!((s - 21.4).abs() < 1e-12);
        assert_eq!(expected_excursion(500, 0.0, &DriftProfile::Sinusoidal).unwrap(), 0.0);
        assert!(expected_excursion(10, -0.1, &DriftProfile::Step).is_err());
    }

    #[test]
    fn signal_dominance_at_reference_parameters() {
        // Mean peak excursion within 15% of delta * n * A(g) (the bridge
        // fluctuation correction is absorbed by the band), and the drifted
        // statistic separated from the null by at least 3 pooled SE.
        let n = 4000;
        let e0 = 0.05;
        let delta = 0.02;
        let reps = 2000u64;
        let null = ModelParams::null_model(e0, n).unwrap();
        let drift = ModelParams::with_drift(e0, delta, DriftProfile::Step, n).unwrap();
        let predicted = expected_excursion(n, delta, &DriftProfile::Step).unwrap();

        let (mut peak_sum, mut t1_sum, mut t1_sq) = (0.0, 0.0, 0.0);
        let (mut t0_sum, mut t0_sq) = (0.0, 0.0);
        for r in 0..reps {
            let trace = statistic(&sample_block(&drift, 91, r).unwrap()).unwrap();
            let peak = trace.sums.iter().fold(0.0f64, |m, s| m.max(s.abs()));
            peak_sum += peak;
            t1_sum += trace.t_stat;
            t1_sq += trace.t_stat * trace.t_stat;
            let t0 = statistic(&sample_block(&null, 92, r).unwrap()).unwrap().t_stat;
            t0_sum += t0;
            t0_sq += t0 * t0;
        }
        let m = reps as f64;
        let mean_peak = peak_sum / m;
        assert!(
            (mean_peak - predicted).abs() < 0.15 * predicted,
            "mean peak {mean_peak} vs predicted {predicted}"
        );
        let (m1, m0) = (t1_sum / m, t0_sum / m);
        let v1 = t1_sq / m - m1 * m1;
        let v0 = t0_sq / m - m0 * m0;
        let pooled_se = ((v1 + v0) / m).sqrt();
        assert!(
            m1 - m0 >= 3.0 * pooled_se,
            "separation {} vs 3 SE {}",
            m1 - m0,
            3.0 * pooled_se
        );
    }
}
