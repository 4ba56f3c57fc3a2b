//! Blockwise Bernoulli observation model with intra-block drift.
//!
//! A block of n independent trials has per-trial error probabilities
//!
//! ```text
//! p_i = e0 + delta * g(i / n),    i = 1, ..., n,
//! ```
//!
//! where g is a mean-preserving drift profile. Under the null hypothesis
//! delta = 0 and every trial is Bernoulli(e0). Probabilities are validated,
//! never clamped: a parameter set that pushes any p_i outside [0, 1] is a
//! hard error.

use crate::error::{Error, Result};
use crate::profiles::{delta_max, DriftProfile};
use crate::rng::CounterRng;

/// Parameters of one observation block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    e0: f64,
    delta: f64,
    profile: Option<DriftProfile>,
    n: usize,
}

impl ModelParams {
    /// Null model: n i.i.d. Bernoulli(e0) trials.
    pub fn null_model(e0: f64, n: usize) -> Result<Self> {
        check_e0(e0)?;
        check_n(n)?;
        Ok(ModelParams { e0, delta: 0.0, profile: None, n })
    }

    /// Drift model with amplitude `delta` in [0, delta_max(e0)].
    pub fn with_drift(e0: f64, delta: f64, profile: DriftProfile, n: usize) -> Result<Self> {
        check_e0(e0)?;
        check_n(n)?;
        let dmax = delta_max(e0)?;
        if !(0.0..=f64::INFINITY).contains(&delta) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be finite and >= 0, got {delta}")));
        }
        if delta > dmax {
            return Err(Error::Admissibility(format!(
                "delta = {delta} exceeds delta_max(e0 = {e0}) = {dmax}"
            )));
        }
        Ok(ModelParams { e0, delta, profile: Some(profile), n })
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn profile(&self) -> Option<&DriftProfile> {
        self.profile.as_ref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Error probability of trial `i` (1-based).
    ///
    /// Errors if `i` is out of range or the drift pushes the probability
    /// outside [0, 1].
    pub fn error_prob(&self, i: usize) -> Result<f64> {
        if i == 0 || i > self.n {
            return Err(Error::Domain(format!(
                "trial index {i} outside 1..={}",
                self.n
            )));
        }
        let p = match &self.profile {
            None => self.e0,
            Some(g) => self.e0 + self.delta * g.eval(i as f64 / self.n as f64)?,
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Admissibility(format!(
                "trial {i}: probability {p} outside [0, 1] (e0 = {}, delta = {})",
                self.e0, self.delta
            )));
        }
        Ok(p)
    }

    /// All per-trial probabilities, validated.
    pub fn probability_table(&self) -> Result<Vec<f64>> {
        (1..=self.n).map(|i| self.error_prob(i)).collect()
    }
}

/// One sampled block together with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBlock {
    pub params: ModelParams,
    pub seed: u64,
    pub replication: u64,
    /// Trial outcomes as 0/1 bytes, index i - 1 holds trial i.
    pub bits: Vec<u8>,
}

impl TrialBlock {
    /// Compact 0/1 character rendering for debugging and trace dumps.
    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }
}

/// Sample a block by inversion: trial i fires when its uniform draw falls
/// below p_i. Bit i is a pure function of (seed, replication, i), so
/// identical inputs reproduce identical blocks on any schedule.
pub fn sample_block(params: &ModelParams, seed: u64, replication: u64) -> Result<TrialBlock> {
    let table = params.probability_table()?;
    let rng = CounterRng::new(seed, replication);
    let bits = table
        .iter()
        .enumerate()
        .map(|(j, &p)| u8::from(rng.uniform(j as u64) < p))
        .collect();
    Ok(TrialBlock { params: params.clone(), seed, replication, bits })
}

/// Fill `ones` with the 1-based positions of firing trials. Hot path for
/// Monte Carlo sweeps; byte-for-byte consistent with [`sample_block`].
pub(crate) fn sample_ones_into(table: &[f64], rng: &CounterRng, ones: &mut Vec<u32>) {
    ones.clear();
    for (j, &p) in table.iter().enumerate() {
        if rng.uniform(j as u64) < p {
            ones.push(j as u32 + 1);
        }
    }
}

/// Per-trial variance of the null model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineVariance {
    pub sigma0_sq: f64,
}

/// sigma0^2 = e0 (1 - e0), the trial variance under the null.
pub fn baseline_variance(e0: f64) -> Result<BaselineVariance> {
    check_e0(e0)?;
    Ok(BaselineVariance { sigma0_sq: e0 * (1.0 - e0) })
}

fn check_e0(e0: f64) -> Result<()> {
    if !(e0 > 0.0 && e0 < 1.0) {
        return Err(Error::Domain(format!("e0 must lie in (0, 1), got {e0}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Domain("block size n must be >= 1".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_probabilities_are_flat() {
        let p = ModelParams::null_model(0.05, 100).unwrap();
        for i in 1..=100 {
            assert_eq!(p.error_prob(i).unwrap(), 0.05);
        }
    }

    #[test]
    fn drift_probabilities_follow_the_profile() {
        let n = 200;
        let p = ModelParams::with_drift(0.05, 0.05, DriftProfile::Step, n).unwrap();
        // Last trial sits at t = 1 where the step is +1.
        assert!((p.error_prob(n).unwrap() - 0.10).abs() < 1e-15);
        // First half of the block is depressed to e0 - delta = 0.
        assert_eq!(p.error_prob(1).unwrap(), 0.0);

        let lin = ModelParams::with_drift(0.10, 0.02, DriftProfile::Linear, n).unwrap();
        let i = 50;
        let expect = 0.10 + 0.02 * (2.0 * (i as f64 / n as f64) - 1.0);
        assert!((lin.error_prob(i).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn constructors_enforce_domains() {
        assert!(ModelParams::null_model(0.0, 10).is_err());
        assert!(ModelParams::null_model(1.0, 10).is_err());
        assert!(ModelParams::null_model(0.5, 0).is_err());
        assert!(ModelParams::with_drift(0.05, 0.051, DriftProfile::Linear, 10).is_err());
        assert!(ModelParams::with_drift(0.05, -0.01, DriftProfile::Linear, 10).is_err());
        assert!(ModelParams::with_drift(0.05, f64::NAN, DriftProfile::Linear, 10).is_err());
        // delta exactly at the cap is allowed.
        assert!(ModelParams::with_drift(0.05, 0.05, DriftProfile::Step, 10).is_ok());
    }

    #[test]
    fn out_of_range_probability_is_a_hard_error() {
        // A custom profile may undershoot -1 by the construction slack;
        // the knot at t = 1/4 is hit exactly by trial 1 of n = 4, and at
        // delta = delta_max it drives p_1 just below zero.
        let eps = 5e-13;
        let samples = vec![0.0, -1.0 - eps, 0.0, 1.0 + eps, 0.0];
        let g = DriftProfile::custom("notched", samples).unwrap();
        let p = ModelParams::with_drift(0.05, 0.05, g, 4).unwrap();
        assert!(p.error_prob(1).is_err());
        assert!(p.probability_table().is_err());
    }

    #[test]
    fn trial_index_bounds_are_checked() {
        let p = ModelParams::null_model(0.2, 5).unwrap();
        assert!(p.error_prob(0).is_err());
        assert!(p.error_prob(6).is_err());
    }

    #[test]
    fn sampling_is_deterministic_in_seed_and_replication() {
        let p = ModelParams::with_drift(0.10, 0.05, DriftProfile::Sinusoidal, 300).unwrap();
        let a = sample_block(&p, 42, 7).unwrap();
        let b = sample_block(&p, 42, 7).unwrap();
        assert_eq!(a.bits, b.bits);
        let c = sample_block(&p, 42, 8).unwrap();
        assert_ne!(a.bits, c.bits);
        let d = sample_block(&p, 43, 7).unwrap();
        assert_ne!(a.bits, d.bits);
        assert!(a.bits.iter().all(|&b| b <= 1));
        assert_eq!(a.bit_string().len(), 300);
    }

    #[test]
    fn ones_positions_agree_with_sampled_bits() {
        let p = ModelParams::with_drift(0.30, 0.2, DriftProfile::Step, 250).unwrap();
        let table = p.probability_table().unwrap();
        let rng = CounterRng::new(9, 4);
        let mut ones = Vec::new();
        sample_ones_into(&table, &rng, &mut ones);
        let block = sample_block(&p, 9, 4).unwrap();
        let from_bits: Vec<u32> = block
            .bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(j, _)| j as u32 + 1)
            .collect();
        assert_eq!(ones, from_bits);
    }

    #[test]
    fn grand_mean_is_preserved_under_drift() {
        // Mean preservation: the block average of p_i equals e0 up to the
        // O(delta / n) Riemann discretization of the zero-mean profile.
        let n = 500;
        let e0 = 0.05;
        let p = ModelParams::with_drift(e0, 0.04, DriftProfile::Sinusoidal, n).unwrap();
        let table = p.probability_table().unwrap();
        let p_mean: f64 = table.iter().sum::<f64>() / n as f64;
        assert!((p_mean - e0).abs() < 0.04 * 2.0 / n as f64, "p_mean = {p_mean}");

        let reps = 4_000u64;
        let mut total = 0u64;
        for r in 0..reps {
            let block = sample_block(&p, 11, r).unwrap();
            total += block.bits.iter().map(|&b| b as u64).sum::<u64>();
        }
        let mean = total as f64 / (reps as f64 * n as f64);
        // Four standard errors of the Monte Carlo mean.
        let se = (e0 * (1.0 - e0) / (reps as f64 * n as f64)).sqrt();
        assert!((mean - e0).abs() < 4.0 * se + 0.08 / n as f64, "mean = {mean}");
    }

    #[test]
    fn empirical_rates_track_the_probability_table() {
        let n = 40;
        let p = ModelParams::with_drift(0.2, 0.15, DriftProfile::Linear, n).unwrap();
        let table = p.probability_table().unwrap();
        let reps = 20_000u64;
        let mut counts = vec![0u32; n];
        for r in 0..reps {
            let block = sample_block(&p, 5, r).unwrap();
            for (c, &b) in counts.iter_mut().zip(&block.bits) {
                *c += b as u32;
            }
        }
        for (i, (&c, &pi)) in counts.iter().zip(&table).enumerate() {
            let rate = c as f64 / reps as f64;
            let se = (pi * (1.0 - pi) / reps as f64).sqrt();
            assert!(
                (rate - pi).abs() < 5.0 * se.max(1e-3),
                "trial {}: rate {rate} vs p {pi}",
                i + 1
            );
        }
    }

    #[test]
    fn baseline_variance_values() {
        assert!((baseline_variance(0.5).unwrap().sigma0_sq - 0.25).abs() < 1e-15);
        assert!((baseline_variance(0.05).unwrap().sigma0_sq - 0.0475).abs() < 1e-15);
        assert!(baseline_variance(0.0).is_err());
        assert!(baseline_variance(1.0).is_err());
    }
}
