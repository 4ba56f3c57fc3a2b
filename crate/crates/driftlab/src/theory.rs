//! Information-theoretic bounds and a brute-force oracle for tiny blocks.
//!
//! The detection problem is governed by the Kullback-Leibler divergence
//! between the drifted and flat block laws,
//!
//! ```text
//! KL = sum_i kl(e0 + delta g(i/n), e0) ~ (delta^2 / (2 sigma0^2)) sum_i g(i/n)^2,
//! ```
//!
//! which feeds Pinsker's inequality (impossibility side) and the
//! achievability constant delta >= sigma0 (q_alpha + z_{1-beta}) / (A(g) sqrt(n))
//! (detectability side). For n <= 20 the full outcome space is enumerable,
//! giving exact sizes, powers, and total-variation distances against which
//! the Monte Carlo machinery is cross-checked.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::calibration::bridge_quantile;
use crate::cusum::t_from_ones;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::profiles::DriftProfile;

/// Largest block length the exact oracle will enumerate (2^20 outcomes).
pub const ENUMERATION_CAP: usize = 20;

/// Outcomes per parallel chunk; fixed so the summation order, and hence
/// every bit of the result, is independent of the worker count.
const CHUNK: u64 = 1 << 14;

// ---------------------------------------------------------------------------
// Compensated accumulation

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// ---------------------------------------------------------------------------
// Divergences

/// kl(Bern(p) || Bern(q)) in nats, with 0 log 0 := 0.
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::Domain(format!("kl needs p in [0, 1], got {p}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("kl needs q in (0, 1), got {q}")));
    }
    let mut kl = 0.0;
    if p > 0.0 {
        kl += p * (p / q).ln();
    }
    if p < 1.0 {
        kl += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    }
    Ok(kl)
}

/// Exact KL divergence of the drifted block law from the flat one:
/// sum_i kl(e0 + delta g(i/n), e0), compensated.
pub fn kl_block(e0: f64, delta: f64, profile: &DriftProfile, n: usize) -> Result<f64> {
    let params = ModelParams::with_drift(e0, delta, profile.clone(), n)?;
    let mut acc = Neumaier::default();
    for i in 1..=n {
        acc.add(kl_bernoulli(params.error_prob(i)?, e0)?);
    }
    Ok(acc.value())
}

/// Leading quadratic term of the block KL:
/// (delta^2 / (2 e0 (1 - e0))) sum_i g(i/n)^2.
pub fn kl_quadratic_approx(
    e0: f64,
    delta: f64,
    profile: &DriftProfile,
    n: usize,
) -> Result<f64> {
    // Validates (e0, delta, n) exactly as the sampler would.
    let _ = ModelParams::with_drift(e0, delta, profile.clone(), n)?;
    let mut acc = Neumaier::default();
    for i in 1..=n {
        let g = profile.eval(i as f64 / n as f64)?;
        acc.add(g * g);
    }
    let sigma0_sq = e0 * (1.0 - e0);
    Ok(delta * delta / (2.0 * sigma0_sq) * acc.value())
}

/// Pinsker's bound: TV <= sqrt(kl / 2).
pub fn pinsker_tv_bound(kl: f64) -> Result<f64> {
    if kl.is_nan() || kl < 0.0 {
        return Err(Error::Domain(format!("Pinsker needs kl >= 0, got {kl}")));
    }
    Ok((kl / 2.0).sqrt())
}

// ---------------------------------------------------------------------------
// Standard normal quantile

// Acklam's rational approximation, absolute error below 1.2e-9 over (0, 1).
const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const ACKLAM_P_LOW: f64 = 0.02425;

/// Inverse standard normal CDF, accurate to about 1e-9.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile needs p in (0, 1), got {p}"
        )));
    }
    let a = &ACKLAM_A;
    let b = &ACKLAM_B;
    let c = &ACKLAM_C;
    let d = &ACKLAM_D;
    let z = if p < ACKLAM_P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else if p <= 1.0 - ACKLAM_P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    };
    Ok(z)
}

// ---------------------------------------------------------------------------
// Achievability bound

/// Smallest amplitude the bridge-limit argument guarantees detectable:
/// sigma0 (q_alpha + z_{1-beta}) / (a_star sqrt(n)). Conservative, so it
/// should sit above empirical minimal amplitudes.
pub fn required_delta(n: usize, e0: f64, alpha: f64, beta: f64, a_star: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("block size n must be >= 1".into()));
    }
    if !(e0 > 0.0 && e0 < 1.0) {
        return Err(Error::Domain(format!("e0 must lie in (0, 1), got {e0}")));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(a_star > 0.0) {
        return Err(Error::Domain(format!("a_star must be positive, got {a_star}")));
    }
    let sigma0 = (e0 * (1.0 - e0)).sqrt();
    let q = bridge_quantile(alpha)?;
    let z = normal_quantile(1.0 - beta)?;
    Ok(sigma0 * (q + z) / (a_star * (n as f64).sqrt()))
}

/// Bundle of the bound arithmetic at one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryBound {
    pub kl_exact: f64,
    pub kl_quadratic: f64,
    /// Pinsker bound on the total variation distance.
    pub tv_bound: f64,
    /// The constant in delta >= c / sqrt(n).
    pub c_alpha_beta: f64,
    /// Signal constant A(g) used for the achievability side.
    pub a_star: f64,
}

pub fn theory_bound(
    e0: f64,
    delta: f64,
    profile: &DriftProfile,
    n: usize,
    alpha: f64,
    beta: f64,
) -> Result<TheoryBound> {
    let kl_exact = kl_block(e0, delta, profile, n)?;
    let kl_quadratic = kl_quadratic_approx(e0, delta, profile, n)?;
    let a_star = profile.signal_constant_estimate().value;
    let sigma0 = (e0 * (1.0 - e0)).sqrt();
    let c_alpha_beta =
        sigma0 * (bridge_quantile(alpha)? + normal_quantile(1.0 - beta)?) / a_star;
    Ok(TheoryBound {
        kl_exact,
        kl_quadratic,
        tv_bound: pinsker_tv_bound(kl_exact)?,
        c_alpha_beta,
        a_star,
    })
}

// ---------------------------------------------------------------------------
// Exact enumeration oracle

/// One atom of the statistic's exact law under both hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TAtom {
    pub t: f64,
    pub p_null: f64,
    pub p_alt: f64,
}

/// Exact law of the test at one (n, e0, delta, profile, threshold).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactTestLaw {
    pub n: usize,
    pub threshold: f64,
    /// Distinct statistic values with their probabilities, ascending in t.
    pub atoms: Vec<TAtom>,
    pub total_null: f64,
    pub total_alt: f64,
    /// P(T > threshold) under the flat law.
    pub size: f64,
    /// P(T > threshold) under the drifted law.
    pub power: f64,
    /// Exact total variation distance between the two block laws.
    pub tv_distance: f64,
    /// Exact KL of the drifted block law from the flat one.
    pub kl_divergence: f64,
}

struct ChunkScan {
    atoms: BTreeMap<u64, (f64, f64)>,
    p0_total: Neumaier,
    p1_total: Neumaier,
    abs_diff: Neumaier,
    kl: Neumaier,
}

/// Enumerate all 2^n outcomes of a block and aggregate the exact law of
/// the statistic under the flat and drifted hypotheses.
///
/// Chunks of fixed size are scanned in parallel and merged in index
/// order, so results are bit-identical regardless of worker count.
pub fn exact_enumeration(
    n: usize,
    e0: f64,
    delta: f64,
    profile: &DriftProfile,
    threshold: f64,
) -> Result<ExactTestLaw> {
    if n == 0 || n > ENUMERATION_CAP {
        return Err(Error::Refused(format!(
            "exact enumeration covers 1 <= n <= {ENUMERATION_CAP}, got {n}"
        )));
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Domain(format!("invalid threshold {threshold}")));
    }
    let params = ModelParams::with_drift(e0, delta, profile.clone(), n)?;
    let p1 = params.probability_table()?;

    let total: u64 = 1 << n;
    let starts: Vec<u64> = (0..total).step_by(CHUNK as usize).collect();
    let chunks: Vec<ChunkScan> = starts
        .into_par_iter()
        .map(|start| {
            let end = (start + CHUNK).min(total);
            let mut scan = ChunkScan {
                atoms: BTreeMap::new(),
                p0_total: Neumaier::default(),
                p1_total: Neumaier::default(),
                abs_diff: Neumaier::default(),
                kl: Neumaier::default(),
            };
            let mut ones: Vec<u32> = Vec::with_capacity(n);
            for b in start..end {
                ones.clear();
                // Both products run over the bits in the same order, so at
                // delta = 0 they execute identical operations and the two
                // laws coincide bit for bit, not merely to rounding.
                let mut prob0 = 1.0f64;
                let mut prob1 = 1.0f64;
                for i in 0..n {
                    if b >> i & 1 == 1 {
                        ones.push(i as u32 + 1);
                        prob0 *= e0;
                        prob1 *= p1[i];
                    } else {
                        prob0 *= 1.0 - e0;
                        prob1 *= 1.0 - p1[i];
                    }
                }
                let t = t_from_ones(n, &ones);
                let slot = scan.atoms.entry(t.to_bits()).or_insert((0.0, 0.0));
                slot.0 += prob0;
                slot.1 += prob1;
                scan.p0_total.add(prob0);
                scan.p1_total.add(prob1);
                scan.abs_diff.add((prob1 - prob0).abs());
                if prob1 > 0.0 {
                    scan.kl.add(prob1 * (prob1 / prob0).ln());
                }
            }
            scan
        })
        .collect();

    let mut atoms_map: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    let mut p0_total = Neumaier::default();
    let mut p1_total = Neumaier::default();
    let mut abs_diff = Neumaier::default();
    let mut kl = Neumaier::default();
    for scan in chunks {
        for (bits, (a0, a1)) in scan.atoms {
            let slot = atoms_map.entry(bits).or_insert((0.0, 0.0));
            slot.0 += a0;
            slot.1 += a1;
        }
        p0_total.add(scan.p0_total.value());
        p1_total.add(scan.p1_total.value());
        abs_diff.add(scan.abs_diff.value());
        kl.add(scan.kl.value());
    }

    // The statistic is non-negative, so the bit pattern of t orders
    // atoms by value; BTreeMap iteration is already ascending.
    let atoms: Vec<TAtom> = atoms_map
        .into_iter()
        .map(|(bits, (p_null, p_alt))| TAtom { t: f64::from_bits(bits), p_null, p_alt })
        .collect();
    let mut size = Neumaier::default();
    let mut power = Neumaier::default();
    for a in &atoms {
        if a.t > threshold {
            size.add(a.p_null);
            power.add(a.p_alt);
        }
    }
    Ok(ExactTestLaw {
        n,
        threshold,
        atoms,
        total_null: p0_total.value(),
        total_alt: p1_total.value(),
        size: size.value(),
        power: power.value(),
        tv_distance: 0.5 * abs_diff.value(),
        kl_divergence: kl.value(),
    })
}

/// Smallest threshold whose exact null rejection probability is <= alpha,
/// together with that probability. Candidates are the atoms of the exact
/// null law, mirroring the conservative Monte Carlo quantile rule.
pub fn exact_size_threshold(n: usize, e0: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let law = exact_enumeration(n, e0, 0.0, &DriftProfile::Linear, f64::INFINITY)?;
    let mut tail = 0.0f64;
    let mut best: Option<(f64, f64)> = None;
    for atom in law.atoms.iter().rev() {
        // `tail` holds P(T > atom.t) before this atom is folded in.
        if tail <= alpha {
            best = Some((atom.t, tail));
        } else {
            break;
        }
        tail += atom.p_null;
    }
    best.ok_or_else(|| {
        Error::Calibration(format!(
            "no atom of the exact null law at (n = {n}, e0 = {e0}) has tail <= {alpha}"
        ))
    })
}

// ---------------------------------------------------------------------------
// Vanishing-signal trend

/// Exact size and mixture power at one block length of the shrinking
/// amplitude schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendPoint {
    pub n: usize,
    pub delta: f64,
    pub tau: f64,
    pub size: f64,
    /// Mean exact power over the profile mixture.
    pub power_mixture: f64,
}

/// Exact power of the test against a uniform mixture of drift shapes at
/// amplitudes delta_n = amp * n^(-exponent). When n delta_n^2 -> 0 the
/// mixture is asymptotically indistinguishable from the flat law and the
/// power must sink toward the size.
pub fn indistinguishability_trend(
    e0: f64,
    alpha: f64,
    amp: f64,
    exponent: f64,
    ns: &[usize],
    profiles: &[DriftProfile],
) -> Result<Vec<TrendPoint>> {
    if ns.is_empty() || profiles.is_empty() {
        return Err(Error::Input(
            "trend needs at least one block length and one profile".into(),
        ));
    }
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let delta = amp * (n as f64).powf(-exponent);
        let (tau, size) = exact_size_threshold(n, e0, alpha)?;
        let mut acc = 0.0;
        for p in profiles {
            acc += exact_enumeration(n, e0, delta, p, tau)?.power;
        }
        out.push(TrendPoint {
            n,
            delta,
            tau,
            size,
            power_mixture: acc / profiles.len() as f64,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    const PROFILES: [DriftProfile; 3] = [
        DriftProfile::Linear,
        DriftProfile::Sinusoidal,
        DriftProfile::Step,
    ];

    #[test]
    fn kl_bernoulli_reference_values() {
        assert_eq!(kl_bernoulli(0.05, 0.05).unwrap(), 0.0);
        // Frozen high-precision evaluation of the closed form.
        assert!((kl_bernoulli(0.06, 0.05).unwrap() - 9.921106369e-4).abs() < 1e-12);
        assert!((kl_bernoulli(0.0, 0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(kl_bernoulli(0.5, 0.0).is_err());
        assert!(kl_bernoulli(0.5, 1.0).is_err());
        assert!(kl_bernoulli(-0.1, 0.5).is_err());
        assert!(kl_bernoulli(1.1, 0.5).is_err());
    }

    #[test]
    fn kl_block_null_is_zero() {
        for p in &PROFILES {
            assert_eq!(kl_block(0.05, 0.0, p, 100).unwrap(), 0.0);
        }
    }

    #[test]
    fn quadratic_approximation_is_tight_at_small_amplitude() {
        for p in &PROFILES {
            let exact = kl_block(0.05, 0.01, p, 1000).unwrap();
            let quad = kl_quadratic_approx(0.05, 0.01, p, 1000).unwrap();
            let ratio = (exact - quad).abs() / exact;
            assert!(ratio < 0.05, "{}: relative gap {ratio}", p.label());
        }
    }

    #[test]
    fn kl_is_quadratic_in_amplitude() {
        for p in &PROFILES {
            let lo = kl_block(0.1, 0.001, p, 500).unwrap();
            let hi = kl_block(0.1, 0.002, p, 500).unwrap();
            let ratio = hi / lo;
            assert!((ratio - 4.0).abs() < 0.08, "{}: ratio {ratio}", p.label());
        }
    }

    #[test]
    fn quadratic_normalization_matches_energy() {
        // kl_quadratic * 2 sigma0^2 / (n delta^2) recovers (1/n) sum g^2,
        // which must approach the profile's squared L2 norm.
        let e0 = 0.05;
        let delta = 0.01;
        let n = 1000;
        let scale = 2.0 * e0 * (1.0 - e0) / (n as f64 * delta * delta);
        let lin = kl_quadratic_approx(e0, delta, &DriftProfile::Linear, n).unwrap() * scale;
        assert!((lin - 1.0 / 3.0).abs() < 1e-3, "linear mean energy {lin}");
        let sin = kl_quadratic_approx(e0, delta, &DriftProfile::Sinusoidal, n).unwrap() * scale;
        assert!((sin - 0.5).abs() < 1e-9, "sinusoidal mean energy {sin}");
        let step = kl_quadratic_approx(e0, delta, &DriftProfile::Step, n).unwrap() * scale;
        assert!((step - 1.0).abs() < 1e-12, "step mean energy {step}");
    }

    #[test]
    fn riemann_deviation_shrinks_like_one_over_n() {
        for p in [DriftProfile::Linear, DriftProfile::Sinusoidal] {
            let l2 = match p {
                DriftProfile::Linear => 1.0 / 3.0,
                _ => 0.5,
            };
            for n in [50usize, 100, 200, 400, 800, 1600] {
                let scale = 2.0 * 0.25 / (n as f64 * 1e-4);
                let mean_sq = kl_quadratic_approx(0.5, 0.01, &p, n).unwrap() * scale;
                let dev = (mean_sq - l2).abs();
                assert!(
                    n as f64 * dev <= 1.0,
                    "{}: n * deviation = {} at n = {n}",
                    p.label(),
                    n as f64 * dev
                );
            }
        }
    }

    #[test]
    fn pinsker_bound_arithmetic() {
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert!((pinsker_tv_bound(0.02).unwrap() - 0.1).abs() < 1e-15);
        assert!(pinsker_tv_bound(-1e-9).is_err());
    }

    #[test]
    fn normal_quantile_reference_values() {
        assert!(normal_quantile(0.5).unwrap().abs() < 1e-9);
        assert!((normal_quantile(0.8).unwrap() - 0.841621233573).abs() < 1e-8);
        assert!((normal_quantile(0.975).unwrap() - 1.959963984540054).abs() < 1e-8);
        // Deep-tail branch.
        assert!((normal_quantile(0.001).unwrap() + 3.090232306167814).abs() < 1e-8);
        for p in [0.01, 0.2, 0.4, 0.9] {
            let z = normal_quantile(p).unwrap();
            let z_mirror = normal_quantile(1.0 - p).unwrap();
            assert!((z + z_mirror).abs() < 2e-9, "asymmetry at p = {p}");
        }
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
    }

    #[test]
    fn required_delta_reference_value() {
        // sigma0 (q_.05 + z_.8) / (0.5 sqrt(4000)), frozen to 10 digits.
        let d = required_delta(4000, 0.05, 0.05, 0.2, 0.5).unwrap();
        assert!((d - 0.01516052298).abs() < 1e-7, "got {d}");
    }

    #[test]
    fn required_delta_scales_exactly_with_sqrt_n() {
        let d1 = required_delta(500, 0.1, 0.05, 0.2, 0.25).unwrap();
        let d4 = required_delta(2000, 0.1, 0.05, 0.2, 0.25).unwrap();
        assert!((d4 / d1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn required_delta_is_monotone_in_signal_constant() {
        let weak = required_delta(1000, 0.1, 0.05, 0.2, 0.25).unwrap();
        let strong = required_delta(1000, 0.1, 0.05, 0.2, 0.5).unwrap();
        assert!(strong < weak);
        assert!(required_delta(1000, 0.1, 0.05, 0.2, 0.0).is_err());
    }

    #[test]
    fn theory_bound_invariants() {
        let b = theory_bound(0.05, 0.01, &DriftProfile::Step, 500, 0.05, 0.2).unwrap();
        assert!(b.kl_exact >= 0.0);
        assert!((b.tv_bound - (b.kl_exact / 2.0).sqrt()).abs() < 1e-15);
        assert!(b.c_alpha_beta > 0.0);
        assert_eq!(b.a_star, 0.5);
    }

    #[test]
    fn enumeration_two_trial_law_by_hand() {
        // n = 2, e0 = 0.3. Mixed outcomes give |D_1| = 1 so
        // t = 1 / sqrt(2 * 1 * 1); uniform outcomes are degenerate.
        let law = exact_enumeration(2, 0.3, 0.0, &DriftProfile::Linear, 0.5).unwrap();
        assert_eq!(law.atoms.len(), 2);
        assert_eq!(law.atoms[0].t, 0.0);
        assert!((law.atoms[0].p_null - 0.58).abs() < 1e-15);
        let t_mixed = 1.0 / 2.0f64.sqrt();
        assert_eq!(law.atoms[1].t.to_bits(), t_mixed.to_bits());
        assert!((law.atoms[1].p_null - 0.42).abs() < 1e-15);
        assert!((law.size - 0.42).abs() < 1e-15);
        assert!(law.tv_distance.abs() < 1e-15);
        assert!(law.kl_divergence.abs() < 1e-14);
    }

    #[test]
    fn enumeration_null_alt_coincide_at_zero_amplitude() {
        let law = exact_enumeration(10, 0.2, 0.0, &DriftProfile::Step, 1.0).unwrap();
        for a in &law.atoms {
            assert_eq!(a.p_null.to_bits(), a.p_alt.to_bits());
        }
        assert!((law.total_null - 1.0).abs() < 1e-12);
        assert!((law.total_alt - 1.0).abs() < 1e-12);
        assert_eq!(law.size.to_bits(), law.power.to_bits());
        assert_eq!(law.tv_distance, 0.0, "identical laws have exactly zero TV");
        assert_eq!(law.kl_divergence, 0.0, "identical laws have exactly zero KL");
    }

    #[test]
    fn enumeration_totals_and_tv_under_drift() {
        let law = exact_enumeration(12, 0.3, 0.2, &DriftProfile::Step, 1.0).unwrap();
        assert!((law.total_null - 1.0).abs() < 1e-12);
        assert!((law.total_alt - 1.0).abs() < 1e-12);
        assert!(law.tv_distance > 0.0);
        let pinsker = pinsker_tv_bound(kl_block(0.3, 0.2, &DriftProfile::Step, 12).unwrap())
            .unwrap();
        assert!(
            law.tv_distance <= pinsker + 1e-12,
            "TV {} exceeds Pinsker {pinsker}",
            law.tv_distance
        );
    }

    #[test]
    fn enumeration_respects_cost_guard() {
        assert!(matches!(
            exact_enumeration(21, 0.3, 0.0, &DriftProfile::Linear, 1.0),
            Err(Error::Refused(_))
        ));
        assert!(exact_enumeration(0, 0.3, 0.0, &DriftProfile::Linear, 1.0).is_err());
    }

    #[test]
    fn joint_kl_factorizes_over_trials() {
        for n in [8usize, 12, 14] {
            for p in &PROFILES {
                let law = exact_enumeration(n, 0.3, 0.15, p, 1.0).unwrap();
                let blockwise = kl_block(0.3, 0.15, p, n).unwrap();
                assert!(
                    (law.kl_divergence - blockwise).abs() < 1e-10,
                    "{} n = {n}: joint {} vs blockwise {}",
                    p.label(),
                    law.kl_divergence,
                    blockwise
                );
            }
        }
    }

    #[test]
    fn exact_size_threshold_two_trial_cases() {
        // Null atoms at n = 2, e0 = 0.3: P(T = 0) = 0.58, P(T = 0.7071) = 0.42.
        let (tau, size) = exact_size_threshold(2, 0.3, 0.45).unwrap();
        assert_eq!(tau, 0.0);
        assert!((size - 0.42).abs() < 1e-15);
        let (tau, size) = exact_size_threshold(2, 0.3, 0.05).unwrap();
        assert_eq!(tau.to_bits(), (1.0 / 2.0f64.sqrt()).to_bits());
        assert_eq!(size, 0.0);
    }

    #[test]
    fn exact_size_is_conservative() {
        for n in [8usize, 12, 16] {
            let (tau, size) = exact_size_threshold(n, 0.2, 0.05).unwrap();
            assert!(tau > 0.0);
            assert!(size <= 0.05, "size {size} at n = {n}");
            let law = exact_enumeration(n, 0.2, 0.0, &DriftProfile::Linear, tau).unwrap();
            assert!((law.size - size).abs() < 1e-14);
        }
    }

    #[test]
    fn trend_points_are_exact_and_deterministic() {
        let ns = [8usize, 12];
        let a = indistinguishability_trend(0.2, 0.05, 0.5, 0.75, &ns, &PROFILES).unwrap();
        let b = indistinguishability_trend(0.2, 0.05, 0.5, 0.75, &ns, &PROFILES).unwrap();
        assert_eq!(a, b);
        for pt in &a {
            assert!(pt.size <= 0.05);
            assert!(pt.tau > 0.0);
            assert!(pt.power_mixture >= pt.size, "mixture power below size");
            assert!((0.0..=1.0).contains(&pt.power_mixture));
        }
        assert!(indistinguishability_trend(0.2, 0.05, 0.5, 0.75, &[], &PROFILES).is_err());
    }
}
