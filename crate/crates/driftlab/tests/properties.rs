//! Randomized invariants: statements that must hold for every input,
//! not just the pinned configurations the acceptance gate checks.

use proptest::prelude::*;

use driftlab::calibration::bridge_sup_cdf;
use driftlab::cusum::{partial_sums_from_bits, statistic_from_bits};
use driftlab::experiment::csvio::fmt_sig6;
use driftlab::power::{amplitude_grid, delta_min_hat, DeltaMinStatus, GridSpec, PowerPoint};
use driftlab::profiles::{delta_max, DriftProfile};
use driftlab::rng::CounterRng;

fn canonical_profile() -> impl Strategy<Value = DriftProfile> {
    prop_oneof![
        Just(DriftProfile::Linear),
        Just(DriftProfile::Sinusoidal),
        Just(DriftProfile::Step),
    ]
}

proptest! {
    /// Complement and reversal leave the statistic bit-identical on any
    /// bit pattern, not only on blocks drawn from the model.
    #[test]
    fn statistic_symmetries_hold_on_arbitrary_bits(
        bits in prop::collection::vec(0u8..=1, 2..300),
    ) {
        let t = statistic_from_bits(&bits)?.t_stat;
        prop_assert!(t.is_finite() && t >= 0.0);
        let complement: Vec<u8> = bits.iter().map(|&b| 1 - b).collect();
        let reversed: Vec<u8> = bits.iter().rev().copied().collect();
        prop_assert_eq!(statistic_from_bits(&complement)?.t_stat.to_bits(), t.to_bits());
        prop_assert_eq!(statistic_from_bits(&reversed)?.t_stat.to_bits(), t.to_bits());
    }

    /// Centering at the within-block rate forces the final partial sum
    /// back to zero for every bit pattern.
    #[test]
    fn partial_sums_bridge_to_zero(
        bits in prop::collection::vec(0u8..=1, 2..300),
    ) {
        let sums = partial_sums_from_bits(&bits)?.sums;
        prop_assert!(sums.last().expect("nonempty").abs() <= 1e-9);
    }

    /// Six-significant-digit report formatting stays CSV-safe and parses
    /// back to within its own precision.
    #[test]
    fn sig6_round_trips(x in prop::num::f64::NORMAL) {
        let shown = fmt_sig6(x);
        prop_assert!(!shown.contains(',') && !shown.contains('\n') && !shown.contains('"'));
        let back: f64 = shown.parse().expect("reparse");
        prop_assert!(
            (back - x).abs() <= 1e-5 * x.abs(),
            "{} -> {} -> {}", x, shown, back
        );
    }

    /// Planned amplitude grids are strictly increasing, stay inside the
    /// admissible range, and flag clipping truthfully.
    #[test]
    fn amplitude_grids_are_sorted_and_admissible(
        n in 50usize..4000,
        e0 in 0.01f64..0.49,
        profile in canonical_profile(),
    ) {
        let plan = amplitude_grid(n, e0, &profile, 0.05, &GridSpec::default())?;
        let cap = delta_max(e0)?;
        if plan.infeasible {
            prop_assert!(plan.deltas.is_empty());
        } else {
            prop_assert!(!plan.deltas.is_empty());
            for w in plan.deltas.windows(2) {
                prop_assert!(w[1] > w[0]);
            }
            for &d in &plan.deltas {
                prop_assert!(d > 0.0 && d <= cap);
            }
            if plan.clipped {
                prop_assert_eq!(*plan.deltas.last().expect("nonempty"), cap);
            }
        }
    }

    /// Whatever shape a (valid) power curve takes, the crossing estimate
    /// is bracketed and the censoring labels are truthful.
    #[test]
    fn interpolation_brackets_the_crossing(
        raw in prop::collection::vec((1e-4f64..0.5, 0.0f64..1.0), 2..12),
        target in 0.05f64..0.95,
    ) {
        let mut pairs = raw;
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite"));
        pairs.dedup_by(|a, b| a.0 == b.0);
        prop_assume!(pairs.len() >= 2);
        let points: Vec<PowerPoint> = pairs
            .iter()
            .map(|&(delta, power)| PowerPoint {
                n: 100,
                e0: 0.1,
                profile: DriftProfile::Step,
                delta,
                power,
                se: 0.0,
                m1: 1,
                seed: 0,
            })
            .collect();
        let est = delta_min_hat(&points, target)?;
        match est.status {
            DeltaMinStatus::LeftCensored { delta_min } => {
                prop_assert!(points[0].power >= target);
                prop_assert_eq!(delta_min, points[0].delta);
            }
            DeltaMinStatus::Reached { delta_min, bracket_low, bracket_high } => {
                prop_assert!(bracket_low.1 < target && target <= bracket_high.1);
                prop_assert!(bracket_low.0 <= delta_min && delta_min <= bracket_high.0);
            }
            DeltaMinStatus::NotReached { max_power } => {
                prop_assert!(max_power < target);
                for p in &points {
                    prop_assert!(p.power < target);
                }
            }
        }
    }

    /// The limiting supremum law is a distribution function: bounded by
    /// [0, 1] and monotone up to the series truncation resolution.
    #[test]
    fn bridge_cdf_is_monotone(a in 0.0f64..4.0, b in 0.0f64..4.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let f_lo = bridge_sup_cdf(lo)?;
        let f_hi = bridge_sup_cdf(hi)?;
        prop_assert!((0.0..=1.0).contains(&f_lo) && (0.0..=1.0).contains(&f_hi));
        prop_assert!(f_hi >= f_lo - 4e-12);
    }

    /// Every draw is a pure function of (seed, replication, index) and
    /// lands in the half-open unit interval.
    #[test]
    fn counter_rng_draws_are_pure_and_in_range(
        seed in any::<u64>(),
        replication in any::<u64>(),
        index in any::<u64>(),
    ) {
        let u = CounterRng::new(seed, replication).uniform(index);
        prop_assert!((0.0..1.0).contains(&u));
        let again = CounterRng::new(seed, replication).uniform(index);
        prop_assert_eq!(u.to_bits(), again.to_bits());
    }
}
