//! Drift shapes and their cumulative signal geometry.
//!
//! A drift profile is a bounded shape function g on [0, 1] with zero mean,
//! used to perturb a baseline rate e0 into e(t) = e0 + delta * g(t). Zero
//! mean makes the perturbation invisible to the block average; everything
//! a detector can see lives in the running integral
//!
//! ```text
//! G(t) = integral of g over [0, t],
//! ```
//!
//! and the detectable signal size is A(g) = sup_t |G(t)|.
//!
//! Three canonical shapes are built in, with closed-form cumulatives:
//!
//! | shape      | g(t)             | G(t)                  | A(g)  |
//! |------------|------------------|-----------------------|-------|
//! | linear     | 2t - 1           | t^2 - t               | 1/4   |
//! | sinusoidal | sin(2 pi t)      | (1 - cos 2 pi t)/2 pi | 1/pi  |
//! | step       | -1 then +1       | -t then t - 1         | 1/2   |
//!
//! The step switches sign at t = 1/2 and takes the value +1 there. Custom
//! profiles are piecewise-linear interpolants of caller-supplied samples on
//! a uniform grid and are validated for zero mean and unit sup bound at
//! construction.

use crate::error::{Error, Result};

/// Default Lipschitz budget for admissibility checks. The sinusoid is the
/// steepest canonical shape, with |g'| <= 2 pi.
pub const DEFAULT_LIPSCHITZ_BOUND: f64 = std::f64::consts::TAU;

/// Default lower bound on the L2 norm of a profile. All canonical shapes
/// clear it: the linear profile has the smallest norm, 1/sqrt(3).
pub const DEFAULT_ENERGY_FLOOR: f64 = 0.5;

/// Grid resolution for numeric admissibility estimates.
const ADMISSIBILITY_GRID: usize = 10_000;

/// Grid resolution for the custom-profile signal constant lower bound.
const SIGNAL_GRID: usize = 100_000;

/// Tolerance for the zero-mean construction invariant.
const MEAN_ZERO_TOL: f64 = 1e-9;

/// Slack applied to the unit sup-norm construction invariant.
const SUP_NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DriftProfile {
    Linear,
    Sinusoidal,
    Step,
    /// Piecewise-linear interpolant of `samples` over a uniform grid on
    /// [0, 1], including both endpoints.
    Custom { label: String, samples: Vec<f64> },
}

impl DriftProfile {
    /// Look up a canonical profile by its external name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(DriftProfile::Linear),
            "sinusoidal" => Ok(DriftProfile::Sinusoidal),
            "step" => Ok(DriftProfile::Step),
            other => Err(Error::Input(format!(
                "unknown profile {other:?}; expected linear, sinusoidal, or step"
            ))),
        }
    }

    /// Build a custom profile from samples on a uniform grid over [0, 1].
    ///
    /// Requires at least two samples, finite values, |g| <= 1 up to
    /// floating-point slack, and numerically zero mean.
    pub fn custom(label: impl Into<String>, samples: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if samples.len() < 2 {
            return Err(Error::Admissibility(format!(
                "custom profile {label:?} needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::Admissibility(format!(
                "custom profile {label:?} has non-finite sample {bad}"
            )));
        }
        let sup = samples.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if sup > 1.0 + SUP_NORM_SLACK {
            return Err(Error::Admissibility(format!(
                "custom profile {label:?} exceeds unit bound: sup |g| = {sup}"
            )));
        }
        let profile = DriftProfile::Custom { label, samples };
        let mean = adaptive_simpson(&|t| profile.eval_unchecked(t), 0.0, 1.0, 1e-12);
        if mean.abs() > MEAN_ZERO_TOL {
            let label = profile.label().to_owned();
            return Err(Error::Admissibility(format!(
                "custom profile {label:?} is not mean-zero: integral = {mean:e}"
            )));
        }
        Ok(profile)
    }

    pub fn label(&self) -> &str {
        match self {
            DriftProfile::Linear => "linear",
            DriftProfile::Sinusoidal => "sinusoidal",
            DriftProfile::Step => "step",
            DriftProfile::Custom { label, .. } => label,
        }
    }

    fn eval_unchecked(&self, t: f64) -> f64 {
        match self {
            DriftProfile::Linear => 2.0 * t - 1.0,
            DriftProfile::Sinusoidal => (std::f64::consts::TAU * t).sin(),
            DriftProfile::Step => {
                if t < 0.5 {
                    -1.0
                } else {
                    1.0
                }
            }
            DriftProfile::Custom { samples, .. } => {
                let m = samples.len() - 1;
                let x = t * m as f64;
                let j = (x.floor() as usize).min(m - 1);
                let frac = x - j as f64;
                samples[j] + frac * (samples[j + 1] - samples[j])
            }
        }
    }

    /// Evaluate g(t). Errors outside [0, 1].
    pub fn eval(&self, t: f64) -> Result<f64> {
        check_unit_time(t)?;
        Ok(self.eval_unchecked(t))
    }

    /// Evaluate the running integral G(t). Closed form for canonical
    /// shapes, adaptive quadrature for custom ones.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_unit_time(t)?;
        Ok(match self {
            DriftProfile::Linear => t * t - t,
            DriftProfile::Sinusoidal => {
                (1.0 - (std::f64::consts::TAU * t).cos()) / std::f64::consts::TAU
            }
            DriftProfile::Step => {
                if t < 0.5 {
                    -t
                } else {
                    t - 1.0
                }
            }
            DriftProfile::Custom { .. } => {
                adaptive_simpson(&|u| self.eval_unchecked(u), 0.0, t, 1e-12)
            }
        })
    }

    /// The signal constant A(g) = sup over [0, 1] of |G(t)|.
    ///
    /// Exact for canonical shapes. For custom shapes this is a grid lower
    /// bound; see [`DriftProfile::signal_constant_estimate`] for the grid
    /// provenance.
    pub fn signal_constant(&self) -> f64 {
        self.signal_constant_estimate().value
    }

    /// Signal constant together with how it was obtained.
    pub fn signal_constant_estimate(&self) -> SignalConstantEstimate {
        match self {
            DriftProfile::Linear => SignalConstantEstimate::exact(0.25),
            DriftProfile::Sinusoidal => {
                SignalConstantEstimate::exact(std::f64::consts::FRAC_1_PI)
            }
            DriftProfile::Step => SignalConstantEstimate::exact(0.5),
            DriftProfile::Custom { samples, .. } => {
                // Trapezoid accumulation of G on a fine grid; the reported
                // value is a lower bound on the true supremum.
                let h = 1.0 / SIGNAL_GRID as f64;
                let mut g_prev = self.eval_unchecked(0.0);
                let mut acc = 0.0f64;
                let mut sup = 0.0f64;
                let _ = samples;
                for j in 1..=SIGNAL_GRID {
                    let t = j as f64 * h;
                    let g = self.eval_unchecked(t);
                    acc += 0.5 * h * (g_prev + g);
                    g_prev = g;
                    sup = sup.max(acc.abs());
                }
                SignalConstantEstimate {
                    value: sup,
                    exact: false,
                    grid_points: Some(SIGNAL_GRID),
                }
            }
        }
    }

    /// Numeric admissibility report against a Lipschitz budget `lipschitz`
    /// and an energy floor `energy` (lower bound on the L2 norm).
    ///
    /// Estimates use a uniform grid of `ADMISSIBILITY_GRID` cells. The
    /// canonical step is discontinuous, so its Lipschitz entry is infinite
    /// and explicitly exempted rather than silently passed or failed.
    pub fn check_admissible(&self, lipschitz: f64, energy: f64) -> AdmissibilityReport {
        let m = ADMISSIBILITY_GRID;
        let h = 1.0 / m as f64;
        let mut mean = 0.0f64;
        let mut l2_sq = 0.0f64;
        let mut sup = 0.0f64;
        let mut max_slope = 0.0f64;
        let mut prev = self.eval_unchecked(0.0);
        sup = sup.max(prev.abs());
        for j in 1..=m {
            let g = self.eval_unchecked(j as f64 * h);
            // Midpoint rule for the mean: unlike the trapezoid it has no
            // O(h) bias at a jump sitting on a cell boundary, so the step
            // shape integrates to zero exactly. Trapezoid for the energy;
            // forward differences for the slope estimate.
            mean += h * self.eval_unchecked((j as f64 - 0.5) * h);
            l2_sq += 0.5 * h * (prev * prev + g * g);
            sup = sup.max(g.abs());
            max_slope = max_slope.max((g - prev).abs() / h);
            prev = g;
        }
        let lipschitz_exempt = matches!(self, DriftProfile::Step);
        let lipschitz_est = if lipschitz_exempt { f64::INFINITY } else { max_slope };
        let tol = 1e-9;
        AdmissibilityReport {
            mean_abs: mean.abs(),
            sup_norm: sup,
            lipschitz_est,
            l2_norm: l2_sq.max(0.0).sqrt(),
            lipschitz_exempt,
            passes_mean_zero: mean.abs() <= MEAN_ZERO_TOL,
            passes_sup_norm: sup <= 1.0 + SUP_NORM_SLACK,
            passes_lipschitz: lipschitz_exempt
                || lipschitz_est <= lipschitz + tol * lipschitz.max(1.0),
            passes_energy: l2_sq.max(0.0).sqrt() + tol >= energy,
        }
    }
}

/// How a signal constant was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalConstantEstimate {
    pub value: f64,
    /// True when the value is a closed form rather than a grid scan.
    pub exact: bool,
    /// Grid resolution when `exact` is false.
    pub grid_points: Option<usize>,
}

impl SignalConstantEstimate {
    fn exact(value: f64) -> Self {
        SignalConstantEstimate { value, exact: true, grid_points: None }
    }
}

/// Numeric constraint report for one profile. The step profile carries
/// `lipschitz_exempt = true`: its jump makes the Lipschitz clause
/// inapplicable, and the exemption is recorded instead of hidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub mean_abs: f64,
    pub sup_norm: f64,
    pub lipschitz_est: f64,
    pub l2_norm: f64,
    pub lipschitz_exempt: bool,
    pub passes_mean_zero: bool,
    pub passes_sup_norm: bool,
    pub passes_lipschitz: bool,
    pub passes_energy: bool,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.passes_mean_zero
            && self.passes_sup_norm
            && self.passes_lipschitz
            && self.passes_energy
    }
}

/// Largest drift amplitude keeping e0 + delta * g(t) inside [0, 1] for
/// every unit-bounded profile: min(e0, 1 - e0).
pub fn delta_max(e0: f64) -> Result<f64> {
    if !(e0 > 0.0 && e0 < 1.0) {
        return Err(Error::Domain(format!(
            "delta_max requires 0 < e0 < 1, got {e0}"
        )));
    }
    Ok(e0.min(1.0 - e0))
}

fn check_unit_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quadrature

/// Adaptive Simpson integration of `f` over [a, b].
///
/// Splits at midpoints until the two-panel refinement agrees within the
/// local tolerance. Converges on the canonical step as well: each split
/// isolates the jump in an interval of vanishing length.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson_panel(a, b, fa, fm, fb);
    simpson_recurse(f, a, b, fa, fm, fb, whole, tol, 60)
}

fn simpson_panel(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_panel(a, m, fa, flm, fm);
    let right = simpson_panel(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> [DriftProfile; 3] {
        [DriftProfile::Linear, DriftProfile::Sinusoidal, DriftProfile::Step]
    }

    #[test]
    fn eval_matches_closed_forms_at_reference_points() {
        assert_eq!(DriftProfile::Linear.eval(0.0).unwrap(), -1.0);
        assert_eq!(DriftProfile::Linear.eval(1.0).unwrap(), 1.0);
        assert!((DriftProfile::Sinusoidal.eval(0.25).unwrap() - 1.0).abs() < 1e-15);
        // The step is right-closed at the switch point.
        assert_eq!(DriftProfile::Step.eval(0.5).unwrap(), 1.0);
        assert_eq!(DriftProfile::Step.eval(0.49999999).unwrap(), -1.0);
    }

    #[test]
    fn eval_rejects_times_outside_unit_interval() {
        assert!(DriftProfile::Linear.eval(-0.01).is_err());
        assert!(DriftProfile::Linear.eval(1.01).is_err());
        assert!(DriftProfile::Step.cumulative(2.0).is_err());
    }

    #[test]
    fn canonical_profiles_are_numerically_mean_zero() {
        for p in canonical() {
            let mean = adaptive_simpson(&|t| p.eval(t).unwrap(), 0.0, 1.0, 1e-12);
            assert!(mean.abs() < 1e-9, "{}: mean = {mean:e}", p.label());
        }
    }

    #[test]
    fn cumulative_closed_forms() {
        let s = DriftProfile::Sinusoidal;
        assert!((s.cumulative(0.5).unwrap() - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        let l = DriftProfile::Linear;
        assert!((l.cumulative(0.5).unwrap() + 0.25).abs() < 1e-15);
        let st = DriftProfile::Step;
        assert!((st.cumulative(0.5).unwrap() + 0.5).abs() < 1e-15);
        // G(1) = 0 restates the zero-mean constraint.
        for p in canonical() {
            assert!(p.cumulative(1.0).unwrap().abs() < 1e-12, "{}", p.label());
        }
    }

    #[test]
    fn cumulative_matches_quadrature_on_a_grid() {
        for p in canonical() {
            for j in 0..=40 {
                let t = j as f64 / 40.0;
                let q = adaptive_simpson(&|u| p.eval_unchecked(u), 0.0, t, 1e-12);
                let c = p.cumulative(t).unwrap();
                assert!((q - c).abs() < 1e-9, "{} at t={t}: {q} vs {c}", p.label());
            }
        }
    }

    #[test]
    fn signal_constants_match_suprema() {
        assert_eq!(DriftProfile::Linear.signal_constant(), 0.25);
        assert!(
            (DriftProfile::Sinusoidal.signal_constant() - std::f64::consts::FRAC_1_PI).abs()
                < 1e-15
        );
        assert_eq!(DriftProfile::Step.signal_constant(), 0.5);
        // Grid scan of each canonical cumulative agrees with the constant.
        for p in canonical() {
            let mut sup = 0.0f64;
            for j in 0..=200_000 {
                let t = j as f64 / 200_000.0;
                sup = sup.max(p.cumulative(t).unwrap().abs());
            }
            assert!(
                (sup - p.signal_constant()).abs() < 1e-6,
                "{}: sup = {sup}",
                p.label()
            );
        }
    }

    #[test]
    fn custom_signal_constant_is_grid_lower_bound() {
        // A custom copy of the linear shape on a fine sample grid.
        let samples: Vec<f64> = (0..=2000).map(|j| 2.0 * (j as f64 / 2000.0) - 1.0).collect();
        let p = DriftProfile::custom("linear-copy", samples).unwrap();
        let est = p.signal_constant_estimate();
        assert!(!est.exact);
        assert_eq!(est.grid_points, Some(SIGNAL_GRID));
        assert!(est.value <= 0.25 + 1e-9);
        assert!((est.value - 0.25).abs() < 1e-4, "value = {}", est.value);
    }

    #[test]
    fn signal_constant_is_sign_flip_invariant() {
        let m = 1000;
        let up: Vec<f64> = (0..=m).map(|j| (std::f64::consts::TAU * j as f64 / m as f64).sin()).collect();
        let down: Vec<f64> = up.iter().map(|x| -x).collect();
        let a = DriftProfile::custom("sin-up", up).unwrap().signal_constant();
        let b = DriftProfile::custom("sin-down", down).unwrap().signal_constant();
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn custom_rejects_bad_inputs() {
        assert!(DriftProfile::custom("short", vec![0.0]).is_err());
        assert!(DriftProfile::custom("big", vec![-1.5, 1.5]).is_err());
        assert!(DriftProfile::custom("nan", vec![0.0, f64::NAN, 0.0]).is_err());
        // Constant +1 has mean 1, far from zero.
        assert!(DriftProfile::custom("biased", vec![1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn admissibility_default_budget_passes_canonical_shapes() {
        for p in canonical() {
            let r = p.check_admissible(DEFAULT_LIPSCHITZ_BOUND, DEFAULT_ENERGY_FLOOR);
            assert!(r.admissible(), "{}: {r:?}", p.label());
        }
    }

    #[test]
    fn admissibility_report_values() {
        let lin = DriftProfile::Linear.check_admissible(2.0, 0.5);
        assert!(lin.admissible());
        assert!((lin.lipschitz_est - 2.0).abs() < 1e-9);
        assert!((lin.l2_norm - 1.0 / 3.0f64.sqrt()).abs() < 1e-6);

        let sin = DriftProfile::Sinusoidal.check_admissible(2.0, 0.5);
        assert!(!sin.passes_lipschitz, "sinusoid is steeper than 2");
        assert!((sin.l2_norm - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);

        let step = DriftProfile::Step.check_admissible(10.0, 0.5);
        assert!(step.lipschitz_exempt);
        assert!(step.lipschitz_est.is_infinite());
        assert!(step.admissible());
        assert!((step.l2_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn energy_floor_is_enforced() {
        let r = DriftProfile::Linear.check_admissible(DEFAULT_LIPSCHITZ_BOUND, 0.9);
        assert!(!r.passes_energy);
        assert!(!r.admissible());
    }

    #[test]
    fn delta_max_values_and_domain() {
        assert_eq!(delta_max(0.05).unwrap(), 0.05);
        assert_eq!(delta_max(0.5).unwrap(), 0.5);
        assert!((delta_max(0.9).unwrap() - 0.1).abs() < 1e-15);
        assert!(delta_max(0.0).is_err());
        assert!(delta_max(1.0).is_err());
        assert!(delta_max(-0.2).is_err());
    }

    #[test]
    fn from_name_roundtrip() {
        for name in ["linear", "sinusoidal", "step"] {
            assert_eq!(DriftProfile::from_name(name).unwrap().label(), name);
        }
        assert!(DriftProfile::from_name("ramp").is_err());
    }

    #[test]
    fn simpson_integrates_smooth_and_jump_functions() {
        let q = adaptive_simpson(&|t: f64| t * t, 0.0, 1.0, 1e-12);
        assert!((q - 1.0 / 3.0).abs() < 1e-12);
        let jump = adaptive_simpson(
            &|t: f64| if t < 0.5 { -1.0 } else { 1.0 },
            0.0,
            1.0,
            1e-12,
        );
        assert!(jump.abs() < 1e-9, "jump integral = {jump:e}");
    }
}
