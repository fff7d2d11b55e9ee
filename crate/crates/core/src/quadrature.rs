//! Scalar integrals of the ground state: radial moments, the interaction
//! constant `B1 = ∫ U^p e^{-y_1}`, and two-center integrals `∫ U^p(z) U(z - d e_1)`.
//!
//! Everything reduces to nested adaptive Gauss–Kronrod in one or two radial
//! variables. Factors like `e^{s}` that would overflow are folded into the
//! logarithm of `U^p`.

use crate::error::{Error, Result};
use crate::ground_state::{sphere_area, GroundStateProfile};
use crate::integrate::{adaptive_with_breaks, Estimate, Tolerance};

/// Relative tolerance for one-dimensional radial integrals.
const RADIAL_TOL: f64 = 1e-12;
/// Integrals stop this far past the match radius; the integrands are below `e^{-50}` there.
const TAIL_SPAN: f64 = 50.0;

/// `A1 = a ∫U²`, `A2 = (1 - 2/(p+1)) ∫U^{p+1}`, `B1 = ∫U^p e^{-y_1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionConstants {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    /// Largest relative error estimate among the three integrals.
    pub error_estimate: f64,
}

fn radial_breaks(profile: &GroundStateProfile) -> Vec<f64> {
    let rm = profile.match_radius();
    let mut b = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0];
    b.retain(|&x| x < rm);
    b.push(rm);
    b.push(rm + 10.0);
    b.push(rm + TAIL_SPAN);
    b
}

fn radial_tolerance() -> Tolerance {
    Tolerance::relative(RADIAL_TOL).with_abs(1e-300)
}

/// `∫_{R^N} U^q = |S^{N-1}| ∫_0^∞ U(s)^q s^{N-1} ds`.
pub fn radial_moment(profile: &GroundStateProfile, q: f64) -> Estimate {
    let n = profile.dimension();
    let area = sphere_area(n - 1);
    let mut f = |s: f64| {
        if s == 0.0 && n > 1 {
            return 0.0;
        }
        profile.value(s).powf(q) * s.powi(n as i32 - 1)
    };
    let est = adaptive_with_breaks(&mut f, &radial_breaks(profile), radial_tolerance());
    Estimate {
        value: area * est.value,
        error: area * est.error,
        intervals: est.intervals,
    }
}

/// `∫_{R^N} |∇U|² = |S^{N-1}| ∫_0^∞ U'(s)² s^{N-1} ds`.
pub fn gradient_moment(profile: &GroundStateProfile) -> Estimate {
    let n = profile.dimension();
    let area = sphere_area(n - 1);
    let mut f = |s: f64| {
        let du = profile.derivative(s);
        du * du * s.powi(n as i32 - 1)
    };
    let est = adaptive_with_breaks(&mut f, &radial_breaks(profile), radial_tolerance());
    Estimate {
        value: area * est.value,
        error: area * est.error,
        intervals: est.intervals,
    }
}

/// `e^{-s} ∫_0^π e^{-s cos θ} sin^{N-2} θ dθ`, written with `θ ↦ π - θ` so the
/// integrand `e^{-s(1 - cos θ)} sin^{N-2} θ` is bounded by one.
fn scaled_sphere_integral(dimension: usize, s: f64) -> f64 {
    let k = dimension as i32 - 2;
    let mut f = |theta: f64| (-s * (1.0 - theta.cos())).exp() * theta.sin().powi(k);
    let width = if s > 0.0 { (1.0 / s.sqrt()).min(1.0) } else { 1.0 };
    let mut breaks = vec![0.0];
    for m in [1.0, 4.0, 12.0] {
        let x = m * width;
        if x < std::f64::consts::PI {
            breaks.push(x);
        }
    }
    breaks.push(std::f64::consts::PI);
    adaptive_with_breaks(&mut f, &breaks, Tolerance::relative(1e-13).with_abs(1e-300)).value
}

/// Average of `e^{-s y_1}` over the unit sphere `S^{N-1}`: one at `s = 0`,
/// `sinh(s)/s` for `N = 3`, `cosh(s)` for `N = 1`.
pub fn sphere_average_exponential(dimension: usize, s: f64) -> f64 {
    if dimension == 1 {
        return s.cosh();
    }
    sphere_area(dimension - 2) * scaled_sphere_integral(dimension, s) * s.exp() / sphere_area(dimension - 1)
}

/// `B1 = ∫ U^p e^{-y_1}` by radial quadrature of the sphere average.
/// `N = 1` uses `2∫_0^∞ U^p cosh(s) ds`.
pub fn constant_b1(profile: &GroundStateProfile) -> Estimate {
    let n = profile.dimension();
    let p = profile.exponent();
    if n == 1 {
        let mut f = |s: f64| (p * profile.value(s).ln() + s).exp() * (1.0 + (-2.0 * s).exp());
        adaptive_with_breaks(&mut f, &radial_breaks(profile), radial_tolerance())
    } else {
        let mut f = |s: f64| {
            if s == 0.0 && n > 1 {
                return 0.0;
            }
            let weight = scaled_sphere_integral(n, s);
            (p * profile.value(s).ln() + s).exp() * weight * s.powi(n as i32 - 1)
        };
        let est = adaptive_with_breaks(&mut f, &radial_breaks(profile), radial_tolerance());
        let area = sphere_area(n - 2);
        Estimate {
            value: area * est.value,
            error: area * est.error,
            intervals: est.intervals,
        }
    }
}

/// `B1` through the closed-form sphere average: `4π ∫ U^p s sinh(s) ds` for `N = 3`.
pub fn constant_b1_closed_form(profile: &GroundStateProfile) -> Result<Estimate> {
    if profile.dimension() != 3 {
        return Err(Error::InvalidParameter(
            "closed-form sphere average only for N = 3".into(),
        ));
    }
    let p = profile.exponent();
    let mut f = |s: f64| (p * profile.value(s).ln() + s).exp() * s * (-(-2.0 * s).exp_m1());
    let est = adaptive_with_breaks(&mut f, &radial_breaks(profile), radial_tolerance());
    Ok(Estimate {
        value: 2.0 * std::f64::consts::PI * est.value,
        error: 2.0 * std::f64::consts::PI * est.error,
        intervals: est.intervals,
    })
}

/// `A1`, `A2`, `B1` for potential strength `a`.
pub fn interaction_constants(profile: &GroundStateProfile, a: f64) -> InteractionConstants {
    let p = profile.exponent();
    let u2 = radial_moment(profile, 2.0);
    let up1 = radial_moment(profile, p + 1.0);
    let b1 = constant_b1(profile);
    let rel = |e: &Estimate| e.error / e.value.abs();
    InteractionConstants {
        a1: a * u2.value,
        a2: (1.0 - 2.0 / (p + 1.0)) * up1.value,
        b1: b1.value,
        error_estimate: rel(&u2).max(rel(&up1)).max(rel(&b1)),
    }
}

const PAIR_INNER_TOL: f64 = 1e-11;
const PAIR_OUTER_TOL: f64 = 1e-10;

fn pair_outer_breaks(d: f64, end: f64) -> Vec<f64> {
    let mut b = vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, d - 2.0, d, d + 2.0, d + 10.0, end];
    b.retain(|&x| (0.0..=end).contains(&x));
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// `∫_{R^N} U(z)^p U(z - d e_1) dz`.
///
/// `N = 3` uses bipolar coordinates `(s, t) = (|z|, |z - d e_1|)` with
/// `dz = 2π s t / d ds dt` on `|s - t| ≤ d ≤ s + t`. Other dimensions use
/// `(s, θ)` polar coordinates about the first center.
pub fn pair_interaction(profile: &GroundStateProfile, d: f64) -> Estimate {
    assert!(d >= 0.0, "separation must be non-negative");
    if d == 0.0 {
        return radial_moment(profile, profile.exponent() + 1.0);
    }
    match profile.dimension() {
        1 => pair_interaction_line(profile, d),
        3 => pair_interaction_bipolar(profile, d),
        _ => pair_interaction_polar(profile, d),
    }
}

fn pair_interaction_line(profile: &GroundStateProfile, d: f64) -> Estimate {
    let p = profile.exponent();
    let end = d + profile.match_radius() + TAIL_SPAN;
    let mut f = |z: f64| profile.value(z.abs()).powf(p) * profile.value((z - d).abs());
    let mut breaks = vec![-profile.match_radius() - TAIL_SPAN, -4.0, 0.0, d * 0.5, d, d + 4.0, end];
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    adaptive_with_breaks(&mut f, &breaks, Tolerance::relative(PAIR_OUTER_TOL).with_abs(1e-300))
}

/// Bipolar form for `N = 3`.
pub fn pair_interaction_bipolar(profile: &GroundStateProfile, d: f64) -> Estimate {
    let p = profile.exponent();
    let end = d + profile.match_radius() + TAIL_SPAN;
    let mut inner_error = 0.0f64;
    let mut outer = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let lo = (s - d).abs();
        let hi = (s + d).min(lo + 60.0);
        let mut g = |t: f64| profile.value(t) * t;
        let mut breaks = vec![lo];
        for w in [1.0, 4.0, 16.0] {
            if lo + w < hi {
                breaks.push(lo + w);
            }
        }
        breaks.push(hi);
        let inner = adaptive_with_breaks(&mut g, &breaks, Tolerance::relative(PAIR_INNER_TOL).with_abs(1e-300));
        let weight = profile.value(s).powf(p) * s;
        inner_error = inner_error.max(inner.error / inner.value.abs().max(1e-300));
        weight * inner.value
    };
    let est = adaptive_with_breaks(
        &mut outer,
        &pair_outer_breaks(d, end),
        Tolerance::relative(PAIR_OUTER_TOL).with_abs(1e-300),
    );
    let scale = 2.0 * std::f64::consts::PI / d;
    Estimate {
        value: scale * est.value,
        error: scale * est.error + scale * est.value.abs() * inner_error,
        intervals: est.intervals,
    }
}

/// Polar form `|S^{N-2}| ∫ U(s)^p s^{N-1} ∫_0^π U(|s ω - d e_1|) sin^{N-2}θ dθ ds`, `N ≥ 2`.
pub fn pair_interaction_polar(profile: &GroundStateProfile, d: f64) -> Estimate {
    let n = profile.dimension();
    assert!(n >= 2, "polar form needs N >= 2");
    let p = profile.exponent();
    let end = d + profile.match_radius() + TAIL_SPAN;
    let mut inner_error = 0.0f64;
    let mut outer = |s: f64| {
        if s == 0.0 {
            return 0.0;
        }
        let mut g = |theta: f64| {
            let t2 = (s - d) * (s - d) + 2.0 * s * d * (1.0 - theta.cos());
            profile.value(t2.max(0.0).sqrt()) * theta.sin().powi(n as i32 - 2)
        };
        // U(t) varies on the angular scale 1/sqrt(s d) near θ = 0.
        let width = (1.0 / (s * d).sqrt()).min(1.0);
        let mut breaks = vec![0.0];
        for m in [1.0, 4.0, 16.0] {
            if m * width < std::f64::consts::PI {
                breaks.push(m * width);
            }
        }
        breaks.push(std::f64::consts::PI);
        let inner = adaptive_with_breaks(&mut g, &breaks, Tolerance::relative(PAIR_INNER_TOL).with_abs(1e-300));
        inner_error = inner_error.max(inner.error / inner.value.abs().max(1e-300));
        profile.value(s).powf(p) * s.powi(n as i32 - 1) * inner.value
    };
    let est = adaptive_with_breaks(
        &mut outer,
        &pair_outer_breaks(d, end),
        Tolerance::relative(PAIR_OUTER_TOL).with_abs(1e-300),
    );
    let area = sphere_area(n - 2);
    Estimate {
        value: area * est.value,
        error: area * est.error + area * est.value.abs() * inner_error,
        intervals: est.intervals,
    }
}

/// `pair_interaction(d) / (B1 e^{-d})`.
pub fn pair_ratio(profile: &GroundStateProfile, b1: f64, d: f64) -> f64 {
    pair_interaction(profile, d).value / (b1 * (-d).exp())
}

/// Least-squares slope `σ` in `ln|ratio - limit| ≈ c - σ d`.
pub fn empirical_decay_rate(separations: &[f64], ratios: &[f64], limit: f64) -> f64 {
    let ys: Vec<f64> = ratios.iter().map(|r| (r - limit).abs().ln()).collect();
    let n = separations.len() as f64;
    let mx = separations.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in separations.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    -sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn profile(n: usize, p: f64) -> &'static GroundStateProfile {
        type Solved = Vec<(usize, u64, &'static GroundStateProfile)>;
        static CACHE: OnceLock<std::sync::Mutex<Solved>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap();
        if let Some(hit) = guard.iter().find(|e| e.0 == n && e.1 == p.to_bits()) {
            return hit.2;
        }
        let leaked: &'static GroundStateProfile = Box::leak(Box::new(solve_ground_state(n, p, 1e-10).unwrap()));
        guard.push((n, p.to_bits(), leaked));
        leaked
    }

    #[test]
    fn one_dimensional_moments() {
        let prof = profile(1, 3.0);
        // ∫ 2 sech² = 4, ∫ 4 sech⁴ = 16/3
        assert_relative_eq!(radial_moment(prof, 2.0).value, 4.0, max_relative = 1e-9);
        assert_relative_eq!(radial_moment(prof, 4.0).value, 16.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn one_dimensional_b1_closed_form() {
        // ∫ (√2 sech y)³ e^{-y} dy = 2√2 ∫ sech³ cosh = 2√2 ∫ sech² = 4√2
        let prof = profile(1, 3.0);
        assert_relative_eq!(constant_b1(prof).value, 4.0 * 2f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn nehari_and_pohozaev_identities() {
        for (n, p) in [(3usize, 2.0), (3, 3.0), (4, 2.0), (2, 3.0)] {
            let prof = profile(n, p);
            let grad = gradient_moment(prof).value;
            let mass = radial_moment(prof, 2.0).value;
            let pot = radial_moment(prof, p + 1.0).value;
            let nf = n as f64;
            assert_relative_eq!(grad + mass, pot, max_relative = 1e-6);
            assert_relative_eq!(
                (nf - 2.0) / 2.0 * grad + nf / 2.0 * mass,
                nf / (p + 1.0) * pot,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn sphere_average_limits() {
        for n in 2..=6 {
            assert_relative_eq!(sphere_average_exponential(n, 0.0), 1.0, max_relative = 1e-12);
        }
        for s in [0.3, 2.0, 9.0, 30.0] {
            assert_relative_eq!(sphere_average_exponential(3, s), s.sinh() / s, max_relative = 1e-11);
        }
    }

    #[test]
    fn b1_two_ways_agree_in_three_dimensions() {
        let prof = profile(3, 3.0);
        let generic = constant_b1(prof).value;
        let closed = constant_b1_closed_form(prof).unwrap().value;
        assert!(generic.is_finite() && generic > 0.0);
        assert_relative_eq!(generic, closed, max_relative = 1e-8);
    }

    #[test]
    fn constants_definitions() {
        let prof = profile(3, 3.0);
        let c = interaction_constants(prof, 0.0);
        assert_eq!(c.a1, 0.0);
        assert!(c.a2 > 0.0 && c.b1 > 0.0);
        let up1 = radial_moment(prof, 4.0).value;
        assert_eq!(c.a2 / up1, 1.0 - 2.0 / 4.0);
        let c1 = interaction_constants(prof, 1.5);
        assert_relative_eq!(c1.a1, 1.5 * radial_moment(prof, 2.0).value, max_relative = 1e-15);
    }

    #[test]
    fn coincident_centers_give_top_moment() {
        let prof = profile(3, 3.0);
        assert_eq!(pair_interaction(prof, 0.0).value, radial_moment(prof, 4.0).value);
        // tiny separation is continuous with d = 0
        assert_relative_eq!(
            pair_interaction(prof, 1e-4).value,
            radial_moment(prof, 4.0).value,
            max_relative = 1e-6
        );
    }

    #[test]
    fn one_dimensional_pair_closed_form() {
        // ∫ (√2 sech z)³ √2 sech(z - d) dz against brute-force trapezoid on a fine grid.
        let prof = profile(1, 3.0);
        for d in [0.5, 3.0, 8.0] {
            let h = 1e-3;
            let mut acc = 0.0;
            let mut z: f64 = -60.0;
            while z <= 60.0 + d {
                acc += 4.0 / z.cosh().powi(3) / (z - d).cosh();
                z += h;
            }
            assert_relative_eq!(pair_interaction(prof, d).value, acc * h, max_relative = 1e-8);
        }
    }

    #[test]
    fn bipolar_and_polar_agree() {
        let prof = profile(3, 3.0);
        for d in [0.7, 4.0, 10.0] {
            let a = pair_interaction_bipolar(prof, d).value;
            let b = pair_interaction_polar(prof, d).value;
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn pair_law_with_algebraic_prefactor() {
        // ∫U^p(z)U(z - d e_1) ~ B1 U(d): the ratio to B1 U(d) tends to one.
        let prof = profile(3, 3.0);
        let b1 = constant_b1(prof).value;
        let gaps: Vec<f64> = [6.0, 8.0, 10.0, 12.0, 16.0]
            .iter()
            .map(|&d| (pair_interaction(prof, d).value / (b1 * prof.value(d)) - 1.0).abs())
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] < 0.2, "{gaps:?}");
    }

    #[test]
    fn decay_rate_fit_recovers_slope() {
        let ds = [6.0, 8.0, 10.0, 12.0];
        let ratios: Vec<f64> = ds.iter().map(|d: &f64| 1.0 + 3.0 * (-0.7 * d).exp()).collect();
        assert_relative_eq!(empirical_decay_rate(&ds, &ratios, 1.0), 0.7, max_relative = 1e-10);
    }

    #[test]
    fn quadrature_is_deterministic() {
        let prof = profile(3, 3.0);
        let a = pair_interaction(prof, 7.3).value;
        let b = pair_interaction(prof, 7.3).value;
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(constant_b1(prof).value.to_bits(), constant_b1(prof).value.to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn pair_interaction_decreasing(d in 0.2f64..14.0, gap in 0.05f64..3.0) {
            let prof = profile(3, 3.0);
            let near = pair_interaction(prof, d).value;
            let far = pair_interaction(prof, d + gap).value;
            prop_assert!(far < near);
        }
    }
}
