//! The radial ground state of `-ΔU + U = U^p` in `R^N`.
//!
//! Construction:
//!
//! 1. Bisection on `U(0)`: a trajectory that reaches `u = 0` overshoots, one
//!    whose derivative turns non-negative undershoots.
//! 2. The bisected trajectory is only trustworthy while the unstable
//!    (outward-growing) mode stays below rounding level, so the profile is
//!    assembled from an outward solution on `[0, s_c]` and an inward solution
//!    started from the Bessel-type tail far out. `(U(0), C)` are polished by
//!    Newton's method so value and slope agree at `s_c`; sensitivities come
//!    from the variational equations.
//! 3. The tail constant is refitted by least squares on `[R_m - 2, R_m]` and
//!    the tail law serves every radius beyond `R_m`.
//!
//! A finished [`GroundStateProfile`] is immutable and `Sync`.

use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ode::{integrate_to, integrate_until, StepControl};

/// Grid and matching options for [`solve_ground_state_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Radius beyond which the tail law is served.
    pub match_radius: f64,
    /// Uniform grid spacing away from the origin.
    pub spacing: f64,
    /// First grid radius after the origin; the series start point.
    pub start_radius: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            match_radius: 25.0,
            spacing: 1e-3,
            start_radius: 1e-4,
        }
    }
}

/// Extra distance past `R_m` where the inward solution starts.
const INWARD_MARGIN: f64 = 5.0;
/// The outward/inward junction sits where `U` first drops below this fraction of `U(0)`.
const JUNCTION_FRACTION: f64 = 0.02;
/// Geometric growth of the grid spacing near the origin.
const ORIGIN_GROWTH: f64 = 1.25;
const MAX_TAIL_TERMS: usize = 10;
const NEWTON_STEP_TOL: f64 = 1e-12;
/// Points in the residual's finite-difference stencil.
const STENCIL: usize = 7;

/// Far-field law `e^{-s} s^{-(N-1)/2} (1 + a_1/s + a_2/s^2 + ...)`, the
/// asymptotic series of the modified Bessel function `K_{(N-2)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailLaw {
    dimension: usize,
    coefficients: Vec<f64>,
}

impl TailLaw {
    pub fn new(dimension: usize) -> Self {
        let nu = (dimension as f64 - 2.0) / 2.0;
        let four_nu2 = 4.0 * nu * nu;
        let mut coefficients = vec![1.0];
        let mut a = 1.0;
        for k in 1..MAX_TAIL_TERMS {
            let odd = (2 * k - 1) as f64;
            a *= (four_nu2 - odd * odd) / (k as f64 * 8.0);
            if a == 0.0 {
                break;
            }
            coefficients.push(a);
        }
        Self {
            dimension,
            coefficients,
        }
    }

    /// Coefficient of `1/s` in the correction factor: `(N-1)(N-3)/8`.
    pub fn first_correction(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }

    fn series(&self, s: f64) -> (f64, f64) {
        let inv = 1.0 / s;
        let mut value = 0.0;
        let mut deriv = 0.0;
        let mut pow = 1.0;
        for (k, a) in self.coefficients.iter().enumerate() {
            value += a * pow;
            deriv -= k as f64 * a * pow * inv;
            pow *= inv;
        }
        (value, deriv)
    }

    /// Shape `φ(s)` with unit constant.
    pub fn shape(&self, s: f64) -> f64 {
        let (series, _) = self.series(s);
        self.envelope(s) * series
    }

    /// `φ'(s)`.
    pub fn shape_derivative(&self, s: f64) -> f64 {
        let (series, dseries) = self.series(s);
        let half = (self.dimension as f64 - 1.0) / 2.0;
        self.envelope(s) * (dseries - series * (1.0 + half / s))
    }

    /// Leading envelope `e^{-s} s^{-(N-1)/2}`.
    pub fn envelope(&self, s: f64) -> f64 {
        let half = (self.dimension as f64 - 1.0) / 2.0;
        (-s - half * s.ln()).exp()
    }
}

/// Tabulated ground state with a matched far-field tail.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateProfile {
    dimension: usize,
    exponent: f64,
    tol: f64,
    radii: Vec<f64>,
    values: Vec<f64>,
    derivatives: Vec<f64>,
    second_derivatives: Vec<f64>,
    log_values: Vec<f64>,
    uniform_start: usize,
    uniform_spacing: f64,
    match_radius: f64,
    tail_constant: f64,
    shoot_value: f64,
    residual_norm: f64,
    junction_radius: f64,
    tail: TailLaw,
}

/// Largest admissible exponent, `(N+2)/(N-2)` for `N >= 3`.
pub fn critical_exponent(dimension: usize) -> f64 {
    if dimension <= 2 {
        f64::INFINITY
    } else {
        (dimension as f64 + 2.0) / (dimension as f64 - 2.0)
    }
}

fn check_parameters(dimension: usize, p: f64, tol: f64) -> Result<()> {
    if dimension == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
    }
    let bound = critical_exponent(dimension);
    if p >= bound {
        return Err(Error::Supercritical { dimension, p, bound });
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    Ok(())
}

#[inline]
fn signed_pow(u: f64, p: f64) -> f64 {
    u.abs().powf(p - 1.0) * u
}

/// `u''` from the radial equation.
#[inline]
fn second_derivative(dimension: usize, p: f64, s: f64, u: f64, du: f64) -> f64 {
    let drift = if s > 0.0 {
        (dimension as f64 - 1.0) / s * du
    } else {
        0.0
    };
    -drift + u - signed_pow(u, p)
}

/// Radial equation augmented with its linearization (`[u, u', v, v']`).
struct Augmented {
    dimension: f64,
    p: f64,
}

impl crate::ode::System<4> for Augmented {
    fn rhs(&self, s: f64, y: &[f64; 4]) -> [f64; 4] {
        let drift = (self.dimension - 1.0) / s;
        let upow = y[0].abs().powf(self.p - 1.0);
        [
            y[1],
            -drift * y[1] + y[0] - upow * y[0],
            y[3],
            -drift * y[3] + y[2] - self.p * upow * y[2],
        ]
    }
}

/// Series start `u = u0 + a s² + b s⁴` at `s0`, with its linearization in `u0`.
/// `a = f(u0)/(2N)`, `b = f'(u0) a/(4(N+2))` for `f(u) = u - u^p`.
fn series_start(dimension: usize, p: f64, u0: f64, s0: f64) -> [f64; 4] {
    let n = dimension as f64;
    let f = u0 - signed_pow(u0, p);
    let df = 1.0 - p * u0.abs().powf(p - 1.0);
    let d2f = -p * (p - 1.0) * u0.abs().powf(p - 2.0);
    let a = f / (2.0 * n);
    let b = df * a / (4.0 * (n + 2.0));
    let da = df / (2.0 * n);
    let db = (d2f * a + df * da) / (4.0 * (n + 2.0));
    let s2 = s0 * s0;
    [
        u0 + a * s2 + b * s2 * s2,
        2.0 * a * s0 + 4.0 * b * s2 * s0,
        1.0 + da * s2 + db * s2 * s2,
        2.0 * da * s0 + 4.0 * db * s2 * s0,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shot {
    /// `u` reached zero: `U(0)` too large.
    Crossing,
    /// `u'` turned non-negative with `u > 0`: `U(0)` too small.
    Rebound,
}

fn classify(dimension: usize, p: f64, u0: f64, s0: f64) -> Option<Shot> {
    let sys = Augmented {
        dimension: dimension as f64,
        p,
    };
    let ctl = StepControl {
        rtol: 1e-12,
        atol: 1e-300,
        max_step: 0.05,
    };
    let start = series_start(dimension, p, u0, s0);
    let mut outcome = None;
    let out = integrate_until(&sys, s0, start, 200.0, &ctl, |_, y| {
        if y[0] <= 0.0 {
            outcome = Some(Shot::Crossing);
            true
        } else if y[1] >= 0.0 {
            outcome = Some(Shot::Rebound);
            true
        } else {
            false
        }
    });
    if out.triggered {
        outcome
    } else {
        None
    }
}

/// Bracket `[lo, hi]` on `U(0)` with `lo` rebounding and `hi` crossing,
/// bisected until the floating-point interval collapses.
fn bisect_shoot(dimension: usize, p: f64, s0: f64) -> Result<(f64, f64)> {
    let mut lo = 1.0;
    let mut hi = 2.0;
    let mut expansions = 0;
    loop {
        match classify(dimension, p, hi, s0) {
            Some(Shot::Crossing) => break,
            Some(Shot::Rebound) => {
                lo = hi;
                hi *= 2.0;
                expansions += 1;
                if expansions > 60 {
                    return Err(Error::BracketFailure {
                        lo,
                        hi,
                        reason: "no crossing trajectory found while expanding the bracket".into(),
                    });
                }
            }
            None => {
                return Err(Error::BracketFailure {
                    lo,
                    hi,
                    reason: "trajectory neither crossed nor rebounded".into(),
                })
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match classify(dimension, p, mid, s0) {
            Some(Shot::Crossing) => hi = mid,
            Some(Shot::Rebound) => lo = mid,
            None => {
                return Err(Error::BracketFailure {
                    lo,
                    hi,
                    reason: format!("trajectory from U(0) = {mid} neither crossed nor rebounded"),
                })
            }
        }
    }
    Ok((lo, hi))
}

/// Grid: `0`, then geometric growth from `start_radius` up to the uniform
/// spacing, then uniform up to exactly `match_radius`.
fn build_grid(opts: &ProfileOptions) -> (Vec<f64>, usize, f64) {
    let mut radii = vec![0.0, opts.start_radius];
    let mut step = opts.start_radius;
    loop {
        step *= ORIGIN_GROWTH;
        if step >= opts.spacing {
            break;
        }
        let last = *radii.last().expect("grid non-empty");
        radii.push(last + step);
    }
    let uniform_start = radii.len() - 1;
    let s_u = radii[uniform_start];
    let intervals = ((opts.match_radius - s_u) / opts.spacing).ceil().max(1.0) as usize;
    let spacing = (opts.match_radius - s_u) / intervals as f64;
    for i in 1..=intervals {
        radii.push(if i == intervals {
            opts.match_radius
        } else {
            s_u + i as f64 * spacing
        });
    }
    (radii, uniform_start, spacing)
}

struct OutwardTrace {
    values: Vec<f64>,
    derivatives: Vec<f64>,
    /// `[u, u', ∂u/∂U0, ∂u'/∂U0]` at the junction.
    junction: [f64; 4],
}

fn integrate_outward(dimension: usize, p: f64, u0: f64, radii: &[f64], junction: usize) -> OutwardTrace {
    let sys = Augmented {
        dimension: dimension as f64,
        p,
    };
    let ctl = StepControl::default();
    let mut values = Vec::with_capacity(junction + 1);
    let mut derivatives = Vec::with_capacity(junction + 1);
    values.push(u0);
    derivatives.push(0.0);
    let mut y = series_start(dimension, p, u0, radii[1]);
    values.push(y[0]);
    derivatives.push(y[1]);
    let mut h = radii[2] - radii[1];
    for i in 2..=junction {
        y = integrate_to(&sys, radii[i - 1], y, radii[i], &mut h, &ctl);
        values.push(y[0]);
        derivatives.push(y[1]);
    }
    OutwardTrace {
        values,
        derivatives,
        junction: y,
    }
}

/// Outward trajectory from `u0` until it drops below `JUNCTION_FRACTION * u0`.
/// Returns the junction grid index.
fn find_junction(dimension: usize, p: f64, u0: f64, radii: &[f64], uniform_start: usize) -> Result<usize> {
    let sys = Augmented {
        dimension: dimension as f64,
        p,
    };
    let ctl = StepControl::default();
    let mut y = series_start(dimension, p, u0, radii[1]);
    let mut h = radii[2] - radii[1];
    for i in 2..radii.len() {
        y = integrate_to(&sys, radii[i - 1], y, radii[i], &mut h, &ctl);
        if y[0] <= 0.0 || y[1] >= 0.0 {
            break;
        }
        if y[0] <= JUNCTION_FRACTION * u0 && i > uniform_start + 4 {
            return Ok(i);
        }
    }
    Err(Error::BracketFailure {
        lo: u0,
        hi: u0,
        reason: "bisected trajectory left the ground state before decaying".into(),
    })
}

struct InwardTrace {
    /// Values at grid indices `junction..len`, in increasing radius order.
    values: Vec<f64>,
    derivatives: Vec<f64>,
    /// `[u, u', ∂u/∂C, ∂u'/∂C]` at the junction.
    junction: [f64; 4],
}

fn integrate_inward(
    dimension: usize,
    p: f64,
    tail: &TailLaw,
    constant: f64,
    radii: &[f64],
    junction: usize,
) -> InwardTrace {
    let sys = Augmented {
        dimension: dimension as f64,
        p,
    };
    let ctl = StepControl::default();
    let last = radii.len() - 1;
    let far = radii[last] + INWARD_MARGIN;
    let phi = tail.shape(far);
    let dphi = tail.shape_derivative(far);
    let mut y = [constant * phi, constant * dphi, phi, dphi];
    let mut h = 1e-2;
    y = integrate_to(&sys, far, y, radii[last], &mut h, &ctl);
    let count = last - junction + 1;
    let mut values = vec![0.0; count];
    let mut derivatives = vec![0.0; count];
    values[count - 1] = y[0];
    derivatives[count - 1] = y[1];
    for i in (junction..last).rev() {
        y = integrate_to(&sys, radii[i + 1], y, radii[i], &mut h, &ctl);
        values[i - junction] = y[0];
        derivatives[i - junction] = y[1];
    }
    InwardTrace {
        values,
        derivatives,
        junction: y,
    }
}

/// Solves for the ground state with default grid options.
pub fn solve_ground_state(dimension: usize, p: f64, tol: f64) -> Result<GroundStateProfile> {
    solve_ground_state_with(dimension, p, tol, &ProfileOptions::default())
}

pub fn solve_ground_state_with(
    dimension: usize,
    p: f64,
    tol: f64,
    opts: &ProfileOptions,
) -> Result<GroundStateProfile> {
    check_parameters(dimension, p, tol)?;
    if !(opts.spacing > 0.0) || !(opts.start_radius > 0.0) || opts.start_radius >= opts.spacing {
        return Err(Error::InvalidParameter("need 0 < start_radius < spacing".into()));
    }
    if opts.match_radius < 10.0 {
        return Err(Error::InvalidParameter(format!(
            "match radius {} too small for the tail law",
            opts.match_radius
        )));
    }
    let tail = TailLaw::new(dimension);
    let (radii, uniform_start, uniform_spacing) = build_grid(opts);
    let (lo, hi) = bisect_shoot(dimension, p, opts.start_radius)?;
    let junction = find_junction(dimension, p, lo, &radii, uniform_start)?;

    // Newton on (U(0), C): match u and u' at the junction.
    let mut u0 = lo;
    let probe = integrate_inward(dimension, p, &tail, 1.0, &radii, junction);
    let first = integrate_outward(dimension, p, u0, &radii, junction);
    let mut constant = first.junction[0] / probe.junction[0];
    let mut converged = false;
    let mut outward = first;
    let mut inward = integrate_inward(dimension, p, &tail, constant, &radii, junction);
    for _ in 0..50 {
        let o = outward.junction;
        let i = inward.junction;
        let r0 = o[0] - i[0];
        let r1 = o[1] - i[1];
        // J = [[v, -w], [v', -w']]
        let det = -o[2] * i[3] + i[2] * o[3];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let du0 = (-i[3] * r0 + i[2] * r1) / det;
        let dc = (o[2] * r1 - o[3] * r0) / det;
        let new_u0 = u0 - du0;
        let new_c = constant - dc;
        // The integrations carry noise near 1e-14 relative; stop well above it.
        let small = (new_u0 - u0).abs() <= NEWTON_STEP_TOL * u0.abs()
            && (new_c - constant).abs() <= NEWTON_STEP_TOL * constant.abs();
        if (new_u0 - lo).abs() > 1e-3 * lo || !(new_c > 0.0) || !new_c.is_finite() {
            break;
        }
        u0 = new_u0;
        constant = new_c;
        outward = integrate_outward(dimension, p, u0, &radii, junction);
        inward = integrate_inward(dimension, p, &tail, constant, &radii, junction);
        if small {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::BracketFailure {
            lo,
            hi,
            reason: "matching of outward and inward solutions did not converge".into(),
        });
    }

    let mut values = outward.values;
    let mut derivatives = outward.derivatives;
    values.extend_from_slice(&inward.values[1..]);
    derivatives.extend_from_slice(&inward.derivatives[1..]);

    for (i, (&u, &du)) in values.iter().zip(&derivatives).enumerate() {
        if !(u > 0.0) || (i > 0 && !(du < 0.0)) {
            return Err(Error::BracketFailure {
                lo,
                hi,
                reason: format!("profile not positive and decreasing at s = {}", radii[i]),
            });
        }
    }

    let second_derivatives: Vec<f64> = radii
        .iter()
        .zip(values.iter().zip(&derivatives))
        .map(|(&s, (&u, &du))| {
            if s == 0.0 {
                (u - signed_pow(u, p)) / dimension as f64
            } else {
                second_derivative(dimension, p, s, u, du)
            }
        })
        .collect();
    let log_values = values.iter().map(|u| u.ln()).collect();

    let tail_constant = fit_tail_constant(&tail, &radii, &values, opts.match_radius);
    let residual_norm = ode_residual(dimension, p, &radii, &values, &derivatives);
    let profile = GroundStateProfile {
        dimension,
        exponent: p,
        tol,
        radii,
        values,
        derivatives,
        second_derivatives,
        log_values,
        uniform_start,
        uniform_spacing,
        match_radius: opts.match_radius,
        tail_constant,
        shoot_value: u0,
        residual_norm,
        junction_radius: 0.0,
        tail,
    };
    let profile = GroundStateProfile {
        junction_radius: profile.radii[junction],
        ..profile
    };
    if residual_norm > tol {
        return Err(Error::ToleranceNotMet {
            achieved: residual_norm,
            requested: tol,
        });
    }
    Ok(profile)
}

/// Least-squares constant of the tail law on `[R_m - 2, R_m]`.
fn fit_tail_constant(tail: &TailLaw, radii: &[f64], values: &[f64], match_radius: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&s, &u) in radii.iter().zip(values) {
        if s >= match_radius - 2.0 {
            let phi = tail.shape(s);
            num += u * phi;
            den += phi * phi;
        }
    }
    num / den
}

/// Finite-difference weights for the first derivative at `x0` on `nodes` (Fornberg).
fn first_derivative_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 2]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// `max_i |D(U')_i + (N-1)/s_i U'_i - U_i + U_i^p|`, with `D` the
/// seven-point finite-difference derivative of the tabulated `U'`.
fn ode_residual(dimension: usize, p: f64, radii: &[f64], values: &[f64], derivatives: &[f64]) -> f64 {
    let n = radii.len();
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let lo = i.saturating_sub(STENCIL / 2).min(n - STENCIL);
        let nodes = &radii[lo..lo + STENCIL];
        let w = first_derivative_weights(radii[i], nodes);
        let d2: f64 = w.iter().zip(&derivatives[lo..lo + STENCIL]).map(|(a, b)| a * b).sum();
        let res = d2 + (dimension as f64 - 1.0) / radii[i] * derivatives[i] - values[i] + signed_pow(values[i], p);
        worst = worst.max(res.abs());
    }
    worst
}

impl GroundStateProfile {
    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn exponent(&self) -> f64 {
        self.exponent
    }
    pub fn tolerance(&self) -> f64 {
        self.tol
    }
    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn derivatives(&self) -> &[f64] {
        &self.derivatives
    }
    pub fn match_radius(&self) -> f64 {
        self.match_radius
    }
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }
    pub fn shoot_value(&self) -> f64 {
        self.shoot_value
    }
    pub fn residual_norm(&self) -> f64 {
        self.residual_norm
    }
    /// Radius where the outward and inward solutions were joined.
    pub fn junction_radius(&self) -> f64 {
        self.junction_radius
    }
    pub fn tail_law(&self) -> &TailLaw {
        &self.tail
    }
    pub fn uniform_spacing(&self) -> f64 {
        self.uniform_spacing
    }

    fn interval(&self, s: f64) -> usize {
        let s_u = self.radii[self.uniform_start];
        let last = self.radii.len() - 2;
        if s >= s_u {
            let i = self.uniform_start + ((s - s_u) / self.uniform_spacing) as usize;
            let mut i = i.min(last);
            // Guard against rounding at panel edges.
            while i > self.uniform_start && self.radii[i] > s {
                i -= 1;
            }
            while i < last && self.radii[i + 1] <= s {
                i += 1;
            }
            i
        } else {
            self.radii.partition_point(|&r| r <= s).saturating_sub(1).min(last)
        }
    }

    /// `U(s)` for `s >= 0`. Cubic Hermite on `ln U` inside the grid, tail law beyond.
    pub fn value(&self, s: f64) -> f64 {
        if s >= self.match_radius {
            return self.tail_constant * self.tail.shape(s);
        }
        let i = self.interval(s);
        let (s0, s1) = (self.radii[i], self.radii[i + 1]);
        let h = s1 - s0;
        let (l0, l1) = (self.log_values[i], self.log_values[i + 1]);
        let mut m0 = self.derivatives[i] / self.values[i];
        let mut m1 = self.derivatives[i + 1] / self.values[i + 1];
        let delta = (l1 - l0) / h;
        if delta == 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let a = m0 / delta;
            let b = m1 / delta;
            if a < 0.0 {
                m0 = 0.0;
            }
            if b < 0.0 {
                m1 = 0.0;
            }
            let norm = a * a + b * b;
            if norm > 9.0 {
                let tau = 3.0 / norm.sqrt();
                m0 *= tau;
                m1 *= tau;
            }
        }
        hermite(s0, h, l0, l1, m0, m1, s).exp()
    }

    /// `U'(s)` for `s >= 0`. Cubic Hermite on `U'` with `U''` from the equation.
    pub fn derivative(&self, s: f64) -> f64 {
        if s >= self.match_radius {
            return self.tail_constant * self.tail.shape_derivative(s);
        }
        let i = self.interval(s);
        let (s0, s1) = (self.radii[i], self.radii[i + 1]);
        hermite(
            s0,
            s1 - s0,
            self.derivatives[i],
            self.derivatives[i + 1],
            self.second_derivatives[i],
            self.second_derivatives[i + 1],
            s,
        )
    }

    /// `U(s) e^{s} s^{(N-1)/2}`, which tends to the tail constant's leading part.
    pub fn decay_product(&self, s: f64) -> f64 {
        self.value(s) / self.tail.envelope(s)
    }
}

#[inline]
fn hermite(s0: f64, h: f64, y0: f64, y1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let t = (s - s0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
}

/// `U(s)`; total on `s >= 0`.
pub fn eval_u(profile: &GroundStateProfile, s: f64) -> f64 {
    profile.value(s)
}

/// `U'(s)`; total on `s >= 0`.
pub fn eval_du(profile: &GroundStateProfile, s: f64) -> f64 {
    profile.derivative(s)
}

/// Far-field constant `C` in `U(s) ~ C e^{-s} s^{-(N-1)/2}`.
///
/// Fails when `U e^{s} s^{(N-1)/2}` has not plateaued: its values at
/// `R_m - 5` and `R_m` must agree to 1%.
pub fn decay_constant(profile: &GroundStateProfile) -> Result<f64> {
    let c = profile.tail_constant;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::TailNotConverged(format!("non-positive constant {c}")));
    }
    let rm = profile.match_radius;
    let a = profile.decay_product(rm - 5.0);
    let b = profile.decay_product(rm);
    if ((a - b) / b).abs() > 0.01 {
        return Err(Error::TailNotConverged(format!(
            "U e^s s^((N-1)/2) = {a} at {} vs {b} at {rm}",
            rm - 5.0
        )));
    }
    Ok(c)
}

/// Area of the unit sphere `S^{n}` in `R^{n+1}` (`S^0` has two points).
pub fn sphere_area(n: usize) -> f64 {
    match n {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 1.0) * sphere_area(n - 2),
    }
}

// ---------------------------------------------------------------------------
// Profile cache

const CACHE_MAGIC: &[u8; 8] = b"MBGSPROF";
/// Current cache layout version.
pub const CACHE_VERSION: u32 = 1;

/// File name used for a cached profile.
pub fn cache_file_name(dimension: usize, p: f64, tol: f64) -> String {
    format!("ground_N{dimension}_p{p:.12e}_tol{tol:.6e}.bin")
}

impl GroundStateProfile {
    /// Serializes the profile: header (magic, version, N, p, tol, R_m, grid size,
    /// uniform start, tail constant, U(0), residual, junction), then the arrays
    /// s, U, U' as little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(96 + 24 * self.radii.len());
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        for x in [self.exponent, self.tol, self.match_radius] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&(self.radii.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.uniform_start as u64).to_le_bytes());
        for x in [
            self.tail_constant,
            self.shoot_value,
            self.residual_norm,
            self.junction_radius,
        ] {
            out.extend_from_slice(&x.to_le_bytes());
        }
        for array in [&self.radii, &self.values, &self.derivatives] {
            for x in array.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Cache {
            path: origin.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut cur = Cursor { bytes, pos: 0 };
        let magic = cur.take(8).ok_or_else(|| bad("truncated header"))?;
        if magic != CACHE_MAGIC {
            return Err(bad("bad magic string"));
        }
        let version = cur.u32().ok_or_else(|| bad("truncated header"))?;
        if version != CACHE_VERSION {
            return Err(Error::CacheVersion {
                found: version,
                expected: CACHE_VERSION,
            });
        }
        let header = (|| {
            let dimension = cur.u32()? as usize;
            let p = cur.f64()?;
            let tol = cur.f64()?;
            let rm = cur.f64()?;
            let n = cur.u64()? as usize;
            let uniform_start = cur.u64()? as usize;
            let c = cur.f64()?;
            let u0 = cur.f64()?;
            let res = cur.f64()?;
            let junction = cur.f64()?;
            Some((dimension, p, tol, rm, n, uniform_start, c, u0, res, junction))
        })()
        .ok_or_else(|| bad("truncated header"))?;
        let (
            dimension,
            p,
            tol,
            match_radius,
            n,
            uniform_start,
            tail_constant,
            shoot_value,
            residual_norm,
            junction_radius,
        ) = header;
        if n < 8 || uniform_start + 2 >= n || dimension == 0 {
            return Err(bad("inconsistent grid header"));
        }
        let mut read_array = || -> Option<Vec<f64>> { (0..n).map(|_| cur.f64()).collect() };
        let radii = read_array().ok_or_else(|| bad("truncated arrays"))?;
        let values = read_array().ok_or_else(|| bad("truncated arrays"))?;
        let derivatives = read_array().ok_or_else(|| bad("truncated arrays"))?;
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let uniform_spacing = (radii[n - 1] - radii[uniform_start]) / (n - 1 - uniform_start) as f64;
        let second_derivatives = radii
            .iter()
            .zip(values.iter().zip(&derivatives))
            .map(|(&s, (&u, &du))| {
                if s == 0.0 {
                    (u - signed_pow(u, p)) / dimension as f64
                } else {
                    second_derivative(dimension, p, s, u, du)
                }
            })
            .collect();
        let log_values = values.iter().map(|u| u.ln()).collect();
        Ok(Self {
            dimension,
            exponent: p,
            tol,
            radii,
            values,
            derivatives,
            second_derivatives,
            log_values,
            uniform_start,
            uniform_spacing,
            match_radius,
            tail_constant,
            shoot_value,
            residual_norm,
            junction_radius,
            tail: TailLaw::new(dimension),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .map_err(|e| Error::Cache {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
            .read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, path)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }
    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }
    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
    fn f64(&mut self) -> Option<f64> {
        Some(f64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Loads the profile for `(N, p, tol)` from `dir`, solving and writing it on a miss.
///
/// A cache file whose header disagrees with the request, or whose version is
/// stale, is an error rather than a silent recompute.
pub fn solve_ground_state_cached(dimension: usize, p: f64, tol: f64, dir: &Path) -> Result<GroundStateProfile> {
    let path: PathBuf = dir.join(cache_file_name(dimension, p, tol));
    if path.exists() {
        let profile = GroundStateProfile::load(&path)?;
        if profile.dimension != dimension || profile.exponent != p || profile.tol != tol {
            return Err(Error::Cache {
                path,
                reason: "header does not match requested (N, p, tol)".into(),
            });
        }
        return Ok(profile);
    }
    let profile = solve_ground_state(dimension, p, tol)?;
    profile.save(&path)?;
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sech_profile(s: f64) -> f64 {
        // ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1)s/2) at p = 3
        2f64.sqrt() / s.cosh()
    }

    #[test]
    fn one_dimensional_cubic_matches_sech() {
        let prof = solve_ground_state(1, 3.0, 1e-10).unwrap();
        assert_relative_eq!(prof.shoot_value(), 2f64.sqrt(), max_relative = 1e-12);
        let mut worst: f64 = 0.0;
        let mut s = 0.0;
        while s <= 20.0 {
            worst = worst.max((prof.value(s) - sech_profile(s)).abs());
            s += 0.0137;
        }
        assert!(worst <= 1e-8, "max error {worst}");
        assert_relative_eq!(eval_u(&prof, 2.0), sech_profile(2.0), max_relative = 1e-9);
    }

    #[test]
    fn one_dimensional_tail_constant_is_two_sqrt_two() {
        let prof = solve_ground_state(1, 3.0, 1e-10).unwrap();
        let c = decay_constant(&prof).unwrap();
        assert_relative_eq!(c, 2.0 * 2f64.sqrt(), max_relative = 1e-7);
    }

    #[test]
    fn closed_form_for_general_exponent_in_one_dimension() {
        // ((p+1)/2)^{1/(p-1)} sech^{2/(p-1)}((p-1)s/2)
        let p = 2.0;
        let prof = solve_ground_state(1, p, 1e-10).unwrap();
        let exact = |s: f64| {
            ((p + 1.0) / 2.0f64).powf(1.0 / (p - 1.0)) * (1.0 / ((p - 1.0) * s / 2.0).cosh()).powf(2.0 / (p - 1.0))
        };
        for s in [0.0, 0.5, 3.0, 7.5, 15.0] {
            assert_relative_eq!(prof.value(s), exact(s), max_relative = 1e-8);
        }
    }

    #[test]
    fn supercritical_exponent_is_rejected() {
        assert!(matches!(
            solve_ground_state(3, 5.0, 1e-10),
            Err(Error::Supercritical { .. })
        ));
        assert!(matches!(
            solve_ground_state(3, 1.0, 1e-10),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            solve_ground_state(2, 3.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn three_dimensional_cubic_shoot_value() {
        let prof = solve_ground_state(3, 3.0, 1e-10).unwrap();
        assert!((prof.shoot_value() - 4.337).abs() < 1e-3, "{}", prof.shoot_value());
        assert!(prof.residual_norm() <= 1e-10);
    }

    #[test]
    fn profile_invariants_hold() {
        let prof = solve_ground_state(3, 3.0, 1e-10).unwrap();
        assert_eq!(prof.derivatives()[0], 0.0);
        assert_eq!(eval_du(&prof, 0.0), 0.0);
        assert!(prof.values().iter().all(|&u| u > 0.0));
        assert!(prof.derivatives()[1..].iter().all(|&d| d < 0.0));
        let rm = prof.match_radius();
        // matched tail: value and slope continuous at R_m
        let inside = prof.values()[prof.values().len() - 1];
        let outside = prof.tail_constant() * prof.tail_law().shape(rm);
        assert_relative_eq!(inside, outside, max_relative = 1e-8);
        let inside_d = prof.derivatives()[prof.derivatives().len() - 1];
        let outside_d = prof.tail_constant() * prof.tail_law().shape_derivative(rm);
        assert_relative_eq!(inside_d, outside_d, max_relative = 1e-8);
        assert_relative_eq!(prof.value(rm - 1e-12), prof.value(rm), max_relative = 1e-8);
        // decay product plateau and derivative ratio
        let a = prof.decay_product(rm);
        let b = prof.decay_product(rm + 5.0);
        assert!(((a - b) / a).abs() <= 0.01);
        assert!((prof.derivative(rm) / prof.value(rm) + 1.0).abs() <= 10.0 / rm);
    }

    #[test]
    fn other_dimensions_meet_tolerance() {
        for (n, p) in [(2, 3.0), (3, 2.0), (4, 2.0), (5, 1.8), (2, 5.0)] {
            let prof = solve_ground_state(n, p, 1e-10).unwrap();
            assert!(prof.residual_norm() <= 1e-10, "N={n} p={p}");
            decay_constant(&prof).unwrap();
        }
    }

    #[test]
    fn tail_correction_coefficient() {
        for n in 1..=6usize {
            let expected = (n as f64 - 1.0) * (n as f64 - 3.0) / 8.0;
            assert_relative_eq!(TailLaw::new(n).first_correction(), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn served_value_is_positive_far_out() {
        let prof = solve_ground_state(3, 3.0, 1e-10).unwrap();
        for s in [0.0, 1e-5, 10.0, 24.999, 25.0, 40.0, 100.0, 500.0] {
            assert!(prof.value(s) > 0.0, "s = {s}");
        }
    }

    #[test]
    fn bisection_bracket_is_monotone() {
        let prof = solve_ground_state(3, 3.0, 1e-10).unwrap();
        let u0 = prof.shoot_value();
        let s0 = ProfileOptions::default().start_radius;
        assert_eq!(classify(3, 3.0, u0 * 1.001, s0), Some(Shot::Crossing));
        assert_eq!(classify(3, 3.0, u0 * 1.1, s0), Some(Shot::Crossing));
        assert_eq!(classify(3, 3.0, u0 * 0.999, s0), Some(Shot::Rebound));
        assert_eq!(classify(3, 3.0, u0 * 0.9, s0), Some(Shot::Rebound));
    }

    #[test]
    fn grid_refinement_reduces_residual() {
        let coarse = ProfileOptions {
            spacing: 0.04,
            start_radius: 1e-3,
            ..ProfileOptions::default()
        };
        let fine = ProfileOptions {
            spacing: 0.02,
            ..coarse
        };
        let a = solve_ground_state_with(3, 3.0, 1.0, &coarse).unwrap();
        let b = solve_ground_state_with(3, 3.0, 1.0, &fine).unwrap();
        assert!(
            a.residual_norm() >= 3.0 * b.residual_norm(),
            "{} vs {}",
            a.residual_norm(),
            b.residual_norm()
        );
    }

    #[test]
    fn fornberg_weights_reproduce_five_point_stencil() {
        let w = first_derivative_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cache_round_trip_and_version_check() {
        let prof = solve_ground_state(1, 3.0, 1e-10).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        prof.save(&path).unwrap();
        let back = GroundStateProfile::load(&path).unwrap();
        assert_eq!(back, prof);

        let mut bytes = prof.to_bytes();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            GroundStateProfile::from_bytes(&bytes, &path),
            Err(Error::CacheVersion { found: 99, .. })
        ));
        assert!(matches!(
            GroundStateProfile::from_bytes(&bytes[..20], &path),
            Err(Error::Cache { .. }) | Err(Error::CacheVersion { .. })
        ));
    }

    #[test]
    fn cached_solve_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = solve_ground_state_cached(1, 3.0, 1e-10, dir.path()).unwrap();
        let path = dir.path().join(cache_file_name(1, 3.0, 1e-10));
        let first = fs::read(&path).unwrap();
        fs::remove_file(&path).unwrap();
        let b = solve_ground_state_cached(1, 3.0, 1e-10, dir.path()).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        assert_eq!(a, b);
        // warm cache
        let c = solve_ground_state_cached(1, 3.0, 1e-10, dir.path()).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_area(3), 2.0 * PI * PI, max_relative = 1e-15);
    }
}
