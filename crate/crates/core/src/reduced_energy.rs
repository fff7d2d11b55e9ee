//! The reduced energy
//! `F1(r, h) = A1/r^m + A2 - 2B1 e^{-2π√(1-h²) r/k} - B1 e^{-2rh}`
//! and its critical points.
//!
//! With `H = e^{-2π√(1-h²) r/k}` and `G = e^{-2rh}`, `∇F1 = 0` is equivalent to
//! `H = A1 k m √(1-h²) / (4π B1 r^{m+1})` and `G = A1 m h / (2 B1 r^{m+1})`.
//! The Newton solver works on the logarithms of these two equations, which
//! are O(1) where the gradient itself is exponentially small.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::configuration::{interaction_sums, DoublePolygonConfig, ParameterBox};
use crate::error::{Error, Result};
use crate::ground_state::{sphere_area, GroundStateProfile};
use crate::integrate::{adaptive_with_breaks, Tolerance};
use crate::potential::PotentialModel;
use crate::quadrature::InteractionConstants;
use crate::summation::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedModel {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub m: f64,
    pub k: usize,
}

impl ReducedModel {
    pub fn new(a1: f64, a2: f64, b1: f64, m: f64, k: usize) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::InvalidParameter(format!("m = {m} must exceed 1")));
        }
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k = {k} below 2")));
        }
        if !(b1 >= 0.0) || !a1.is_finite() || !a2.is_finite() {
            return Err(Error::InvalidParameter("constants must be finite with B1 >= 0".into()));
        }
        Ok(Self { a1, a2, b1, m, k })
    }

    pub fn from_constants(c: &InteractionConstants, m: f64, k: usize) -> Result<Self> {
        Self::new(c.a1, c.a2, c.b1, m, k)
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.a1, self.a2, self.b1, self.m, k)
    }

    fn c(&self) -> f64 {
        2.0 * PI / self.k as f64
    }

    /// `F1(r, h)`.
    pub fn f1(&self, r: f64, h: f64) -> f64 {
        let q = (1.0 - h * h).sqrt();
        self.a1 * r.powf(-self.m) + self.a2 - 2.0 * self.b1 * (-self.c() * q * r).exp() - self.b1 * (-2.0 * r * h).exp()
    }

    /// `(F1_r, F1_h)`.
    pub fn grad(&self, r: f64, h: f64) -> (f64, f64) {
        let c = self.c();
        let q = (1.0 - h * h).sqrt();
        let e1 = (-c * q * r).exp();
        let e2 = (-2.0 * r * h).exp();
        let fr = -self.m * self.a1 * r.powf(-self.m - 1.0) + 2.0 * self.b1 * c * q * e1 + 2.0 * self.b1 * h * e2;
        let fh = -2.0 * self.b1 * c * r * h / q * e1 + 2.0 * self.b1 * r * e2;
        (fr, fh)
    }

    /// `(F1_rr, F1_rh, F1_hh)`.
    pub fn hessian(&self, r: f64, h: f64) -> (f64, f64, f64) {
        let c = self.c();
        let q = (1.0 - h * h).sqrt();
        let e1 = (-c * q * r).exp();
        let e2 = (-2.0 * r * h).exp();
        let b = self.b1;
        let frr = self.m * (self.m + 1.0) * self.a1 * r.powf(-self.m - 2.0)
            - 2.0 * b * c * c * q * q * e1
            - 4.0 * b * h * h * e2;
        let frh = -2.0 * b * c * h / q * (1.0 - c * r * q) * e1 + 2.0 * b * (1.0 - 2.0 * r * h) * e2;
        let fhh = -2.0 * b * c * r * e1 * (1.0 / (q * q * q) + c * r * h * h / (q * q)) - 4.0 * b * r * r * e2;
        (frr, frh, fhh)
    }

    /// Right-hand sides of the `H`, `G` equations at `(r, h)`.
    pub fn hg_targets(&self, r: f64, h: f64) -> (f64, f64) {
        let q = (1.0 - h * h).sqrt();
        let base = self.a1 * self.m / (self.b1 * r.powf(self.m + 1.0));
        (base * self.k as f64 * q / (4.0 * PI), base * h / 2.0)
    }

    /// Logarithmic residuals `(ln H - ln H_target, ln G - ln G_target)` and their Jacobian.
    fn log_system(&self, r: f64, h: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let m1 = self.m + 1.0;
        let kf = self.k as f64;
        let q2 = 1.0 - h * h;
        let q = q2.sqrt();
        let lk = (self.a1 * kf * self.m / (4.0 * PI * self.b1)).ln();
        let lg = (self.a1 * self.m / (2.0 * self.b1)).ln();
        let phi1 = -2.0 * PI * q * r / kf - lk - q.ln() + m1 * r.ln();
        let phi2 = -2.0 * r * h - lg - h.ln() + m1 * r.ln();
        let jac = [
            [-2.0 * PI * q / kf + m1 / r, 2.0 * PI * r * h / (kf * q) + h / q2],
            [-2.0 * h + m1 / r, -2.0 * r - 1.0 / h],
        ];
        ([phi1, phi2], jac)
    }

    /// Tolerance for the gradient at a critical point: `1e-12 max(|A1|/r^{m+1}, B1/k)`.
    pub fn gradient_tolerance(&self, r: f64) -> f64 {
        1e-12 * (self.a1.abs() / r.powf(self.m + 1.0)).max(self.b1 / self.k as f64)
    }
}

/// `(H, G) = (e^{-2π√(1-h²) r/k}, e^{-2rh})`.
pub fn substitution_hg(model: &ReducedModel, r: f64, h: f64) -> (f64, f64) {
    let q = (1.0 - h * h).sqrt();
    ((-2.0 * PI * q * r / model.k as f64).exp(), (-2.0 * r * h).exp())
}

/// Inverse of [`substitution_hg`] given logarithms `ln H`, `ln G`, via the joint
/// fixed point of `r = -k ln H/(2π√(1-h²))`, `h = -ln G/(2r)`.
fn inverse_hg_log(k: usize, ln_h: f64, ln_g: f64) -> Result<(f64, f64)> {
    if !(ln_h < 0.0) || !(ln_g < 0.0) {
        return Err(Error::LogDomain(format!(
            "targets e^{ln_h}, e^{ln_g} must lie in (0, 1)"
        )));
    }
    // With a = r√(1-h²) and g = rh fixed, the fixed point is r = √(a² + g²).
    let a = -(k as f64) * ln_h / (2.0 * PI);
    let g = -0.5 * ln_g;
    let r = a.hypot(g);
    let h = g / r;
    if !(h < 1.0) {
        return Err(Error::LogDomain(format!("recovered h = {h} not below 1")));
    }
    Ok((r, h))
}

/// Recovers `(r, h)` from `(H, G) ∈ (0, 1)²`.
pub fn inverse_hg(model: &ReducedModel, hh: f64, gg: f64) -> Result<(f64, f64)> {
    if !(hh > 0.0 && hh < 1.0 && gg > 0.0 && gg < 1.0) {
        return Err(Error::LogDomain(format!("targets ({hh}, {gg}) outside (0, 1)")));
    }
    inverse_hg_log(model.k, hh.ln(), gg.ln())
}

/// The exact map `A(r, h)`: invert the `H`, `G` equations with right-hand sides at `(r, h)`.
pub fn fixed_point_map(model: &ReducedModel, r: f64, h: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && h > 0.0 && h < 1.0) {
        return Err(Error::LogDomain(format!("(r, h) = ({r}, {h}) outside the domain")));
    }
    let (th, tg) = model.hg_targets(r, h);
    if !(th > 0.0 && tg > 0.0) {
        return Err(Error::LogDomain("non-positive right-hand side (A1 = 0?)".into()));
    }
    inverse_hg_log(model.k, th.ln(), tg.ln())
}

/// Leading-order form of `A`:
/// `(k((m+1) ln r - ln k)/(2π), π(ln h - (m+1) ln r)/(k(ln k - (m+1) ln r)))`.
pub fn fixed_point_map_asymptotic(model: &ReducedModel, r: f64, h: f64) -> Result<(f64, f64)> {
    if !(r > 0.0 && h > 0.0) {
        return Err(Error::LogDomain(format!("(r, h) = ({r}, {h}) outside the domain")));
    }
    let kf = model.k as f64;
    let lr = (model.m + 1.0) * r.ln();
    let den = kf.ln() - lr;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::LogDomain("ln k - (m+1) ln r vanishes".into()));
    }
    Ok((kf * (lr - kf.ln()) / (2.0 * PI), PI * (h.ln() - lr) / (kf * den)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    FixedPoint,
    Newton,
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::FixedPoint => "fixed_point",
            Solver::Newton => "newton",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_point" | "fixed-point" => Ok(Solver::FixedPoint),
            "newton" => Ok(Solver::Newton),
            other => Err(Error::InvalidParameter(format!("unknown solver {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Maximum,
    Minimum,
    Saddle,
    Degenerate,
}

impl Classification {
    pub fn from_hessian(frr: f64, frh: f64, fhh: f64) -> Self {
        let det = frr * fhh - frh * frh;
        if det > 0.0 && frr < 0.0 {
            Classification::Maximum
        } else if det > 0.0 && frr > 0.0 {
            Classification::Minimum
        } else if det < 0.0 {
            Classification::Saddle
        } else {
            Classification::Degenerate
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Classification::Maximum => "max",
            Classification::Minimum => "min",
            Classification::Saddle => "saddle",
            Classification::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub r: f64,
    pub h: f64,
    /// Ratio of this step's length to the previous one (relative coordinates).
    pub contraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPointResult {
    pub r_star: f64,
    pub h_star: f64,
    pub gradient_norm: f64,
    pub f_rr: f64,
    pub f_rh: f64,
    pub f_hh: f64,
    pub classification: Classification,
    pub trace: Vec<TraceStep>,
    pub solver: Solver,
    pub in_box: bool,
}

impl CriticalPointResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

const FIXED_POINT_MAX_ITER: usize = 200;
const FIXED_POINT_DAMPED: usize = 5;
const FIXED_POINT_STEP_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 100;

fn relative_step(r0: f64, h0: f64, r1: f64, h1: f64) -> f64 {
    ((r1 - r0) / r0).abs().max(((h1 - h0) / h0).abs())
}

fn finish(
    model: &ReducedModel,
    bx: &ParameterBox,
    r: f64,
    h: f64,
    trace: Vec<TraceStep>,
    solver: Solver,
) -> Result<CriticalPointResult> {
    let (gr, gh) = model.grad(r, h);
    let gradient_norm = gr.hypot(gh);
    if !(gradient_norm <= model.gradient_tolerance(r)) {
        return Err(Error::NoConvergence {
            iterations: trace.len(),
            gradient_norm,
        });
    }
    let (f_rr, f_rh, f_hh) = model.hessian(r, h);
    Ok(CriticalPointResult {
        r_star: r,
        h_star: h,
        gradient_norm,
        f_rr,
        f_rh,
        f_hh,
        classification: Classification::from_hessian(f_rr, f_rh, f_hh),
        trace,
        solver,
        in_box: bx.contains(r, h),
    })
}

/// Critical point of `F1` started from the center of the standard box, or of
/// [`ParameterBox::wide`] when `k` is too small for the standard box to keep `h < 1`.
pub fn find_critical_point(model: &ReducedModel, solver: Solver) -> Result<CriticalPointResult> {
    let bx = match ParameterBox::standard(model.k, model.m) {
        Ok(bx) => bx,
        Err(Error::InvalidParameter(_)) => ParameterBox::wide(model.k, model.m)?,
        Err(e) => return Err(e),
    };
    find_critical_point_in(model, solver, &bx)
}

pub fn find_critical_point_in(model: &ReducedModel, solver: Solver, bx: &ParameterBox) -> Result<CriticalPointResult> {
    if !(model.a1 > 0.0 && model.b1 > 0.0) {
        return Err(Error::InvalidParameter("critical points need A1 > 0 and B1 > 0".into()));
    }
    let (r0, h0) = bx.center();
    match solver {
        Solver::FixedPoint => fixed_point_solve(model, bx, r0, h0),
        Solver::Newton => newton_solve(model, bx, r0, h0),
    }
}

fn fixed_point_solve(model: &ReducedModel, bx: &ParameterBox, r0: f64, h0: f64) -> Result<CriticalPointResult> {
    let (mut r, mut h) = (r0, h0);
    let mut trace = Vec::new();
    let mut last_step = f64::NAN;
    for it in 0..FIXED_POINT_MAX_ITER {
        let (ar, ah) = fixed_point_map(model, r, h)?;
        let w = if it < FIXED_POINT_DAMPED { 0.5 } else { 1.0 };
        let (nr, nh) = (r + w * (ar - r), h + w * (ah - h));
        let step = relative_step(r, h, nr, nh);
        trace.push(TraceStep {
            r: nr,
            h: nh,
            contraction: step / last_step,
        });
        last_step = step;
        r = nr;
        h = nh;
        if !bx.inflated_contains(2.0, r, h) {
            return Err(Error::Divergence {
                iterations: trace.len(),
                r,
                h,
            });
        }
        if step < FIXED_POINT_STEP_TOL {
            break;
        }
    }
    finish(model, bx, r, h, trace, Solver::FixedPoint)
}

fn newton_solve(model: &ReducedModel, bx: &ParameterBox, r0: f64, h0: f64) -> Result<CriticalPointResult> {
    let (mut r, mut h) = (r0, h0);
    let mut trace = Vec::new();
    let mut last_step = f64::NAN;
    let norm = |p: [f64; 2]| p[0].hypot(p[1]);
    let (mut phi, mut jac) = model.log_system(r, h);
    for _ in 0..NEWTON_MAX_ITER {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dr = (jac[1][1] * phi[0] - jac[0][1] * phi[1]) / det;
        let dh = (jac[0][0] * phi[1] - jac[1][0] * phi[0]) / det;
        // Backtrack until the residual decreases and the iterate stays admissible.
        let mut t = 1.0;
        let current = norm(phi);
        let (mut nr, mut nh);
        loop {
            nr = r - t * dr;
            nh = h - t * dh;
            if nr > 0.0 && nh > 0.0 && nh < 1.0 {
                let (trial, _) = model.log_system(nr, nh);
                if norm(trial) < current || t < 1e-6 {
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                break;
            }
        }
        let step = relative_step(r, h, nr, nh);
        trace.push(TraceStep {
            r: nr,
            h: nh,
            contraction: step / last_step,
        });
        last_step = step;
        r = nr;
        h = nh;
        if !bx.inflated_contains(2.0, r, h) {
            return Err(Error::Divergence {
                iterations: trace.len(),
                r,
                h,
            });
        }
        let next = model.log_system(r, h);
        phi = next.0;
        jac = next.1;
        if step < 1e-15 || norm(phi) == 0.0 {
            break;
        }
    }
    finish(model, bx, r, h, trace, Solver::Newton)
}

/// `(H k^m, G k^{m+2})` at a critical point.
pub fn scaling_report(result: &CriticalPointResult, model: &ReducedModel) -> (f64, f64) {
    let (hh, gg) = substitution_hg(model, result.r_star, result.h_star);
    let kf = model.k as f64;
    (hh * kf.powf(model.m), gg * kf.powf(model.m + 2.0))
}

/// Critical points over a list of `k`, computed in parallel; order follows `ks`.
pub fn critical_sweep(
    base: &ReducedModel,
    ks: &[usize],
    solver: Solver,
) -> Result<Vec<(ReducedModel, CriticalPointResult)>> {
    ks.par_iter()
        .map(|&k| {
            let model = base.with_k(k)?;
            let res = find_critical_point(&model, solver)?;
            Ok((model, res))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Objective with the exact configuration sums in place of the two exponentials.

/// `A1/r^m + A2 - S_same(r, h) - S_cross(r, h)` with the exact polygon sums.
pub fn f1_discrete(model: &ReducedModel, r: f64, h: f64) -> Result<f64> {
    let cfg = crate::configuration::build_config(model.k, r, h, 3)?;
    let (s, x) = interaction_sums(&cfg, model.b1);
    Ok(model.a1 * r.powf(-model.m) + model.a2 - s - x)
}

/// Analytic gradient of [`f1_discrete`].
pub fn grad_f1_discrete(model: &ReducedModel, r: f64, h: f64) -> (f64, f64) {
    let kf = model.k as f64;
    let q2 = 1.0 - h * h;
    let q = q2.sqrt();
    let mut gr = CompensatedSum::new();
    let mut gh = CompensatedSum::new();
    gr.add(-model.m * model.a1 * r.powf(-model.m - 1.0));
    for j in 0..model.k {
        let s = (j as f64 * PI / kf).sin().abs();
        if j > 0 {
            let d = 2.0 * r * q * s;
            let e = model.b1 * (-d).exp();
            gr.add(d / r * e);
            gh.add(-2.0 * r * s * h / q * e);
        }
        let root = (q2 * s * s + h * h).sqrt();
        let d = 2.0 * r * root;
        let e = model.b1 * (-d).exp();
        gr.add(d / r * e);
        gh.add(2.0 * r * h * (1.0 - s * s) / root * e);
    }
    (gr.value(), gh.value())
}

/// Newton on the discrete-sum gradient with a finite-difference Jacobian,
/// started from `(r0, h0)` (normally the leading-model critical point).
pub fn find_discrete_critical_point(model: &ReducedModel, r0: f64, h0: f64) -> Result<(f64, f64)> {
    let (mut r, mut h) = (r0, h0);
    for it in 0..60 {
        let (gr, gh) = grad_f1_discrete(model, r, h);
        let er = 1e-6 * r;
        let eh = 1e-6 * h;
        let (a, c) = {
            let p = grad_f1_discrete(model, r + er, h);
            let m = grad_f1_discrete(model, r - er, h);
            ((p.0 - m.0) / (2.0 * er), (p.1 - m.1) / (2.0 * er))
        };
        let (b, d) = {
            let p = grad_f1_discrete(model, r, h + eh);
            let m = grad_f1_discrete(model, r, h - eh);
            ((p.0 - m.0) / (2.0 * eh), (p.1 - m.1) / (2.0 * eh))
        };
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence {
                iterations: it,
                gradient_norm: gr.hypot(gh),
            });
        }
        let dr = (d * gr - b * gh) / det;
        let dh = (a * gh - c * gr) / det;
        r -= dr;
        h -= dh;
        if !(r > 0.0 && h > 0.0 && h < 1.0) {
            return Err(Error::Divergence { iterations: it, r, h });
        }
        if (dr / r).abs().max((dh / h).abs()) < 1e-13 {
            return Ok((r, h));
        }
    }
    let (gr, gh) = grad_f1_discrete(model, r, h);
    Err(Error::NoConvergence {
        iterations: 60,
        gradient_norm: gr.hypot(gh),
    })
}

// ---------------------------------------------------------------------------
// Bound terms for the error of the approximate solution.

/// `T1 = (∫ (V(|y + x̄_1|) - 1)² U(y)² dy)^{1/2}` and
/// `T2 = Σ_{i≥2} e^{-min(p-1-τ, 1)|x̄_i - x̄_1|}`.
pub fn lk_bound_terms(
    config: &DoublePolygonConfig,
    profile: &GroundStateProfile,
    potential: &PotentialModel,
    tau: f64,
) -> Result<(f64, f64)> {
    let p = profile.exponent();
    if !(tau > 0.0 && tau < p - 1.0) {
        return Err(Error::InvalidParameter(format!("τ = {tau} outside (0, p-1)")));
    }
    let n = profile.dimension();
    if n < 2 {
        return Err(Error::InvalidParameter("needs N >= 2".into()));
    }
    let r = config.r();
    let t1 = if potential.a == 0.0 {
        0.0
    } else {
        // Polar coordinates about the bump center with axis along x̄_1.
        let mut outer = |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            let mut inner = |theta: f64| {
                let t2 = s * s + r * r + 2.0 * s * r * theta.cos();
                let e = potential.excess(t2.max(0.0).sqrt());
                e * e * theta.sin().powi(n as i32 - 2)
            };
            let width = (1.0 / (s * r).sqrt()).min(1.0);
            let mut breaks = vec![0.0];
            for m in [1.0, 4.0, 16.0] {
                if PI - m * width > 0.0 {
                    breaks.push(PI - m * width);
                }
            }
            breaks.reverse();
            breaks.retain(|&b| b > 0.0);
            breaks.insert(0, 0.0);
            breaks.push(PI);
            breaks.dedup();
            let est = adaptive_with_breaks(&mut inner, &breaks, Tolerance::relative(1e-10).with_abs(1e-300));
            let u = profile.value(s);
            u * u * s.powi(n as i32 - 1) * est.value
        };
        let rm = profile.match_radius();
        let mut breaks = vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, rm, rm + 50.0];
        breaks.retain(|&b| b <= rm + 50.0);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let est = adaptive_with_breaks(&mut outer, &breaks, Tolerance::relative(1e-9).with_abs(1e-300));
        (sphere_area(n - 2) * est.value).sqrt()
    };
    let mu = (p - 1.0 - tau).min(1.0);
    let mut t2 = CompensatedSum::new();
    for j in 2..=config.k() {
        t2.add((-mu * config.same_distance(j)).exp());
    }
    Ok((t1, t2.value()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::build_config;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Constants of the N = 3, p = 3 ground state with a = 1.
    fn model(m: f64, k: usize) -> ReducedModel {
        ReducedModel::new(18.897, 37.794, 34.090, m, k).unwrap()
    }

    #[test]
    fn small_k_uses_wide_box() {
        for k in [4usize, 8] {
            let md = model(2.0, k);
            let n = find_critical_point(&md, Solver::Newton).unwrap();
            let f = find_critical_point(&md, Solver::FixedPoint).unwrap();
            assert_eq!(n.classification, Classification::Maximum);
            assert!(n.in_box);
            assert!((n.r_star - f.r_star).abs() < 1e-10 * n.r_star);
            assert!((n.h_star - f.h_star).abs() < 1e-10 * n.h_star);
        }
    }

    #[test]
    fn trivial_limits() {
        let mut md = model(2.0, 16);
        md.b1 = 0.0;
        assert_eq!(md.f1(30.0, 0.3), md.a1 / 900.0 + md.a2);
        assert_eq!(md.grad(30.0, 0.3).1, 0.0);
        let mut md = model(2.0, 16);
        md.a1 = 0.0;
        // A2 only shifts F1; dropping it keeps the increments above rounding.
        md.a2 = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let v = md.f1(i as f64, 0.2);
            assert!(v > prev);
            prev = v;
        }
    }

    /// Central differences of F1. The constant A2 does not enter the gradient
    /// and is removed so it does not swamp the differences.
    fn fd_grad(md: &ReducedModel, r: f64, h: f64) -> (f64, f64) {
        let md = ReducedModel { a2: 0.0, ..*md };
        let er = 1e-6 * r;
        let eh = 1e-6 * h;
        (
            (md.f1(r + er, h) - md.f1(r - er, h)) / (2.0 * er),
            (md.f1(r, h + eh) - md.f1(r, h - eh)) / (2.0 * eh),
        )
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let md = model(2.0, 32);
        let bx = ParameterBox::standard(32, 2.0).unwrap();
        let (r, h) = bx.center();
        let (frr, frh, fhh) = md.hessian(r, h);
        let er = 1e-5 * r;
        let eh = 1e-5 * h;
        let dr = |f: (f64, f64), g: (f64, f64)| ((f.0 - g.0) / (2.0 * er), (f.1 - g.1) / (2.0 * er));
        let (a, c) = dr(md.grad(r + er, h), md.grad(r - er, h));
        let b = (md.grad(r, h + eh).0 - md.grad(r, h - eh).0) / (2.0 * eh);
        let d = (md.grad(r, h + eh).1 - md.grad(r, h - eh).1) / (2.0 * eh);
        assert_relative_eq!(frr, a, max_relative = 1e-5);
        assert_relative_eq!(frh, c, max_relative = 1e-5);
        assert_relative_eq!(frh, b, max_relative = 1e-5);
        assert_relative_eq!(fhh, d, max_relative = 1e-5);
    }

    #[test]
    fn hg_round_trip() {
        let md = model(2.0, 64);
        for (r, h) in [(100.0, 0.1), (300.0, 0.05), (80.0, 0.4)] {
            let (hh, gg) = substitution_hg(&md, r, h);
            let (r2, h2) = inverse_hg(&md, hh, gg).unwrap();
            assert_relative_eq!(r, r2, max_relative = 1e-12);
            assert_relative_eq!(h, h2, max_relative = 1e-12);
        }
        assert!(inverse_hg(&md, 1.5, 0.5).is_err());
        assert!(inverse_hg(&md, 0.5, 0.0).is_err());
    }

    #[test]
    fn critical_point_satisfies_hg_system() {
        let md = model(2.0, 64);
        let res = find_critical_point(&md, Solver::Newton).unwrap();
        let (r, h) = (res.r_star, res.h_star);
        let (hh, gg) = substitution_hg(&md, r, h);
        let (th, tg) = md.hg_targets(r, h);
        assert_relative_eq!(hh, th, max_relative = 1e-10);
        assert_relative_eq!(gg, tg, max_relative = 1e-10);
        // the combined r-equation
        let q = (1.0 - h * h).sqrt();
        let lhs = -md.a1 * md.m / r.powf(md.m + 1.0) + 4.0 * md.b1 * PI * hh / md.k as f64 * (q + h * h / q);
        assert!(lhs.abs() <= 1e-10 * md.a1 * md.m / r.powf(md.m + 1.0));
        let (gr, gh) = md.grad(r, h);
        assert!(gr.abs() <= 1e-12 * md.a2 && gh.abs() <= 1e-12 * md.a2);
    }

    #[test]
    fn solvers_agree_and_find_maximum() {
        for m in [1.5, 2.0, 3.0] {
            for k in [16usize, 64, 256, 4096] {
                let md = model(m, k);
                let a = find_critical_point(&md, Solver::FixedPoint).unwrap();
                let b = find_critical_point(&md, Solver::Newton).unwrap();
                assert_relative_eq!(a.r_star, b.r_star, max_relative = 1e-10);
                assert_relative_eq!(a.h_star, b.h_star, max_relative = 1e-10);
                assert_eq!(b.classification, Classification::Maximum, "m={m} k={k}");
                assert!(b.in_box, "m={m} k={k}");
                let bx = ParameterBox::standard(k, m).unwrap();
                for (cr, ch) in bx.corners() {
                    assert!(md.f1(b.r_star, b.h_star) >= md.f1(cr, ch));
                }
            }
        }
    }

    #[test]
    fn exact_map_tracks_asymptotic_form() {
        let dev = |k: usize| {
            let md = model(2.0, k);
            let (r, h) = ParameterBox::standard(k, 2.0).unwrap().center();
            let e = fixed_point_map(&md, r, h).unwrap();
            let a = fixed_point_map_asymptotic(&md, r, h).unwrap();
            relative_step(e.0, e.1, a.0, a.1)
        };
        assert!(dev(1 << 12) < dev(1 << 6));
        let md = model(2.0, 64);
        assert!(fixed_point_map_asymptotic(&md, 64f64.powf(1.0 / 3.0), 0.1).is_err());
    }

    #[test]
    fn map_contracts_more_at_larger_k() {
        let factor = |k: usize| {
            let md = model(2.0, k);
            let bx = ParameterBox::standard(k, 2.0).unwrap();
            let (rc, hc) = bx.center();
            let mut worst: f64 = 0.0;
            for (dr, dh) in [(0.3, 0.1), (-0.2, 0.3), (0.1, -0.4), (0.4, 0.4)] {
                let z1 = (rc * (1.0 + dr * 0.5), hc * (1.0 + dh * 0.5));
                let z2 = (rc * (1.0 - dr * 0.5), hc * (1.0 - dh * 0.5));
                let a1 = fixed_point_map(&md, z1.0, z1.1).unwrap();
                let a2 = fixed_point_map(&md, z2.0, z2.1).unwrap();
                let num = ((a1.0 - a2.0) / rc).hypot((a1.1 - a2.1) / hc);
                let den = ((z1.0 - z2.0) / rc).hypot((z1.1 - z2.1) / hc);
                worst = worst.max(num / den);
            }
            worst
        };
        let f6 = factor(1 << 6);
        let f10 = factor(1 << 10);
        assert!(f6 < 1.0 && f10 < f6, "{f6} {f10}");
    }

    #[test]
    fn fixed_point_equals_gradient_zero() {
        let md = model(3.0, 128);
        let res = find_critical_point(&md, Solver::FixedPoint).unwrap();
        let (ar, ah) = fixed_point_map(&md, res.r_star, res.h_star).unwrap();
        assert_relative_eq!(ar, res.r_star, max_relative = 1e-10);
        assert_relative_eq!(ah, res.h_star, max_relative = 1e-10);
        assert!(res.gradient_norm <= md.gradient_tolerance(res.r_star));
    }

    #[test]
    fn scalings_and_hg_ratio() {
        let md = model(2.0, 256);
        let res = find_critical_point(&md, Solver::Newton).unwrap();
        let (hk, gk) = scaling_report(&res, &md);
        assert!(hk > 0.0 && gk > 0.0);
        let (hh, gg) = substitution_hg(&md, res.r_star, res.h_star);
        let q = (1.0 - res.h_star.powi(2)).sqrt();
        assert_relative_eq!(gg / hh, 2.0 * PI * res.h_star / (q * 256.0), max_relative = 1e-9);
    }

    #[test]
    fn discrete_objective_near_leading_one() {
        let md = ReducedModel {
            a2: 0.0,
            ..model(2.0, 64)
        };
        let lead = find_critical_point(&md, Solver::Newton).unwrap();
        let (r, h) = find_discrete_critical_point(&md, lead.r_star, lead.h_star).unwrap();
        assert!((r / lead.r_star - 1.0).abs() < 0.05);
        assert!((h / lead.h_star - 1.0).abs() < 0.05);
        // gradient of the discrete objective against finite differences
        let (gr, gh) = grad_f1_discrete(&md, r * 1.01, h * 0.98);
        let e = 1e-6;
        let fr = (f1_discrete(&md, r * 1.01 * (1.0 + e), h * 0.98).unwrap()
            - f1_discrete(&md, r * 1.01 * (1.0 - e), h * 0.98).unwrap())
            / (2.0 * e * r * 1.01);
        let fh = (f1_discrete(&md, r * 1.01, h * 0.98 * (1.0 + e)).unwrap()
            - f1_discrete(&md, r * 1.01, h * 0.98 * (1.0 - e)).unwrap())
            / (2.0 * e * h * 0.98);
        assert_relative_eq!(gr, fr, max_relative = 1e-4);
        assert_relative_eq!(gh, fh, max_relative = 1e-4);
    }

    #[test]
    fn zero_strength_has_no_bound_term() {
        let prof = crate::ground_state::solve_ground_state(3, 3.0, 1e-10).unwrap();
        let cfg = build_config(16, 60.0, 0.3, 3).unwrap();
        let v = PotentialModel::new(0.0, 2.0).unwrap();
        let (t1, t2) = lk_bound_terms(&cfg, &prof, &v, 0.1).unwrap();
        assert_eq!(t1, 0.0);
        assert!(t2 > 0.0);
        assert!(lk_bound_terms(&cfg, &prof, &v, 2.5).is_err());
        // with a > 0, T1 r^m approaches a (∫U²)^{1/2}
        let v = PotentialModel::new(1.0, 2.0).unwrap();
        let (t1, _) = lk_bound_terms(&cfg, &prof, &v, 0.1).unwrap();
        let mass = crate::quadrature::radial_moment(&prof, 2.0).value.sqrt();
        assert_relative_eq!(t1 * 3600.0, mass, max_relative = 0.05);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn gradient_matches_finite_differences(ur in 0.0f64..1.0, uh in 0.0f64..1.0) {
            let md = model(2.0, 32);
            let bx = ParameterBox::standard(32, 2.0).unwrap();
            let r = bx.r_lo + ur * (bx.r_hi - bx.r_lo);
            let h = bx.h_lo + uh * (bx.h_hi - bx.h_lo);
            let (gr, gh) = md.grad(r, h);
            let (fr, fh) = fd_grad(&md, r, h);
            prop_assert!((gr - fr).abs() <= 1e-6 * gr.abs(), "r: {} vs {}", gr, fr);
            prop_assert!((gh - fh).abs() <= 1e-6 * gh.abs(), "h: {} vs {}", gh, fh);
        }
    }
}
