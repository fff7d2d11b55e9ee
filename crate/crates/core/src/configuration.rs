//! Double-polygon bump configurations.
//!
//! Upper centers `x̄_j = (r√(1-h²) cos θ_j, r√(1-h²) sin θ_j, rh, 0, …)` with
//! `θ_j = 2(j-1)π/k`, lower centers their reflections in `y_3`. Only the first
//! three coordinates of a center can be nonzero, so centers are stored as
//! `[f64; 3]` and points in `R^N` as slices of length `N`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ground_state::GroundStateProfile;
use crate::summation::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct DoublePolygonConfig {
    k: usize,
    r: f64,
    h: f64,
    dimension: usize,
    upper: Vec<[f64; 3]>,
    lower: Vec<[f64; 3]>,
}

/// The admissible set `[(m/2π - β) k ln k, (m/2π + β) k ln k] × [(π(m+2)/m - α)/k, (π(m+2)/m + α)/k]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBox {
    pub k: usize,
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

/// Default half-widths as a fraction of the centers `m/2π` and `π(m+2)/m`.
pub const DEFAULT_RELATIVE_WIDTH: f64 = 0.9;

impl ParameterBox {
    pub fn new(k: usize, m: f64, alpha: f64, beta: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k = {k} below 2")));
        }
        if !(m > 0.0) || !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::InvalidParameter("m, α, β must be positive".into()));
        }
        let kf = k as f64;
        let r0 = m / (2.0 * PI);
        let h0 = PI * (m + 2.0) / m;
        let (r_lo, r_hi) = ((r0 - beta) * kf * kf.ln(), (r0 + beta) * kf * kf.ln());
        let (h_lo, h_hi) = ((h0 - alpha) / kf, (h0 + alpha) / kf);
        if !(r_lo > 0.0 && r_lo < r_hi) || !(h_lo > 0.0 && h_hi < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "empty or inadmissible box: r ∈ [{r_lo}, {r_hi}], h ∈ [{h_lo}, {h_hi}]"
            )));
        }
        Ok(Self {
            k,
            m,
            alpha,
            beta,
            r_lo,
            r_hi,
            h_lo,
            h_hi,
        })
    }

    /// Box with `β = width·m/2π` and `α = width·π(m+2)/m`.
    pub fn with_relative_width(k: usize, m: f64, width: f64) -> Result<Self> {
        Self::new(k, m, width * PI * (m + 2.0) / m, width * m / (2.0 * PI))
    }

    pub fn standard(k: usize, m: f64) -> Result<Self> {
        Self::with_relative_width(k, m, DEFAULT_RELATIVE_WIDTH)
    }

    /// Search box for small `k`, where the standard box leaves `0 < h < 1`:
    /// `r` within a factor 4 of `(m/2π) k ln k`, `h ∈ [0.02, 0.9]`. Not of the
    /// symmetric `α`, `β` form, so those fields are NaN.
    pub fn wide(k: usize, m: f64) -> Result<Self> {
        if k < 2 || !(m > 0.0) {
            return Err(Error::InvalidParameter(format!("k = {k}, m = {m}")));
        }
        let kf = k as f64;
        let r0 = m / (2.0 * PI) * kf * kf.ln();
        Ok(Self {
            k,
            m,
            alpha: f64::NAN,
            beta: f64::NAN,
            r_lo: 0.25 * r0,
            r_hi: 4.0 * r0,
            h_lo: 0.02,
            h_hi: 0.9,
        })
    }

    /// `((m/2π) k ln k, π(m+2)/(mk))`.
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.r_lo + self.r_hi), 0.5 * (self.h_lo + self.h_hi))
    }

    pub fn contains(&self, r: f64, h: f64) -> bool {
        (self.r_lo..=self.r_hi).contains(&r) && (self.h_lo..=self.h_hi).contains(&h)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.r_lo, self.h_lo),
            (self.r_lo, self.h_hi),
            (self.r_hi, self.h_lo),
            (self.r_hi, self.h_hi),
        ]
    }

    /// Same center, half-widths scaled by `factor`, clipped to `r > 0`, `0 < h < 1`.
    pub fn inflated_contains(&self, factor: f64, r: f64, h: f64) -> bool {
        let (rc, hc) = self.center();
        let rw = 0.5 * (self.r_hi - self.r_lo) * factor;
        let hw = 0.5 * (self.h_hi - self.h_lo) * factor;
        r > 0.0 && h > 0.0 && h < 1.0 && (r - rc).abs() <= rw && (h - hc).abs() <= hw
    }
}

/// Builds the `2k` centers.
pub fn build_config(k: usize, r: f64, h: f64, dimension: usize) -> Result<DoublePolygonConfig> {
    if k < 2 {
        return Err(Error::Configuration(format!("k = {k} below 2")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Configuration(format!("radius r = {r} must be positive")));
    }
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::Configuration(format!("height h = {h} outside (0, 1)")));
    }
    if dimension < 3 {
        return Err(Error::Configuration(format!(
            "dimension {dimension} below 3; the construction needs the y_3 axis"
        )));
    }
    Ok(DoublePolygonConfig::assemble(k, r, h, dimension, true))
}

impl DoublePolygonConfig {
    fn assemble(k: usize, r: f64, h: f64, dimension: usize, with_lower: bool) -> Self {
        let planar = r * (1.0 - h * h).sqrt();
        let upper: Vec<[f64; 3]> = (0..k)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / k as f64;
                [planar * theta.cos(), planar * theta.sin(), r * h]
            })
            .collect();
        let lower = if with_lower {
            upper.iter().map(|c| [c[0], c[1], -c[2]]).collect()
        } else {
            Vec::new()
        };
        Self {
            k,
            r,
            h,
            dimension,
            upper,
            lower,
        }
    }

    /// One bump at `(r, 0, 0)` with no lower copy: `k = 1`, `h = 0`.
    /// Only meant for checking quadrature against single-bump identities.
    pub fn isolated_bump(r: f64, dimension: usize) -> Self {
        Self::assemble(1, r, 0.0, dimension, false)
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn upper(&self) -> &[[f64; 3]] {
        &self.upper
    }
    pub fn lower(&self) -> &[[f64; 3]] {
        &self.lower
    }
    pub fn centers(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.upper.iter().chain(self.lower.iter())
    }
    pub fn has_lower(&self) -> bool {
        !self.lower.is_empty()
    }

    /// `|x̄_j - x̄_1| = 2r√(1-h²)|sin((j-1)π/k)|`, `j` 1-based.
    pub fn same_distance(&self, j: usize) -> f64 {
        2.0 * self.r * (1.0 - self.h * self.h).sqrt() * ((j as f64 - 1.0) * PI / self.k as f64).sin().abs()
    }

    /// `|x̱_j - x̄_1| = 2r√((1-h²) sin²((j-1)π/k) + h²)`.
    pub fn cross_distance(&self, j: usize) -> f64 {
        let s = ((j as f64 - 1.0) * PI / self.k as f64).sin();
        2.0 * self.r * ((1.0 - self.h * self.h) * s * s + self.h * self.h).sqrt()
    }

    /// Smallest distance between two distinct centers.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        if self.k >= 2 {
            best = best.min(self.same_distance(2));
        }
        if self.has_lower() {
            best = best.min(self.cross_distance(1));
        }
        best
    }

    /// Distance table over the `2k` centers (upper first), from coordinates.
    pub fn distance_table(&self) -> Vec<Vec<f64>> {
        let all: Vec<&[f64; 3]> = self.centers().collect();
        all.iter()
            .map(|a| all.iter().map(|b| distance3(a, b)).collect())
            .collect()
    }
}

#[inline]
fn distance3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `|y - c|` for a point in `R^N` and a center with zero coordinates past the third.
#[inline]
pub fn distance_to(y: &[f64], c: &[f64; 3]) -> f64 {
    let mut acc = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let ci = if i < 3 { c[i] } else { 0.0 };
        acc += (yi - ci) * (yi - ci);
    }
    acc.sqrt()
}

/// `W(y) = Σ_j U(|y - x̄_j|) + U(|y - x̱_j|)`.
pub fn eval_w(config: &DoublePolygonConfig, profile: &GroundStateProfile, y: &[f64]) -> f64 {
    assert_eq!(y.len(), config.dimension, "point dimension mismatch");
    let mut acc = CompensatedSum::new();
    for c in config.centers() {
        acc.add(profile.value(distance_to(y, c)));
    }
    acc.value()
}

/// Planar angle of `y` in `(-π, π]`; the origin of the plane maps to 0.
fn planar_angle(y: &[f64]) -> f64 {
    if y[0] == 0.0 && y[1] == 0.0 {
        0.0
    } else {
        y[1].atan2(y[0])
    }
}

/// 0-based index of the sector containing `y`: sector `j` is
/// `|θ - 2πj/k| ≤ π/k`, with shared boundaries going to the lower index.
pub fn cell_index(config: &DoublePolygonConfig, y: &[f64]) -> usize {
    let k = config.k as f64;
    let in_first = |y0: f64, y1: f64| {
        let rho = y0.hypot(y1);
        rho == 0.0 || y0 / rho >= (PI / k).cos()
    };
    if in_first(y[0], y[1]) {
        return 0;
    }
    let mut u = planar_angle(y) * k / (2.0 * PI);
    if u < 0.0 {
        u += k;
    }
    let j = (u - 0.5).ceil();
    (j.max(1.0) as usize).min(config.k - 1)
}

/// Membership of `Ω₁⁺`: first sector and `y_3 ≥ 0`.
pub fn in_cell(config: &DoublePolygonConfig, y: &[f64]) -> bool {
    let rho = y[0].hypot(y[1]);
    let angular = rho == 0.0 || y[0] / rho >= (PI / config.k as f64).cos();
    angular && y[2] >= 0.0
}

/// Rotation by angle `phi` about the `y_3` axis.
pub fn rotate(y: &[f64], phi: f64) -> Vec<f64> {
    let (s, c) = phi.sin_cos();
    let mut out = y.to_vec();
    out[0] = c * y[0] - s * y[1];
    out[1] = s * y[0] + c * y[1];
    out
}

/// Exact sums `(Σ_{i=2}^k B1 e^{-|x̄_1 - x̄_i|}, Σ_{j=1}^k B1 e^{-|x̱_j - x̄_1|})`.
pub fn interaction_sums(config: &DoublePolygonConfig, b1: f64) -> (f64, f64) {
    let mut same = CompensatedSum::new();
    let mut cross = CompensatedSum::new();
    for j in 1..=config.k {
        if j >= 2 {
            same.add((-config.same_distance(j)).exp());
        }
        cross.add((-config.cross_distance(j)).exp());
    }
    (b1 * same.value(), b1 * cross.value())
}

/// Leading forms `(2B1 e^{-2π√(1-h²) r/k}, B1 e^{-2rh})`.
pub fn interaction_leading_terms(config: &DoublePolygonConfig, b1: f64) -> (f64, f64) {
    let (r, h, k) = (config.r, config.h, config.k as f64);
    (
        2.0 * b1 * (-2.0 * PI * (1.0 - h * h).sqrt() * r / k).exp(),
        b1 * (-2.0 * r * h).exp(),
    )
}

/// Worst ratios of the neighbor sums to their exponential bounds over the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBounds {
    /// `Σ_{j≥2} U_{x̄_j}(y) / (e^{-η√(1-h²) rπ/k} e^{-(1-η)|y - x̄_1|})`.
    pub same: f64,
    /// `Σ_{j≥2} U_{x̱_j}(y)` against the same bound.
    pub cross: f64,
    /// `U_{x̱_1}(y) / (e^{-η h r} e^{-(1-η)|y - x̄_1|})`.
    pub mirror: f64,
}

impl TailBounds {
    pub fn worst(&self) -> f64 {
        self.same.max(self.cross).max(self.mirror)
    }
}

pub fn tail_bound_check(
    config: &DoublePolygonConfig,
    profile: &GroundStateProfile,
    eta: f64,
    samples: &[Vec<f64>],
) -> Result<TailBounds> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("η = {eta} outside (0, 1]")));
    }
    let (r, h, k) = (config.r, config.h, config.k as f64);
    let planar_scale = -eta * (1.0 - h * h).sqrt() * r * PI / k;
    let mirror_scale = -eta * h * r;
    let mut out = TailBounds {
        same: 0.0,
        cross: 0.0,
        mirror: 0.0,
    };
    for y in samples {
        let d1 = distance_to(y, &config.upper[0]);
        // Work with logarithms; the bounds underflow for large r.
        let log_decay = -(1.0 - eta) * d1;
        let mut same = CompensatedSum::new();
        let mut cross = CompensatedSum::new();
        for j in 1..config.k {
            same.add(profile.value(distance_to(y, &config.upper[j])));
            cross.add(profile.value(distance_to(y, &config.lower[j])));
        }
        let mirror = profile.value(distance_to(y, &config.lower[0]));
        let ratio = |v: f64, log_bound: f64| (v.ln() - log_bound).exp();
        out.same = out.same.max(ratio(same.value(), planar_scale + log_decay));
        out.cross = out.cross.max(ratio(cross.value(), planar_scale + log_decay));
        out.mirror = out.mirror.max(ratio(mirror, mirror_scale + log_decay));
    }
    Ok(out)
}

/// Deterministic sample points of `Ω₁⁺`: a cylindrical lattice around `x̄_1`
/// plus the center itself and points on the cell's boundary.
pub fn cell_samples(config: &DoublePolygonConfig) -> Vec<Vec<f64>> {
    let (r, h, k) = (config.r, config.h, config.k as f64);
    let rho0 = r * (1.0 - h * h).sqrt();
    let half = PI / k;
    let mut out = Vec::new();
    let mut push = |rho: f64, phi: f64, y3: f64| {
        let mut y = vec![0.0; config.dimension];
        y[0] = rho * phi.cos();
        y[1] = rho * phi.sin();
        y[2] = y3;
        out.push(y);
    };
    push(rho0, 0.0, r * h);
    for rho_f in [0.5, 0.9, 1.0, 1.1, 1.5] {
        for phi_f in [-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0] {
            for y3 in [0.0, 0.5 * r * h, r * h, 2.0 * r * h, r * h + 5.0] {
                push(rho0 * rho_f, phi_f * half, y3);
            }
        }
    }
    out
}
