//! Radial spectra of the linearization `-Δ + 1 - pU^{p-1}` about the ground state.
//!
//! On spherical harmonics of degree `ℓ` the operator reduces to
//! `L_ℓ = -d²/ds² - (N-1)/s d/ds + ℓ(ℓ+N-2)/s² + 1 - pU^{p-1}`. With
//! `v = s^{(N-1)/2} u` this becomes `-v'' + W_ℓ v` where
//! `W_ℓ = (N-1)(N-3)/(4s²) + ℓ(ℓ+N-2)/s² + 1 - pU^{p-1}`, discretized by
//! central differences on `s_i = i h`, `h = R_D/(n+1)`, Dirichlet at both ends.
//! Eigenvalues come from Sturm-sequence bisection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ground_state::GroundStateProfile;

/// Lowest eigenvalues of one angular mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSpectrum {
    pub mode: usize,
    pub spacing: f64,
    pub domain_radius: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues of the whole discretization below zero.
    pub negative_count: usize,
}

pub const DEFAULT_DOMAIN_RADIUS: f64 = 25.0;
pub const DEFAULT_GRID: usize = 8000;

/// Symmetric tridiagonal matrix with constant off-diagonal.
#[derive(Debug, Clone)]
pub struct RadialOperator {
    diagonal: Vec<f64>,
    off: f64,
    radii: Vec<f64>,
    spacing: f64,
}

impl RadialOperator {
    pub fn new(profile: &GroundStateProfile, mode: usize, domain_radius: f64, n_grid: usize) -> Self {
        let spacing = domain_radius / (n_grid as f64 + 1.0);
        Self::with_spacing(profile, mode, spacing, n_grid)
    }

    /// `n_grid` interior points at the given spacing; the Dirichlet radius is `(n_grid+1) h`.
    pub fn with_spacing(profile: &GroundStateProfile, mode: usize, spacing: f64, n_grid: usize) -> Self {
        let n = profile.dimension() as f64;
        let p = profile.exponent();
        let l = mode as f64;
        let centrifugal = (n - 1.0) * (n - 3.0) / 4.0 + l * (l + n - 2.0);
        let inv_h2 = 1.0 / (spacing * spacing);
        let radii: Vec<f64> = (1..=n_grid).map(|i| i as f64 * spacing).collect();
        let diagonal = radii
            .iter()
            .map(|&s| {
                let u = profile.value(s);
                2.0 * inv_h2 + centrifugal / (s * s) + 1.0 - p * u.powf(p - 1.0)
            })
            .collect();
        Self {
            diagonal,
            off: -inv_h2,
            radii,
            spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off * self.off;
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.off.abs());
        let mut count = 0;
        let mut q = 1.0;
        for (i, &d) in self.diagonal.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - e2 / q };
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let r = 2.0 * self.off.abs();
        let lo = self.diagonal.iter().fold(f64::INFINITY, |m, &d| m.min(d - r));
        let hi = self.diagonal.iter().fold(f64::NEG_INFINITY, |m, &d| m.max(d + r));
        (lo, hi)
    }

    /// The `j`-th smallest eigenvalue (0-based), bisected to the resolution of `f64`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `T v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diagonal[i] * v[i];
                if i > 0 {
                    acc += self.off * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off * v[i + 1];
                }
                acc
            })
            .collect()
    }
}

fn check_grid(profile: &GroundStateProfile, count: usize, domain_radius: f64, n_grid: usize) -> Result<()> {
    if profile.dimension() < 2 {
        return Err(Error::InvalidParameter("radial mode decomposition needs N >= 2".into()));
    }
    if !(domain_radius >= 20.0) {
        return Err(Error::InvalidParameter(format!(
            "domain radius {domain_radius} below 20"
        )));
    }
    if n_grid < 1000 {
        return Err(Error::InvalidParameter(format!("grid size {n_grid} below 1000")));
    }
    if count == 0 || count > n_grid {
        return Err(Error::InsufficientGrid {
            requested: count,
            size: n_grid,
        });
    }
    Ok(())
}

/// Lowest `count` eigenvalues of `L_ℓ` on `[0, R_D]`.
pub fn mode_spectrum(
    profile: &GroundStateProfile,
    mode: usize,
    count: usize,
    domain_radius: f64,
    n_grid: usize,
) -> Result<ModeSpectrum> {
    check_grid(profile, count, domain_radius, n_grid)?;
    let op = RadialOperator::new(profile, mode, domain_radius, n_grid);
    Ok(spectrum_of(&op, mode, count, domain_radius))
}

fn spectrum_of(op: &RadialOperator, mode: usize, count: usize, domain_radius: f64) -> ModeSpectrum {
    let eigenvalues = (0..count).map(|j| op.eigenvalue(j)).collect();
    ModeSpectrum {
        mode,
        spacing: op.spacing(),
        domain_radius,
        eigenvalues,
        negative_count: op.count_below(0.0),
    }
}

/// Several modes at once, solved in parallel; output order follows `modes`.
pub fn mode_spectra(
    profile: &GroundStateProfile,
    modes: &[usize],
    count: usize,
    domain_radius: f64,
    n_grid: usize,
) -> Result<Vec<ModeSpectrum>> {
    modes
        .par_iter()
        .map(|&l| mode_spectrum(profile, l, count, domain_radius, n_grid))
        .collect()
}

/// `‖T_ℓ v‖ / ‖v‖` for `v_i = s_i^{(N-1)/2} U'(s_i)`.
pub fn mode_residual(profile: &GroundStateProfile, mode: usize, domain_radius: f64, n_grid: usize) -> f64 {
    let op = RadialOperator::new(profile, mode, domain_radius, n_grid);
    let half = (profile.dimension() as f64 - 1.0) / 2.0;
    let v: Vec<f64> = op
        .radii()
        .iter()
        .map(|&s| s.powf(half) * profile.derivative(s))
        .collect();
    let tv = op.apply(&v);
    let num: f64 = tv.iter().map(|x| x * x).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

/// Relative residual of the translation mode `U'` under the `ℓ = 1` operator.
pub fn kernel_eigenfunction_check(profile: &GroundStateProfile, domain_radius: f64, n_grid: usize) -> f64 {
    mode_residual(profile, 1, domain_radius, n_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::solve_ground_state;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn cubic3() -> &'static GroundStateProfile {
        static P: OnceLock<GroundStateProfile> = OnceLock::new();
        P.get_or_init(|| solve_ground_state(3, 3.0, 1e-10).unwrap())
    }

    /// Dense Jacobi eigenvalues as an independent oracle for small matrices.
    #[allow(clippy::needless_range_loop)]
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[i][j] * a[i][j];
                    }
                }
            }
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }

    #[test]
    fn sturm_bisection_matches_dense_oracle() {
        let diag: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let op = RadialOperator {
            diagonal: diag.clone(),
            off: -0.7,
            radii: vec![0.0; 12],
            spacing: 1.0,
        };
        let mut dense = vec![vec![0.0; 12]; 12];
        for i in 0..12 {
            dense[i][i] = diag[i];
            if i + 1 < 12 {
                dense[i][i + 1] = -0.7;
                dense[i + 1][i] = -0.7;
            }
        }
        let oracle = jacobi_eigenvalues(dense);
        for (j, ev) in oracle.iter().enumerate() {
            assert!(
                (op.eigenvalue(j) - ev).abs() < 1e-11,
                "{j}: {} vs {ev}",
                op.eigenvalue(j)
            );
        }
    }

    #[test]
    fn free_laplacian_eigenvalues() {
        // -v'' on (0, L) with Dirichlet: discrete eigenvalues (4/h²) sin²(jπ/(2(n+1))).
        let n = 50;
        let h = 0.1;
        let op = RadialOperator {
            diagonal: vec![2.0 / (h * h); n],
            off: -1.0 / (h * h),
            radii: vec![0.0; n],
            spacing: h,
        };
        for j in 0..5 {
            let theta = (j + 1) as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0));
            let exact = 4.0 / (h * h) * theta.sin().powi(2);
            assert!((op.eigenvalue(j) - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn translation_mode_is_near_kernel() {
        let s = mode_spectrum(cubic3(), 1, 2, DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID).unwrap();
        assert!(s.eigenvalues[0].abs() <= 1e-4, "{}", s.eigenvalues[0]);
        assert!(s.eigenvalues[1] > 0.0);
        let coarse = mode_spectrum(cubic3(), 1, 1, DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID / 2).unwrap();
        let ratio = coarse.eigenvalues[0] / s.eigenvalues[0];
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn radial_mode_has_one_negative_direction() {
        let s = mode_spectrum(cubic3(), 0, 2, DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID).unwrap();
        assert_eq!(s.negative_count, 1);
        assert!(s.eigenvalues[0] < 0.0 && s.eigenvalues[1] > 0.0);
    }

    #[test]
    fn higher_mode_is_positive() {
        let s = mode_spectrum(cubic3(), 2, 1, DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID).unwrap();
        assert!(s.eigenvalues[0] > 0.0);
        assert_eq!(s.negative_count, 0);
    }

    #[test]
    fn kernel_residual_small_and_second_order() {
        let r1 = kernel_eigenfunction_check(cubic3(), DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID);
        let r2 = kernel_eigenfunction_check(cubic3(), DEFAULT_DOMAIN_RADIUS, 2 * DEFAULT_GRID);
        assert!(r1 <= 1e-3, "{r1}");
        assert!(r1 >= 3.0 * r2, "{r1} vs {r2}");
        let wrong = mode_residual(cubic3(), 0, DEFAULT_DOMAIN_RADIUS, DEFAULT_GRID);
        assert!(wrong > 0.1, "{wrong}");
    }

    #[test]
    fn eigenvalues_increase_with_mode() {
        let spectra = mode_spectra(cubic3(), &[0, 1, 2, 3], 3, 25.0, 2000).unwrap();
        for pair in spectra.windows(2) {
            for (a, b) in pair[0].eigenvalues.iter().zip(&pair[1].eigenvalues) {
                assert!(a <= b);
            }
        }
        for s in &spectra {
            assert!(s.eigenvalues.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn bound_states_stable_in_domain_radius() {
        // Same spacing, Dirichlet radius 20 vs 30: bound eigenvalues (< 1) barely move.
        let h = 25.0 / 8001.0;
        for mode in [0, 1, 2] {
            let a = RadialOperator::with_spacing(cubic3(), mode, h, (20.0 / h) as usize);
            let b = RadialOperator::with_spacing(cubic3(), mode, h, (30.0 / h) as usize);
            let bound = a.count_below(1.0);
            for j in 0..bound {
                assert!((a.eigenvalue(j) - b.eigenvalue(j)).abs() <= 1e-6, "mode {mode} j {j}");
            }
        }
    }

    #[test]
    fn too_many_eigenvalues_rejected() {
        assert!(matches!(
            mode_spectrum(cubic3(), 0, 1001, 25.0, 1000),
            Err(Error::InsufficientGrid { .. })
        ));
        assert!(mode_spectrum(cubic3(), 0, 1, 10.0, 1000).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sturm_count_consistent_with_eigenvalues(mode in 0usize..4, x in -5.0f64..3.0) {
            let op = RadialOperator::new(cubic3(), mode, 25.0, 1000);
            let c = op.count_below(x);
            if c > 0 {
                prop_assert!(op.eigenvalue(c - 1) <= x + 1e-9);
            }
            prop_assert!(op.eigenvalue(c) >= x - 1e-9);
        }
    }
}
