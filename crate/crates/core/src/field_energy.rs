//! Direct quadrature of `I(W) = ½∫(|∇W|² + V W²) − 1/(p+1) ∫W^{p+1}` for the
//! double-polygon superposition in `R³`, split as `I = 𝕀₁ + 𝕀₂ + 𝕀₃` with
//! `𝕀₁ = ½∫(|∇W|² + W²)`, `𝕀₂ = ½∫(V − 1)W²`, `𝕀₃ = −1/(p+1)∫W^{p+1}`.
//!
//! The integral runs over the half sector `Ω₁⁺` in cylindrical coordinates
//! `(ρ, φ, y₃)`, restricted to a box of half-width `L` around `x̄₁`, and is
//! multiplied by `2k`. Inside `Ω₁⁺` the nearest center is always `x̄₁`, so the
//! box loses only the far tails of every bump.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::configuration::DoublePolygonConfig;
use crate::error::{Error, Result};
use crate::ground_state::GroundStateProfile;
use crate::integrate::{composite_gauss_legendre, Estimate};
use crate::potential::PotentialModel;
use crate::quadrature::{interaction_constants, pair_interaction, radial_moment, InteractionConstants};
use crate::reduced_energy::ReducedModel;
use crate::summation::CompensatedSum;

/// Smallest admissible center separation.
pub const MIN_SEPARATION: f64 = 3.0;
/// Centers farther than this from `x̄₁` are dropped before quadrature.
const CENTER_CULL: f64 = 60.0;
/// Per-point cutoff: `U(35)/U(0)` is below `1e-16`.
const POINT_CULL: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Panel width of the coarse pass; the reported value uses half of it.
    pub panel_width: f64,
    /// Gauss–Legendre points per panel and direction.
    pub order: usize,
    /// Half-width of the box around `x̄₁`.
    pub box_half_width: f64,
    /// Integrate over both halves of `Ω₁` and multiply by `k` instead.
    pub full_cell: bool,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            panel_width: 1.0,
            order: 8,
            box_half_width: 14.0,
            full_cell: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub k: usize,
    pub r: f64,
    pub h: f64,
    pub a: f64,
    pub m: f64,
    pub i_numeric: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// `k(A1/rᵐ + A2 − 2B1 e^{−2π√(1−h²)r/k} − B1 e^{−2rh})`.
    pub i_expansion: f64,
    /// `k A1/rᵐ`
    pub term_potential: f64,
    /// `k A2`
    pub term_self: f64,
    /// `−2k B1 e^{−2π√(1−h²)r/k}`
    pub term_same: f64,
    /// `−k B1 e^{−2rh}`
    pub term_cross: f64,
    /// `|I_fine − I_coarse|`.
    pub error_estimate: f64,
    pub constants: InteractionConstants,
}

impl EnergyReport {
    pub fn relative_error(&self) -> f64 {
        self.error_estimate / self.i_numeric.abs()
    }

    /// `I1 + I2 + I3 − I_numeric`; zero up to rounding.
    pub fn decomposition_defect(&self) -> f64 {
        self.i1 + self.i2 + self.i3 - self.i_numeric
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionGap {
    /// `(I_numeric − I_expansion)/k`
    pub per_bump_gap: f64,
    /// `(I_numeric − kA2 − 𝕀₂) / (k(−2B1 e^{…} − B1 e^{−2rh}))`
    pub interaction_ratio: f64,
    /// `I_numeric/k − A1/rᵐ − A2`
    pub numeric_interaction: f64,
    /// `−2B1 e^{…} − B1 e^{−2rh}`
    pub predicted_interaction: f64,
    /// `numeric_interaction / predicted_interaction`
    pub magnitude_ratio: f64,
    /// `𝕀₂ rᵐ / (k A1)`
    pub potential_ratio: f64,
}

/// Per-term comparison of a report with the reduced expansion.
pub fn expansion_gap(report: &EnergyReport, model: &ReducedModel, config: &DoublePolygonConfig) -> ExpansionGap {
    let k = config.k() as f64;
    let (r, h) = (config.r(), config.h());
    let q = (1.0 - h * h).sqrt();
    let predicted = -2.0 * model.b1 * (-2.0 * PI * q * r / k).exp() - model.b1 * (-2.0 * r * h).exp();
    let expansion = k * (model.a1 * r.powf(-model.m) + model.a2 + predicted);
    let numeric_interaction = report.i_numeric / k - model.a1 * r.powf(-model.m) - model.a2;
    let interaction_ratio = (report.i_numeric - k * model.a2 - report.i2) / (k * predicted);
    ExpansionGap {
        per_bump_gap: (report.i_numeric - expansion) / k,
        interaction_ratio,
        numeric_interaction,
        predicted_interaction: predicted,
        magnitude_ratio: numeric_interaction / predicted,
        potential_ratio: report.i2 * r.powf(model.m) / (k * model.a1),
    }
}

struct Region {
    rho: (f64, f64),
    phi_half: f64,
    z: (f64, f64),
    /// Copies of the region that tile `R³`.
    multiplicity: f64,
}

fn region(config: &DoublePolygonConfig, opts: &GridOptions) -> Region {
    let l = opts.box_half_width;
    let k = config.k() as f64;
    let rho0 = config.r() * (1.0 - config.h() * config.h()).sqrt();
    let z0 = config.r() * config.h();
    let mut phi_half = PI / k;
    if rho0 > l {
        phi_half = phi_half.min((l / rho0).asin());
    }
    let rho = ((rho0 - l).max(0.0), rho0 + l);
    let (z, multiplicity) = if !config.has_lower() {
        ((z0 - l, z0 + l), k)
    } else if opts.full_cell {
        ((-(z0 + l), z0 + l), k)
    } else {
        (((z0 - l).max(0.0), z0 + l), 2.0 * k)
    };
    Region {
        rho,
        phi_half,
        z,
        multiplicity,
    }
}

fn panels(len: f64, width: f64) -> usize {
    ((len / width).ceil() as usize).max(1)
}

#[derive(Default, Clone, Copy)]
struct Pieces {
    i1: CompensatedSum,
    i2: CompensatedSum,
    i3: CompensatedSum,
}

fn integrate_pieces(
    centers: &[[f64; 3]],
    profile: &GroundStateProfile,
    potential: &PotentialModel,
    reg: &Region,
    width: f64,
    order: usize,
) -> [f64; 3] {
    let p = profile.exponent();
    let n_rho = panels(reg.rho.1 - reg.rho.0, width);
    let rho_step = (reg.rho.1 - reg.rho.0) / n_rho as f64;
    let (zn, zw) = composite_gauss_legendre(reg.z.0, reg.z.1, panels(reg.z.1 - reg.z.0, width), order);
    let cut2 = POINT_CULL * POINT_CULL;

    let per_panel: Vec<Pieces> = (0..n_rho)
        .into_par_iter()
        .map(|ip| {
            let lo = reg.rho.0 + ip as f64 * rho_step;
            let (rn, rw) = composite_gauss_legendre(lo, lo + rho_step, 1, order);
            let mut acc = Pieces::default();
            for (&rho, &wr) in rn.iter().zip(&rw) {
                let n_phi = panels(2.0 * reg.phi_half * rho, width);
                let (pn, pw) = composite_gauss_legendre(-reg.phi_half, reg.phi_half, n_phi, order);
                for (&phi, &wp) in pn.iter().zip(&pw) {
                    let (s, c) = phi.sin_cos();
                    let (x, y) = (rho * c, rho * s);
                    for (&z, &wz) in zn.iter().zip(&zw) {
                        let mut w = 0.0;
                        let mut g = [0.0f64; 3];
                        for ctr in centers {
                            let d = [x - ctr[0], y - ctr[1], z - ctr[2]];
                            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                            if d2 > cut2 {
                                continue;
                            }
                            let dist = d2.sqrt();
                            w += profile.value(dist);
                            if dist > 0.0 {
                                let f = profile.derivative(dist) / dist;
                                g[0] += f * d[0];
                                g[1] += f * d[1];
                                g[2] += f * d[2];
                            }
                        }
                        let weight = wr * wp * wz * rho;
                        let w2 = w * w;
                        let grad2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                        let norm = (rho * rho + z * z).sqrt();
                        acc.i1.add(weight * 0.5 * (grad2 + w2));
                        acc.i2.add(weight * 0.5 * potential.excess(norm) * w2);
                        acc.i3.add(-weight * w.powf(p + 1.0) / (p + 1.0));
                    }
                }
            }
            acc
        })
        .collect();

    let mut total = Pieces::default();
    for piece in &per_panel {
        total.i1.merge(&piece.i1);
        total.i2.merge(&piece.i2);
        total.i3.merge(&piece.i3);
    }
    [
        reg.multiplicity * total.i1.value(),
        reg.multiplicity * total.i2.value(),
        reg.multiplicity * total.i3.value(),
    ]
}

fn check_inputs(config: &DoublePolygonConfig, profile: &GroundStateProfile) -> Result<()> {
    if profile.dimension() != 3 || config.dimension() != 3 {
        return Err(Error::InvalidParameter(format!(
            "field quadrature needs N = 3, got profile N = {} and config N = {}",
            profile.dimension(),
            config.dimension()
        )));
    }
    let sep = config.min_separation();
    if sep < MIN_SEPARATION {
        return Err(Error::Configuration(format!(
            "centers {sep:.3} apart; need at least {MIN_SEPARATION}"
        )));
    }
    Ok(())
}

/// `I(W)` with its three pieces and the expansion terms.
pub fn energy_numeric(
    config: &DoublePolygonConfig,
    profile: &GroundStateProfile,
    potential: &PotentialModel,
    opts: &GridOptions,
) -> Result<EnergyReport> {
    check_inputs(config, profile)?;
    if !(opts.panel_width > 0.0) || opts.order < 2 || !(opts.box_half_width > 0.0) {
        return Err(Error::InvalidParameter("bad grid options".into()));
    }
    let first = config.upper()[0];
    let centers: Vec<[f64; 3]> = config
        .centers()
        .filter(|c| {
            let d = [c[0] - first[0], c[1] - first[1], c[2] - first[2]];
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() <= CENTER_CULL
        })
        .copied()
        .collect();
    let reg = region(config, opts);
    let coarse = integrate_pieces(&centers, profile, potential, &reg, opts.panel_width, opts.order);
    let fine = integrate_pieces(&centers, profile, potential, &reg, 0.5 * opts.panel_width, opts.order);
    let total = |v: &[f64; 3]| {
        let mut s = CompensatedSum::new();
        v.iter().for_each(|&x| s.add(x));
        s.value()
    };
    let i_numeric = total(&fine);

    let constants = interaction_constants(profile, potential.a);
    let k = config.k() as f64;
    let (r, h) = (config.r(), config.h());
    let term_potential = k * constants.a1 * r.powf(-potential.m);
    let term_self = k * constants.a2;
    let (term_same, term_cross) = if config.has_lower() {
        let q = (1.0 - h * h).sqrt();
        (
            -2.0 * k * constants.b1 * (-2.0 * PI * q * r / k).exp(),
            -k * constants.b1 * (-2.0 * r * h).exp(),
        )
    } else {
        (0.0, 0.0)
    };
    Ok(EnergyReport {
        k: config.k(),
        r,
        h,
        a: potential.a,
        m: potential.m,
        i_numeric,
        i1: fine[0],
        i2: fine[1],
        i3: fine[2],
        i_expansion: term_potential + term_self + term_same + term_cross,
        term_potential,
        term_self,
        term_same,
        term_cross,
        error_estimate: (i_numeric - total(&coarse)).abs(),
        constants,
    })
}

/// `Σ_{j≠1} ∫U^p(z − c₁) U(z − c_j)` over the other centers, each pair term
/// by exact two-center quadrature.
pub fn pair_sum(config: &DoublePolygonConfig, profile: &GroundStateProfile) -> Estimate {
    let first = config.upper()[0];
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    let mut intervals = 0;
    for c in config.centers().skip(1) {
        let d = ((c[0] - first[0]).powi(2) + (c[1] - first[1]).powi(2) + (c[2] - first[2]).powi(2)).sqrt();
        let e = pair_interaction(profile, d);
        value.add(e.value);
        error += e.error;
        intervals += e.intervals;
    }
    Estimate {
        value: value.value(),
        error,
        intervals,
    }
}

/// Closed form of `𝕀₁`: `½ n (∫U^{p+1} + Σ_{j≠1} ∫U^p_{c₁} U_{c_j})` for `n`
/// equivalent centers, using `−ΔU + U = U^p`.
pub fn i1_closed_form(config: &DoublePolygonConfig, profile: &GroundStateProfile) -> f64 {
    let n = config.centers().count() as f64;
    let own = radial_moment(profile, profile.exponent() + 1.0).value;
    0.5 * n * (own + pair_sum(config, profile).value)
}

/// `2k × ((½ − 1/(p+1))∫U^{p+1}) − k Σ_{j≠1} pair terms`: the energy of `W`
/// at `V ≡ 1` through first order in the overlaps.
pub fn unperturbed_prediction(config: &DoublePolygonConfig, profile: &GroundStateProfile) -> f64 {
    let p = profile.exponent();
    let n = config.centers().count() as f64;
    let single = (0.5 - 1.0 / (p + 1.0)) * radial_moment(profile, p + 1.0).value;
    n * single - 0.5 * n * pair_sum(config, profile).value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::build_config;
    use crate::ground_state::solve_ground_state;
    use std::sync::OnceLock;

    fn profile() -> &'static GroundStateProfile {
        static P: OnceLock<GroundStateProfile> = OnceLock::new();
        P.get_or_init(|| solve_ground_state(3, 3.0, 1e-10).unwrap())
    }

    fn coarse_opts() -> GridOptions {
        GridOptions {
            panel_width: 2.0,
            ..GridOptions::default()
        }
    }

    #[test]
    fn isolated_bump_matches_moment() {
        let u = profile();
        let cfg = DoublePolygonConfig::isolated_bump(30.0, 3);
        let free = PotentialModel::new(0.0, 2.0).unwrap();
        let rep = energy_numeric(&cfg, u, &free, &GridOptions::default()).unwrap();
        let oracle = 0.25 * radial_moment(u, 4.0).value;
        assert!(
            (rep.i_numeric / oracle - 1.0).abs() < 1e-5,
            "{} vs {oracle}",
            rep.i_numeric
        );
        assert_eq!(rep.i2, 0.0);
        // Single bump: 𝕀₁ = ½∫U^{p+1}.
        assert!((rep.i1 / (0.5 * radial_moment(u, 4.0).value) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn refinement_within_estimate() {
        let u = profile();
        let cfg = DoublePolygonConfig::isolated_bump(30.0, 3);
        let free = PotentialModel::new(0.0, 2.0).unwrap();
        let a = energy_numeric(&cfg, u, &free, &coarse_opts()).unwrap();
        let b = energy_numeric(&cfg, u, &free, &GridOptions::default()).unwrap();
        assert!((a.i_numeric - b.i_numeric).abs() < a.error_estimate);
        assert!(b.error_estimate < a.error_estimate);
    }

    #[test]
    fn polygon_pieces_and_closed_form() {
        let u = profile();
        let cfg = build_config(6, 14.0, 0.3, 3).unwrap();
        let pot = PotentialModel::new(1.0, 2.0).unwrap();
        let rep = energy_numeric(&cfg, u, &pot, &coarse_opts()).unwrap();
        assert!(rep.decomposition_defect().abs() < 1e-12 * rep.i_numeric.abs());
        let closed = i1_closed_form(&cfg, u);
        // Panel 1 resolves the cell to about 1e-6; panel 0.25 agrees to 1e-13.
        assert!((rep.i1 / closed - 1.0).abs() < 1e-5, "{} vs {closed}", rep.i1);
        assert!(rep.i2 > 0.0 && rep.i3 < 0.0);

        let free = PotentialModel::new(0.0, 2.0).unwrap();
        let rep0 = energy_numeric(&cfg, u, &free, &coarse_opts()).unwrap();
        assert_eq!(rep0.i2, 0.0);
        let pred = unperturbed_prediction(&cfg, u);
        assert!((rep0.i_numeric / pred - 1.0).abs() < 1e-4);
        // Attractive overlap lowers the energy below 2k isolated bumps.
        assert!(rep0.i_numeric < 2.0 * 6.0 * 0.25 * radial_moment(u, 4.0).value);
    }

    #[test]
    fn half_cell_equals_full_cell() {
        let u = profile();
        let cfg = build_config(5, 12.0, 0.25, 3).unwrap();
        let pot = PotentialModel::new(1.0, 2.0).unwrap();
        let half = energy_numeric(&cfg, u, &pot, &coarse_opts()).unwrap();
        let full_opts = GridOptions {
            full_cell: true,
            ..coarse_opts()
        };
        let full = energy_numeric(&cfg, u, &pot, &full_opts).unwrap();
        assert!((half.i_numeric / full.i_numeric - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let u = profile();
        let pot = PotentialModel::new(1.0, 2.0).unwrap();
        let tight = build_config(8, 2.0, 0.5, 3).unwrap();
        assert!(matches!(
            energy_numeric(&tight, u, &pot, &coarse_opts()),
            Err(Error::Configuration(_))
        ));
        let u4 = solve_ground_state(4, 2.0, 1e-10).unwrap();
        let cfg4 = build_config(6, 14.0, 0.3, 4).unwrap();
        assert!(energy_numeric(&cfg4, &u4, &pot, &coarse_opts()).is_err());
    }

    #[test]
    fn expansion_terms_signs() {
        let u = profile();
        let cfg = build_config(6, 14.0, 0.3, 3).unwrap();
        let pot = PotentialModel::new(1.0, 2.0).unwrap();
        let rep = energy_numeric(&cfg, u, &pot, &coarse_opts()).unwrap();
        let c = rep.constants;
        let model = ReducedModel::new(c.a1, c.a2, c.b1, 2.0, 6).unwrap();
        let gap = expansion_gap(&rep, &model, &cfg);
        assert!(rep.term_same < 0.0 && rep.term_cross < 0.0);
        assert!(gap.predicted_interaction < 0.0);
        assert!(gap.numeric_interaction < 0.0);
        assert!((rep.i_expansion - rep.term_potential - rep.term_self - rep.term_same - rep.term_cross).abs() < 1e-9);
    }
}
