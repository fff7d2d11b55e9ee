//! Subcommands other than `validate`. Each returns its report as text.

use std::fmt::Write as _;

use multibump::configuration::{build_config, DoublePolygonConfig};
use multibump::field_energy::{energy_numeric, expansion_gap, EnergyReport, GridOptions};
use multibump::ground_state::{solve_ground_state, solve_ground_state_cached, GroundStateProfile};
use multibump::potential::PotentialModel;
use multibump::quadrature::{constant_b1, interaction_constants, pair_interaction};
use multibump::reduced_energy::{critical_sweep, find_critical_point, scaling_report, ReducedModel};
use multibump::spectral::mode_spectra;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

type Row = Map<String, Value>;

/// Rows as CSV with a header, or one JSON object per line.
pub fn render_rows(rows: &[Row], format: Format) -> String {
    let mut s = String::new();
    match format {
        Format::Json => {
            for r in rows {
                let _ = writeln!(s, "{}", Value::Object(r.clone()));
            }
        }
        Format::Csv => {
            if let Some(first) = rows.first() {
                let _ = writeln!(s, "{}", first.keys().cloned().collect::<Vec<_>>().join(","));
            }
            for r in rows {
                let cells: Vec<String> = r
                    .values()
                    .map(|v| match v {
                        Value::String(t) => t.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                let _ = writeln!(s, "{}", cells.join(","));
            }
        }
    }
    s
}

fn row(pairs: Vec<(&str, Value)>) -> Row {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

pub fn load_profile(cfg: &RunConfig) -> Result<GroundStateProfile, CliError> {
    Ok(match cfg.resolved_cache_dir() {
        Some(dir) => solve_ground_state_cached(cfg.dimension, cfg.p, cfg.tol, &dir)?,
        None => solve_ground_state(cfg.dimension, cfg.p, cfg.tol)?,
    })
}

fn model_for(cfg: &RunConfig, profile: &GroundStateProfile, k: usize) -> Result<ReducedModel, CliError> {
    let c = interaction_constants(profile, cfg.a);
    Ok(ReducedModel::from_constants(&c, cfg.m, k)?)
}

/// `(r, h)` from the config, or the critical point for `k`.
fn placement(cfg: &RunConfig, model: &ReducedModel) -> Result<(f64, f64), CliError> {
    match (cfg.r, cfg.h) {
        (Some(r), Some(h)) => Ok((r, h)),
        (None, None) => {
            let cp = find_critical_point(model, cfg.solver)?;
            Ok((cp.r_star, cp.h_star))
        }
        _ => Err(CliError::Usage("give both r and h or neither".into())),
    }
}

/// Profile summary; with `format = csv` the sampled profile `(s, U, U')` instead.
pub fn ground(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    if cfg.format == Format::Csv {
        let n = (u.match_radius() / 0.05).round() as usize;
        let rows: Vec<Row> = (0..=n)
            .map(|i| {
                let s = i as f64 * 0.05;
                row(vec![
                    ("s", json!(s)),
                    ("U", json!(u.value(s))),
                    ("dU", json!(u.derivative(s))),
                ])
            })
            .collect();
        return Ok(render_rows(&rows, Format::Csv));
    }
    let summary = row(vec![
        ("N", json!(u.dimension())),
        ("p", json!(u.exponent())),
        ("tol", json!(u.tolerance())),
        ("U0", json!(u.shoot_value())),
        ("tail_constant", json!(u.tail_constant())),
        ("residual", json!(u.residual_norm())),
        ("match_radius", json!(u.match_radius())),
        ("junction_radius", json!(u.junction_radius())),
        ("grid_points", json!(u.radii().len())),
    ]);
    Ok(render_rows(&[summary], Format::Json))
}

pub fn constants(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    let c = interaction_constants(&u, cfg.a);
    let out = row(vec![
        ("N", json!(cfg.dimension)),
        ("p", json!(cfg.p)),
        ("a", json!(cfg.a)),
        ("A1", json!(c.a1)),
        ("A2", json!(c.a2)),
        ("B1", json!(c.b1)),
        ("relative_error_estimate", json!(c.error_estimate)),
    ]);
    Ok(render_rows(&[out], Format::Json))
}

pub fn interaction(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    let b1 = constant_b1(&u).value;
    let rows: Vec<Row> = cfg
        .d_list
        .iter()
        .map(|&d| {
            let e = pair_interaction(&u, d);
            row(vec![
                ("d", json!(d)),
                ("integral", json!(e.value)),
                ("error_estimate", json!(e.error)),
                ("ratio_to_asymptotic", json!(e.value / (b1 * (-d).exp()))),
                ("ratio_to_profile", json!(e.value / (b1 * u.value(d)))),
            ])
        })
        .collect();
    Ok(render_rows(&rows, cfg.format))
}

fn config_for(cfg: &RunConfig) -> Result<DoublePolygonConfig, CliError> {
    let (r, h) = match (cfg.r, cfg.h) {
        (Some(r), Some(h)) => (r, h),
        _ => {
            let u = load_profile(cfg)?;
            placement(cfg, &model_for(cfg, &u, cfg.k)?)?
        }
    };
    Ok(build_config(cfg.k, r, h, cfg.dimension)?)
}

/// Centers, a blank line, then the distance table.
pub fn config(cfg: &RunConfig) -> Result<String, CliError> {
    let c = config_for(cfg)?;
    let k = c.k();
    let centers: Vec<Row> = c
        .centers()
        .enumerate()
        .map(|(i, x)| {
            row(vec![
                ("index", json!(i % k + 1)),
                ("sheet", json!(if i < k { "upper" } else { "lower" })),
                ("x1", json!(x[0])),
                ("x2", json!(x[1])),
                ("x3", json!(x[2])),
            ])
        })
        .collect();
    let mut s = render_rows(&centers, cfg.format);
    if cfg.format == Format::Csv {
        s.push('\n');
    }
    let names: Vec<String> = (0..2 * k)
        .map(|i| format!("{}{}", if i < k { "u" } else { "l" }, i % k + 1))
        .collect();
    let table: Vec<Row> = c
        .distance_table()
        .into_iter()
        .enumerate()
        .map(|(i, dists)| {
            let mut r = row(vec![("center", json!(names[i]))]);
            for (j, d) in dists.into_iter().enumerate() {
                r.insert(names[j].clone(), json!(d));
            }
            r
        })
        .collect();
    s.push_str(&render_rows(&table, cfg.format));
    Ok(s)
}

pub fn critical(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    let base = model_for(cfg, &u, cfg.k_list.first().copied().unwrap_or(cfg.k))?;
    let sweep = critical_sweep(&base, &cfg.k_list, cfg.solver)?;
    let rows: Vec<Row> = sweep
        .iter()
        .map(|(model, cp)| {
            let kf = model.k as f64;
            let (hk, gk) = scaling_report(cp, model);
            row(vec![
                ("k", json!(model.k)),
                ("r_star", json!(cp.r_star)),
                ("h_star", json!(cp.h_star)),
                ("r_over_klnk", json!(cp.r_star / (kf * kf.ln()))),
                ("k_h", json!(kf * cp.h_star)),
                ("F_rr", json!(cp.f_rr)),
                ("F_rh", json!(cp.f_rh)),
                ("F_hh", json!(cp.f_hh)),
                ("classification", json!(cp.classification.name())),
                ("H_km", json!(hk)),
                ("G_km2", json!(gk)),
                ("iterations", json!(cp.iterations())),
            ])
        })
        .collect();
    Ok(render_rows(&rows, cfg.format))
}

fn energy_row(rep: &EnergyReport, model: &ReducedModel, c: &DoublePolygonConfig) -> Row {
    let gap = expansion_gap(rep, model, c);
    row(vec![
        ("k", json!(rep.k)),
        ("r", json!(rep.r)),
        ("h", json!(rep.h)),
        ("a", json!(rep.a)),
        ("m", json!(rep.m)),
        ("I_numeric", json!(rep.i_numeric)),
        ("I1", json!(rep.i1)),
        ("I2", json!(rep.i2)),
        ("I3", json!(rep.i3)),
        ("I_expansion", json!(rep.i_expansion)),
        ("term_potential", json!(rep.term_potential)),
        ("term_self", json!(rep.term_self)),
        ("term_same", json!(rep.term_same)),
        ("term_cross", json!(rep.term_cross)),
        ("error_estimate", json!(rep.error_estimate)),
        ("per_bump_gap", json!(gap.per_bump_gap)),
        ("interaction_ratio", json!(gap.interaction_ratio)),
        ("magnitude_ratio", json!(gap.magnitude_ratio)),
        ("potential_ratio", json!(gap.potential_ratio)),
    ])
}

/// JSON report at `k`, or with `sweep` CSV rows over `k_list`.
pub fn energy(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    let pot = PotentialModel::new(cfg.a, cfg.m)?;
    let grid = GridOptions {
        panel_width: cfg.panel_width,
        ..GridOptions::default()
    };
    let ks = if cfg.sweep { cfg.k_list.clone() } else { vec![cfg.k] };
    let mut rows = Vec::new();
    for k in ks {
        let model = model_for(cfg, &u, k)?;
        let (r, h) = placement(cfg, &model)?;
        let c = build_config(k, r, h, cfg.dimension)?;
        let rep = energy_numeric(&c, &u, &pot, &grid)?;
        rows.push(energy_row(&rep, &model, &c));
    }
    Ok(render_rows(&rows, if cfg.sweep { cfg.format } else { Format::Json }))
}

pub fn spectrum(cfg: &RunConfig) -> Result<String, CliError> {
    let u = load_profile(cfg)?;
    let spectra = mode_spectra(&u, &cfg.modes, cfg.count, cfg.radius, cfg.grid)?;
    let mut rows = Vec::new();
    for sp in &spectra {
        for (i, &lam) in sp.eigenvalues.iter().enumerate() {
            rows.push(row(vec![
                ("mode", json!(sp.mode)),
                ("index", json!(i)),
                ("eigenvalue", json!(lam)),
                ("spacing", json!(sp.spacing)),
                ("negative_count", json!(sp.negative_count)),
            ]));
        }
    }
    Ok(render_rows(&rows, cfg.format))
}
