//! Run configuration: defaults, then a flat `key = value` file, then flags.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use multibump::reduced_energy::Solver;

use crate::CliError;

/// Environment override for the profile cache directory.
pub const CACHE_ENV: &str = "MULTIBUMP_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn name(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Usage(format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dimension: usize,
    pub p: f64,
    pub m: f64,
    pub a: f64,
    pub k: usize,
    pub k_list: Vec<usize>,
    /// Overrides the critical point in `config` and `energy`.
    pub r: Option<f64>,
    pub h: Option<f64>,
    pub d_list: Vec<f64>,
    pub modes: Vec<usize>,
    pub count: usize,
    pub grid: usize,
    pub radius: f64,
    pub solver: Solver,
    pub tol: f64,
    pub tau: f64,
    pub panel_width: f64,
    pub cache_dir: Option<PathBuf>,
    pub format: Format,
    pub quick: bool,
    pub sweep: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dimension: 3,
            p: 3.0,
            m: 2.0,
            a: 1.0,
            k: 16,
            k_list: vec![16, 32, 64, 128, 256],
            r: None,
            h: None,
            d_list: vec![4.0, 6.0, 8.0, 10.0, 12.0],
            modes: vec![0, 1, 2],
            count: 3,
            grid: multibump::spectral::DEFAULT_GRID,
            radius: multibump::spectral::DEFAULT_DOMAIN_RADIUS,
            solver: Solver::Newton,
            tol: 1e-10,
            tau: 0.1,
            panel_width: 1.0,
            cache_dir: None,
            format: Format::Csv,
            quick: false,
            sweep: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "N" => self.dimension = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "a" => self.a = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "k_list" => self.k_list = parse_list(key, value)?,
            "r" => self.r = Some(parse(key, value)?),
            "h" => self.h = Some(parse(key, value)?),
            "d_list" => self.d_list = parse_list(key, value)?,
            "modes" => self.modes = parse_list(key, value)?,
            "count" => self.count = parse(key, value)?,
            "grid" => self.grid = parse(key, value)?,
            "radius" => self.radius = parse(key, value)?,
            "solver" => {
                self.solver = value
                    .trim()
                    .parse()
                    .map_err(|e: multibump::Error| CliError::Usage(e.to_string()))?
            }
            "tol" => self.tol = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "panel_width" => self.panel_width = parse(key, value)?,
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value.trim())),
            "format" => self.format = value.trim().parse()?,
            "quick" => self.quick = parse(key, value)?,
            "sweep" => self.sweep = parse(key, value)?,
            other => return Err(CliError::Usage(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Inverse of [`RunConfig::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("N", self.dimension.to_string());
        put("p", self.p.to_string());
        put("m", self.m.to_string());
        put("a", self.a.to_string());
        put("k", self.k.to_string());
        put("k_list", join(&self.k_list));
        if let Some(r) = self.r {
            put("r", r.to_string());
        }
        if let Some(h) = self.h {
            put("h", h.to_string());
        }
        put("d_list", join(&self.d_list));
        put("modes", join(&self.modes));
        put("count", self.count.to_string());
        put("grid", self.grid.to_string());
        put("radius", self.radius.to_string());
        put("solver", self.solver.name().to_string());
        put("tol", self.tol.to_string());
        put("tau", self.tau.to_string());
        put("panel_width", self.panel_width.to_string());
        if let Some(d) = &self.cache_dir {
            put("cache_dir", d.display().to_string());
        }
        put("format", self.format.name().to_string());
        put("quick", self.quick.to_string());
        put("sweep", self.sweep.to_string());
        s
    }

    /// Cache directory from the config, else from the environment.
    pub fn resolved_cache_dir(&self) -> Option<PathBuf> {
        self.cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }

    /// Rejects combinations that cannot be computed.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.dimension == 0 {
            return bad("N must be positive".into());
        }
        if !(self.p > 1.0) {
            return bad(format!("p = {} must exceed 1", self.p));
        }
        if self.dimension >= 3 {
            let crit = (self.dimension as f64 + 2.0) / (self.dimension as f64 - 2.0);
            if self.p >= crit {
                return bad(format!("p = {} not below {crit} for N = {}", self.p, self.dimension));
            }
        }
        if !(self.m > 1.0) {
            return bad(format!("m = {} must exceed 1", self.m));
        }
        if !self.a.is_finite() {
            return bad("a must be finite".into());
        }
        if self.k < 2 || self.k_list.iter().any(|&k| k < 2) {
            return bad("every k must be at least 2".into());
        }
        if !(self.tol > 0.0) || !(self.panel_width > 0.0) || !(self.radius > 0.0) {
            return bad("tol, panel_width and radius must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau < self.p - 1.0) {
            return bad(format!("tau = {} outside (0, p-1)", self.tau));
        }
        if self.d_list.iter().any(|&d| !(d >= 0.0)) {
            return bad("separations must be non-negative".into());
        }
        if matches!(self.h, Some(h) if !(h > 0.0 && h < 1.0)) || matches!(self.r, Some(r) if !(r > 0.0)) {
            return bad("need r > 0 and 0 < h < 1".into());
        }
        if self.count == 0 || self.grid < self.count {
            return bad("count must be positive and at most grid".into());
        }
        Ok(())
    }
}
