use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multibump_cli::config::RunConfig;
use multibump_cli::validate::{render_csv, run_suite_with, ValidateOptions};
use multibump_cli::{commands, exit, CliError};

#[derive(Parser)]
#[command(name = "multibump", version, about = "Double-polygon multi-bump numerics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Solve (or load) the ground state.
    Ground,
    /// A1, A2, B1 as JSON.
    Constants,
    /// Two-center integrals over `d_list`.
    Interaction,
    /// Centers and distance table.
    Config,
    /// Critical points of the reduced energy over `k_list`.
    Critical,
    /// Direct quadrature of the energy.
    Energy,
    /// Lowest eigenvalues of the linearization by angular mode.
    Spectrum,
    /// Run the acceptance suite.
    Validate,
}

/// Every flag overrides the matching key of the config file.
#[derive(Args)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "N", global = true)]
    dimension: Option<String>,
    #[arg(long, global = true)]
    p: Option<String>,
    #[arg(long, global = true)]
    m: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long, global = true)]
    k_list: Option<String>,
    #[arg(long, global = true)]
    r: Option<String>,
    #[arg(long, global = true)]
    h: Option<String>,
    #[arg(long, global = true)]
    d_list: Option<String>,
    #[arg(long, global = true)]
    modes: Option<String>,
    #[arg(long, global = true)]
    count: Option<String>,
    #[arg(long, global = true)]
    grid: Option<String>,
    #[arg(long, global = true)]
    radius: Option<String>,
    #[arg(long, global = true)]
    solver: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    tau: Option<String>,
    #[arg(long, global = true)]
    panel_width: Option<String>,
    #[arg(long, global = true)]
    cache_dir: Option<String>,
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    quick: bool,
    #[arg(long, global = true)]
    sweep: bool,
}

impl Flags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), CliError> {
        let pairs = [
            ("N", &self.dimension),
            ("p", &self.p),
            ("m", &self.m),
            ("a", &self.a),
            ("k", &self.k),
            ("k_list", &self.k_list),
            ("r", &self.r),
            ("h", &self.h),
            ("d_list", &self.d_list),
            ("modes", &self.modes),
            ("count", &self.count),
            ("grid", &self.grid),
            ("radius", &self.radius),
            ("solver", &self.solver),
            ("tol", &self.tol),
            ("tau", &self.tau),
            ("panel_width", &self.panel_width),
            ("cache_dir", &self.cache_dir),
            ("format", &self.format),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.quick |= self.quick;
        cfg.sweep |= self.sweep;
        Ok(())
    }
}

fn build_config(flags: &Flags) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &flags.config {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    flags.apply(&mut cfg)?;
    cfg.check()?;
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    let cfg = build_config(&cli.flags)?;
    let text = match cli.command {
        Command::Ground => commands::ground(&cfg)?,
        Command::Constants => commands::constants(&cfg)?,
        Command::Interaction => commands::interaction(&cfg)?,
        Command::Config => commands::config(&cfg)?,
        Command::Critical => commands::critical(&cfg)?,
        Command::Energy => commands::energy(&cfg)?,
        Command::Spectrum => commands::spectrum(&cfg)?,
        Command::Validate => {
            let opts = ValidateOptions {
                quick: cfg.quick,
                cache_dir: cfg.resolved_cache_dir(),
            };
            let outcomes = run_suite_with(&opts, |o| eprintln!("{}", o.summary_line()));
            emit(&cli.flags.out, &render_csv(&outcomes))?;
            return Ok(if outcomes.iter().all(|o| o.passed()) {
                exit::PASS
            } else {
                exit::VALIDATION_FAILURE
            });
        }
    };
    emit(&cli.flags.out, &text)?;
    Ok(exit::PASS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("multibump: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
