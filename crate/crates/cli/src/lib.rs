//! Front end for the `multibump` library: run configuration, subcommands, and
//! the acceptance suite behind `multibump validate`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod validate;

use std::fmt;

pub mod exit {
    pub const PASS: i32 = 0;
    pub const VALIDATION_FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const CACHE: i32 = 3;
    pub const OUTPUT: i32 = 4;
    pub const COMPUTATION: i32 = 5;
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Cache(String),
    Output(String),
    Computation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Cache(_) => exit::CACHE,
            CliError::Output(_) => exit::OUTPUT,
            CliError::Computation(_) => exit::COMPUTATION,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Cache(m) => write!(f, "cache error: {m}"),
            CliError::Output(m) => write!(f, "output error: {m}"),
            CliError::Computation(m) => write!(f, "computation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<multibump::Error> for CliError {
    fn from(e: multibump::Error) -> Self {
        use multibump::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter(_) | E::Supercritical { .. } | E::Configuration(_) | E::InsufficientGrid { .. } => {
                CliError::Usage(msg)
            }
            E::Cache { .. } | E::CacheVersion { .. } | E::Io(_) => CliError::Cache(msg),
            _ => CliError::Computation(msg),
        }
    }
}
