//! Std companion to `aimlab-core`: experiment configs, CSV and JSON output
//! formats, the verification suite, and the command implementations behind
//! the `aimlab` binary.

pub mod commands;
pub mod config;
pub mod grid_csv;
pub mod records;
pub mod verify;

/// Why a command failed, and the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0:#}")]
    Config(anyhow::Error),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
    #[error("{0}")]
    Property(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) | Failure::Property(_) => 1,
        }
    }
}
