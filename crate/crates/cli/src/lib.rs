//! `drivesim` command-line front end and live session server.

pub mod args;
pub mod commands;
pub mod server;

use drivesim::SimError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const RUNTIME: i32 = 3;
}

/// A command failure, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => exit::USAGE,
            Failure::Data(_) => exit::DATA,
            Failure::Runtime(_) => exit::RUNTIME,
        }
    }

    pub fn data(msg: impl std::fmt::Display) -> Self {
        Failure::Data(anyhow::anyhow!("{msg}"))
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(e) => write!(f, "data error: {e:#}"),
            Failure::Runtime(e) => write!(f, "runtime failure: {e:#}"),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        use std::io::ErrorKind;
        match &e {
            SimError::Io(io) if matches!(io.kind(), ErrorKind::NotFound | ErrorKind::InvalidData) => {
                Failure::Data(e.into())
            }
            SimError::Io(_) | SimError::TerminalWorld(_) => Failure::Runtime(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
