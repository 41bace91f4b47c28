//! The `calib` command line: a live session server plus batch subcommands
//! over the analytics in `calib-core`. Every subcommand is a plain function
//! writing to a caller-supplied output so it can be exercised in tests.

pub mod args;
pub mod commands;
pub mod server;

use thiserror::Error;

pub const EXIT_OK: u8 = 0;
/// Bad input: unreadable or unparsable files, invalid flags.
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_PORT_BUSY: u8 = 3;
pub const EXIT_UNCONVERGED: u8 = 4;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<calib_core::Error> for CliError {
    fn from(err: calib_core::Error) -> Self {
        Self::input(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::input(err.to_string())
    }
}
