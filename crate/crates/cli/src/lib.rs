//! Command-line front end and HTTP server for `irisattn-core`.

pub mod cli;
pub mod http;

pub use cli::{run, Cli, Command};
