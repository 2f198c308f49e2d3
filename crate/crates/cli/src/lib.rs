//! Command-line driver and HTTP service for graphaudit audits.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod server;

pub use cli::{run, Cli};
pub use commands::{cmd_audit, cmd_ingest, cmd_query, run_audit, AuditRun, OutputFormat};
pub use config::AuditConfig;
pub use error::CliError;
pub use server::{router, serve, Session};
