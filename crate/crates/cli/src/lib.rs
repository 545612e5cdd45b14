//! Command line front end: network files, tolerance expressions and subcommands.

pub mod app;
pub mod syntax;
pub mod tolerance;

pub use app::{run, Outcome};
