//! Command-line front end: configuration, expressions and the subcommands.

pub mod config;
pub mod expr;
pub mod run;
