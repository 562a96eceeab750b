//! HTTP API and command-line front end over `labelcommons-core`.

pub mod api;
pub mod cli;
pub mod config;
