//! Command-line and HTTP front ends for the possdiag engine.

pub mod render;
pub mod repl;
pub mod service;
