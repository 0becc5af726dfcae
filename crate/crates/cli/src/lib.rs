//! Configuration-driven front end for the `greenwave` solver.

pub mod config;
pub mod expr;
pub mod run;
