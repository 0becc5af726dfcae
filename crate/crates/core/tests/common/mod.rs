//! Independent reference solvers shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod fd;
pub mod rk;
