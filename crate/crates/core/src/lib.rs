//! Processes on predictable sets of interval type: grids, sets, integrals,
//! Itô's formula and a log-utility market driven by them.

pub mod calculus;
pub mod config;
pub mod error;
pub mod finance;
pub mod grid;
pub mod psit;
pub mod report;
pub mod scenario;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
