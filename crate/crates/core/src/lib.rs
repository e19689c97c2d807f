//! Pulse-level synthesis, simulation and robustness analysis of noncyclic
//! geometric single-qubit gates and a parametrically coupled iSWAP.

pub mod cli;
pub mod engine;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod optimize;
pub mod robustness;
pub mod synthesis;
pub mod twoqubit;
pub mod trajectory;
pub mod units;

pub use error::{Error, Result};
