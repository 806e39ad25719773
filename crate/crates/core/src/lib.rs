//! Kinematic-wave traffic flow in supply-demand form: fundamental diagrams,
//! exact Riemann solutions at a linear boundary between two links, a
//! Godunov finite-volume simulator, and an asymptotic predictor for a
//! two-link ring road.

pub mod cli;
pub mod config;
pub mod error;
pub mod fundamental_diagram;
pub mod godunov;
mod numeric;
pub mod riemann;
pub mod ring;
pub mod supply_demand;
pub mod verify;

pub use error::{Error, Result};
pub use fundamental_diagram::FundamentalDiagram;
pub use supply_demand::{Classification, Gamma, SDState};
