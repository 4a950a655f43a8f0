//! Computational engine for optimal and strategic extraction of a renewable
//! resource distributed on a network.
//!
//! The resource migrates mass-conservatively between nodes (`D + Bᵀ`
//! operator), grows with a concave aggregate-mass saturation law, and is
//! extracted either by a single planner or by competing agents at a subset
//! of nodes. The engine computes the closed-form affine feedback policies
//! and value functions for both regimes, simulates the closed-loop
//! dynamics, and checks every analytic identity (spectral structure, mass
//! trajectories, steady states, value functions, HJB residuals,
//! admissibility thresholds) numerically.
//!
//! All numerics are generic over the scalar type via [`Float`]; the
//! `*64` aliases below fix `f64`, which every shipped tolerance assumes.

pub mod dynamics;
pub mod error;
pub mod float;
pub mod growth;
pub mod network;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use float::Float;

/// Default working scalar.
pub type Real = f64;

pub type Network64 = network::Network<Real>;
pub type MigrationOperator64 = network::MigrationOperator<Real>;
pub type GrowthModel64 = growth::GrowthModel<Real>;
pub type PolicyCoefficients64 = growth::PolicyCoefficients<Real>;
pub type Scenario64 = dynamics::Scenario<Real>;
pub type SimConfig64 = dynamics::SimConfig<Real>;
pub type Trajectory64 = dynamics::Trajectory<Real>;
