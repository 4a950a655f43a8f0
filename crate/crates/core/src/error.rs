//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong while building models or running them.
///
/// Diagnostic values are widened to `f64` so the error type stays
/// independent of the working scalar.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },

    #[error("negative weight b[{row},{col}] = {value}")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("nonzero diagonal entry b[{node},{node}] = {value}")]
    NonzeroDiagonal { node: usize, value: f64 },

    #[error("network is not strongly connected: node {node} is {}", if *.forward { "unreachable from node 0" } else { "unable to reach node 0" })]
    NotStronglyConnected { node: usize, forward: bool },

    #[error("weight matrix is not symmetric at ({row},{col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("extraction pattern must contain at least one node")]
    EmptyActiveSet,

    #[error("active node {node} out of range for a {n}-node network")]
    ActiveNodeOutOfRange { node: usize, n: usize },

    #[error("dominant eigenvalue is not zero: Re = {real_part}")]
    DominantEigenvalueNotZero { real_part: f64 },

    #[error("dominant eigenvector has a genuinely negative entry {value} at index {index}")]
    DominantVectorNotPositive { index: usize, value: f64 },

    #[error("null space dimension is not 1: {count} eigenvalues within tolerance of 0")]
    NullSpaceDimensionNot1 { count: usize },

    #[error("eigenvalue matching failed: {expected} targets vs {actual} candidates")]
    MatchingFailed { expected: usize, actual: usize },

    #[error("invalid growth parameter {name} = {value}: requires {requirement}")]
    InvalidGrowthParameter {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    #[error("saturation function undefined for nonpositive mass {value}")]
    NonpositiveMass { value: f64 },

    #[error("utility undefined for nonpositive consumption {value}")]
    NonpositiveConsumption { value: f64 },

    #[error("policy is not interior: {reason} (theta = {theta})")]
    NoninteriorPolicy { theta: f64, reason: &'static str },

    #[error("closed-form side condition violated: {condition}")]
    SideConditionViolated { condition: &'static str },

    #[error("steady-state stock is nonpositive: capacity term = {value}")]
    NegativeStockWarning { value: f64 },

    #[error("state has zero total mass")]
    ZeroTotalMass,

    #[error("initial stock has negative entry {value} at index {index}")]
    NegativeInitialStock { index: usize, value: f64 },

    #[error("invalid simulation setting: {name}")]
    InvalidSimConfig { name: &'static str },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("simulation horizon must be positive, got {value}")]
    HorizonNonpositive { value: f64 },

    #[error("discounted tail does not converge: requires rho > 0, got {rho}")]
    NonconvergentTail { rho: f64 },

    #[error("baseline profile leaves the nonnegative orthant (multiplier {multiplier})")]
    InadmissibleDeviation { multiplier: f64 },

    #[error("operation requires the {required} growth family")]
    UnsupportedFamily { required: &'static str },
}

pub type Result<V> = std::result::Result<V, Error>;
