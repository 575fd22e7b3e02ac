use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integrand is not finite at node {node:?}")]
    NonFinite { node: Vec<(f64, f64)> },

    #[error("rule too coarse: coordinate {coord} needs at least {needed} points, has {have}")]
    RuleTooCoarse {
        coord: usize,
        needed: usize,
        have: usize,
    },

    #[error("evaluation point coordinate {coord} has modulus {modulus} above the guard {guard}")]
    BoundaryGuard {
        coord: usize,
        modulus: f64,
        guard: f64,
    },

    #[error("tail tolerance {tol:e} unreachable at degree {degree}: bound is {bound:e}")]
    ToleranceUnreachable { tol: f64, degree: usize, bound: f64 },

    #[error("config error: {0}")]
    Config(String),
}
