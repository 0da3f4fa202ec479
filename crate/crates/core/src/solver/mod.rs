//! Dirichlet solves, the fixed-point map and its damped Picard iteration,
//! and ε-continuation.

use alloc::boxed::Box;

mod dirichlet;
mod linalg;
mod system;

pub use dirichlet::{solve_dirichlet, DirichletSolver, DirichletStats};
pub use system::{
    coupling_coefficients, eps_continuation, schauder_map, solve_system, solve_system_observed, strong_minimum_flags,
    system_residual, Continuation, ContinuationStep, IterationReport, SolveParams, SpeciesState, SpeciesUpdate,
    CONTAINMENT_TOL,
};

use crate::grid::{GridError, ScalarField};
use crate::nonlocal::NonlocalError;
use crate::pucci::PucciError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("invalid solver parameters: {0}")]
    InvalidParams(&'static str),
    #[error("negative zero-order coefficient {value} at node {node}")]
    NegativeCoefficient { node: usize, value: f64 },
    #[error("negative boundary value {value} at node {node}")]
    InvalidBoundary { node: usize, value: f64 },
    #[error("Dirichlet solve did not converge in {iterations} policy iterations")]
    DirichletNotConverged { iterations: usize, best: Box<ScalarField> },
    #[error("fixed-point iteration did not converge in {iterations} iterations (last delta {last_delta:e})")]
    NotConverged {
        iterations: usize,
        last_delta: f64,
        state: Box<SpeciesState>,
        report: Box<IterationReport>,
    },
    #[error("epsilon schedule must be positive and strictly decreasing")]
    InvalidSchedule,
    #[error("species count mismatch: expected {expected}, got {got}")]
    SpeciesMismatch { expected: usize, got: usize },
    #[error("state violates its invariants: {0}")]
    InvalidState(&'static str),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Pucci(#[from] PucciError),
    #[error(transparent)]
    Nonlocal(#[from] NonlocalError),
}
