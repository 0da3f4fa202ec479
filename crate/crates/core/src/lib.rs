//! Numerical core for the K-species nonlocal segregation system
//!
//! ```text
//! M⁻(u_i) = (1/ε²) · u_i · Σ_{j≠i} H_R(u_j)   in Ω
//! u_i     = f_i                              on the exterior strip of width R
//! ```
//!
//! where `M⁻` is the negative Pucci extremal operator and `H_R` is either the
//! ball average of `w^p` or the ball supremum of `w`.
//!
//! The crate is `no_std` (with `alloc`) so the algorithms can be embedded
//! anywhere; file formats, configuration and the command line live in the
//! `segsolve` companion crate.
//!
//! Module map:
//! - [`grid`]: uniform grids, region classification, exact distance transforms
//!   and set morphology.
//! - [`pucci`]: pointwise Pucci operators and the monotone wide-stencil scheme.
//! - [`nonlocal`]: the interaction operators `H_R` and their scaling law.
//! - [`solver`]: Dirichlet solves by policy iteration, the fixed-point map,
//!   damped Picard iteration and ε-continuation.
//! - [`fbanalysis`]: supports, gaps, far/near sets, exterior balls, perimeter,
//!   decay fits and the aggregated geometry report.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(a > b)` comparisons deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod fbanalysis;
pub mod grid;
pub mod nonlocal;
pub mod pucci;
pub mod solver;

pub use grid::{
    build_mask, dilate, distance_transform, newly_created, DomainSpec, GridError, GridSpec, NodeClass, NodeSet,
    Primitive, RegionMask, ScalarField,
};
pub use nonlocal::{h_apply, scaling_check, BallStencil, KernelKind, NonlocalError};
pub use pucci::{
    discrete_laplacian, discrete_pucci_minus, discrete_pucci_plus, pucci_minus_mat, pucci_plus_mat, EllipticityPair,
    FrameSet, PucciError, StencilField, SymMatrix2,
};
pub use solver::{
    eps_continuation, schauder_map, solve_dirichlet, solve_system, Continuation, DirichletSolver, IterationReport,
    SolveError, SolveParams, SpeciesState, SpeciesUpdate,
};
