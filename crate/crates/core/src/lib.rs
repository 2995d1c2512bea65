//! Structured-grid solver for second-order fully nonlinear PDEs by the
//! vanishing moment method: the equation `F(D²u, ∇u, u, x) = 0` is
//! approximated by the fourth-order quasilinear family
//! `-ε Δ²uᵋ + F(D²uᵋ, ∇uᵋ, uᵋ, x) = 0` with `uᵋ = g` and `Δuᵋ = ε²` on the
//! boundary, solved by damped Newton with ε-continuation, and the limit
//! `ε → 0⁺` is taken numerically.
//!
//! Model families: Monge-Ampère (classical, general, Gauss curvature),
//! Pucci extremal operators, the infinity Laplacian, and parabolic
//! Monge-Ampère with implicit time stepping.
//!
//! Layout:
//! - [`grid`]: uniform tensor-product grids, node sets, field sampling
//! - [`operators`]: centered stencils (gradient, Hessian, Laplacian,
//!   biharmonic), determinants, closed-form eigenvalues
//! - [`models`]: pointwise residuals and linearizations per family
//! - [`assembly`]: ghost-node boundary closure, residual vector, sparse
//!   Jacobian
//! - [`linalg`]: CSR, ILU(0), restarted GMRES
//! - [`solver`]: damped Newton, ε-continuation, fixed-point warmup,
//!   implicit parabolic stepping
//! - [`diagnostics`]: error norms, convexity checks, cross-sections,
//!   ε-convergence studies
//! - [`harness`]: the registered benchmark cases, config, dump formats, and
//!   case execution

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod operators;
pub mod solver;

pub use assembly::{
    biharmonic_matrix, ghost_closure, AuxKind, BoundaryConditions, DiscreteSystem, EpsilonParam,
};
pub use diagnostics::{
    convexity_report, cross_section, error_norms, ConvexityReport, ErrorReport,
};
pub use error::{Error, Result};
pub use grid::{classify_nodes, deep_interior, sample_function, Grid, NodeIndex, ScalarField};
pub use linalg::{gmres_solve, ilu0_factor, CsrMatrix, GmresResult, Ilu0Factors, KrylovOptions};
pub use models::{
    linearize_point, residual_point, ModelSpec, PointState, StateDelta, Variant,
};
pub use operators::{
    biharmonic_fd, det_hessian, gradient_fd, hessian_eigs, hessian_fd, infinity_laplacian,
    laplacian_fd, EigenField, GhostLayer, HessianField, SymMat, VectorField,
};
pub use solver::{
    continuation_solve, evolve_parabolic, fixed_point_warmup, initial_guess, newton_solve,
    ContinuationResult, EpsilonSchedule, NewtonOptions, Scheme, SolveReport, TimeStepOptions,
};
