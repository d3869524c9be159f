// Dense linear-algebra kernels index on purpose: the row/column arithmetic is
// the subject of the code, and iterator adapters would bury it. Negated
// comparisons such as `!(x > 0.0)` deliberately classify NaN as invalid.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Differential-quadrature solver for singularly perturbed boundary and
//! initial value problems on Chebyshev–Gauss–Lobatto grids.
//!
//! The pipeline: build a collocation grid ([`chebgrid`]), turn it into dense
//! differentiation matrices ([`diffmat`]), assemble the collocated ODE with
//! boundary-condition row replacement ([`bvp_linear`], [`bvp_nonlinear`]),
//! and solve by partial-pivoting LU ([`linsys`]). Problem coefficients and
//! nonlinear residuals are given as parsed expressions ([`expr`]), and
//! [`bench`] carries the built-in problem catalog with reference solutions
//! and error-table generation.

pub mod bench;
pub mod bvp_linear;
pub mod bvp_nonlinear;
pub mod chebgrid;
pub mod diffmat;
pub mod expr;
pub mod linsys;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),

    #[error("invalid interval: require a < b, got a = {a}, b = {b}")]
    InvalidInterval { a: f64, b: f64 },

    #[error("expected a canonical grid on [-1, 1], got domain ({0}, {1})")]
    NotCanonical(f64, f64),

    #[error("unsupported derivative order {0} (matrices cover orders 1..=4, built from an order-1 matrix)")]
    InvalidOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is singular: pivot {pivot_index} has magnitude {pivot:e}")]
    SingularMatrix { pivot_index: usize, pivot: f64 },

    #[error("Lagrange node product at node {0} is zero or non-finite; grid too large or nodes coincide")]
    NonFiniteNodeProduct(usize),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown symbol '{name}' at position {pos}")]
    UnknownSymbol { pos: usize, name: String },

    #[error("symbol '{0}' is not bound in the evaluation context")]
    UnboundSymbol(&'static str),

    #[error("evaluation error at position {pos}: {msg}")]
    Eval { pos: usize, msg: String },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("evaluation failed at node {node}: {source}")]
    EvalAtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { iterations: usize, residual: f64 },

    #[error(
        "reference routes disagree for {problem} at N={n_points}, eps={epsilon}: \
         |collocation(2N) - integrator| = {disagreement:e} exceeds gate {gate:e}"
    )]
    OracleDisagreement {
        problem: String,
        n_points: usize,
        epsilon: f64,
        disagreement: f64,
        gate: f64,
    },

    #[error("unknown builtin problem '{0}' (expected P1..P5)")]
    UnknownProblem(String),

    #[error("adaptive integrator step size underflow at t = {0}")]
    StepSizeUnderflow(f64),
}

impl Error {
    /// Short stable tag for machine-readable output (CLI error lines,
    /// failed table cells).
    pub fn tag(&self) -> &'static str {
        match self {
            Error::GridTooSmall(_) => "grid-too-small",
            Error::InvalidInterval { .. } => "invalid-interval",
            Error::NotCanonical(..) => "not-canonical",
            Error::InvalidOrder(_) => "invalid-order",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::SingularMatrix { .. } => "singular-matrix",
            Error::NonFiniteNodeProduct(_) => "non-finite-node-product",
            Error::Parse { .. } => "parse-error",
            Error::UnknownSymbol { .. } => "unknown-symbol",
            Error::UnboundSymbol(_) => "unbound-symbol",
            Error::Eval { .. } => "eval-error",
            Error::InvalidProblem(_) => "invalid-problem",
            Error::EvalAtNode { .. } => "eval-at-node",
            Error::NotConverged { .. } => "newton-not-converged",
            Error::OracleDisagreement { .. } => "oracle-disagreement",
            Error::UnknownProblem(_) => "unknown-problem",
            Error::StepSizeUnderflow(_) => "step-underflow",
        }
    }
}
