//! Random walks on the groupoid of window-to-window moves, their first-passage
//! generating functions, and the drift and variance of their length.

// `!(x > 0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod groupoid;
pub mod jet;
pub mod kernel;
pub mod limits;
pub mod linalg;
pub mod montecarlo;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use groupoid::{Generator, GroupoidError, Metric, MetricKind, ReducedWord, Rewrite, Sign};
pub use jet::Jet2;
pub use kernel::{KernelFamily, KernelSpec, TransitionKernel};
pub use limits::{compute_limits, LimitConstants, LimitsError, LimitsReport};
pub use scalar::Scalar;
pub use solver::{solve_r, solve_r_derivatives, RDerivatives, RVector, SolveOptions, SolverError};

pub type KernelF64 = TransitionKernel<f64>;
pub type KernelF32 = TransitionKernel<f32>;
pub type MetricF64 = Metric<f64>;
pub type Jet2F64 = Jet2<f64>;
pub type RVectorF64 = RVector<f64>;
pub type LimitConstantsF64 = LimitConstants<f64>;
