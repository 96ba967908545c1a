//! Adaptive time stepping with guaranteed pointwise error bounds for
//! time-fractional subdiffusion problems whose right-hand side is non-smooth
//! in time.

// Constants are kept at full published precision; `!(x > 0.0)` style checks
// reject NaN on purpose.
#![allow(
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop
)]

pub mod barrier;
pub mod controller;
pub mod error;
pub mod function;
pub mod problem;
pub mod reference;
pub mod spatial;
pub mod special;
pub mod stepper;
pub mod strategies;

pub use barrier::{
    barrier_root, base_barrier, extend_for_negative_lambda, generalized_barrier, BarrierSpec,
    DEFAULT_RHO,
};
pub use controller::{
    barrier_for, detect_singularity, run_adaptive, run_segment, run_with_detection, solve,
    AdaptiveParams, BarrierKind, RunReport,
};
pub use error::{Error, Result};
pub use function::ScalarFn;
pub use problem::{make_problem, JumpShift, ProblemId, ProblemSpec, RhsPiece};
pub use spatial::{assemble, AssembledOperator, Coefficient, SpatialOperatorSpec};
pub use special::{gamma, mittag_leffler, MLParams};
pub use stepper::{CollocationRule, Frame, PiecewiseSolution, SemiDiscreteSystem};
pub use strategies::{
    solve_by_shifting, solve_by_splitting, MergedSolution, SegmentedSolution, Trajectory,
};
