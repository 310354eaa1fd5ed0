//! Toolkit for time-discretized continuous-time programs.
//!
//! Problems `min ∫₀ᵀ φ(x(t), t) dt` under pointwise constraints
//! `h(x(t), t) = 0`, `g(x(t), t) ≤ 0` are discretized on a midpoint grid.
//! The crate measures KKT and asymptotic-KKT residuals, solves instances with
//! a safeguarded augmented Lagrangian method, and checks sufficient
//! conditions under which AKKT limit points are KKT points.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod nnls;
pub mod problem;
pub mod problems;
pub mod residuals;
pub mod alm;
pub mod cq;

pub use error::{CtpError, Result};
pub use grid::{integrate, make_uniform_grid, MultiplierPath, NodeTable, TimeGrid, Trajectory};
pub use problem::{feasibility, objective, CtpProblem, CtpProblemBuilder, Feasibility, HypothesisBounds, ReferenceSolution};
pub use problems::{build, closed_form_sequence, BuiltinProblemId};
pub use residuals::{
    akkt_sequence_report, akkt_trend, g_minus, kkt_residual, lagrangian_gradient, min_kkt_stationarity,
    AkktTrend, MinStationarity, ResidualReport,
};
pub use alm::{
    augmented_lagrangian, export_trace, inner_solve, solve, AlmConfig, InnerTolSchedule, OuterIterate, SolverStatus,
    SolverTrace,
};
pub use cq::{
    check_full_rank, check_multiplier_bound, check_sigma_min, diagnose, diagnose_trace, BoundVerdict, CqReport,
    CqThresholds, CriterionVerdict, JacobianStack,
};
