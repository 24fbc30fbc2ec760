//! Limited-memory multipoint symmetric secant (MSS) trust-region methods
//! with a two-parameter dense initial matrix.
//!
//! The crate provides the small dense kernels, the compact representation
//! and its spectral view, the trust-region subproblem solvers, the MSS and
//! L-SR1 drivers, a native suite of test problems and a benchmark harness
//! that writes run records and performance profiles.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod checks;
pub mod compact;
pub mod dense;
pub mod driver;
pub mod error;
pub mod harness;
pub mod init;
pub mod problems;
pub mod subproblem;

pub use compact::{
    build_compact, build_view, rank2_update_dense, spectral_view, AcceptanceRule, CompactFactorization,
    PairBuffer, SpectralView,
};
pub use driver::{
    check_termination, compute_rho, lsr1_solve, mss_solve, solve, update_radius, SolveReport, SolverKind,
    Status, TrConfig,
};
pub use error::{CompactError, HarnessError, InitError, KernelError, ProblemError, SolveError, SubproblemError};
pub use harness::{
    emit, performance_profile, read_runs_csv, run_grid, summarize, GridConfig, Metric, ProfileCurve, RunRecord,
    SolverSpec, Summary,
};
pub use init::{choose_params, InitOption, InitState};
pub use problems::{fd_gradient_check, problem, suite, Objective, ProblemDef};
pub use subproblem::{cauchy_fallback, solve_obs, solve_steihaug_cg, SubproblemSolution};
