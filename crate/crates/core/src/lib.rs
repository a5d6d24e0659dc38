//! Safe sample screening for SVM training.
//!
//! This crate trains L1-loss support vector machines (hinge loss, no bias
//! term) by box-constrained dual coordinate ascent, and — given a solved
//! reference model at a smaller regularization value — screens out samples
//! that provably cannot be support vectors at the target value before
//! training. Screening rules come in four flavors (two ball tests, their
//! intersection, and a dome test); all are *safe*: training the reduced
//! problem and re-expanding reproduces the full optimum exactly, up to
//! solver tolerance. A path driver chains screening with an
//! epsilon-certified stepping rule to trace solutions across a whole range
//! of regularization values.

pub mod data;
pub mod error;
pub mod kernel;
pub mod model;
pub mod path;
pub mod rates;
pub mod screening;
pub mod solver;

pub use data::{
    canonical_text, dataset_hash, generate_toy, parse_libsvm, parse_libsvm_str, write_libsvm,
    Dataset, ParseOptions, Sample, SparseVector, ToyMetadata,
};
pub use error::{Error, Result};
pub use kernel::{Kernel, KernelOracle};
pub use model::ModelFile;
pub use path::{next_c, run_path, s_hat_delta, PathConfig, PathResult, PathStep, Termination};
pub use rates::{rate_sweep, write_rates_csv, RateRow};
pub use screening::{
    ball_bounds, ball_bt1, ball_bt2, bt1_dual_form, c_min, dome_bounds, intersection_bounds,
    make_reference, reduce_problem, screen, select_s_hat, solve_reduced, Ball, BoundPair,
    IntersectionGeometry, ReducedProblem, ReferenceSolution, ScreenTest, ScreeningReport,
    SelectionVector, Status,
};
pub use solver::{
    dual_objective, kkt_partition, max_kkt_violation, primal_objective, solve, DualSolution,
    KktPartition, ObjectiveReport, SolverConfig,
};
