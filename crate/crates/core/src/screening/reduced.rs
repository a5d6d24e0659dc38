//! Reduced training problem over the samples screening could not decide.
//!
//! Screened samples have their dual weight fixed (0 for screened-R, C for
//! screened-L); the remaining coordinates are optimized with the fixed
//! contribution folded into a constant linear offset. Expanding the reduced
//! optimum with the fixed values reproduces the full optimum whenever the
//! screening bounds were valid.

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::{ScreeningReport, Status};
use crate::solver::{solve_in_place, DualSolution, SolverConfig};

/// The subproblem left after screening.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub c: f64,
    /// Samples still to be optimized (screening status unknown).
    pub kept: Vec<usize>,
    /// Samples fixed at `alpha = 0`.
    pub fixed_r: Vec<usize>,
    /// Samples fixed at `alpha = C`.
    pub fixed_l: Vec<usize>,
    /// Per kept sample `i`: `d_i = C * sum_{j in fixed_l} Q_ij`, the constant
    /// margin contribution of the fixed samples. The reduced coordinate
    /// gradient is `1 - d_i - sum_{j kept} Q_ij alpha_j`.
    pub d_offsets: Vec<f64>,
}

impl ReducedProblem {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }
}

/// Builds the reduced problem for a screening report.
pub fn reduce_problem(report: &ScreeningReport, oracle: &KernelOracle) -> Result<ReducedProblem> {
    let n = oracle.n();
    if report.statuses.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: report.statuses.len() });
    }
    let mut kept = Vec::new();
    let mut fixed_r = Vec::new();
    let mut fixed_l = Vec::new();
    let mut l_indicator = vec![0.0; n];
    for (i, status) in report.statuses.iter().enumerate() {
        match status {
            Status::Unknown => kept.push(i),
            Status::ScreenedR => fixed_r.push(i),
            Status::ScreenedL => {
                fixed_l.push(i);
                l_indicator[i] = 1.0;
            }
        }
    }
    let q_l = oracle.q_matvec(&l_indicator)?;
    let d_offsets = kept.iter().map(|&i| report.c * q_l[i]).collect();
    Ok(ReducedProblem { c: report.c, kept, fixed_r, fixed_l, d_offsets })
}

/// Solves the reduced problem and expands back to a full-length solution.
///
/// `warm_start` (full-length, typically the reference or a scaled previous
/// path solution) seeds the kept coordinates; fixed coordinates always take
/// their screened values.
pub fn solve_reduced(
    reduced: &ReducedProblem,
    oracle: &KernelOracle,
    config: &SolverConfig,
    warm_start: Option<&[f64]>,
) -> Result<DualSolution> {
    let n = oracle.n();
    let c = reduced.c;
    let mut alpha = match warm_start {
        Some(w) => {
            if w.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: w.len() });
            }
            w.iter().map(|a| a.clamp(0.0, c)).collect()
        }
        None => vec![0.0; n],
    };
    for &i in &reduced.fixed_r {
        alpha[i] = 0.0;
    }
    for &i in &reduced.fixed_l {
        alpha[i] = c;
    }
    if !reduced.kept.is_empty() {
        // Margins inside the sweep cover all samples, so the fixed samples'
        // contribution (the d_offsets) is included in each kept gradient.
        solve_in_place(oracle, c, config, &mut alpha, Some(&reduced.kept))?;
    }
    let margins = oracle.q_matvec(&alpha)?;
    Ok(DualSolution { c, alpha, margins })
}
