//! Dual coordinate ascent for the L1-loss SVM without bias term.
//!
//! The problem solved is
//! `max_alpha  sum_i alpha_i - 1/2 alpha^T Q alpha` subject to
//! `0 <= alpha_i <= C`, where `Q_ij = y_i y_j K(x_i, x_j)`. Margins
//! `m_i = (Q alpha)_i = y_i f(x_i)` are maintained incrementally — through
//! cached `Q` rows in general, or through the explicit weight vector for the
//! linear kernel — and recomputed exactly before the solver is allowed to
//! declare convergence, so the returned solution honors the tolerance with
//! fresh values.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::{linear_margin, linear_weight, Kernel, KernelOracle};

/// Exact margin recomputation cadence, in epochs, to cap incremental drift.
const REFRESH_INTERVAL: usize = 64;

/// Solver knobs. The defaults suit every workload in this crate; screening
/// verification tightens `kkt_tolerance` as needed.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Largest allowed KKT violation at convergence.
    pub kkt_tolerance: f64,
    /// Epoch budget; exceeding it is an error, never a silent partial result.
    pub max_epochs: usize,
    /// Seed for the per-epoch coordinate permutation; fixed seed, fixed result.
    pub shuffle_seed: u64,
    /// Freeze coordinates that sit firmly at a bound, re-checking them all
    /// before convergence is declared. Off by default.
    pub shrinking: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { kkt_tolerance: 1e-9, max_epochs: 100_000, shuffle_seed: 0, shrinking: false }
    }
}

impl SolverConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.kkt_tolerance = tol;
        self
    }
}

/// A dual feasible point with its margins.
///
/// Invariant: `margins == Q alpha` to within refresh accuracy (the solver
/// finishes with an exact recomputation), and `0 <= alpha_i <= C` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub c: f64,
    pub alpha: Vec<f64>,
    pub margins: Vec<f64>,
}

impl DualSolution {
    /// Wraps an explicit `alpha`, computing margins through the oracle.
    pub fn from_alpha(alpha: Vec<f64>, c: f64, oracle: &KernelOracle) -> Result<Self> {
        check_c(c)?;
        if alpha.len() != oracle.n() {
            return Err(Error::LengthMismatch { expected: oracle.n(), got: alpha.len() });
        }
        if let Some(bad) = alpha.iter().find(|&&a| !(0.0..=c).contains(&a)) {
            return Err(Error::InvalidArgument(format!("alpha entry {bad} outside [0, {c}]")));
        }
        let margins = oracle.q_matvec(&alpha)?;
        Ok(DualSolution { c, alpha, margins })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn sum_alpha(&self) -> f64 {
        self.alpha.iter().sum()
    }

    /// `||w||^2 = alpha^T Q alpha`, clamped against round-off.
    pub fn norm_sq(&self) -> f64 {
        self.alpha.iter().zip(&self.margins).map(|(a, m)| a * m).sum::<f64>().max(0.0)
    }

    /// Total hinge loss `sum_i max(0, 1 - m_i)`.
    pub fn xi(&self) -> f64 {
        self.margins.iter().map(|m| (1.0 - m).max(0.0)).sum()
    }
}

/// Objective values at a dual point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    pub primal: f64,
    pub dual: f64,
    /// `primal - dual`; nonnegative by weak duality.
    pub gap: f64,
    /// Total hinge loss of the implied weight vector.
    pub xi: f64,
}

/// Dual objective `D(alpha) = sum_i alpha_i - 1/2 alpha^T Q alpha`.
pub fn dual_objective(solution: &DualSolution) -> f64 {
    solution.sum_alpha() - 0.5 * solution.norm_sq()
}

/// Primal objective `P = 1/2 ||w||^2 + C xi` of the weight vector implied by
/// `alpha`, together with the dual value and the duality gap.
pub fn primal_objective(solution: &DualSolution) -> ObjectiveReport {
    let norm_sq = solution.norm_sq();
    let xi = solution.xi();
    let primal = 0.5 * norm_sq + solution.c * xi;
    let dual = solution.sum_alpha() - 0.5 * norm_sq;
    ObjectiveReport { primal, dual, gap: primal - dual, xi }
}

/// Index partition by margin value: `r` holds samples with `m_i > 1 + band`
/// (necessarily `alpha_i = 0` at an optimum), `l` those with `m_i < 1 - band`
/// (necessarily `alpha_i = C`), and `e` the on-margin band between them —
/// the only samples that can be support vectors with intermediate weight.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPartition {
    pub r: Vec<usize>,
    pub e: Vec<usize>,
    pub l: Vec<usize>,
}

impl KktPartition {
    /// Number of non-support-vector samples, i.e. `|r| + |l|`.
    pub fn non_sv_count(&self) -> usize {
        self.r.len() + self.l.len()
    }
}

/// Splits samples by margin with the given classification band.
pub fn kkt_partition(solution: &DualSolution, band: f64) -> KktPartition {
    let mut part = KktPartition { r: Vec::new(), e: Vec::new(), l: Vec::new() };
    for (i, &m) in solution.margins.iter().enumerate() {
        if m > 1.0 + band {
            part.r.push(i);
        } else if m < 1.0 - band {
            part.l.push(i);
        } else {
            part.e.push(i);
        }
    }
    part
}

pub(crate) fn violation(alpha: f64, c: f64, g: f64) -> f64 {
    // g = 1 - m_i is the dual ascent gradient for coordinate i.
    if alpha <= 0.0 {
        g.max(0.0)
    } else if alpha >= c {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}

/// Worst KKT violation of a solution, judged from its stored margins.
pub fn max_kkt_violation(solution: &DualSolution) -> f64 {
    solution
        .alpha
        .iter()
        .zip(&solution.margins)
        .map(|(&a, &m)| violation(a, solution.c, 1.0 - m))
        .fold(0.0, f64::max)
}

fn check_c(c: f64) -> Result<()> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive and finite, got {c}")));
    }
    Ok(())
}

/// Solves the dual problem at regularization `c`.
///
/// `warm_start`, when given, is clipped per-coordinate into `[0, c]` and used
/// as the initial point; the optimum reached is the same as from a cold
/// start, only faster. Coordinates with `Q_ii = 0` (zero feature vectors)
/// have linear objective with slope `1` and are pinned at `alpha_i = C`.
pub fn solve(
    oracle: &KernelOracle,
    c: f64,
    config: &SolverConfig,
    warm_start: Option<&DualSolution>,
) -> Result<DualSolution> {
    check_c(c)?;
    let n = oracle.n();
    let mut alpha = match warm_start {
        Some(w) => {
            if w.alpha.len() != n {
                return Err(Error::LengthMismatch { expected: n, got: w.alpha.len() });
            }
            w.alpha.iter().map(|a| a.clamp(0.0, c)).collect()
        }
        None => vec![0.0; n],
    };
    solve_in_place(oracle, c, config, &mut alpha, None)?;
    let margins = oracle.q_matvec(&alpha)?;
    Ok(DualSolution { c, alpha, margins })
}

/// Margin bookkeeping for the sweep loop.
///
/// `Rows` holds the margin vector itself and pays one cached `Q` row per
/// coordinate update; `Weight` (linear kernel only) holds the explicit weight
/// vector instead, so an update touches just the sample's nonzeros and a
/// margin read is one sparse dot product.
enum MarginState {
    Rows(Vec<f64>),
    Weight(Vec<f64>),
}

/// Core sweep loop, shared by the full solver and the reduced-problem solver.
///
/// Optimizes `alpha` over the coordinates in `working` (all coordinates when
/// `None`), leaving the others untouched but still counted inside margins.
/// Returns when the worst KKT violation over the working set, measured on
/// freshly recomputed margins, is at most the tolerance.
pub(crate) fn solve_in_place(
    oracle: &KernelOracle,
    c: f64,
    config: &SolverConfig,
    alpha: &mut [f64],
    working: Option<&[usize]>,
) -> Result<()> {
    let n = oracle.n();
    let ds = oracle.dataset();
    let tol = config.kkt_tolerance;
    let shrink_slack = 10.0 * tol;
    let mut order: Vec<usize> = match working {
        Some(ids) => ids.to_vec(),
        None => (0..n).collect(),
    };
    for &i in &order {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
    }
    let refresh = |alpha: &[f64]| -> Result<MarginState> {
        Ok(match oracle.kernel() {
            Kernel::Linear => MarginState::Weight(linear_weight(ds, alpha)?),
            Kernel::Rbf { .. } => MarginState::Rows(oracle.q_matvec(alpha)?),
        })
    };
    let margin_of = |state: &MarginState, i: usize| -> f64 {
        match state {
            MarginState::Rows(margins) => margins[i],
            MarginState::Weight(w) => linear_margin(ds, w, i),
        }
    };
    let mut state = refresh(alpha)?;
    let mut frozen = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut worst = f64::INFINITY;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_worst = 0.0f64;
        for &i in &order {
            if frozen[i] {
                continue;
            }
            let qii = oracle.q_diag(i);
            if qii <= 0.0 {
                // Zero feature vector: margins are unaffected by alpha_i and
                // the objective grows linearly in it, so the bound is optimal.
                alpha[i] = c;
                continue;
            }
            let g = 1.0 - margin_of(&state, i);
            epoch_worst = epoch_worst.max(violation(alpha[i], c, g));
            if config.shrinking
                && ((alpha[i] <= 0.0 && g < -shrink_slack) || (alpha[i] >= c && g > shrink_slack))
            {
                frozen[i] = true;
                continue;
            }
            let updated = (alpha[i] + g / qii).clamp(0.0, c);
            let delta = updated - alpha[i];
            if delta != 0.0 {
                alpha[i] = updated;
                match &mut state {
                    MarginState::Rows(margins) => {
                        let row = oracle.q_row(i)?;
                        for (m, &q) in margins.iter_mut().zip(row.iter()) {
                            *m += delta * q;
                        }
                    }
                    MarginState::Weight(w) => {
                        let s = ds.sample(i);
                        let scale = delta * s.y();
                        for (k, v) in s.features.iter() {
                            w[k as usize] += scale * v;
                        }
                    }
                }
            }
        }
        worst = epoch_worst;

        if epoch_worst <= tol {
            // Candidate convergence: recompute margins exactly, thaw every
            // frozen coordinate, and re-judge. Only fresh values may certify.
            state = refresh(alpha)?;
            frozen.iter_mut().for_each(|f| *f = false);
            let fresh_worst = order
                .iter()
                .map(|&i| violation(alpha[i], c, 1.0 - margin_of(&state, i)))
                .fold(0.0, f64::max);
            if fresh_worst <= tol {
                return Ok(());
            }
            worst = fresh_worst;
        } else if (epoch + 1) % REFRESH_INTERVAL == 0 {
            state = refresh(alpha)?;
            // Freeze decisions were judged on values that are now stale; thaw
            // everything so a wrongly frozen coordinate cannot stall progress.
            frozen.iter_mut().for_each(|f| *f = false);
        }
    }
    Err(Error::NoConvergence { epochs: config.max_epochs, violation: worst })
}
