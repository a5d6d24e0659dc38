//! Safe sample screening.
//!
//! Given an exactly solved reference model at `C_ref` and a target
//! regularization `C >= C_ref`, each screening test computes, per sample, an
//! interval guaranteed to contain the sample's margin `z_i^T w*` at the
//! *unknown* target optimum. Samples whose interval lies strictly above 1
//! must satisfy `alpha_i* = 0`; strictly below 1, `alpha_i* = C`. Fixing
//! those and solving the remaining problem reproduces the full optimum.

pub mod ball;
pub mod dome;
pub mod intersect;
pub mod reduced;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ball::{ball_bounds, ball_bt1, ball_bt2, ball_bt2_with_qs, bt1_dual_form, Ball};
pub use dome::dome_bounds;
pub use intersect::{intersection_bounds, IntersectionGeometry};
pub use reduced::{reduce_problem, solve_reduced, ReducedProblem};

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::solver::{DualSolution, KktPartition};

/// How far past the margin threshold a bound must land, relative to its own
/// scale, before a sample is screened. Guards the strict-inequality rules
/// against round-off when a screening region degenerates to (nearly) a
/// point sitting exactly on a sample's margin.
const DECISION_RTOL: f64 = 1e-7;

/// A solved model packaged for screening: dual weights, margins, and the
/// derived scalars every rule consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub c_ref: f64,
    pub alpha: Vec<f64>,
    /// `(Q alpha)_i`.
    pub margins: Vec<f64>,
    /// `||w_ref||^2 = alpha^T Q alpha`.
    pub norm_sq: f64,
    /// Total hinge loss at the reference.
    pub xi: f64,
}

/// Packages a solved dual solution as a screening reference.
pub fn make_reference(solution: &DualSolution) -> ReferenceSolution {
    ReferenceSolution {
        c_ref: solution.c,
        alpha: solution.alpha.clone(),
        margins: solution.margins.clone(),
        norm_sq: solution.norm_sq(),
        xi: solution.xi(),
    }
}

/// Largest C at which `alpha = C * 1` is optimal: `1 / max_i (Q 1)_i`.
/// For any `C` in `(0, c_min]` every sample sits at the box ceiling, which
/// is where the regularization path starts.
pub fn c_min(oracle: &KernelOracle) -> Result<f64> {
    let row_sums = oracle.q_matvec(&vec![1.0; oracle.n()])?;
    let max = row_sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max.is_finite() && max > 0.0) {
        return Err(Error::DegenerateKernel(max));
    }
    Ok(1.0 / max)
}

/// A 0/1 selection over samples (which hinge terms to keep active when
/// lower-bounding the optimal objective).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionVector {
    bits: Vec<bool>,
}

impl SelectionVector {
    pub fn new(bits: Vec<bool>) -> Self {
        SelectionVector { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Indices of selected samples.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    /// Dense 0.0/1.0 rendering, e.g. for matrix-vector products.
    pub fn to_dense(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// The hinge-term selection entering the second ball: sample `i` is selected
/// iff `1 - (C + C_ref)/(2 C_ref) * margin_i > 0` (strict). This choice
/// maximizes the selection's objective contribution term by term, giving the
/// smallest second ball the reference data can justify.
pub fn select_s_hat(reference: &ReferenceSolution, c: f64) -> Result<SelectionVector> {
    if !(c.is_finite() && c > 0.0) || c < reference.c_ref {
        return Err(Error::InvalidArgument(format!(
            "selection target C = {c} must be finite and at least C_ref = {}",
            reference.c_ref
        )));
    }
    let scale = (c + reference.c_ref) / (2.0 * reference.c_ref);
    Ok(SelectionVector::new(reference.margins.iter().map(|&m| 1.0 - scale * m > 0.0).collect()))
}

/// Closed margin interval for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

/// Screening verdict for one sample.
///
/// `ScreenedR`: margin interval strictly above 1, so `alpha* = 0`.
/// `ScreenedL`: strictly below 1, so `alpha* = C`. `Unknown`: keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "R")]
    ScreenedR,
    #[serde(rename = "L")]
    ScreenedL,
    #[serde(rename = "U")]
    Unknown,
}

impl Status {
    pub fn as_char(self) -> char {
        match self {
            Status::ScreenedR => 'R',
            Status::ScreenedL => 'L',
            Status::Unknown => 'U',
        }
    }
}

/// Which screening rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScreenTest {
    #[serde(rename = "bt1")]
    Bt1,
    #[serde(rename = "bt2")]
    Bt2,
    #[serde(rename = "it")]
    Intersection,
    #[serde(rename = "dt")]
    Dome,
}

impl std::str::FromStr for ScreenTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bt1" => Ok(ScreenTest::Bt1),
            "bt2" => Ok(ScreenTest::Bt2),
            "it" => Ok(ScreenTest::Intersection),
            "dt" => Ok(ScreenTest::Dome),
            other => Err(Error::InvalidArgument(format!(
                "unknown screening test `{other}` (expected bt1, bt2, it, or dt)"
            ))),
        }
    }
}

impl std::fmt::Display for ScreenTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ScreenTest::Bt1 => "bt1",
            ScreenTest::Bt2 => "bt2",
            ScreenTest::Intersection => "it",
            ScreenTest::Dome => "dt",
        };
        f.write_str(name)
    }
}

/// Outcome of screening a dataset against a reference.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScreeningReport {
    pub test: ScreenTest,
    #[serde(rename = "C")]
    pub c: f64,
    pub c_ref: f64,
    /// Per-sample verdicts, parallel to `lower`/`upper`.
    pub statuses: Vec<Status>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub n_screened_r: usize,
    pub n_screened_l: usize,
    /// Screened fraction over all samples.
    pub rate_all: f64,
    /// Screened fraction over the true non-support-vectors; only computable
    /// once an exact solution at `C` supplies the partition.
    pub rate_nonsv: Option<f64>,
}

impl ScreeningReport {
    pub fn n(&self) -> usize {
        self.statuses.len()
    }

    pub fn screened_count(&self) -> usize {
        self.n_screened_r + self.n_screened_l
    }

    /// Indices screening left undecided.
    pub fn kept_indices(&self) -> Vec<usize> {
        self.statuses
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == Status::Unknown).then_some(i))
            .collect()
    }

    /// Fills `rate_nonsv` from an exact partition at the target C. Only
    /// screened samples that the partition confirms as non-support-vectors
    /// count, so the rate never exceeds 1 even when a borderline sample
    /// drifts across the partition band.
    pub fn with_exact_partition(mut self, partition: &KktPartition) -> Self {
        let denom = partition.non_sv_count();
        if denom == 0 {
            self.rate_nonsv = None;
            return self;
        }
        let mut non_sv = vec![false; self.statuses.len()];
        for &i in partition.r.iter().chain(&partition.l) {
            non_sv[i] = true;
        }
        let hits = self
            .statuses
            .iter()
            .enumerate()
            .filter(|&(i, &s)| s != Status::Unknown && non_sv[i])
            .count();
        self.rate_nonsv = Some(hits as f64 / denom as f64);
        self
    }

    /// CSV rendering: `index,lower,upper,status`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "index,lower,upper,status")?;
        for i in 0..self.n() {
            writeln!(
                writer,
                "{},{},{},{}",
                i,
                self.lower[i],
                self.upper[i],
                self.statuses[i].as_char()
            )?;
        }
        Ok(())
    }
}

/// Per-sample bound engine assembled once per screening run.
enum Engine<'a> {
    Ball(Ball),
    Lens { b1: Ball, b2: Ball, geometry: IntersectionGeometry },
    Dome { reference: &'a ReferenceSolution, gamma_b: f64 },
}

impl Engine<'_> {
    fn bound(&self, i: usize, oracle: &KernelOracle) -> BoundPair {
        match self {
            Engine::Ball(ball) => ball_bounds(ball, i, oracle),
            Engine::Lens { b1, b2, geometry } => intersection_bounds(b1, b2, i, oracle, geometry),
            Engine::Dome { reference, gamma_b } => dome::eval(reference, *gamma_b, i, oracle),
        }
    }
}

/// Screens every sample against the reference at target `c`.
///
/// `dt_gamma_b` supplies `||w||^2` of a solution at some `C_b >= c` and is
/// required by (and only by) the dome test. Bounds are evaluated as a pure
/// parallel map over samples, so results are identical for any thread count.
pub fn screen(
    reference: &ReferenceSolution,
    c: f64,
    test: ScreenTest,
    oracle: &KernelOracle,
    dt_gamma_b: Option<f64>,
) -> Result<ScreeningReport> {
    screen_impl(reference, c, test, oracle, dt_gamma_b, None)
}

/// [`screen`] with an optional precomputed `(Q s_hat)` product, which the
/// path driver maintains incrementally instead of recomputing.
pub(crate) fn screen_impl(
    reference: &ReferenceSolution,
    c: f64,
    test: ScreenTest,
    oracle: &KernelOracle,
    dt_gamma_b: Option<f64>,
    qs: Option<&[f64]>,
) -> Result<ScreeningReport> {
    let n = oracle.n();
    if reference.alpha.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: reference.alpha.len() });
    }
    let bt2_ball = |qs: Option<&[f64]>| -> Result<Ball> {
        let s_hat = select_s_hat(reference, c)?;
        match qs {
            Some(qs) => ball_bt2_with_qs(reference, &s_hat, c, qs),
            None => ball_bt2(reference, &s_hat, c, oracle),
        }
    };
    let engine = match test {
        ScreenTest::Bt1 => Engine::Ball(ball_bt1(reference, c)?),
        ScreenTest::Bt2 => Engine::Ball(bt2_ball(qs)?),
        ScreenTest::Intersection => {
            let b1 = ball_bt1(reference, c)?;
            let b2 = bt2_ball(qs)?;
            let geometry = IntersectionGeometry::new(&b1, &b2)?;
            Engine::Lens { b1, b2, geometry }
        }
        ScreenTest::Dome => {
            let gamma_b = dt_gamma_b.ok_or_else(|| {
                Error::InvalidArgument(
                    "dome test needs gamma_b (squared norm of a solution at C_b >= C)".into(),
                )
            })?;
            dome::validate(reference, gamma_b, c)?;
            Engine::Dome { reference, gamma_b }
        }
    };

    let evaluated: Vec<(BoundPair, Status)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let bounds = if oracle.q_diag(i) <= 0.0 {
                // Zero feature vector: margin identically zero.
                BoundPair { lower: 0.0, upper: 0.0 }
            } else {
                engine.bound(i, oracle)
            };
            // The theorems state the rules with strict inequalities, which
            // suffices in exact arithmetic. With reference inputs from
            // finite-tolerance solves a region can collapse onto a sample
            // whose margin sits exactly at 1 (saturated references), where
            // round-off alone would pick a side; require bounds to clear the
            // threshold by a sliver relative to their own scale instead.
            let slack = DECISION_RTOL * bounds.lower.abs().max(bounds.upper.abs()).max(1.0);
            let status = if bounds.lower > 1.0 + slack {
                Status::ScreenedR
            } else if bounds.upper < 1.0 - slack {
                Status::ScreenedL
            } else {
                Status::Unknown
            };
            (bounds, status)
        })
        .collect();

    let mut lower = Vec::with_capacity(n);
    let mut upper = Vec::with_capacity(n);
    let mut statuses = Vec::with_capacity(n);
    let (mut n_r, mut n_l) = (0usize, 0usize);
    for (bounds, status) in evaluated {
        debug_assert!(bounds.lower <= bounds.upper + 1e-9);
        lower.push(bounds.lower);
        upper.push(bounds.upper);
        match status {
            Status::ScreenedR => n_r += 1,
            Status::ScreenedL => n_l += 1,
            Status::Unknown => {}
        }
        statuses.push(status);
    }
    Ok(ScreeningReport {
        test,
        c,
        c_ref: reference.c_ref,
        statuses,
        lower,
        upper,
        n_screened_r: n_r,
        n_screened_l: n_l,
        rate_all: (n_r + n_l) as f64 / n as f64,
        rate_nonsv: None,
    })
}
