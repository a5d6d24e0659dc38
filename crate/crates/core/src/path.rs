//! ε-approximation regularization-path driver.
//!
//! Starting from the closed-form optimum at `C_min` (every dual variable at
//! the box ceiling), the driver repeatedly picks the largest next `C` whose
//! scaled carry-over solution is certifiably within `epsilon` relative
//! duality gap, screens against the previous optimum, and solves the reduced
//! problem warm-started. A fixed coordinate that turns out to violate the
//! full problem's KKT conditions — possible when a sample sits exactly on
//! the margin and the finite-tolerance reference pushes a strict screening
//! threshold the wrong way — is released and the step re-solved, so every
//! stored solution is an optimum of the full problem. Each step can
//! additionally record the outcome of that KKT check, making screening
//! safety auditable end-to-end.

use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::{
    c_min, make_reference, reduce_problem, screen_impl, select_s_hat, solve_reduced, ScreenTest,
    SelectionVector, Status,
};
use crate::solver::{
    kkt_partition, max_kkt_violation, primal_objective, violation, DualSolution, ObjectiveReport,
    SolverConfig,
};

/// Fraction of the epsilon budget at which the bisection for the next C
/// stops. From a near-exact optimum the certifiable relative step is at
/// least about `epsilon / 2`: margins are at most 1 wherever `alpha > 0`,
/// so the carried gap grows no faster than `sum(alpha)` per unit of scale
/// while the dual objective stays above `sum(alpha) / 2`. Resolving well
/// below that floor keeps a small but genuine step from being mistaken for
/// a collapse on instances where most samples sit exactly on the margin.
const STEP_RESOLUTION: f64 = 1.0 / 16.0;

/// Configuration for a path run.
#[derive(Debug, Clone)]
pub struct PathConfig {
    /// Largest regularization value to trace to.
    pub c_max: f64,
    /// Relative duality-gap budget for the carried-over solution between
    /// consecutive grid points.
    pub epsilon: f64,
    /// Screening rule applied at each step; the dome test is rejected here
    /// because it needs a solution at a *larger* C than the target.
    pub test: ScreenTest,
    pub solver: SolverConfig,
    /// Check every stored solution against the full problem's KKT conditions.
    pub verify: bool,
    /// Violation ceiling for that check.
    pub verify_tolerance: f64,
    /// Margin band when partitioning a solution to test the loop condition.
    pub kkt_band: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            c_max: 1e4,
            epsilon: 1e-3,
            test: ScreenTest::Intersection,
            solver: SolverConfig::default(),
            verify: true,
            verify_tolerance: 1e-6,
            kkt_band: 1e-6,
        }
    }
}

impl PathConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c_max.is_finite() && self.c_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "c_max must be positive and finite, got {}",
                self.c_max
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        if self.test == ScreenTest::Dome {
            return Err(Error::InvalidArgument(
                "the path driver screens from the previous (smaller-C) solution; \
                 the dome test needs a solution at a larger C and cannot be used here"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Why the path loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// No sample remained below the margin: the while-condition `L != {}`
    /// failed, which can happen before `c_max` on separable data.
    LowSetEmpty,
    /// The grid reached `c_max`.
    ReachedCMax,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Termination::LowSetEmpty => f.write_str("L empty"),
            Termination::ReachedCMax => f.write_str("reached c-max"),
        }
    }
}

/// One grid point of the path.
#[derive(Debug, Clone)]
pub struct PathStep {
    pub c: f64,
    pub solution: DualSolution,
    pub n_screened_r: usize,
    pub n_screened_l: usize,
    pub n_kept: usize,
    pub rate_all: f64,
    pub objective: ObjectiveReport,
    /// `Some(passed)` when verification ran, `None` when disabled.
    pub verified: Option<bool>,
    pub wall_secs: f64,
}

/// Outcome of a path run.
#[derive(Debug, Clone)]
pub struct PathResult {
    /// The closed-form path start.
    pub c_min: f64,
    /// Strictly increasing in C, starting at `c_min`.
    pub steps: Vec<PathStep>,
    pub termination: Termination,
}

impl PathResult {
    /// True when some step ran verification and failed it.
    pub fn any_verification_failed(&self) -> bool {
        self.steps.iter().any(|s| s.verified == Some(false))
    }

    /// CSV rendering, one row per step:
    /// `C,n_screened_R,n_screened_L,n_kept,rate_all,dual_obj,primal_obj,gap,verified`.
    /// The `verified` cell is 1/0, or empty when verification was disabled.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(
            writer,
            "C,n_screened_R,n_screened_L,n_kept,rate_all,dual_obj,primal_obj,gap,verified"
        )?;
        for step in &self.steps {
            let verified = match step.verified {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            writeln!(
                writer,
                "{},{},{},{},{},{},{},{},{}",
                step.c,
                step.n_screened_r,
                step.n_screened_l,
                step.n_kept,
                step.rate_all,
                step.objective.dual,
                step.objective.primal,
                step.objective.gap,
                verified
            )?;
        }
        Ok(())
    }
}

/// Certified relative-gap bound for the scaled carry-over of `prev` across
/// the whole segment `[C_prev, s * C_prev]`, or `None` when the certificate's
/// denominator is not positive there.
///
/// With `alpha_c = s * alpha_prev` (box-feasible at `C = s * C_prev` for
/// `s >= 1`), the duality gap at C factors as `s * numer(s)` and the dual
/// objective as `s * denom(s)` where
///
/// ```text
/// numer(s) = s * ||w||^2 + C_prev * sum_i max(0, 1 - s * margin_i) - sum(alpha)
/// denom(s) = sum(alpha) - s * ||w||^2 / 2
/// ```
///
/// `numer` is convex in `s` and nonnegative (weak duality), `denom` affine
/// and decreasing, so `max(numer(1), numer(s)) / denom(s)` bounds the
/// relative gap `numer/denom` for every scale in `[1, s]` at once.
fn segment_certificate(prev: &DualSolution, s: f64) -> Option<f64> {
    let a: f64 = prev.sum_alpha();
    let n = prev.norm_sq();
    let numer = |s: f64| -> f64 {
        let hinge: f64 = prev.margins.iter().map(|&m| (1.0 - s * m).max(0.0)).sum();
        (s * n + prev.c * hinge - a).max(0.0)
    };
    let denom = a - 0.5 * s * n;
    (denom > 0.0).then(|| numer(1.0).max(numer(s)) / denom)
}

/// Largest `C_t` in `(C_prev, c_max]` such that scaling `prev` by `C/C_prev`
/// stays within relative duality gap `epsilon` for every `C` up to `C_t`,
/// found by doubling then bisection on the scale factor.
pub fn next_c(prev: &DualSolution, epsilon: f64, c_max: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    if !(c_max.is_finite() && c_max > prev.c) {
        return Err(Error::InvalidArgument(format!(
            "c_max = {c_max} must be finite and exceed the current C = {}",
            prev.c
        )));
    }
    let accepts = |s: f64| segment_certificate(prev, s).is_some_and(|cert| cert <= epsilon);
    if !accepts(1.0) {
        let gap = segment_certificate(prev, 1.0).unwrap_or(f64::INFINITY);
        return Err(Error::StepCollapse { c: prev.c, gap });
    }

    let s_max = c_max / prev.c;
    let mut lo = 1.0_f64;
    let mut hi = loop {
        let s = (2.0 * lo).min(s_max);
        if accepts(s) {
            if s >= s_max {
                return Ok(c_max);
            }
            lo = s;
        } else {
            break s;
        }
    };
    let resolution = (STEP_RESOLUTION * epsilon).max(4.0 * f64::EPSILON);
    while hi - lo > resolution * lo {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if accepts(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo <= 1.0 {
        let gap = segment_certificate(prev, hi).unwrap_or(f64::INFINITY);
        return Err(Error::StepCollapse { c: prev.c, gap });
    }
    Ok((prev.c * lo).min(c_max))
}

/// Hamming distance between two selection vectors.
pub fn s_hat_delta(prev: &SelectionVector, next: &SelectionVector) -> Result<usize> {
    if prev.len() != next.len() {
        return Err(Error::LengthMismatch { expected: prev.len(), got: next.len() });
    }
    Ok(prev.iter().zip(next.iter()).filter(|(a, b)| a != b).count())
}

/// Incrementally maintained `Q * s_hat` product: consecutive selections
/// differ in few entries, so only the changed columns are added or removed.
/// Falls back to a fresh matrix-vector product when more than half the
/// entries flip, which also caps accumulated rounding drift.
struct SelectionCache {
    bits: SelectionVector,
    qs: Vec<f64>,
}

impl SelectionCache {
    fn new(n: usize) -> Self {
        SelectionCache { bits: SelectionVector::new(vec![false; n]), qs: vec![0.0; n] }
    }

    fn update(&mut self, target: &SelectionVector, oracle: &KernelOracle) -> Result<&[f64]> {
        let delta = s_hat_delta(&self.bits, target)?;
        if 2 * delta > target.len() {
            self.qs = oracle.q_matvec(&target.to_dense())?;
        } else {
            for i in 0..target.len() {
                if target.get(i) != self.bits.get(i) {
                    let row = oracle.q_row(i)?;
                    let sign = if target.get(i) { 1.0 } else { -1.0 };
                    for (q, &r) in self.qs.iter_mut().zip(row.iter()) {
                        *q += sign * r;
                    }
                }
            }
        }
        self.bits = target.clone();
        Ok(&self.qs)
    }
}

/// Traces the ε-approximation path from `C_min` toward `config.c_max`.
///
/// The first grid point is the closed-form optimum `alpha = C_min * 1`; the
/// loop then alternates [`next_c`], screening from the previous optimum, and
/// a warm-started reduced solve, stopping when no sample remains below the
/// margin or the grid reaches `c_max`.
pub fn run_path(oracle: &KernelOracle, config: &PathConfig) -> Result<PathResult> {
    config.validate()?;
    let n = oracle.n();
    let c_start = c_min(oracle)?;

    let started = Instant::now();
    let mut current = DualSolution::from_alpha(vec![c_start; n], c_start, oracle)?;
    let verified = verify(config, &current);
    let mut steps = vec![PathStep {
        c: c_start,
        solution: current.clone(),
        n_screened_r: 0,
        n_screened_l: 0,
        n_kept: n,
        rate_all: 0.0,
        objective: primal_objective(&current),
        verified,
        wall_secs: started.elapsed().as_secs_f64(),
    }];
    let mut cache = SelectionCache::new(n);

    let termination = loop {
        if kkt_partition(&current, config.kkt_band).l.is_empty() {
            break Termination::LowSetEmpty;
        }
        if current.c >= config.c_max {
            break Termination::ReachedCMax;
        }
        let step = steps.len();
        let wrap = |e: Error| Error::PathStep { step, c: current.c, source: Box::new(e) };

        let started = Instant::now();
        let c_next = next_c(&current, config.epsilon, config.c_max).map_err(wrap)?;
        let reference = make_reference(&current);
        let mut report = (|| {
            let qs = match config.test {
                ScreenTest::Bt1 => None,
                _ => {
                    let s_hat = select_s_hat(&reference, c_next)?;
                    Some(cache.update(&s_hat, oracle)?.to_vec())
                }
            };
            screen_impl(&reference, c_next, config.test, oracle, None, qs.as_deref())
        })()
        .map_err(wrap)?;
        let mut reduced = reduce_problem(&report, oracle).map_err(wrap)?;
        let scale = c_next / current.c;
        let warm: Vec<f64> = current.alpha.iter().map(|&a| a * scale).collect();
        let mut solution =
            solve_reduced(&reduced, oracle, &config.solver, Some(&warm)).map_err(wrap)?;
        // The reference is itself solved only to a tolerance, so a sample
        // sitting exactly on the margin can land a hair past a strict
        // screening threshold. Such a flip surfaces as a KKT violation at a
        // fixed coordinate of the expanded solution (its margins are fresh
        // and cover the full problem). Release those coordinates and
        // re-solve instead of storing a near-optimum whose residual gap
        // would poison later step certificates. The kept set grows every
        // round, so this terminates.
        let repair_slack = 10.0 * config.solver.kkt_tolerance;
        loop {
            let flipped: Vec<usize> = reduced
                .fixed_r
                .iter()
                .chain(&reduced.fixed_l)
                .copied()
                .filter(|&i| {
                    violation(solution.alpha[i], c_next, 1.0 - solution.margins[i]) > repair_slack
                })
                .collect();
            if flipped.is_empty() {
                break;
            }
            for &i in &flipped {
                report.statuses[i] = Status::Unknown;
            }
            reduced = reduce_problem(&report, oracle).map_err(wrap)?;
            solution = solve_reduced(&reduced, oracle, &config.solver, Some(&solution.alpha))
                .map_err(wrap)?;
        }
        let verified = verify(config, &solution);
        steps.push(PathStep {
            c: c_next,
            solution: solution.clone(),
            n_screened_r: reduced.fixed_r.len(),
            n_screened_l: reduced.fixed_l.len(),
            n_kept: reduced.n_kept(),
            rate_all: (reduced.fixed_r.len() + reduced.fixed_l.len()) as f64 / n as f64,
            objective: primal_objective(&solution),
            verified,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        current = solution;
    };
    Ok(PathResult { c_min: c_start, steps, termination })
}

fn verify(config: &PathConfig, solution: &DualSolution) -> Option<bool> {
    config.verify.then(|| max_kkt_violation(solution) <= config.verify_tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_toy, parse_libsvm_str, ParseOptions};
    use crate::kernel::Kernel;
    use crate::solver::{dual_objective, solve};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_oracle(n: usize, seed: u64) -> KernelOracle {
        KernelOracle::new(generate_toy(n, seed).unwrap(), Kernel::Linear).unwrap()
    }

    #[test]
    fn next_c_moves_strictly_forward_from_an_optimum() {
        let oracle = toy_oracle(60, 5);
        let sol = solve(&oracle, 0.05, &SolverConfig::default(), None).unwrap();
        let c = next_c(&sol, 1e-3, 1e4).unwrap();
        assert!(c > sol.c);
        assert!(c <= 1e4);
    }

    #[test]
    fn huge_epsilon_reaches_c_max() {
        // At C = c_min the all-at-bound solution has sum(alpha) strictly
        // above ||w||^2 (every margin is at most 1), so the certificate's
        // denominator stays positive across a doubling of C and an enormous
        // epsilon accepts everything up to c_max.
        let oracle = toy_oracle(40, 9);
        let cm = crate::screening::c_min(&oracle).unwrap();
        let sol = DualSolution::from_alpha(vec![cm; 40], cm, &oracle).unwrap();
        assert!(sol.sum_alpha() > sol.norm_sq());
        let c_max = 2.0 * cm;
        assert_eq!(next_c(&sol, 1e9, c_max).unwrap(), c_max);
    }

    #[test]
    fn certificate_bounds_the_true_error_on_sampled_interior_points() {
        let oracle = toy_oracle(60, 11);
        let config = SolverConfig::default();
        let epsilon = 1e-3;
        let prev = solve(&oracle, 0.08, &config, None).unwrap();
        let c_t = next_c(&prev, epsilon, 1e4).unwrap();
        for k in 1..=5 {
            let c = prev.c + (c_t - prev.c) * k as f64 / 5.0;
            let scale = c / prev.c;
            let carried: Vec<f64> = prev.alpha.iter().map(|&a| a * scale).collect();
            let carried = DualSolution::from_alpha(carried, c, &oracle).unwrap();
            let exact = solve(&oracle, c, &config, None).unwrap();
            let d_star = dual_objective(&exact);
            let rel = (d_star - dual_objective(&carried)) / d_star;
            assert!(rel <= epsilon + 1e-6, "C = {c}: true relative error {rel}");
        }
    }

    #[test]
    fn collapse_when_the_carried_solution_is_already_out_of_budget() {
        // A deliberately non-optimal feasible point has a fixed positive
        // duality gap, so a tiny epsilon cannot be certified even at C itself.
        let oracle = toy_oracle(40, 3);
        let sol = DualSolution::from_alpha(vec![0.5; 40], 1.0, &oracle).unwrap();
        match next_c(&sol, 1e-15, 1e4) {
            Err(Error::StepCollapse { c, gap }) => {
                assert_eq!(c, 1.0);
                assert!(gap > 1e-15);
            }
            other => panic!("expected step collapse, got {other:?}"),
        }
    }

    #[test]
    fn delta_counts_flipped_entries() {
        let a = SelectionVector::new(vec![true, false, true]);
        let b = SelectionVector::new(vec![true, true, false]);
        assert_eq!(s_hat_delta(&a, &a).unwrap(), 0);
        assert_eq!(s_hat_delta(&a, &b).unwrap(), 2);
        let complement = SelectionVector::new(a.iter().map(|x| !x).collect());
        assert_eq!(s_hat_delta(&a, &complement).unwrap(), 3);
        let short = SelectionVector::new(vec![true]);
        assert!(s_hat_delta(&a, &short).is_err());
    }

    #[test]
    fn incremental_selection_cache_matches_recomputation() {
        let oracle =
            KernelOracle::new(generate_toy(40, 21).unwrap(), Kernel::Rbf { gamma: 0.7 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut cache = SelectionCache::new(40);
        let mut bits = vec![false; 40];
        for _ in 0..6 {
            for b in bits.iter_mut() {
                if rng.random_bool(0.3) {
                    *b = !*b;
                }
            }
            let target = SelectionVector::new(bits.clone());
            let qs = cache.update(&target, &oracle).unwrap().to_vec();
            let fresh = oracle.q_matvec(&target.to_dense()).unwrap();
            for (a, b) in qs.iter().zip(&fresh) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn path_on_toy_verifies_every_step_and_increases_c() {
        let oracle = toy_oracle(120, 42);
        let config = PathConfig { c_max: 5.0, ..PathConfig::default() };
        let result = run_path(&oracle, &config).unwrap();
        assert!(result.steps.len() >= 2);
        assert_eq!(result.steps[0].c, result.c_min);
        for pair in result.steps.windows(2) {
            assert!(pair[1].c > pair[0].c, "C-sequence must be strictly increasing");
        }
        assert!(!result.any_verification_failed());
        assert!(result.steps.iter().all(|s| s.verified == Some(true)));
        let screened: usize = result.steps.iter().map(|s| s.n_screened_r + s.n_screened_l).sum();
        assert!(screened > 0, "screening should engage along the path");
        assert_eq!(result.termination, Termination::ReachedCMax);
    }

    #[test]
    fn path_warm_starts_do_not_change_the_optimum() {
        let oracle = toy_oracle(80, 13);
        let config = PathConfig { c_max: 3.0, ..PathConfig::default() };
        let result = run_path(&oracle, &config).unwrap();
        for step in result.steps.iter().skip(1).take(3) {
            let cold = solve(&oracle, step.c, &config.solver, None).unwrap();
            let rel = (dual_objective(&cold) - step.objective.dual).abs()
                / dual_objective(&cold).abs().max(1.0);
            assert!(rel <= 1e-8, "C = {}: warm/cold objective drift {rel}", step.c);
        }
    }

    #[test]
    fn c_min_at_or_above_c_max_yields_a_single_closed_form_step() {
        let oracle = toy_oracle(30, 2);
        let cm = crate::screening::c_min(&oracle).unwrap();
        let config = PathConfig { c_max: 0.5 * cm, ..PathConfig::default() };
        let result = run_path(&oracle, &config).unwrap();
        assert_eq!(result.steps.len(), 1);
        assert_eq!(result.steps[0].c, cm);
        assert_eq!(result.steps[0].n_kept, 30);
        assert_eq!(result.termination, Termination::ReachedCMax);
    }

    #[test]
    fn separable_data_stops_when_the_low_set_empties() {
        // Two well-separated points: for large C the solution has no sample
        // below the margin, so the loop must exit by the L-empty condition
        // well before an astronomical c_max.
        let ds = parse_libsvm_str("+1 1:2\n-1 2:2\n", ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        let config = PathConfig { c_max: 1e12, ..PathConfig::default() };
        let result = run_path(&oracle, &config).unwrap();
        assert_eq!(result.termination, Termination::LowSetEmpty);
        let last = &result.steps.last().unwrap().solution;
        assert!(kkt_partition(last, 1e-6).l.is_empty());
    }

    #[test]
    fn path_rejects_the_dome_test() {
        let oracle = toy_oracle(10, 1);
        let config = PathConfig { test: ScreenTest::Dome, ..PathConfig::default() };
        assert!(matches!(run_path(&oracle, &config), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn csv_lists_header_and_verified_flags() {
        let oracle = toy_oracle(40, 8);
        let config = PathConfig { c_max: 1.0, ..PathConfig::default() };
        let result = run_path(&oracle, &config).unwrap();
        let mut out = Vec::new();
        result.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("C,n_screened_R,n_screened_L,n_kept,rate_all,dual_obj,primal_obj,gap,verified")
        );
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), result.steps.len());
        assert!(rows.iter().all(|r| r.ends_with(",1")));

        let unverified = PathConfig { c_max: 1.0, verify: false, ..PathConfig::default() };
        let result = run_path(&oracle, &unverified).unwrap();
        assert!(result.steps.iter().all(|s| s.verified.is_none()));
        let mut out = Vec::new();
        result.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().skip(1).all(|r| r.ends_with(',')));
    }
}
