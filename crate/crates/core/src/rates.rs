//! Screening-rate sweeps over a grid of reference/target ratios.
//!
//! For a fixed target `C`, each row solves a reference at `c_ref = ratio * C`
//! (warm-started along the grid), screens with all three reference-based
//! tests, and reports the fraction of true non-support-vectors each test
//! discovered. The exact solution at `C` supplies the denominator.

use std::io::Write;

use crate::error::{Error, Result};
use crate::kernel::KernelOracle;
use crate::screening::{make_reference, screen, ScreenTest};
use crate::solver::{kkt_partition, solve, DualSolution, SolverConfig};

/// Partition band when classifying the exact solution's samples.
const PARTITION_BAND: f64 = 1e-6;

/// One row of a rate sweep. Rates are fractions of the exact non-SV set;
/// `NaN` when that set is empty (every sample exactly on the margin).
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub ratio: f64,
    pub c_ref: f64,
    pub n_nonsv: usize,
    pub bt1_rate: f64,
    pub bt2_rate: f64,
    pub it_rate: f64,
}

/// Sweeps screening rates for `c_ref = ratio * c` over the given ratios.
///
/// Ratios must lie in `(0, 1]`; `include_one` appends the `ratio = 1`
/// endpoint. References are solved in grid order, each warm-started from the
/// previous one.
pub fn rate_sweep(
    oracle: &KernelOracle,
    c: f64,
    ratios: &[f64],
    include_one: bool,
    config: &SolverConfig,
) -> Result<Vec<RateRow>> {
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidArgument(format!("C must be positive and finite, got {c}")));
    }
    let mut grid: Vec<f64> = ratios.to_vec();
    if include_one {
        grid.push(1.0);
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("ratio grid is empty".into()));
    }
    for &ratio in &grid {
        if !(ratio.is_finite() && ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!("ratio {ratio} outside (0, 1]")));
        }
    }

    let exact = solve(oracle, c, config, None)?;
    let partition = kkt_partition(&exact, PARTITION_BAND);
    let n_nonsv = partition.non_sv_count();

    let mut rows = Vec::with_capacity(grid.len());
    let mut previous: Option<DualSolution> = None;
    for ratio in grid {
        let c_ref = ratio * c;
        let reference_solution = solve(oracle, c_ref, config, previous.as_ref())?;
        let reference = make_reference(&reference_solution);
        let mut rates = [f64::NAN; 3];
        for (slot, test) in
            rates.iter_mut().zip([ScreenTest::Bt1, ScreenTest::Bt2, ScreenTest::Intersection])
        {
            let report =
                screen(&reference, c, test, oracle, None)?.with_exact_partition(&partition);
            *slot = report.rate_nonsv.unwrap_or(f64::NAN);
        }
        rows.push(RateRow {
            ratio,
            c_ref,
            n_nonsv,
            bt1_rate: rates[0],
            bt2_rate: rates[1],
            it_rate: rates[2],
        });
        previous = Some(reference_solution);
    }
    Ok(rows)
}

/// CSV rendering: `ratio,bt1_rate,bt2_rate,it_rate`, one row per ratio.
pub fn write_rates_csv<W: Write>(rows: &[RateRow], mut writer: W) -> Result<()> {
    writeln!(writer, "ratio,bt1_rate,bt2_rate,it_rate")?;
    for row in rows {
        writeln!(writer, "{},{},{},{}", row.ratio, row.bt1_rate, row.bt2_rate, row.it_rate)?;
    }
    Ok(())
}
