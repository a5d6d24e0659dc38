//! Command-line driver: train, screen, trace regularization paths, sweep
//! screening rates, and generate the toy dataset.
//!
//! Exit codes: 0 success, 1 usage or data errors, 2 verification failure,
//! 3 numerical inconsistency in the screening geometry.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use svmscreen_core::data::{
    generate_toy, parse_libsvm, write_libsvm, Dataset, ParseOptions, ToyMetadata,
};
use svmscreen_core::error::{Error, Result};
use svmscreen_core::kernel::{Kernel, KernelOracle};
use svmscreen_core::model::ModelFile;
use svmscreen_core::path::{run_path, PathConfig};
use svmscreen_core::rates::{rate_sweep, write_rates_csv};
use svmscreen_core::screening::{
    make_reference, reduce_problem, screen, solve_reduced, ScreenTest,
};
use svmscreen_core::solver::{kkt_partition, primal_objective, solve, SolverConfig};

#[derive(Parser)]
#[command(name = "svmscreen", version, about = "SVM training with safe sample screening")]
struct Cli {
    /// Worker threads for screening's parallel bound evaluation
    /// (default: all cores). Results do not depend on the thread count.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Screen samples at a target C against a trained reference model.
    Screen(ScreenArgs),
    /// Trace an epsilon-certified regularization path.
    Path(PathArgs),
    /// Sweep screening rates over a grid of C_ref/C ratios.
    Rates(RatesArgs),
    /// Generate the two-Gaussians toy dataset.
    GenToy(GenToyArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Training data in LIBSVM format.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Accept label 0 as the negative class instead of rejecting it.
    #[arg(long)]
    zero_as_negative: bool,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset> {
        let file = fs::File::open(&self.data)?;
        let opts = ParseOptions { zero_label_negative: self.zero_as_negative };
        parse_libsvm(BufReader::new(file), opts)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Linear,
    Rbf,
}

/// RBF width, either a literal value or `auto:k` meaning `k / d`.
#[derive(Clone, Copy, Debug, PartialEq)]
enum GammaSpec {
    Fixed(f64),
    Auto(f64),
}

impl GammaSpec {
    fn resolve(self, dim: usize) -> f64 {
        match self {
            GammaSpec::Fixed(v) => v,
            GammaSpec::Auto(k) => k / dim as f64,
        }
    }
}

fn parse_gamma(s: &str) -> std::result::Result<GammaSpec, String> {
    let spec = if let Some(k) = s.strip_prefix("auto:") {
        GammaSpec::Auto(k.parse().map_err(|e| format!("invalid auto:k factor `{k}`: {e}"))?)
    } else {
        GammaSpec::Fixed(s.parse().map_err(|e| format!("invalid gamma `{s}`: {e}"))?)
    };
    let (GammaSpec::Fixed(v) | GammaSpec::Auto(v)) = spec;
    if !(v.is_finite() && v > 0.0) {
        return Err(format!("gamma must be positive and finite, got `{s}`"));
    }
    Ok(spec)
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel type.
    #[arg(long, value_enum, default_value_t = KernelKind::Linear)]
    kernel: KernelKind,
    /// RBF width: a number, or `auto:k` for k divided by the feature count.
    #[arg(long, value_parser = parse_gamma, value_name = "G|auto:K")]
    gamma: Option<GammaSpec>,
}

impl KernelArgs {
    fn build(&self, dim: usize) -> Result<Kernel> {
        match (self.kernel, self.gamma) {
            (KernelKind::Linear, None) => Ok(Kernel::Linear),
            (KernelKind::Linear, Some(_)) => {
                Err(Error::InvalidArgument("--gamma only applies to the rbf kernel".into()))
            }
            (KernelKind::Rbf, Some(spec)) => Ok(Kernel::Rbf { gamma: spec.resolve(dim) }),
            (KernelKind::Rbf, None) => {
                Err(Error::InvalidArgument("the rbf kernel requires --gamma".into()))
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestKind {
    Bt1,
    Bt2,
    It,
    Dt,
}

impl TestKind {
    fn to_core(self) -> ScreenTest {
        match self {
            TestKind::Bt1 => ScreenTest::Bt1,
            TestKind::Bt2 => ScreenTest::Bt2,
            TestKind::It => ScreenTest::Intersection,
            TestKind::Dt => ScreenTest::Dome,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Regularization value C.
    #[arg(long)]
    c: f64,
    /// Warm-start from an existing model trained on the same data.
    #[arg(long, value_name = "MODEL")]
    warm: Option<PathBuf>,
    /// Solver KKT tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Output model file (JSON).
    #[arg(long, value_name = "MODEL")]
    out: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Reference model trained at some C_ref <= C.
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    /// Target regularization value C.
    #[arg(long)]
    c: f64,
    /// Screening test.
    #[arg(long, value_enum, default_value_t = TestKind::It)]
    test: TestKind,
    /// Output base path; the report is written to <OUT>.json and <OUT>.csv.
    #[arg(long, value_name = "OUT")]
    out: PathBuf,
    /// Solve the reduced and the full problem and compare the optima.
    #[arg(long)]
    verify: bool,
    /// Model trained at some C_b >= C; supplies the dome test's second
    /// solution.
    #[arg(long, value_name = "MODEL")]
    dt_model_b: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Largest regularization value to trace to.
    #[arg(long = "c-max", default_value_t = 1e4)]
    c_max: f64,
    /// Relative duality-gap budget between consecutive grid points.
    #[arg(long = "eps", default_value_t = 1e-3)]
    epsilon: f64,
    /// Screening test applied at each step (the dome test is not usable
    /// here: it needs a solution at a larger C than the target).
    #[arg(long, value_enum, default_value_t = TestKind::It)]
    test: TestKind,
    /// Output CSV path.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Skip the per-step full-problem KKT report (for timing runs).
    #[arg(long = "no-verify")]
    no_verify: bool,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Target regularization value C; references are solved at ratio * C.
    #[arg(long)]
    c: f64,
    /// Ratio grid start:step:end over (0, 1].
    #[arg(long, default_value = "0.05:0.05:0.95", value_parser = parse_ratios)]
    ratios: RatioGrid,
    /// Append the ratio = 1 endpoint to the grid.
    #[arg(long = "include-one")]
    include_one: bool,
    /// Output CSV path.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Args)]
struct GenToyArgs {
    /// Sample count (even; half per class).
    #[arg(long)]
    n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output LIBSVM file; metadata goes to <OUT>.meta.json.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
struct RatioGrid(Vec<f64>);

fn parse_ratios(s: &str) -> std::result::Result<RatioGrid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, step, end] = parts.as_slice() else {
        return Err(format!("expected start:step:end, got `{s}`"));
    };
    let parse = |tok: &str| -> std::result::Result<f64, String> {
        tok.parse().map_err(|e| format!("invalid ratio bound `{tok}`: {e}"))
    };
    let (start, step, end) = (parse(start)?, parse(step)?, parse(end)?);
    if !(start.is_finite() && step.is_finite() && end.is_finite() && start > 0.0 && step > 0.0) {
        return Err(format!("ratio grid bounds must be positive and finite, got `{s}`"));
    }
    let mut grid = Vec::new();
    for k in 0.. {
        let r = start + step * k as f64;
        if r > end + 1e-12 {
            break;
        }
        grid.push(r);
    }
    if grid.is_empty() {
        return Err(format!("ratio grid `{s}` is empty (end below start)"));
    }
    Ok(RatioGrid(grid))
}

/// Appends `suffix` to a path without touching any existing extension.
fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(suffix);
    PathBuf::from(os)
}

fn kernel_label(kernel: Kernel) -> String {
    match kernel {
        Kernel::Linear => "linear".to_string(),
        Kernel::Rbf { gamma } => format!("rbf(gamma={gamma})"),
    }
}

fn cmd_train(args: &TrainArgs) -> Result<ExitCode> {
    let ds = args.data.load()?;
    let kernel = args.kernel.build(ds.dim())?;
    let oracle = KernelOracle::new(ds, kernel)?;
    let config = SolverConfig::default().with_tolerance(args.tol);
    let warm = match &args.warm {
        Some(path) => Some(ModelFile::load(path)?.to_solution(&oracle)?),
        None => None,
    };
    let solution = solve(&oracle, args.c, &config, warm.as_ref())?;
    let report = primal_objective(&solution);
    let n_sv = solution.alpha.iter().filter(|&&a| a > 0.0).count();
    println!(
        "trained n={} kernel={} C={}: primal={:.12e} dual={:.12e} gap={:.3e} \
         hinge={:.6e} support_vectors={}",
        solution.n(),
        kernel_label(kernel),
        args.c,
        report.primal,
        report.dual,
        report.gap,
        report.xi,
        n_sv
    );
    ModelFile::new(&solution, &oracle, config.kkt_tolerance).save(&args.out)?;
    println!("model written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_screen(args: &ScreenArgs) -> Result<ExitCode> {
    let ds = args.data.load()?;
    let model = ModelFile::load(&args.model)?;
    let oracle = KernelOracle::new(ds, model.kernel()?)?;
    if args.c < model.c {
        return Err(Error::InvalidArgument(format!(
            "screening target C = {} is below the reference C_ref = {}; the tests need C >= C_ref",
            args.c, model.c
        )));
    }
    let reference = make_reference(&model.to_solution(&oracle)?);
    let test = args.test.to_core();
    let dt_gamma_b = match (test, &args.dt_model_b) {
        (ScreenTest::Dome, Some(path)) => {
            let solution_b = ModelFile::load(path)?.to_solution(&oracle)?;
            if solution_b.c < args.c {
                return Err(Error::InvalidArgument(format!(
                    "--dt-model-b was trained at C_b = {} but the dome test needs C_b >= C = {}",
                    solution_b.c, args.c
                )));
            }
            Some(solution_b.norm_sq())
        }
        (ScreenTest::Dome, None) => {
            return Err(Error::InvalidArgument("--test dt requires --dt-model-b".into()));
        }
        (_, Some(_)) => {
            return Err(Error::InvalidArgument("--dt-model-b only applies to --test dt".into()));
        }
        _ => None,
    };
    let mut report = screen(&reference, args.c, test, &oracle, dt_gamma_b)?;

    let mut exit = ExitCode::SUCCESS;
    if args.verify {
        let config = SolverConfig::default().with_tolerance(1e-10);
        let reduced = reduce_problem(&report, &oracle)?;
        let via_reduced = solve_reduced(&reduced, &oracle, &config, Some(&reference.alpha))?;
        let full = solve(&oracle, args.c, &config, None)?;
        report = report.with_exact_partition(&kkt_partition(&full, 1e-6));
        let max_diff = via_reduced
            .alpha
            .iter()
            .zip(&full.alpha)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        println!("verify: max |alpha difference| = {max_diff:.3e}");
        if max_diff > 1e-6 {
            eprintln!(
                "verification FAILED: the screened solve deviates from the full optimum \
                 by {max_diff:.3e} (> 1e-6)"
            );
            exit = ExitCode::from(2);
        }
    }

    let rate_nonsv = match report.rate_nonsv {
        Some(rate) => format!(" rate_nonsv={rate:.4}"),
        None => String::new(),
    };
    println!(
        "test={} C={} C_ref={}: screened_R={} screened_L={} kept={} rate_all={:.4}{}",
        report.test,
        report.c,
        report.c_ref,
        report.n_screened_r,
        report.n_screened_l,
        report.kept_indices().len(),
        report.rate_all,
        rate_nonsv
    );
    let json_path = with_suffix(&args.out, ".json");
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    let csv_path = with_suffix(&args.out, ".csv");
    report.write_csv(BufWriter::new(fs::File::create(&csv_path)?))?;
    println!("report written to {} and {}", json_path.display(), csv_path.display());
    Ok(exit)
}

fn cmd_path(args: &PathArgs) -> Result<ExitCode> {
    let ds = args.data.load()?;
    let kernel = args.kernel.build(ds.dim())?;
    let oracle = KernelOracle::new(ds, kernel)?;
    let config = PathConfig {
        c_max: args.c_max,
        epsilon: args.epsilon,
        test: args.test.to_core(),
        verify: !args.no_verify,
        ..PathConfig::default()
    };
    let result = run_path(&oracle, &config)?;
    result.write_csv(BufWriter::new(fs::File::create(&args.out)?))?;
    let last = result.steps.last().expect("path always holds the C_min step");
    println!(
        "path: {} steps from C_min={:.6e} to C={:.6e}, termination: {}",
        result.steps.len(),
        result.c_min,
        last.c,
        result.termination
    );
    println!("csv written to {}", args.out.display());
    if result.any_verification_failed() {
        let failed = result.steps.iter().filter(|s| s.verified == Some(false)).count();
        eprintln!("verification FAILED at {failed} of {} steps", result.steps.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_rates(args: &RatesArgs) -> Result<ExitCode> {
    let ds = args.data.load()?;
    let kernel = args.kernel.build(ds.dim())?;
    let oracle = KernelOracle::new(ds, kernel)?;
    let rows =
        rate_sweep(&oracle, args.c, &args.ratios.0, args.include_one, &SolverConfig::default())?;
    if rows.iter().any(|r| r.n_nonsv == 0) {
        eprintln!("warning: every sample is on the margin at C = {}; non-SV rates are NaN", args.c);
    }
    write_rates_csv(&rows, BufWriter::new(fs::File::create(&args.out)?))?;
    println!("rates: {} rows written to {}", rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_toy(args: &GenToyArgs) -> Result<ExitCode> {
    let ds = generate_toy(args.n, args.seed)?;
    write_libsvm(&ds, BufWriter::new(fs::File::create(&args.out)?))?;
    let meta_path = with_suffix(&args.out, ".meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&ToyMetadata::new(args.n, args.seed))?)?;
    println!(
        "wrote {} (n={}, d={}, seed={}) and {}",
        args.out.display(),
        ds.n(),
        ds.dim(),
        args.seed,
        meta_path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot size the thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Screen(args) => cmd_screen(args),
        Command::Path(args) => cmd_path(args),
        Command::Rates(args) => cmd_rates(args),
        Command::GenToy(args) => cmd_gen_toy(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; they exit 0.
            let success = e.exit_code() == 0;
            let _ = e.print();
            return if success { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 1 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_spec_parses_fixed_and_auto() {
        assert_eq!(parse_gamma("0.5").unwrap(), GammaSpec::Fixed(0.5));
        assert_eq!(parse_gamma("auto:1").unwrap(), GammaSpec::Auto(1.0));
        assert_eq!(parse_gamma("auto:10").unwrap(), GammaSpec::Auto(10.0));
        for bad in ["", "x", "-1", "0", "auto:", "auto:-2", "auto:nan"] {
            assert!(parse_gamma(bad).is_err(), "`{bad}` should be rejected");
        }
    }

    #[test]
    fn auto_gamma_divides_by_dimension() {
        assert_eq!(GammaSpec::Auto(1.0).resolve(10), 0.1);
        assert_eq!(GammaSpec::Auto(10.0).resolve(4), 2.5);
        assert_eq!(GammaSpec::Fixed(0.7).resolve(10), 0.7);
    }

    #[test]
    fn ratio_grid_covers_the_default_range() {
        let grid = parse_ratios("0.05:0.05:0.95").unwrap().0;
        assert_eq!(grid.len(), 19);
        assert!((grid[0] - 0.05).abs() < 1e-12);
        assert!((grid[18] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn ratio_grid_rejects_malformed_specs() {
        for bad in ["", "0.5", "0.1:0.1", "a:b:c", "0:0.1:0.5", "0.1:-0.1:0.5", "0.9:0.1:0.5"] {
            assert!(parse_ratios(bad).is_err(), "`{bad}` should be rejected");
        }
    }

    #[test]
    fn suffix_appends_without_replacing_extensions() {
        assert_eq!(with_suffix(Path::new("report"), ".json"), PathBuf::from("report.json"));
        assert_eq!(
            with_suffix(Path::new("dir/toy.libsvm"), ".meta.json"),
            PathBuf::from("dir/toy.libsvm.meta.json")
        );
    }

    #[test]
    fn cli_arguments_are_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
