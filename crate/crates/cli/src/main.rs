use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use opfrelax::bench::{self, BenchConfig, PeakAlloc, RowStatus};
use opfrelax::market::{solve_with_commitment_rounding, MarketError, MarketSolution};
use opfrelax::netmodel::{generate_synthetic_instance, load_instance};
use opfrelax::qmc::{
    sample_bounds_global, sample_bounds_local, solve_qc_local, LocalQcConfig, DEFAULT_EPS_THETA, DEFAULT_EPS_V,
    DEFAULT_LOG2_N,
};
use opfrelax::relax::{RelaxError, RelaxationKind, DEFAULT_MERGE_FRACTION};
use opfrelax::{AngleBounds, ClarabelBackend, MarketInstance, Relaxation};

mod sizes;

#[global_allocator]
static ALLOC: PeakAlloc = PeakAlloc;

#[derive(Debug, Parser)]
#[command(name = "opfrelax", version, about = "Market clearing under convex relaxations of AC optimal power flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clear the market under one relaxation and write a JSON report.
    Solve(SolveArgs),
    /// Estimate per-line angle-difference bounds by Sobol sampling.
    Bounds(BoundsArgs),
    /// Run the subnetwork benchmark and write CSV results.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Instance JSON file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate a synthetic instance with this many buses instead of reading one.
    #[arg(long, value_name = "N")]
    gen: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    source: Source,
    /// dc, shor, chordal, jabr or qc.
    #[arg(long)]
    relaxation: RelaxationKind,
    /// Angle bounds JSON for qc; without it bounds come from local sampling around a Jabr solve.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Seed of the synthetic generator and of the samplers.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clique merge fraction for chordal.
    #[arg(long, default_value_t = DEFAULT_MERGE_FRACTION)]
    merge_fraction: f64,
    /// log2 of the Sobol sample count for qc local sampling.
    #[arg(long, default_value_t = DEFAULT_LOG2_N)]
    log2n: u32,
    #[arg(long, default_value_t = DEFAULT_EPS_V)]
    eps_v: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_THETA)]
    eps_theta: f64,
    /// Report path.
    #[arg(long, default_value = "solution.json")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Global,
    Local,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_enum, default_value_t = Method::Global)]
    method: Method,
    /// log2 of the Sobol sample count per subgraph.
    #[arg(long, default_value_t = 10)]
    log2n: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPS_V)]
    eps_v: f64,
    #[arg(long, default_value_t = DEFAULT_EPS_THETA)]
    eps_theta: f64,
    /// Bounds path; the sample report goes to `<stem>.report.json` next to it.
    #[arg(long, default_value = "bounds.json")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated sizes or `start:end:step` ranges (end included). Default: 32:|V|:32.
    #[arg(long)]
    sizes: Option<String>,
    /// Subnetworks per size.
    #[arg(long, default_value_t = 10)]
    batch: usize,
    #[arg(long, value_delimiter = ',', default_value = "dc,shor,chordal,jabr,qc")]
    relaxations: Vec<RelaxationKind>,
    /// Seed of the generator; subnetwork k of size n uses seed ^ n ^ k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MERGE_FRACTION)]
    merge_fraction: f64,
    /// log2 of the Sobol sample count for qc rows.
    #[arg(long, default_value_t = DEFAULT_LOG2_N)]
    log2n: u32,
    /// Worker threads; peak memory is only recorded with 1.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Row CSV path; per-size means go to `<stem>.summary.csv`.
    #[arg(long, default_value = "bench.csv")]
    out: PathBuf,
}

/// Bad flags or unreadable input: exit code 2.
#[derive(Debug)]
struct InputError(String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_error(msg: impl fmt::Display) -> anyhow::Error {
    anyhow!(InputError(msg.to_string()))
}

fn load(source: &Source, seed: u64) -> Result<MarketInstance> {
    match (&source.input, source.gen) {
        (Some(path), _) => load_instance(path).map_err(input_error),
        (None, Some(n)) => generate_synthetic_instance(n, seed).map_err(input_error),
        (None, None) => Err(input_error("either --input or --gen is required")),
    }
}

/// Relaxation errors stem from the bounds file, so they count as bad input.
fn market_error(e: MarketError) -> anyhow::Error {
    match e {
        MarketError::Relax(
            e @ (RelaxError::MissingBounds(_)
            | RelaxError::InconsistentBounds(_)
            | RelaxError::Io(_)
            | RelaxError::Parse(_)),
        ) => input_error(e),
        e => anyhow!(e),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("serializing output")?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct BusVoltage {
    bus: String,
    vm: f64,
    va: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct SolveReport {
    relaxation: &'static str,
    status: String,
    /// Set when qc returned the Jabr allocation instead.
    fallback: Option<String>,
    welfare: f64,
    objective: f64,
    penalty: f64,
    solver_time_s: f64,
    total_time_s: f64,
    rank_ratio: Option<f64>,
    max_violation: f64,
    phasor_rms: Option<f64>,
    thermal_rms: f64,
    commitment: Vec<Vec<f64>>,
    /// `[period][bus]`.
    voltages: Vec<Vec<BusVoltage>>,
}

fn solve_report(
    inst: &MarketInstance,
    sol: &MarketSolution,
    fallback: Option<String>,
    solver_time: f64,
    total: f64,
) -> SolveReport {
    let voltages = sol
        .voltages
        .v
        .iter()
        .map(|period| {
            period
                .iter()
                .zip(&inst.network.buses)
                .map(|(z, bus)| BusVoltage { bus: bus.id.clone(), vm: z.norm(), va: z.arg(), re: z.re, im: z.im })
                .collect()
        })
        .collect();
    SolveReport {
        relaxation: sol.relaxation,
        status: sol.status.to_string(),
        fallback,
        welfare: sol.welfare,
        objective: sol.objective,
        penalty: sol.penalty,
        solver_time_s: solver_time,
        total_time_s: total,
        rank_ratio: sol.rank_ratio,
        max_violation: sol.max_violation,
        phasor_rms: bench::phasor_error_rms(&sol.flows, &sol.voltages, &inst.network).ok(),
        thermal_rms: bench::thermal_violation_rms(&sol.flows, &inst.network),
        commitment: sol.commitment.clone(),
        voltages,
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let inst = load(&args.source, args.seed)?;
    let backend = ClarabelBackend::default();
    let start = Instant::now();
    let (sol, fallback, solver_time) = match (args.relaxation, &args.bounds) {
        (RelaxationKind::Qc, None) => {
            let config =
                LocalQcConfig { eps_v: args.eps_v, eps_theta: args.eps_theta, log2_n: args.log2n, seed: args.seed };
            let out = solve_qc_local(&inst, &backend, config).map_err(market_error)?;
            let time = out.solver_time().as_secs_f64();
            (out.solution, out.fallback, time)
        }
        (kind, bounds) => {
            let relaxation = match kind {
                RelaxationKind::Dc => Relaxation::Dc,
                RelaxationKind::Shor => Relaxation::Shor,
                RelaxationKind::Chordal => Relaxation::Chordal { merge_fraction: args.merge_fraction },
                RelaxationKind::Jabr => Relaxation::Jabr,
                RelaxationKind::Qc => {
                    let path = bounds.as_ref().expect("matched above");
                    Relaxation::Qc(AngleBounds::load(path).map_err(input_error)?)
                }
            };
            let sol = solve_with_commitment_rounding(&inst, &relaxation, &backend).map_err(market_error)?;
            let time = sol.solver_time().as_secs_f64();
            (sol, None, time)
        }
    };
    let report = solve_report(&inst, &sol, fallback, solver_time, start.elapsed().as_secs_f64());
    write_json(&args.out, &report)?;
    println!(
        "{}: status {}, welfare {:.6}, penalty {:.3e}, solver {:.3}s -> {}",
        report.relaxation,
        report.status,
        report.welfare,
        report.penalty,
        report.solver_time_s,
        args.out.display()
    );
    if let Some(why) = &report.fallback {
        println!("qc fell back to the Jabr allocation: {why}");
    }
    Ok(())
}

fn report_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.report.json"))
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let inst = load(&args.source, args.seed)?;
    let (bounds, report) = match args.method {
        Method::Global => sample_bounds_global(&inst, args.log2n, args.seed)?,
        Method::Local => {
            let jabr = solve_with_commitment_rounding(&inst, &Relaxation::Jabr, &ClarabelBackend::default())
                .map_err(market_error)?;
            sample_bounds_local(&inst, &jabr.voltages, args.eps_v, args.eps_theta, args.log2n, args.seed)?
        }
    };
    write_json(&args.out, &bounds)?;
    let report_out = report_path(&args.out);
    write_json(&report_out, &report)?;
    println!("bounds for {} lines -> {} (report {})", bounds.0.len(), args.out.display(), report_out.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let inst = load(&args.source, args.seed)?;
    let n = inst.network.n_buses();
    let sizes = match &args.sizes {
        Some(text) => sizes::parse_sizes(text).map_err(input_error)?,
        None => sizes::parse_sizes(&format!("32:{n}:32")).unwrap_or_else(|_| vec![n]),
    };
    if let Some(&bad) = sizes.iter().find(|&&s| s > n) {
        return Err(input_error(format!("size {bad} exceeds the {n}-bus instance")));
    }
    if args.batch == 0 || args.jobs == 0 {
        return Err(input_error("--batch and --jobs must be positive"));
    }
    let config = BenchConfig {
        sizes,
        batch: args.batch,
        relaxations: args.relaxations.clone(),
        seed: args.seed,
        merge_fraction: args.merge_fraction,
        qc: LocalQcConfig { log2_n: args.log2n, ..LocalQcConfig::default() },
        jobs: args.jobs,
    };
    let records = bench::run_benchmark(&inst, &config, &ClarabelBackend::default())?;
    let summary = bench::write_csv(&records, &args.out)?;
    let fmt = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"));
    println!(
        "{:<8} {:>5} {:>4} {:>6} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "relax", "size", "rows", "failed", "welfare", "solver_s", "total_s", "phasor", "thermal"
    );
    for s in &summary {
        println!(
            "{:<8} {:>5} {:>4} {:>6} {:>11} {:>11} {:>11} {:>11} {:>11}",
            s.relaxation.as_str(),
            s.size,
            s.rows,
            s.failed,
            fmt(s.welfare),
            fmt(s.solver_time_s),
            fmt(s.total_time_s),
            fmt(s.phasor_rms),
            fmt(s.thermal_rms)
        );
    }
    println!("{} rows -> {} (summary {})", records.len(), args.out.display(), bench::summary_path(&args.out).display());
    if !records.is_empty() && records.iter().all(|r| r.status == RowStatus::Failed) {
        return Err(anyhow!("every benchmark row failed"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<InputError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
