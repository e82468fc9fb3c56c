//! Command-line front end for the `qrd` binary.
//!
//! Every command writes machine-readable output (JSON for `solve`, CSV for
//! the rest) to stdout or `--out`. Exit codes: 0 success, 1 input error,
//! 2 non-convergence or a failed verification.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::oracles::analytic_uniform_rd;
use crate::problem::{hilbert_schmidt_random, uniform_input, DensityMatrix, ProblemInstance};
use crate::solver::{self, SolverConfig, SolverResult, SolverStatus, WarmStart};
use crate::sym;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
/// Tolerance of `verify` against the analytic uniform curve.
pub const VERIFY_TOL: f64 = 1e-6;
/// Hermiticity tolerance for matrix files.
pub const FILE_HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "qrd",
    version,
    about = "Entanglement-assisted quantum rate-distortion solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a single instance and print a JSON summary.
    Solve(RunArgs),
    /// Solve over a grid of distortion thresholds and write a CSV curve.
    Sweep(RunArgs),
    /// Compare uniform-input solves with the analytic curve.
    Verify(RunArgs),
    /// Write the per-iteration convergence trace as CSV.
    Trace(RunArgs),
    /// Time repeated solves, optionally over several sizes (`-n 20,40,80`).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SourceArgs {
    /// Maximally mixed input I/n.
    #[arg(long, group = "source")]
    pub uniform: bool,
    /// Hilbert-Schmidt random input.
    #[arg(long, group = "source")]
    pub random: bool,
    /// Input state from a JSON matrix file.
    #[arg(long, value_name = "FILE", group = "source")]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Seed for --random.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Input dimension (inferred from --input when omitted).
    #[arg(short = 'n', value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Explicit distortion matrix (JSON file, dimension n·m); defaults to
    /// the entanglement-fidelity distortion.
    #[arg(long, value_name = "FILE")]
    pub distortion: Option<PathBuf>,
    /// Distortion threshold.
    #[arg(short = 'D', allow_negative_numbers = true, conflicts_with = "sweep")]
    pub d: Option<f64>,
    /// Threshold grid START:STOP:COUNT.
    #[arg(long, value_name = "A:B:COUNT")]
    pub sweep: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Symmetry-reduced path (falls back to dense for other distortions).
    #[arg(long, conflicts_with = "dense")]
    pub fast: bool,
    /// Dense path (the default).
    #[arg(long)]
    pub dense: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Also report rates in bits (adds a rate_bits CSV column).
    #[arg(long)]
    pub bits: bool,
    /// Output file instead of stdout.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Solve sweep points independently, in parallel.
    #[arg(long)]
    pub no_warm_start: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 5)]
    pub repeat: usize,
}

/// JSON matrix file: row-major real and imaginary parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

pub fn read_matrix_file(path: &Path) -> Result<HermitianMatrix> {
    let file: MatrixFile = serde_json::from_reader(io::BufReader::new(File::open(path)?))?;
    let im = file
        .im
        .unwrap_or_else(|| vec![vec![0.0; file.dim]; file.dim]);
    for rows in [&file.re, &im] {
        if rows.len() != file.dim || rows.iter().any(|r| r.len() != file.dim) {
            return Err(Error::InvalidInput(format!(
                "{}: expected {d}x{d} entries",
                path.display(),
                d = file.dim
            )));
        }
    }
    HermitianMatrix::from_parts(&file.re, &im, FILE_HERMITIAN_TOL)
}

pub fn write_matrix_file(path: &Path, m: &HermitianMatrix) -> Result<()> {
    let dim = m.dim();
    let file = MatrixFile {
        dim,
        re: (0..dim)
            .map(|i| (0..dim).map(|j| m.get(i, j).re).collect())
            .collect(),
        im: Some(
            (0..dim)
                .map(|i| (0..dim).map(|j| m.get(i, j).im).collect())
                .collect(),
        ),
    };
    serde_json::to_writer_pretty(BufWriter::new(File::create(path)?), &file)?;
    Ok(())
}

impl InstanceArgs {
    fn single_n(&self) -> Result<Option<usize>> {
        match self.n.as_slice() {
            [] => Ok(None),
            [n] => Ok(Some(*n)),
            _ => Err(Error::InvalidInput(
                "only bench accepts several -n values".into(),
            )),
        }
    }

    fn source_state(&self, n: Option<usize>) -> Result<DensityMatrix> {
        if let Some(path) = &self.source.input {
            let rho = DensityMatrix::new(read_matrix_file(path)?)?;
            if let Some(n) = n.filter(|&n| n != rho.dim()) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: rho.dim(),
                });
            }
            return Ok(rho);
        }
        let n = n.ok_or_else(|| {
            Error::InvalidInput("-n is required for --uniform and --random".into())
        })?;
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        Ok(if self.source.uniform {
            uniform_input(n)
        } else {
            hilbert_schmidt_random(n, self.seed)
        })
    }

    fn build(&self, n: Option<usize>, d: f64) -> Result<ProblemInstance> {
        let rho = self.source_state(n)?;
        match &self.distortion {
            None => ProblemInstance::entanglement_fidelity(rho, d),
            Some(path) => {
                let delta = read_matrix_file(path)?;
                let n = rho.dim();
                if delta.dim() % n != 0 {
                    return Err(Error::InvalidInput(format!(
                        "distortion dimension {} is not a multiple of n = {n}",
                        delta.dim()
                    )));
                }
                let m = delta.dim() / n;
                ProblemInstance::with_distortion(rho, delta, m, d)
            }
        }
    }

    /// Thresholds in ascending order.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        match (&self.d, &self.sweep) {
            (Some(d), None) => Ok(vec![*d]),
            (None, Some(spec)) => parse_sweep(spec),
            _ => Err(Error::InvalidInput(
                "exactly one of -D or --sweep is required".into(),
            )),
        }
    }
}

/// Parses `START:STOP:COUNT` into `COUNT` equally spaced values.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("sweep spec `{spec}` is not A:B:COUNT"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, count] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if count == 0 || !a.is_finite() || !b.is_finite() || b < a {
        return Err(bad());
    }
    if count == 1 {
        return Ok(vec![a]);
    }
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                b
            } else {
                a + (b - a) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

impl SolverArgs {
    pub fn config(&self, record_trace: bool) -> SolverConfig {
        SolverConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            alpha: self.alpha,
            record_trace,
            ..SolverConfig::default()
        }
    }

    fn run(
        &self,
        instance: &ProblemInstance,
        cfg: &SolverConfig,
        warm: Option<&WarmStart>,
    ) -> Result<SolverResult> {
        if self.fast {
            sym::solve_sym_with(instance, cfg, warm)
        } else {
            solver::solve_with(instance, cfg, warm)
        }
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        })
    }
}

/// `solve` output.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub n: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub rate_nats: f64,
    pub rate_bits: f64,
    /// `null` for `D = 0`, where the multiplier is infinite.
    pub beta: Option<f64>,
    pub iterations: usize,
    pub final_e_opt: f64,
    pub status: &'static str,
    pub path: &'static str,
    pub wall_time_s: f64,
}

fn exit_code(status: SolverStatus) -> i32 {
    match status {
        SolverStatus::Converged | SolverStatus::RateZeroShortcut => EXIT_OK,
        SolverStatus::MaxIterReached => EXIT_NOT_CONVERGED,
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var("QRD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if k > 0 {
            builder = builder.num_threads(k);
        }
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

pub fn cmd_solve(args: &RunArgs) -> Result<i32> {
    let d = match args.instance.thresholds()?.as_slice() {
        [d] => *d,
        _ => return Err(Error::InvalidInput("solve takes a single -D".into())),
    };
    let instance = args.instance.build(args.instance.single_n()?, d)?;
    let start = Instant::now();
    let r = args
        .solver
        .run(&instance, &args.solver.config(false), None)?;
    let report = SolveReport {
        n: instance.n(),
        d,
        rate_nats: r.rate,
        rate_bits: r.rate / std::f64::consts::LN_2,
        beta: Some(r.dual.beta).filter(|b| b.is_finite()),
        iterations: r.iterations,
        final_e_opt: r.final_e_opt,
        status: r.status.as_str(),
        path: r.path.as_str(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let mut out = args.solver.sink()?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(exit_code(r.status))
}

/// One row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub d: f64,
    pub result: SolverResult,
}

/// Solves every threshold, warm-starting each from the previous one unless
/// `--no-warm-start` is set (then points run in parallel).
pub fn run_sweep(args: &RunArgs) -> Result<Vec<SweepRow>> {
    let thresholds = args.instance.thresholds()?;
    let n = args.instance.single_n()?;
    let base = args.instance.build(n, thresholds[0])?;
    let cfg = args.solver.config(false);
    if args.solver.no_warm_start {
        let pool = thread_pool()?;
        return pool.install(|| {
            thresholds
                .par_iter()
                .map(|&d| {
                    let inst = base.with_threshold(d)?;
                    Ok(SweepRow {
                        d,
                        result: args.solver.run(&inst, &cfg, None)?,
                    })
                })
                .collect()
        });
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    let mut warm: Option<WarmStart> = None;
    for &d in &thresholds {
        let inst = base.with_threshold(d)?;
        let result = args.solver.run(&inst, &cfg, warm.as_ref())?;
        if let Some(w) = result.warm_start() {
            warm = Some(w);
        }
        rows.push(SweepRow { d, result });
    }
    Ok(rows)
}

/// Shortest round-trip form; switches to exponent notation for very small
/// or large magnitudes and prints `inf` for an infinite multiplier.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn cmd_sweep(args: &RunArgs) -> Result<i32> {
    let rows = run_sweep(args)?;
    let mut w = csv::Writer::from_writer(args.solver.sink()?);
    let mut header = vec!["D", "rate_nats", "beta", "iterations", "e_opt", "status"];
    if args.solver.bits {
        header.push("rate_bits");
    }
    w.write_record(&header)?;
    let mut code = EXIT_OK;
    for row in &rows {
        let r = &row.result;
        let mut rec = vec![
            num(row.d),
            num(r.rate),
            num(r.dual.beta),
            r.iterations.to_string(),
            num(r.final_e_opt),
            r.status.as_str().to_string(),
        ];
        if args.solver.bits {
            rec.push(num(r.rate / std::f64::consts::LN_2));
        }
        w.write_record(&rec)?;
        code = code.max(exit_code(r.status));
    }
    w.flush()?;
    Ok(code)
}

pub fn cmd_verify(args: &RunArgs) -> Result<i32> {
    if !args.instance.source.uniform || args.instance.distortion.is_some() {
        return Err(Error::InvalidInput(
            "verify compares against the closed-form curve, which exists only for --uniform input \
             with the entanglement-fidelity distortion"
                .into(),
        ));
    }
    let n = args.instance.single_n()?.unwrap_or(0);
    let rows = run_sweep(args)?;
    let mut out = args.solver.sink()?;
    let mut worst = 0.0_f64;
    for row in &rows {
        let exact = analytic_uniform_rd(n, row.d);
        let err = (row.result.rate - exact).abs();
        worst = worst.max(err);
        let scale = if args.solver.bits {
            std::f64::consts::LN_2
        } else {
            1.0
        };
        writeln!(
            out,
            "D={} rate={:.12} analytic={:.12} abs_err={:.3e} status={}",
            row.d,
            row.result.rate / scale,
            exact / scale,
            err,
            row.result.status.as_str()
        )?;
    }
    let pass = worst <= VERIFY_TOL;
    writeln!(
        out,
        "{} max_abs_err={worst:.3e} tol={VERIFY_TOL:e}",
        if pass { "PASS" } else { "FAIL" }
    )?;
    out.flush()?;
    Ok(if pass { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

pub fn cmd_trace(args: &RunArgs) -> Result<i32> {
    let d = match args.instance.thresholds()?.as_slice() {
        [d] => *d,
        _ => return Err(Error::InvalidInput("trace takes a single -D".into())),
    };
    let instance = args.instance.build(args.instance.single_n()?, d)?;
    let r = args
        .solver
        .run(&instance, &args.solver.config(true), None)?;
    let mut w = csv::Writer::from_writer(args.solver.sink()?);
    let mut header = vec!["k", "e_opt", "rate_nats", "beta", "wall_time_s"];
    if args.solver.bits {
        header.push("rate_bits");
    }
    w.write_record(&header)?;
    for rec in &r.trace {
        let mut row = vec![
            rec.k.to_string(),
            num(rec.e_opt),
            num(rec.rate),
            num(rec.beta),
            num(rec.wall_time),
        ];
        if args.solver.bits {
            row.push(num(rec.rate / std::f64::consts::LN_2));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(exit_code(r.status))
}

/// Timing summary of one benchmarked instance.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub path: &'static str,
    pub repeats: usize,
    pub iterations: usize,
    pub mean_s: f64,
    pub stddev_s: f64,
    pub mean_per_iter_s: f64,
}

pub fn run_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    if args.repeat == 0 {
        return Err(Error::InvalidInput("--repeat must be at least 1".into()));
    }
    let inst_args = &args.run.instance;
    let d = match inst_args.thresholds()?.as_slice() {
        [d] => *d,
        _ => return Err(Error::InvalidInput("bench takes a single -D".into())),
    };
    let sizes: Vec<Option<usize>> = if inst_args.n.is_empty() {
        vec![None]
    } else {
        inst_args.n.iter().map(|&n| Some(n)).collect()
    };
    let cfg = args.run.solver.config(false);
    let mut rows = Vec::new();
    for n in sizes {
        let instance = inst_args.build(n, d)?;
        let mut times = Vec::with_capacity(args.repeat);
        let mut last = None;
        for _ in 0..args.repeat {
            let start = Instant::now();
            let r = args.run.solver.run(&instance, &cfg, None)?;
            times.push(start.elapsed().as_secs_f64());
            last = Some(r);
        }
        let r = last.expect("repeat >= 1");
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / times.len() as f64;
        rows.push(BenchRow {
            n: instance.n(),
            path: r.path.as_str(),
            repeats: args.repeat,
            iterations: r.iterations,
            mean_s: mean,
            stddev_s: var.sqrt(),
            mean_per_iter_s: mean / r.iterations.max(1) as f64,
        });
    }
    Ok(rows)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let rows = run_bench(args)?;
    let mut w = csv::Writer::from_writer(args.run.solver.sink()?);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let outcome = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qrd: {e}");
            EXIT_INPUT
        }
    }
}
