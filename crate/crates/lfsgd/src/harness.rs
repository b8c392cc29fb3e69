//! The `lfsgd` command line: `run`, `theory` and `simulate`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfsgd_core::sim::{SimAlgo, SimConfig};
use lfsgd_core::synth::logistic_dataset;
use lfsgd_core::theory::{
    complexity_regime, hogwild_stepsize, solve_rho, theorem2_schedule, AsyncModelParams, RhoSolution,
};
use lfsgd_core::{Dataset, ModelSpec};

use crate::data;
use crate::error::{Error, Result};
use crate::metrics::{write_metrics, MetricsRecord};
use crate::optim::{run, Algo, Count, RunConfig};
use crate::simulate::{simulate_parallel, write_report, SimChecks};
use crate::timing::baseline_unit;

/// Stepsizes tried in grid mode.
pub const STEPSIZE_GRID: [f64; 7] = [0.1, 0.05, 0.01, 0.005, 0.001, 0.0005, 0.0001];
/// Signal strength of `--synthetic` datasets.
pub const SYNTHETIC_SIGNAL: f64 = 3.0;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "lfsgd",
    version,
    about = "Lock-free parallel SGD / SVRG training and analysis"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and write the metrics CSV.
    Run(RunArgs),
    /// Evaluate the convergence-theory constants.
    Theory(TheoryArgs),
    /// Simulate the asynchronous update model and check its bounds.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Loss {
    Logreg,
    Svm,
    Mlp,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// LIBSVM file.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub data: Option<PathBuf>,
    /// Generated logistic data instead of a file, as `N,D`.
    #[arg(long, value_parser = parse_pair)]
    pub synthetic: Option<(usize, usize)>,
    /// Keep only the first N instances.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Rescale every feature into [-1, 1].
    #[arg(long)]
    pub scale: bool,
    /// Raw label mapped to +1 for binary losses.
    #[arg(long, allow_hyphen_values = true)]
    pub positive_class: Option<i64>,
    /// Raw label mapped to -1; other classes are dropped.
    #[arg(long, allow_hyphen_values = true)]
    pub negative_class: Option<i64>,
    #[arg(long, value_enum, default_value = "logreg")]
    pub loss: Loss,
    /// L2 regularization weight.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// MLP hidden width.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    /// Seed for data generation, initialization and sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated: sgd, hogwild, svrg, asysvrg.
    #[arg(long, value_delimiter = ',', required = true)]
    pub algo: Vec<Algo>,
    /// Comma-separated stepsizes.
    #[arg(long, value_delimiter = ',', required_unless_present = "grid")]
    pub eta: Vec<f64>,
    /// Try every stepsize of the standard grid.
    #[arg(long, conflicts_with = "eta")]
    pub grid: bool,
    /// Comma-separated thread counts (sequential algorithms always use 1).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub threads: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Iterations per thread per epoch, or `auto` for ceil(n/p).
    #[arg(long, default_value = "auto")]
    pub iters_per_epoch: Count,
    #[arg(long, default_value_t = 10)]
    pub outer: usize,
    /// Inner steps per thread per outer iteration, or `auto` for ceil(n/p).
    #[arg(long, default_value = "auto")]
    pub inner: Count,
    /// Epochs (or outer iterations) between metrics rows.
    #[arg(long, default_value_t = 1)]
    pub eval_every: usize,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Pin worker threads to cores (accepted, currently ignored).
    #[arg(long)]
    pub pin_threads: bool,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Smoothness constant.
    #[arg(long = "L", value_parser = positive_f64)]
    pub l: f64,
    /// Lower bound on the expected overwrite mask, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub tau: u32,
    #[arg(long, value_parser = positive_f64, required_unless_present = "n")]
    pub eta: Option<f64>,
    /// Gradient-norm bound; with --f0 and --iters gives the Hogwild! stepsize.
    #[arg(long, value_parser = positive_f64, requires_all = ["f0", "iters"])]
    pub grad_bound: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    pub f0: Option<f64>,
    #[arg(long)]
    pub iters: Option<u64>,
    /// With --m-tilde gives the AsySVRG schedule.
    #[arg(long, value_parser = positive_f64, requires = "m_tilde")]
    pub beta: Option<f64>,
    #[arg(long)]
    pub m_tilde: Option<usize>,
    /// With --mu and --nu evaluates the eta = mu/n^(2/3) regime.
    #[arg(long, requires_all = ["mu", "nu"])]
    pub n: Option<u64>,
    #[arg(long, value_parser = positive_f64)]
    pub mu: Option<f64>,
    #[arg(long, value_parser = positive_f64)]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimAlgoArg {
    Hogwild,
    Asysvrg,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "hogwild")]
    pub algo: SimAlgoArg,
    #[arg(long, default_value_t = 0)]
    pub tau: usize,
    #[arg(long, default_value_t = 1.0)]
    pub keep_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    pub partial_prob: f64,
    /// Stepsize; defaults to the largest grid value accepted by the rho
    /// condition.
    #[arg(long, value_parser = positive_f64)]
    pub eta: Option<f64>,
    /// Smoothness constant; defaults to the model's bound.
    #[arg(long = "L", value_parser = positive_f64)]
    pub l: Option<f64>,
    /// Hogwild!: steps per trial.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// AsySVRG: outer iterations per trial.
    #[arg(long, default_value_t = 2)]
    pub outer: usize,
    /// AsySVRG: serialized inner steps per outer iteration.
    #[arg(long, default_value_t = 100)]
    pub inner: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Threads for running trials (defaults to the available parallelism).
    #[arg(long)]
    pub sim_threads: Option<usize>,
    /// Per-step CSV report.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected N,D, got `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad count `{t}`"));
    Ok((parse(a)?, parse(b)?))
}

fn positive_f64(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be finite and > 0, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn main_with_args(args: Vec<OsString>) -> u8 {
    let cmdline = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let stdout = io::stdout();
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a, &cmdline, &mut stdout.lock()),
        Command::Theory(a) => cmd_theory(&a, &mut stdout.lock()),
        Command::Simulate(a) => cmd_simulate(&a, &cmdline, &mut stdout.lock()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    use lfsgd_core::Error as C;
    match e {
        Error::Io { .. } | Error::Csv(_) | Error::Schema(_) => EXIT_IO,
        Error::Core(C::Malformed { .. } | C::NonIncreasingIndex { .. } | C::NonNumeric { .. } | C::EmptyDataset) => {
            EXIT_IO
        }
        Error::Diverged { .. } => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

fn load(args: &DataArgs) -> Result<(ModelSpec, Dataset)> {
    let raw = match (&args.data, args.synthetic) {
        (Some(path), _) => data::load_libsvm(path, args.limit, args.scale)?,
        (None, Some((n, d))) => {
            let mut ds = logistic_dataset(n, d, SYNTHETIC_SIGNAL, args.seed)?;
            if let Some(k) = args.limit {
                ds = ds.truncated(k)?;
            }
            if args.scale {
                ds.scale_max_abs();
            }
            ds
        }
        (None, None) => return Err(Error::usage("one of --data or --synthetic is required")),
    };
    let kind = match args.loss {
        Loss::Logreg => lfsgd_core::ModelKind::LogReg,
        Loss::Svm => lfsgd_core::ModelKind::Svm,
        Loss::Mlp => lfsgd_core::ModelKind::Mlp,
    };
    let ds = data::for_model(&raw, kind, args.positive_class, args.negative_class)?;
    let spec = match args.loss {
        Loss::Logreg => ModelSpec::logreg(ds.dim(), args.lambda)?,
        Loss::Svm => ModelSpec::svm(ds.dim(), args.lambda)?,
        Loss::Mlp => ModelSpec::mlp(ds.dim(), ds.num_classes(), args.hidden, args.lambda)?,
    };
    Ok((spec, ds))
}

fn open_output(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Every `(algo, threads, eta)` combination of the plan, in that order.
pub fn plan_configs(args: &RunArgs) -> Result<Vec<RunConfig>> {
    let etas: Vec<f64> = if args.grid {
        STEPSIZE_GRID.to_vec()
    } else {
        args.eta.clone()
    };
    if etas.is_empty() {
        return Err(Error::usage("no stepsize given"));
    }
    let mut configs = Vec::new();
    for &algo in &args.algo {
        let mut threads: Vec<usize> = if algo.is_parallel() {
            args.threads.clone()
        } else {
            vec![1]
        };
        threads.dedup();
        for &p in &threads {
            for &eta in &etas {
                let c = RunConfig {
                    algo,
                    eta,
                    threads: p,
                    outer_iters: args.outer,
                    inner_iters: args.inner,
                    epochs: args.epochs,
                    iters_per_epoch: args.iters_per_epoch,
                    seed: args.data.seed,
                    eval_every: args.eval_every,
                };
                c.validate()?;
                configs.push(c);
            }
        }
    }
    Ok(configs)
}

pub fn cmd_run(args: &RunArgs, cmdline: &str, out: &mut dyn Write) -> Result<u8> {
    let configs = plan_configs(args)?;
    let (spec, ds) = load(&args.data)?;
    if args.pin_threads {
        eprintln!("note: --pin-threads is not implemented; threads are left to the OS scheduler");
    }
    let unit = baseline_unit(&spec, &ds, args.data.seed)?;
    eprintln!(
        "baseline_unit_seconds={unit:e} n={} dim={} params={}",
        ds.len(),
        ds.dim(),
        spec.num_params()
    );

    let mut records = Vec::new();
    let mut finals: Vec<(RunConfig, f64)> = Vec::new();
    for c in &configs {
        match run(&spec, &ds, c) {
            Ok(mut m) => {
                m.normalize_time(unit);
                let last = *m.last();
                eprintln!(
                    "run algo={} threads={} eta={} final_loss={:e} grad_norm_sq={:e} grad_evals={} elapsed_units={:.3} max_staleness={}",
                    c.algo, c.threads, c.eta, last.train_loss, last.grad_norm_sq, last.grad_evals, last.elapsed_units, m.max_staleness
                );
                records.extend(MetricsRecord::from_run(c, &m));
                finals.push((*c, last.train_loss));
            }
            Err(Error::Diverged { grad_evals, loss }) => {
                eprintln!(
                    "run algo={} threads={} eta={} diverged grad_evals={grad_evals} loss={loss:e}",
                    c.algo, c.threads, c.eta
                );
            }
            Err(e) => return Err(e),
        }
    }

    match &args.metrics {
        Some(path) => {
            let mut f = open_output(path)?;
            write_metrics(&mut f, Some(cmdline), &mut records)?;
            f.flush().map_err(|e| Error::io(path, e))?;
        }
        None => write_metrics(&mut *out, Some(cmdline), &mut records)?,
    }

    if finals.is_empty() {
        eprintln!("error: every run diverged");
        return Ok(EXIT_DIVERGED);
    }
    if args.grid {
        for (algo, threads) in distinct_pairs(&configs) {
            let best = finals
                .iter()
                .filter(|(c, _)| c.algo == algo && c.threads == threads)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match best {
                Some((c, loss)) => eprintln!("best algo={algo} threads={threads} eta={} final_loss={loss:e}", c.eta),
                None => eprintln!("best algo={algo} threads={threads} none (all diverged)"),
            }
        }
    }
    Ok(EXIT_OK)
}

fn distinct_pairs(configs: &[RunConfig]) -> Vec<(Algo, usize)> {
    let mut pairs: Vec<(Algo, usize)> = configs.iter().map(|c| (c.algo, c.threads)).collect();
    pairs.dedup();
    pairs
}

fn io_err(e: io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_theory(args: &TheoryArgs, out: &mut dyn Write) -> Result<u8> {
    if !(args.alpha > 0.0 && args.alpha <= 1.0) {
        return Err(Error::usage("--alpha must lie in (0, 1]"));
    }
    if let Some(eta) = args.eta {
        let rho = match solve_rho(eta, args.tau, args.l)? {
            RhoSolution::Feasible(r) => r,
            RhoSolution::Infeasible => {
                writeln!(out, "status=infeasible").map_err(io_err)?;
                writeln!(out, "rho=none").map_err(io_err)?;
                return Ok(EXIT_OK);
            }
        };
        writeln!(out, "status=feasible").map_err(io_err)?;
        writeln!(out, "rho={rho}").map_err(io_err)?;

        if let (Some(v), Some(f0), Some(iters)) = (args.grad_bound, args.f0, args.iters) {
            let params = AsyncModelParams {
                l: args.l,
                alpha: args.alpha,
                tau: args.tau,
                v,
                eta,
                rho,
            };
            let s = hogwild_stepsize(f0, &params, iters)?;
            writeln!(out, "hogwild_eta={}", s.eta).map_err(io_err)?;
            writeln!(out, "hogwild_bound={}", s.bound).map_err(io_err)?;
        }
        if let (Some(beta), Some(m)) = (args.beta, args.m_tilde) {
            let s = theorem2_schedule(args.l, args.alpha, args.tau, rho, eta, beta, m)?;
            let valid = s.gamma > 0.0 && 4.0 * s.c0() / (args.alpha * beta) < 1.0;
            writeln!(out, "c0={}", s.c0()).map_err(io_err)?;
            writeln!(out, "gamma={}", s.gamma).map_err(io_err)?;
            writeln!(out, "m_tilde={m}").map_err(io_err)?;
            writeln!(out, "valid={valid}").map_err(io_err)?;
        }
    }
    if let (Some(n), Some(mu), Some(nu)) = (args.n, args.mu, args.nu) {
        let eta_n = mu / (n as f64).powf(2.0 / 3.0);
        match solve_rho(eta_n, args.tau, args.l)? {
            RhoSolution::Feasible(rho_n) => {
                let r = complexity_regime(n, mu, nu, args.l, args.alpha, args.tau, rho_n)?;
                writeln!(out, "regime_rho={rho_n}").map_err(io_err)?;
                writeln!(out, "regime_eta={}", r.eta).map_err(io_err)?;
                writeln!(out, "regime_beta={}", r.beta).map_err(io_err)?;
                writeln!(out, "regime_m_tilde={}", r.m_tilde).map_err(io_err)?;
                writeln!(out, "regime_c0={}", r.c0).map_err(io_err)?;
                writeln!(out, "regime_gamma={}", r.gamma).map_err(io_err)?;
                writeln!(out, "regime_valid={}", r.valid).map_err(io_err)?;
            }
            RhoSolution::Infeasible => writeln!(out, "regime_status=infeasible").map_err(io_err)?,
        }
    }
    Ok(EXIT_OK)
}

/// Largest grid stepsize for which the rho condition has a solution.
pub fn largest_feasible_eta(tau: u32, l: f64) -> Result<Option<(f64, f64)>> {
    for eta in STEPSIZE_GRID {
        if let RhoSolution::Feasible(rho) = solve_rho(eta, tau, l)? {
            return Ok(Some((eta, rho)));
        }
    }
    Ok(None)
}

pub fn cmd_simulate(args: &SimulateArgs, cmdline: &str, out: &mut dyn Write) -> Result<u8> {
    let (spec, ds) = load(&args.data)?;
    let l = match args.l {
        Some(l) => l,
        None => spec
            .lipschitz_bound(&ds)
            .map_err(|_| Error::usage("--L is required for the MLP"))?,
    };
    let tau = u32::try_from(args.tau).map_err(|_| Error::usage("--tau too large"))?;
    let (eta, rho) = match args.eta {
        Some(eta) => (eta, solve_rho(eta, tau, l)?.value()),
        None => match largest_feasible_eta(tau, l)? {
            Some((eta, rho)) => (eta, Some(rho)),
            None => return Err(Error::usage("no grid stepsize satisfies the rho condition; pass --eta")),
        },
    };
    let algo = match args.algo {
        SimAlgoArg::Hogwild => SimAlgo::Hogwild { steps: args.steps },
        SimAlgoArg::Asysvrg => SimAlgo::AsySvrg {
            outer: args.outer,
            inner: args.inner,
        },
    };
    let config = SimConfig {
        algo,
        tau: args.tau,
        keep_prob: args.keep_prob,
        partial_prob: args.partial_prob,
        eta,
        trials: args.trials,
        seed: args.data.seed,
        record_detail: false,
    };
    config.validate().map_err(|e| Error::usage(e.to_string()))?;
    let threads = args
        .sim_threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let trace = simulate_parallel(&spec, &ds, &config, threads)?;

    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_err);
    w(out, format!("eta={eta}"))?;
    w(out, format!("L={l}"))?;
    w(out, format!("max_delay={}", trace.max_delay))?;
    w(
        out,
        format!("keep_mean={} keep_std_err={}", trace.keep_mean, trace.keep_std_err),
    )?;
    let Some(rho) = rho else {
        w(out, "status=infeasible".into())?;
        return Ok(EXIT_OK);
    };
    w(out, format!("rho={rho}"))?;
    let checks = SimChecks::run(&trace, rho)?;
    let line = |name: &str, r: &lfsgd_core::sim::CheckReport| {
        format!(
            "{name}: max_ratio={} at_step={} threshold={} holds={}",
            r.max_ratio, r.at_step, r.threshold, r.holds
        )
    };
    w(out, line("q_ratio", &checks.q_ratio))?;
    w(out, line("gap_bound", &checks.gap_bound))?;
    if let Some(r) = &checks.qhat_vs_q {
        w(out, line("qhat_vs_q", r))?;
    }
    w(out, format!("all_hold={}", checks.all_hold()))?;

    if let Some(path) = &args.report {
        let mut f = open_output(path)?;
        write_report(&mut f, Some(cmdline), &trace, rho)?;
        f.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(EXIT_OK)
}
