//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs without the libtest harness so every line reaches the terminal;
//! the process exits non-zero if any criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use lfsgd::data::{for_model, load_libsvm};
use lfsgd::harness::largest_feasible_eta;
use lfsgd::optim::MetricsRow;
use lfsgd::simulate::{simulate_parallel, SimChecks};
use lfsgd::stress::{support_locality, two_sentinel};
use lfsgd::{run, Algo, RunConfig, RunMetrics};
use lfsgd_core::estimator::variance_probe;
use lfsgd_core::sampling::stream_rng;
use lfsgd_core::sim::{bound_rows, SimAlgo, SimConfig};
use lfsgd_core::synth::logistic_dataset;
use lfsgd_core::theory::{
    c0_closed_form, complexity_regime, lemma1_check, schedule_constants, solve_rho, theorem2_schedule, RhoSolution,
};
use lfsgd_core::{Dataset, GradientBuffer, ModelKind, ModelSpec};
use rand::Rng;

const DIGITS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/digits.libsvm");
const SPEEDUP: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/speedup_calibration.csv");

// desk scale
const DESK_N: usize = 1000;
const DESK_D: usize = 20;
const DESK_LAMBDA: f64 = 1e-3;
const DESK_SEED: u64 = 1;

// committed (mu, v) for the complexity sweep
const SWEEP_MU: f64 = 0.1;
const SWEEP_V: f64 = 1.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn desk() -> (ModelSpec, Dataset) {
    (
        ModelSpec::logreg(DESK_D, DESK_LAMBDA).unwrap(),
        logistic_dataset(DESK_N, DESK_D, lfsgd::harness::SYNTHETIC_SIGNAL, DESK_SEED).unwrap(),
    )
}

fn digits() -> (ModelSpec, Dataset) {
    let raw = load_libsvm(Path::new(DIGITS), Some(2000), true).unwrap();
    let data = for_model(&raw, ModelKind::Mlp, None, None).unwrap();
    (ModelSpec::mlp(data.dim(), data.num_classes(), 16, 1e-3).unwrap(), data)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn untimed(rows: &[MetricsRow]) -> Vec<(u64, u64, u64)> {
    rows.iter()
        .map(|r| (r.grad_evals, r.train_loss.to_bits(), r.grad_norm_sq.to_bits()))
        .collect()
}

fn same_trajectory(a: &RunMetrics, b: &RunMetrics) -> bool {
    untimed(&a.rows) == untimed(&b.rows)
        && a.final_params
            .iter()
            .map(|x| x.to_bits())
            .eq(b.final_params.iter().map(|x| x.to_bits()))
}

/// Worst relative error of the analytic single-instance gradient against
/// central differences of the loss, over `points` random (params, instance)
/// draws. `accept` may reject a draw (e.g. near a kink).
fn fd_sweep(
    spec: &ModelSpec,
    data: &Dataset,
    points: usize,
    seed: u64,
    base: &[f64],
    spread: f64,
    accept: impl Fn(&[f64], usize) -> bool,
) -> f64 {
    let mut rng = stream_rng(seed, 0);
    let h = 1e-5;
    let mut g = GradientBuffer::new(spec.num_params());
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < points {
        let w: Vec<f64> = base.iter().map(|b| b + rng.random_range(-spread..spread)).collect();
        let i = rng.random_range(0..data.len());
        if !accept(&w, i) {
            continue;
        }
        let (x, y) = data.instance(i);
        spec.grad_single(&w, x, y, &mut g).unwrap();
        let mut fd = vec![0.0; w.len()];
        let mut probe = w.clone();
        for k in 0..w.len() {
            probe[k] = w[k] + h;
            let up = spec.loss_single(&probe, x, y).unwrap();
            probe[k] = w[k] - h;
            let down = spec.loss_single(&probe, x, y).unwrap();
            probe[k] = w[k];
            fd[k] = (up - down) / (2.0 * h);
        }
        let diff: Vec<f64> = g.values().iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(g.values()).max(norm(&fd)));
        done += 1;
    }
    worst
}

fn gradient_correctness() -> Outcome {
    let (logreg, data) = desk();
    let zero = vec![0.0; DESK_D];
    let lr = fd_sweep(&logreg, &data, 100, 11, &zero, 2.0, |_, _| true);

    let svm = ModelSpec::svm(DESK_D, DESK_LAMBDA).unwrap();
    let off_kink = |w: &[f64], i: usize| {
        let (x, y) = data.instance(i);
        let sign = if y == 1 { 1.0 } else { -1.0 };
        let margin: f64 = x.iter().map(|(k, v)| v * w[k]).sum::<f64>() * sign;
        (1.0 - margin).abs() > 1e-3
    };
    let sv = fd_sweep(&svm, &data, 100, 12, &zero, 2.0, off_kink);

    let (mlp, ddata) = digits();
    let mp = fd_sweep(&mlp, &ddata, 100, 13, &mlp.init_params(3), 0.5, |_, _| true);

    check(
        lr <= 1e-6 && sv <= 1e-6 && mp <= 1e-4,
        format!("max rel err logreg={lr:.2e} svm={sv:.2e} (<= 1e-6), mlp H=16={mp:.2e} (<= 1e-4)"),
    )
}

fn lemma1_sweep() -> Outcome {
    let (spec, data) = desk();
    let l = spec.lipschitz_bound(&data).unwrap();
    let mut rng = stream_rng(21, 0);
    let trials = 10_000;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..trials {
        let x: Vec<f64> = (0..DESK_D).map(|_| rng.random_range(-3.0..3.0)).collect();
        let scale = if t % 2 == 0 { 1e-3 } else { 3.0 };
        let y: Vec<f64> = x.iter().map(|v| v + rng.random_range(-scale..scale)).collect();
        let alpha = rng.random_range(0.01..=1.0);
        let b: Vec<f64> = (0..DESK_D).map(|_| rng.random_range(alpha..=1.0)).collect();
        let r = lemma1_check(l, alpha, &x, &y, &b, |p| Ok(spec.full_grad(p, &data)?.to_vec())).unwrap();
        violations += usize::from(!r.holds);
        worst = worst.max(r.lhs - r.rhs);
    }
    check(
        violations == 0,
        format!("{trials} trials, L={l:.4}, violations={violations}, max lhs-rhs={worst:.3e}"),
    )
}

fn single_thread_equivalence() -> Outcome {
    let (spec, data) = desk();
    let (mlp, digits) = digits();
    let small = digits.truncated(300).unwrap();
    let mut compared = 0;
    for seed in [0, 1, 2] {
        for (spec, data) in [(&spec, &data), (&mlp, &small)] {
            let sgd = RunConfig {
                epochs: 3,
                seed,
                ..RunConfig::new(Algo::Sgd, 0.05)
            };
            let svrg = RunConfig {
                outer_iters: 3,
                seed,
                ..RunConfig::new(Algo::Svrg, 0.05)
            };
            for (seq, par) in [(sgd, Algo::Hogwild), (svrg, Algo::AsySvrg)] {
                let a = run(spec, data, &seq).unwrap();
                let b = run(spec, data, &RunConfig { algo: par, ..seq }).unwrap();
                if !same_trajectory(&a, &b) {
                    return Err(format!("{par} p=1 differs from {} (seed {seed})", seq.algo));
                }
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} pairs bit-identical (logreg and MLP, seeds 0-2)"))
}

fn variance_reduction() -> Outcome {
    let (spec, data) = desk();
    let l = spec.lipschitz_bound(&data).unwrap();
    let seed = 4;
    let svrg = |outer: usize| {
        let c = RunConfig {
            outer_iters: outer,
            seed,
            ..RunConfig::new(Algo::Svrg, 0.1)
        };
        run(&spec, &data, &c).unwrap()
    };
    let long = svrg(40);
    let Some(r) = long.rows.iter().position(|row| row.grad_norm_sq <= 1e-4) else {
        return Err("SVRG never reached ||grad f||^2 <= 1e-4".into());
    };
    let anchor = if r <= 1 {
        spec.init_params(seed).to_vec()
    } else {
        svrg(r - 1).final_params.to_vec()
    };
    let query = svrg(r).final_params.to_vec();
    let gq = spec.full_grad(&query, &data).unwrap();
    let at = variance_probe(&spec, &data, &anchor, &query, 5000, 1).unwrap();
    let ratio = at.mean_sq_svrg / at.mean_sq_sgd;

    let mut rng = stream_rng(31, 0);
    let mut worst: f64 = 0.0;
    let mut failed = 0;
    for k in 0..20 {
        let s = 10f64.powf(rng.random_range(-3.0..0.5));
        let a: Vec<f64> = query.iter().map(|v| v + rng.random_range(-s..s)).collect();
        let s2 = 10f64.powf(rng.random_range(-3.0..0.0));
        let q: Vec<f64> = a.iter().map(|v| v + rng.random_range(-s2..s2)).collect();
        let p = variance_probe(&spec, &data, &a, &q, 2000, 100 + k).unwrap();
        let dist_sq: f64 = q.iter().zip(&a).map(|(x, y)| (x - y) * (x - y)).sum();
        let g = spec.full_grad(&q, &data).unwrap();
        let bound = 2.0 * l * l * dist_sq + 2.0 * norm(&g).powi(2);
        worst = worst.max(p.mean_sq_svrg / bound);
        failed += usize::from(p.mean_sq_svrg > bound + 3.0 * p.std_err_svrg);
    }
    check(
        ratio <= 0.01 && failed == 0,
        format!(
            "after {r} outer iterations ||grad f||^2={:.2e}; svrg/sgd second moment={ratio:.2e} (<= 0.01); \
             bound violated on {failed}/20 pairs, max moment/bound={worst:.3}",
            norm(&gq).powi(2)
        ),
    )
}

fn running_averages(rows: &[MetricsRow]) -> Vec<f64> {
    let mut sum = 0.0;
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            sum += r.grad_norm_sq;
            sum / (k + 1) as f64
        })
        .collect()
}

fn hogwild_convergence() -> Outcome {
    let (spec, data) = desk();
    let c = RunConfig {
        threads: 4,
        epochs: 50,
        seed: 0,
        ..RunConfig::new(Algo::Hogwild, 0.05)
    };
    let m = run(&spec, &data, &c).unwrap();
    let avg = running_averages(&m.rows);
    let n = data.len() as f64;
    let first = avg
        .iter()
        .zip(&m.rows)
        .find(|(a, _)| **a < 1e-3)
        .map(|(_, r)| r.grad_evals as f64 / n);
    let monotone = avg.windows(2).skip(5).all(|w| w[1] <= w[0]);
    check(
        first.is_some_and(|p| p <= 50.0) && monotone,
        format!(
            "p=4 eta=0.05: running average < 1e-3 after {} passes, final {:.2e}, non-increasing after epoch 5: {monotone}",
            first.map_or("never".into(), |p| format!("{p}")),
            avg.last().unwrap()
        ),
    )
}

fn asysvrg_speedup() -> Outcome {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(SPEEDUP)
        .unwrap();
    let cal: HashMap<String, String> = r
        .records()
        .map(|x| x.unwrap())
        .map(|x| (x[0].into(), x[1].into()))
        .collect();
    let get = |k: &str| cal[k].parse::<f64>().unwrap();
    let (spec, data) = digits();
    let threads = get("threads") as usize;
    let seed = get("seed") as u64;
    let hog = RunConfig {
        threads,
        seed,
        epochs: get("hogwild_epochs") as usize,
        ..RunConfig::new(Algo::Hogwild, get("hogwild_eta"))
    };
    let asy = RunConfig {
        threads,
        seed,
        outer_iters: get("asysvrg_outer") as usize,
        ..RunConfig::new(Algo::AsySvrg, get("asysvrg_eta"))
    };
    let h = run(&spec, &data, &hog).unwrap();
    let a = run(&spec, &data, &asy).unwrap();
    let target = h.final_loss();
    let budget = h.last().grad_evals as f64;
    let reached = a
        .rows
        .iter()
        .find(|r| r.train_loss <= target)
        .map(|r| r.grad_evals as f64 / budget);
    let max_ratio = get("max_ratio");
    check(
        reached.is_some_and(|x| x <= max_ratio),
        format!(
            "n={} hogwild final loss {target:.5}; asysvrg reaches it at {} of hogwild's evals (<= {max_ratio}, calibrated {})",
            data.len(),
            reached.map_or("never".into(), |x| format!("{x:.3}")),
            cal["calibrated_ratio"]
        ),
    )
}

fn thread_consistency() -> Outcome {
    let (spec, data) = desk();
    let losses: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&p| {
            let c = RunConfig {
                threads: p,
                epochs: 20,
                seed: 0,
                ..RunConfig::new(Algo::Hogwild, 0.05)
            };
            run(&spec, &data, &c).unwrap().final_loss()
        })
        .collect();
    let lo = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = (hi - lo) / lo;
    check(
        spread <= 0.05,
        format!("final losses p=1,2,4: {losses:.5?}, relative spread {spread:.2e} (<= 0.05)"),
    )
}

fn theory_calculators() -> Outcome {
    let mut rho_err: f64 = 0.0;
    for (eta, l) in [(1e-3, 1.0), (0.01, 1.0), (0.05, 0.5), (1e-4, 3.0), (0.02, 2.0)] {
        let want = 1.0 / (1.0 - eta - 9.0 * eta * l * l);
        let Ok(RhoSolution::Feasible(got)) = solve_rho(eta, 0, l) else {
            return Err(format!("tau=0 eta={eta} L={l} reported infeasible"));
        };
        rho_err = rho_err.max((got - want).abs());
    }

    let mut c0_err: f64 = 0.0;
    for l in [0.5, 1.0, 2.0] {
        for tau in [0, 1, 4] {
            for eta in [1e-4, 1e-3, 1e-2] {
                let Some(rho) = solve_rho(eta, tau, l).unwrap().value() else {
                    continue;
                };
                for beta in [0.1, 0.5] {
                    for m in [1, 10, 100, 1000] {
                        let s = theorem2_schedule(l, 1.0, tau, rho, eta, beta, m).unwrap();
                        let (_, f, a) = schedule_constants(l, tau, rho, eta, beta);
                        let closed = c0_closed_form(l, eta, f, a, m);
                        c0_err = c0_err.max((s.c0() - closed).abs() / closed);
                    }
                }
            }
        }
    }

    let mut scaled = Vec::new();
    for n in [1_000u64, 10_000, 100_000] {
        let eta = SWEEP_MU / (n as f64).powf(2.0 / 3.0);
        let rho = solve_rho(eta, 0, 1.0).unwrap().value().unwrap();
        let r = complexity_regime(n, SWEEP_MU, SWEEP_V, 1.0, 1.0, 0, rho).unwrap();
        if !(r.valid && r.gamma > 0.0) {
            return Err(format!("regime invalid at n={n}: {r:?}"));
        }
        scaled.push(r.gamma * (n as f64).powf(2.0 / 3.0));
    }
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    check(
        rho_err <= 1e-10 && c0_err <= 1e-10 && hi / lo <= 2.0,
        format!(
            "rho tau=0 abs err {rho_err:.1e}; c0 rel err {c0_err:.1e}; gamma*n^(2/3) over n=1e3..1e5: {scaled:.4?} (ratio {:.3})",
            hi / lo
        ),
    )
}

fn simulator_suite() -> Outcome {
    // smaller than desk scale: every step evaluates q over the whole dataset
    let data = logistic_dataset(200, DESK_D, lfsgd::harness::SYNTHETIC_SIGNAL, DESK_SEED).unwrap();
    let spec = ModelSpec::logreg(DESK_D, DESK_LAMBDA).unwrap();
    let l = spec.lipschitz_bound(&data).unwrap();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut scenarios = 0;
    let mut worst = [0.0f64; 3];
    let mut failures = Vec::new();
    for tau in [0usize, 1, 2, 4] {
        let (eta, rho) = largest_feasible_eta(tau as u32, l)
            .unwrap()
            .expect("feasible grid stepsize");
        for keep_prob in [0.5, 0.9, 1.0] {
            for algo in [
                SimAlgo::Hogwild { steps: 100 },
                SimAlgo::AsySvrg { outer: 2, inner: 50 },
            ] {
                let config = SimConfig {
                    algo,
                    tau,
                    keep_prob,
                    partial_prob: 0.5,
                    eta,
                    trials: 1000,
                    seed: 7,
                    record_detail: false,
                };
                let trace = simulate_parallel(&spec, &data, &config, threads).unwrap();
                let checks = SimChecks::run(&trace, rho).unwrap();
                scenarios += 1;
                worst[0] = worst[0].max(checks.q_ratio.max_ratio / checks.q_ratio.threshold);
                worst[1] = worst[1].max(checks.gap_bound.max_ratio / checks.gap_bound.threshold);
                if let Some(r) = checks.qhat_vs_q {
                    worst[2] = worst[2].max(r.max_ratio / r.threshold);
                }
                let zero_gaps = tau > 0 || bound_rows(&trace, rho).iter().all(|r| r.gap_sq == 0.0);
                if !checks.all_hold() || !zero_gaps {
                    failures.push(format!("tau={tau} keep={keep_prob} {algo:?}"));
                }
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{scenarios} scenarios x 1000 trials; max ratio/threshold q={:.3} gap={:.3} qhat={:.3}; failing: {failures:?}",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn store_atomicity() -> Outcome {
    let r = two_sentinel(4, 2, 250_000, 100_000, 64);
    let leaked = support_locality(4, 100_000);
    check(
        r.torn == 0 && leaked == 0,
        format!(
            "{} writes, {} cell reads, torn={}; sentinel cells touched={leaked}",
            r.writes, r.cell_reads, r.torn
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradient_correctness),
        ("smoothness inequality sweep", lemma1_sweep),
        ("p=1 determinism", single_thread_equivalence),
        ("variance reduction", variance_reduction),
        ("hogwild convergence", hogwild_convergence),
        ("asysvrg vs hogwild", asysvrg_speedup),
        ("thread consistency", thread_consistency),
        ("theory calculators", theory_calculators),
        ("simulator lemma suite", simulator_suite),
        ("shared store atomicity", store_atomicity),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        failed += usize::from(outcome.is_err());
        println!("criterion {id:>2} {tag} [{name}] ({secs:.1}s) {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
