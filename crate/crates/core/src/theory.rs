//! Calculators for the constants and conditions of the asynchronous
//! convergence analysis.
//!
//! Notation used throughout: `l` is the smoothness constant, `alpha` the
//! minimum eigenvalue of the expected overwrite mask `E[B_t]`, `tau` the
//! maximum read delay and `rho > 1` the per-step amplification constant of
//! the expected stochastic-gradient second moment.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::vectors::{check_len, l2_norm_sq};

/// Largest amplification constant searched by [`solve_rho`].
pub const RHO_SEARCH_MAX: f64 = 1e6;
/// Bisection stops once the bracket is narrower than this.
pub const RHO_TOLERANCE: f64 = 1e-10;
/// Absolute slack used by [`lemma1_check`].
pub const LEMMA1_SLACK: f64 = 1e-9;
const FIXED_POINT_MAX_ITERS: usize = 1000;
const FIXED_POINT_REL_TOL: f64 = 1e-12;

/// Constants of the asynchronous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsyncModelParams {
    pub l: f64,
    pub alpha: f64,
    pub tau: u32,
    /// Gradient-norm bound (needed by the Hogwild! stepsize only).
    pub v: f64,
    pub eta: f64,
    pub rho: f64,
}

impl AsyncModelParams {
    pub fn validate(&self) -> Result<()> {
        positive("l", self.l)?;
        check_alpha(self.alpha)?;
        positive("v", self.v)?;
        positive("eta", self.eta)?;
        check_rho(self.rho)
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, alloc::format!("must be finite and > 0 (got {v})")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "alpha",
            alloc::format!("must lie in (0, 1] (got {alpha})"),
        ))
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 1.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "rho",
            alloc::format!("must be finite and > 1 (got {rho})"),
        ))
    }
}

/// `(rho^terms - 1) / (rho - 1)`, i.e. `sum_{k < terms} rho^k`. Evaluated as
/// the sum itself so `rho -> 1` needs no special case (the limit is `terms`).
pub fn geometric_sum(rho: f64, terms: u32) -> f64 {
    let mut total = 0.0;
    let mut power = 1.0;
    for _ in 0..terms {
        total += power;
        power *= rho;
    }
    total
}

/// `4 tau rho^2 (rho^tau - 1) / (rho - 1)`, the delay factor shared by the
/// AsySVRG lemmas; zero when `tau == 0`.
pub fn delay_factor(tau: u32, rho: f64) -> f64 {
    4.0 * f64::from(tau) * rho * rho * geometric_sum(rho, tau)
}

/// Outcome of the two-sided smoothness inequality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Report {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates `-grad(x)^T B grad(y) <= (l^2/2)||x-y||^2 - (alpha/2)||grad(x)||^2`
/// for a diagonal `B` with entries in `[alpha, 1]`.
pub fn lemma1_check<G>(l: f64, alpha: f64, x: &[f64], y: &[f64], b_diag: &[f64], mut grad: G) -> Result<Lemma1Report>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    positive("l", l)?;
    check_alpha(alpha)?;
    check_len(x.len(), y.len())?;
    check_len(x.len(), b_diag.len())?;
    if let Some(b) = b_diag.iter().find(|&&b| !(b >= alpha && b <= 1.0)) {
        return Err(Error::invalid(
            "b_diag",
            alloc::format!("eigenvalue {b} outside [alpha, 1]"),
        ));
    }
    let gx = grad(x)?;
    let gy = grad(y)?;
    check_len(x.len(), gx.len())?;
    check_len(x.len(), gy.len())?;
    let lhs = -gx.iter().zip(b_diag).zip(&gy).map(|((a, b), c)| a * b * c).sum::<f64>();
    let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let rhs = 0.5 * l * l * dist_sq - 0.5 * alpha * l2_norm_sq(&gx);
    Ok(Lemma1Report {
        lhs,
        rhs,
        holds: lhs <= rhs + LEMMA1_SLACK,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoSolution {
    Feasible(f64),
    /// No `rho` in `(1, RHO_SEARCH_MAX]` satisfies the condition; the
    /// stepsize is too large.
    Infeasible,
}

impl RhoSolution {
    pub fn value(self) -> Option<f64> {
        match self {
            RhoSolution::Feasible(r) => Some(r),
            RhoSolution::Infeasible => None,
        }
    }
}

/// Residual `rho * (1 - eta - 9 eta (tau+1) l^2 S(rho)) - 1` with
/// `S(rho) = (rho^(tau+1) - 1)/(rho - 1)`. The amplification condition
/// `1 / (1 - eta - 9 eta (tau+1) l^2 S(rho)) <= rho` holds exactly where
/// this is `>= 0`.
pub fn rho_residual(eta: f64, tau: u32, l: f64, rho: f64) -> f64 {
    let s = geometric_sum(rho, tau + 1);
    rho * (1.0 - eta - 9.0 * eta * f64::from(tau + 1) * l * l * s) - 1.0
}

/// Smallest `rho` in `(1, 1e6]` satisfying the amplification condition.
///
/// The residual is negative at `rho = 1`; bisection narrows the first sign
/// change to [`RHO_TOLERANCE`] (relative) and returns the feasible end.
pub fn solve_rho(eta: f64, tau: u32, l: f64) -> Result<RhoSolution> {
    positive("eta", eta)?;
    positive("l", l)?;
    if tau == 0 {
        // linear residual: closed form
        let denom = 1.0 - eta - 9.0 * eta * l * l;
        if denom <= 0.0 {
            return Ok(RhoSolution::Infeasible);
        }
        let rho = 1.0 / denom;
        return Ok(if rho <= RHO_SEARCH_MAX {
            RhoSolution::Feasible(rho)
        } else {
            RhoSolution::Infeasible
        });
    }

    // rho * S(rho) is a polynomial with positive coefficients, so the
    // residual is concave on rho > 0: ternary search finds its peak, and the
    // smallest root lies between 1 (where the residual is negative) and it.
    let residual = |rho: f64| rho_residual(eta, tau, l, rho);
    let (mut a, mut b) = (1.0, RHO_SEARCH_MAX);
    for _ in 0..400 {
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if residual(m1) < residual(m2) {
            a = m1;
        } else {
            b = m2;
        }
        if b - a <= 1e-15 * b {
            break;
        }
    }
    let peak = 0.5 * (a + b);
    // NaN counts as infeasible
    if residual(peak).partial_cmp(&0.0).is_none_or(|o| o.is_lt()) {
        return Ok(RhoSolution::Infeasible);
    }
    let (mut lo, mut hi) = (1.0, peak);
    while hi - lo > RHO_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RhoSolution::Feasible(hi))
}

/// Stepsize and guaranteed average squared-gradient bound for Hogwild!.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HogwildStepsize {
    pub eta: f64,
    pub bound: f64,
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
}

/// `B(eta) = 2 V^2 (2 tau l^2 eta rho (rho^tau - 1)/(alpha (rho - 1)) + l/(2 alpha))`.
pub fn hogwild_b(params: &AsyncModelParams, eta: f64) -> f64 {
    let p = params;
    let delay = 2.0 * f64::from(p.tau) * p.l * p.l * eta * p.rho * geometric_sum(p.rho, p.tau) / p.alpha;
    2.0 * p.v * p.v * (delay + p.l / (2.0 * p.alpha))
}

/// Solves `eta = sqrt(A / (T B(eta)))` with `A = 2 f0 / alpha` by fixed-point
/// iteration started from the eta-free part of `B`, and returns the bound
/// `sqrt(A B(eta) / T)`. `params.eta` is ignored.
pub fn hogwild_stepsize(f0: f64, params: &AsyncModelParams, total_iters: u64) -> Result<HogwildStepsize> {
    positive("f0", f0)?;
    AsyncModelParams { eta: 1.0, ..*params }.validate()?;
    if total_iters == 0 {
        return Err(Error::invalid("total_iters", "must be >= 1"));
    }
    let a = 2.0 * f0 / params.alpha;
    let t = total_iters as f64;
    let b0 = params.v * params.v * params.l / params.alpha;
    let mut eta = math::sqrt(a / (t * b0));
    for iter in 1..=FIXED_POINT_MAX_ITERS {
        let next = math::sqrt(a / (t * hogwild_b(params, eta)));
        let converged = (next - eta).abs() <= FIXED_POINT_REL_TOL * next;
        eta = next;
        if converged {
            let b = hogwild_b(params, eta);
            return Ok(HogwildStepsize {
                eta,
                bound: math::sqrt(a * b / t),
                a,
                b,
                iterations: iter,
            });
        }
    }
    Err(Error::NoConvergence(FIXED_POINT_MAX_ITERS))
}

/// The `c_m`, `h_m`, `gamma` sequence of the AsySVRG analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Schedule {
    /// `c_0 ..= c_{M}`; `c[M] == 0`.
    pub c: Vec<f64>,
    /// `h_1 ..= h_{M}` stored at indices `0..M`.
    pub h: Vec<f64>,
    pub gamma: f64,
    /// Index `m` attaining the minimum in `gamma`.
    pub gamma_argmin: usize,
    pub g_const: f64,
    pub f_const: f64,
    pub a_const: f64,
    pub m_tilde: usize,
}

impl Theorem2Schedule {
    pub fn c0(&self) -> f64 {
        self.c[0]
    }

    /// `h_m` for `1 <= m <= M`.
    pub fn h_at(&self, m: usize) -> f64 {
        self.h[m - 1]
    }
}

/// Constants `(g, f, a)` with `h_m = g c_m + f` and `c_m = c_{m+1}(1+a) + 2 l^2 eta^2 f`.
pub fn schedule_constants(l: f64, tau: u32, rho: f64, eta: f64, beta: f64) -> (f64, f64, f64) {
    let k = delay_factor(tau, rho);
    let g = (2.0 * eta / beta) * k + rho;
    let f = (eta * l * l / 2.0) * k + l * rho / 2.0;
    let a = beta * eta + 2.0 * l * l * eta * eta * g;
    (g, f, a)
}

/// Closed form `c_0 = 2 l^2 eta^2 f ((1+a)^M - 1) / a`. The growth term is
/// evaluated as `expm1(M ln(1+a))`, which stays accurate for tiny `a`.
pub fn c0_closed_form(l: f64, eta: f64, f: f64, a: f64, m_tilde: usize) -> f64 {
    let growth = math::exp_m1(m_tilde as f64 * math::ln_1p(a));
    2.0 * l * l * eta * eta * f * growth / a
}

/// Backward recursion from `c_M = 0`, then
/// `gamma = min_m (alpha eta/2 - 2 c_{m+1} eta/beta - 2 eta^2 h_{m+1})`.
pub fn theorem2_schedule(
    l: f64,
    alpha: f64,
    tau: u32,
    rho: f64,
    eta: f64,
    beta: f64,
    m_tilde: usize,
) -> Result<Theorem2Schedule> {
    positive("l", l)?;
    check_alpha(alpha)?;
    check_rho(rho)?;
    positive("eta", eta)?;
    positive("beta", beta)?;
    if beta <= eta {
        return Err(Error::invalid("beta", "must exceed eta"));
    }
    if m_tilde < 1 {
        return Err(Error::invalid("m_tilde", "must be >= 1"));
    }
    let (g, f, a) = schedule_constants(l, tau, rho, eta, beta);
    let increment = 2.0 * l * l * eta * eta * f;
    let mut c = vec![0.0; m_tilde + 1];
    for m in (0..m_tilde).rev() {
        c[m] = c[m + 1] * (1.0 + a) + increment;
    }
    let h: Vec<f64> = c[1..].iter().map(|cm| g * cm + f).collect();

    let mut gamma = f64::INFINITY;
    let mut gamma_argmin = 0;
    for m in 0..m_tilde {
        let coef = alpha * eta / 2.0 - 2.0 * c[m + 1] * eta / beta - 2.0 * eta * eta * h[m];
        if coef < gamma {
            gamma = coef;
            gamma_argmin = m;
        }
    }
    // c is strictly decreasing, so the largest c_{m+1} (m = 0) is the worst
    debug_assert_eq!(gamma_argmin, 0);
    Ok(Theorem2Schedule {
        c,
        h,
        gamma,
        gamma_argmin,
        g_const: g,
        f_const: f,
        a_const: a,
        m_tilde,
    })
}

/// The `eta = mu / n^(2/3)`, `beta = v / n^(1/3)` regime.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityRegime {
    pub eta: f64,
    pub beta: f64,
    pub m_tilde: usize,
    /// `-inf` when `m_tilde == 0` (no schedule exists).
    pub gamma: f64,
    pub c0: f64,
    /// `16 l^2 f mu / (alpha v^2)`; the regime asks for this to be < 1.
    pub mu_condition: f64,
    pub valid: bool,
}

pub fn complexity_regime(n: u64, mu: f64, v: f64, l: f64, alpha: f64, tau: u32, rho: f64) -> Result<ComplexityRegime> {
    if n < 8 {
        return Err(Error::invalid("n", "must be >= 8"));
    }
    positive("mu", mu)?;
    positive("v", v)?;
    let nf = n as f64;
    let eta = mu / math::powf(nf, 2.0 / 3.0);
    let beta = v / math::powf(nf, 1.0 / 3.0);
    if eta >= beta {
        return Err(Error::invalid("mu", "eta = mu/n^(2/3) must be below beta = v/n^(1/3)"));
    }
    positive("l", l)?;
    check_alpha(alpha)?;
    check_rho(rho)?;
    let (_, f, a) = schedule_constants(l, tau, rho, eta, beta);
    let mu_condition = 16.0 * l * l * f * mu / (alpha * v * v);
    let m_tilde = math::floor(1.0 / a) as usize;
    if m_tilde == 0 {
        return Ok(ComplexityRegime {
            eta,
            beta,
            m_tilde,
            gamma: f64::NEG_INFINITY,
            c0: 0.0,
            mu_condition,
            valid: false,
        });
    }
    let sched = theorem2_schedule(l, alpha, tau, rho, eta, beta, m_tilde)?;
    let c0 = sched.c0();
    let valid = sched.gamma > 0.0 && 4.0 * c0 / (alpha * beta) < 1.0;
    Ok(ComplexityRegime {
        eta,
        beta,
        m_tilde,
        gamma: sched.gamma,
        c0,
        mu_condition,
        valid,
    })
}
