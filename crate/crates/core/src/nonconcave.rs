//! Non-concave problem `sup E[u(P_{tau ∧ T})]` for the participating-contract
//! utility.
//!
//! Optimal wealth at the support dates of `tau ∧ T` has the form
//! `i(nu_t H_t)`. With a fixed horizon the multiplier is a constant fixed by
//! the time-0 budget. With one premature stopping date `T1` (probability
//! `p`) the multipliers `nu_{T1}` and `nu_T` are `F_{T1}`-measurable and
//! linked on every path by
//!
//! * `p nu_{T1} + (1 - p) nu_T = C` for a single constant `C`, and
//! * `E[H_T P_T | F_{T1}] = H_{T1} P_{T1}`, an implicit equation for `nu_T`
//!   because the threshold event inside `g` depends on `nu_T` too.
//!
//! `C` is then calibrated so that the simulated time-0 budget
//! `E[H_{T1} P_{T1}]` equals the initial capital. Paths where no funded
//! solution exists hold zero wealth from `T1` on and carry infinite
//! multipliers.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::market::{
    d1, f_factor, g_factor, simulate_paths, state_price_density, HorizonDistribution, MarketParams, PathSet, PathState,
};
use crate::normal;
use crate::payoff::ContractUtility;
use crate::roots;
use crate::stats::{self, Estimate};

/// Smallest simulation size accepted by [`solve_uncertain_horizon`].
pub const MIN_PATHS: usize = 10_000;

/// Market, contract, horizon distribution and initial capital.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub params: MarketParams,
    pub contract: ContractUtility,
    pub horizon: HorizonDistribution,
    pub x0: f64,
}

impl ProblemSpec {
    pub fn new(params: MarketParams, contract: ContractUtility, horizon: HorizonDistribution, x0: f64) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(invalid(format!("initial capital must be positive, got {x0}")));
        }
        Ok(Self { params, contract, horizon, x0 })
    }

    /// Same problem with a different horizon distribution.
    pub fn with_horizon(&self, horizon: HorizonDistribution) -> Self {
        Self { horizon, ..self.clone() }
    }
}

impl Default for ProblemSpec {
    /// x0 = 100, tau in {8, 12} with P(tau = 8) = 0.5, default market and contract.
    fn default() -> Self {
        Self {
            params: MarketParams::default(),
            contract: ContractUtility::default(),
            horizon: HorizonDistribution::two_date(8.0, 0.5, 12.0).expect("valid reference horizon"),
            x0: 100.0,
        }
    }
}

/// Price at date `s` (in date-`s` currency) of the terminal claim
/// `i(nu H_T)` for an `F_s`-measurable multiplier `nu`.
pub fn claim_price(
    params: &MarketParams,
    contract: &ContractUtility,
    s: f64,
    horizon: f64,
    w_s: f64,
    h_s: f64,
    nu: f64,
) -> f64 {
    if nu == f64::INFINITY {
        return 0.0;
    }
    let gamma = contract.gamma();
    let q = contract.base().price_exponent();
    let alpha = contract.alpha();
    let y = contract.critical_marginal();
    let gq = g_factor(q, s, horizon, params, nu, y, w_s).expect("s <= horizon");
    let g1 = g_factor(1.0, s, horizon, params, nu, y, w_s).expect("s <= horizon");
    alpha.powf(-q) * nu.powf(-1.0 / gamma) * gq * h_s.powf(-1.0 / gamma) - contract.shift() * g1
}

/// Cash amount in the risky asset that replicates the terminal claim
/// `i(nu H_T)` at date `s < T`. Equals `(1/sigma) dP_s/dW_s`.
pub fn claim_strategy(
    params: &MarketParams,
    contract: &ContractUtility,
    s: f64,
    horizon: f64,
    w_s: f64,
    h_s: f64,
    nu: f64,
) -> f64 {
    let theta = params.theta();
    if nu == f64::INFINITY || theta == 0.0 {
        return 0.0;
    }
    let gamma = contract.gamma();
    let q = contract.base().price_exponent();
    let alpha = contract.alpha();
    let kappa = contract.shift();
    let y = contract.critical_marginal();
    let sigma = params.sigma;
    let root_tau = (horizon - s).sqrt();
    let sign = theta.signum();

    let wealth = claim_price(params, contract, s, horizon, w_s, h_s, nu);
    let g1 = g_factor(1.0, s, horizon, params, nu, y, w_s).expect("s <= horizon");
    let f1 = f_factor(1.0, s, horizon, params);
    let fq = f_factor(q, s, horizon, params);
    let dens1 = normal::pdf(d1(1.0, s, horizon, params, nu, y, w_s));
    let densq = normal::pdf(d1(q, s, horizon, params, nu, y, w_s));

    theta / (gamma * sigma) * wealth
        + kappa / sigma * (g1 * theta / gamma - sign * f1 * dens1 / root_tau)
        + nu.powf(-1.0 / gamma) * alpha.powf(-q) * h_s.powf(-1.0 / gamma) * sign * fq * densq / (sigma * root_tau)
}

// ---------------------------------------------------------------------------
// Fixed horizon
// ---------------------------------------------------------------------------

/// Deterministic multiplier of the fixed-horizon problem.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedHorizonSolution {
    spec: ProblemSpec,
    nu: f64,
    residual: f64,
}

/// Solves `x0 = alpha^{-q} nu^{-1/gamma} g(q,0,T) - (K/alpha - B) g(1,0,T)`
/// for the constant multiplier `nu` of a degenerate horizon `tau = T`.
pub fn solve_fixed_horizon(spec: &ProblemSpec) -> Result<FixedHorizonSolution> {
    if !spec.horizon.is_fixed() {
        return Err(invalid("fixed-horizon solver needs a horizon without premature stopping dates"));
    }
    let horizon = spec.horizon.terminal();
    let nu = calibrate_terminal_multiplier(spec, horizon)?;
    let price = claim_price(&spec.params, &spec.contract, 0.0, horizon, 0.0, 1.0, nu);
    let residual = (price - spec.x0) / spec.x0;
    if residual.abs() > 1e-10 {
        return Err(Error::NonConvergence {
            iterations: 0,
            detail: format!("fixed-horizon budget residual {residual:e} above 1e-10"),
        });
    }
    Ok(FixedHorizonSolution { spec: spec.clone(), nu, residual })
}

/// Multiplier `nu` with time-0 price of `i(nu H_T)` equal to `x0`.
fn calibrate_terminal_multiplier(spec: &ProblemSpec, horizon: f64) -> Result<f64> {
    let budget =
        |log_nu: f64| claim_price(&spec.params, &spec.contract, 0.0, horizon, 0.0, 1.0, log_nu.exp()) - spec.x0;
    // price is decreasing in nu: expand a bracket around a Merton-type guess
    let guess = (spec.x0 / f_factor(spec.contract.base().price_exponent(), 0.0, horizon, &spec.params))
        .powf(-spec.contract.gamma())
        .ln();
    let (mut lo, mut hi) = (guess - 1.0, guess + 1.0);
    let mut step = 2.0;
    while budget(lo) <= 0.0 {
        lo -= step;
        step *= 2.0;
        if step > 1e4 {
            return Err(Error::Infeasible(format!("no multiplier funds initial capital {}", spec.x0)));
        }
    }
    step = 2.0;
    while budget(hi) >= 0.0 {
        hi += step;
        step *= 2.0;
        if step > 1e4 {
            return Err(Error::Infeasible(format!("initial capital {} cannot be exhausted", spec.x0)));
        }
    }
    let root = roots::brent(budget, lo, hi, 1e-15, 500)?;
    Ok(root.x.exp())
}

impl FixedHorizonSolution {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn budget_residual(&self) -> f64 {
        self.residual
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    /// Terminal wealth `i(nu h_T)`.
    pub fn terminal_wealth(&self, h_t: f64) -> f64 {
        self.spec.contract.inverse_marginal(self.nu * h_t)
    }

    /// Optimal wealth at the state's date.
    pub fn wealth_at(&self, state: &PathState) -> Result<f64> {
        let horizon = self.spec.horizon.terminal();
        if state.t > horizon {
            return Err(invalid(format!("date {} beyond horizon {horizon}", state.t)));
        }
        if state.t == horizon {
            return Ok(self.terminal_wealth(state.h));
        }
        Ok(claim_price(&self.spec.params, &self.spec.contract, state.t, horizon, state.w, state.h, self.nu))
    }

    /// Cash amount in the risky asset at the state's date (`t < T`).
    pub fn strategy_at(&self, state: &PathState) -> Result<f64> {
        let horizon = self.spec.horizon.terminal();
        if !(state.t < horizon) {
            return Err(invalid(format!("strategy needs a date before the horizon {horizon}")));
        }
        Ok(claim_strategy(&self.spec.params, &self.spec.contract, state.t, horizon, state.w, state.h, self.nu))
    }
}

// ---------------------------------------------------------------------------
// One premature stopping date
// ---------------------------------------------------------------------------

/// Outcome of the per-path multiplier solve at the stopping date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerSolution {
    /// Positive wealth `wealth >= x_hat` at the stopping date.
    Funded { nu_t: f64, nu_t1: f64, wealth: f64, residual: f64 },
    /// No funded solution: zero wealth at the stopping date and after,
    /// both multipliers infinite.
    Ruined,
}

impl InnerSolution {
    pub fn nu_t(&self) -> f64 {
        match *self {
            InnerSolution::Funded { nu_t, .. } => nu_t,
            InnerSolution::Ruined => f64::INFINITY,
        }
    }

    pub fn nu_t1(&self) -> f64 {
        match *self {
            InnerSolution::Funded { nu_t1, .. } => nu_t1,
            InnerSolution::Ruined => f64::INFINITY,
        }
    }

    pub fn wealth(&self) -> f64 {
        match *self {
            InnerSolution::Funded { wealth, .. } => wealth,
            InnerSolution::Ruined => 0.0,
        }
    }

    pub fn residual(&self) -> f64 {
        match *self {
            InnerSolution::Funded { residual, .. } => residual,
            InnerSolution::Ruined => 0.0,
        }
    }

    pub fn is_ruined(&self) -> bool {
        matches!(self, InnerSolution::Ruined)
    }
}

/// Constants of the two-date problem shared by all per-path solves.
#[derive(Debug, Clone, Copy)]
struct TwoDate {
    params: MarketParams,
    contract: ContractUtility,
    t1: f64,
    horizon: f64,
    p: f64,
}

impl TwoDate {
    fn new(spec: &ProblemSpec) -> Result<Self> {
        let h = &spec.horizon;
        if h.dates().len() != 1 {
            return Err(invalid(format!(
                "uncertain-horizon solver supports exactly one premature stopping date, got {}",
                h.dates().len()
            )));
        }
        Ok(Self {
            params: spec.params,
            contract: spec.contract,
            t1: h.dates()[0],
            horizon: h.terminal(),
            p: h.probs()[0],
        })
    }

    /// Wealth formula `i(nu_1 h_1)` without the zero branch.
    fn stop_wealth(&self, nu_t1: f64, h1: f64) -> f64 {
        let c = &self.contract;
        c.alpha().powf(-c.base().price_exponent()) * (nu_t1 * h1).powf(-1.0 / c.gamma()) - c.shift()
    }

    fn continuation(&self, w1: f64, h1: f64, nu_t: f64) -> f64 {
        claim_price(&self.params, &self.contract, self.t1, self.horizon, w1, h1, nu_t)
    }

    /// Martingale residual `H_{T1}`-normalized: stop wealth minus the
    /// continuation price, with `nu_{T1} = C t / p` and
    /// `nu_T = C (1 - t) / (1 - p)`. Decreasing in `t`.
    fn residual_at(&self, t: f64, w1: f64, h1: f64, c: f64) -> f64 {
        let nu_t1 = c * t / self.p;
        let nu_t = c * (1.0 - t) / (1.0 - self.p);
        self.stop_wealth(nu_t1, h1) - self.continuation(w1, h1, nu_t)
    }

    fn solve(&self, h1: f64, w1: f64, c: f64) -> Result<InnerSolution> {
        if !(h1 > 0.0) || !(c > 0.0) || !c.is_finite() {
            return Err(invalid(format!("need positive density and constant, got h = {h1}, C = {c}")));
        }
        let y = self.contract.critical_marginal();
        // nu_{T1} h1 = u'(x_hat) at t = t_star
        let t_star = self.p * y / (c * h1);

        let mut hi = if t_star < 1.0 {
            if self.residual_at(t_star, w1, h1, c) > 0.0 {
                return Ok(InnerSolution::Ruined);
            }
            t_star
        } else {
            let mut gap = 0.5;
            loop {
                let t = 1.0 - gap;
                if self.residual_at(t, w1, h1, c) < 0.0 {
                    break t;
                }
                gap *= 0.5;
                if gap < f64::EPSILON {
                    return Err(Error::NotBracketed { lo: 0.0, hi: 1.0, f_lo: f64::NAN, f_hi: f64::NAN });
                }
            }
        };
        let mut lo = hi;
        loop {
            lo *= 1.0 / 16.0;
            let r = self.residual_at(lo, w1, h1, c);
            if r > 0.0 {
                break;
            }
            hi = lo;
            if lo < 1e-300 {
                return Err(Error::NotBracketed { lo, hi, f_lo: r, f_hi: r });
            }
        }

        let root = roots::brent(|u| self.residual_at(u.exp(), w1, h1, c), lo.ln(), hi.ln(), 1e-15, 300)?;
        let t = root.x.exp().min(t_star);
        let nu_t1 = c * t / self.p;
        let nu_t = c * (1.0 - t) / (1.0 - self.p);
        let wealth = self.stop_wealth(nu_t1, h1);
        let residual = wealth - self.continuation(w1, h1, nu_t);
        Ok(InnerSolution::Funded { nu_t, nu_t1, wealth, residual })
    }

    /// `nu_{T1}` implied by a funded `nu_T` through the martingale
    /// condition alone: `nu_{T1}^{-1/gamma} = nu_T^{-1/gamma} g(q) + alpha^q (K/alpha - B)(1 - g(1)) h1^{1/gamma}`.
    fn stopping_multiplier(&self, h1: f64, w1: f64, nu_t: f64) -> f64 {
        let c = &self.contract;
        let gamma = c.gamma();
        let q = c.base().price_exponent();
        let y = c.critical_marginal();
        let gq = g_factor(q, self.t1, self.horizon, &self.params, nu_t, y, w1).expect("t1 < T");
        let g1 = g_factor(1.0, self.t1, self.horizon, &self.params, nu_t, y, w1).expect("t1 < T");
        let inv = nu_t.powf(-1.0 / gamma) * gq + c.alpha().powf(q) * c.shift() * (1.0 - g1) * h1.powf(1.0 / gamma);
        inv.powf(-gamma)
    }

    /// Time-0 price of `i(C H_T)`; the known mean of the control variate.
    fn control_mean(&self, c: f64) -> f64 {
        claim_price(&self.params, &self.contract, 0.0, self.horizon, 0.0, 1.0, c)
    }
}

/// Solves the implicit martingale equation at the stopping date for `nu_T`
/// on one path, given the Lagrange constant `c`.
///
/// Returns [`InnerSolution::Ruined`] when no multiplier pair keeps the stop
/// wealth at or above `x_hat`, in which case the path holds zero wealth.
pub fn solve_inner_nu_t(h_t1: f64, w_t1: f64, c: f64, spec: &ProblemSpec) -> Result<InnerSolution> {
    TwoDate::new(spec)?.solve(h_t1, w_t1, c)
}

/// Stopping-date multiplier implied by `nu_t` through the martingale
/// condition, independent of the Lagrange constant.
pub fn stopping_multiplier_from_continuation(h_t1: f64, w_t1: f64, nu_t: f64, spec: &ProblemSpec) -> Result<f64> {
    Ok(TwoDate::new(spec)?.stopping_multiplier(h_t1, w_t1, nu_t))
}

/// Simulation controls for [`solve_uncertain_horizon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub n_paths: usize,
    pub seed: u64,
    /// Relative tolerance on the simulated time-0 budget.
    pub budget_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { n_paths: 100_000, seed: 20_240_101, budget_tol: 1e-4, max_iterations: 200 }
    }
}

/// Calibrated two-date solution on a fixed set of simulated paths.
#[derive(Debug, Clone)]
pub struct SolverSolution {
    pub spec: ProblemSpec,
    pub c_star: f64,
    pub nu_t1: Vec<f64>,
    pub nu_t: Vec<f64>,
    pub wealth_t1: Vec<f64>,
    /// `i(nu_T H_T)` on the simulated terminal states.
    pub wealth_t: Vec<f64>,
    /// Per-path residual of the martingale equation, in wealth units.
    pub inner_residuals: Vec<f64>,
    /// Control-variate estimate of `E[H_{T1} P_{T1}]`, the calibration target.
    pub budget: Estimate,
    /// Plain sample mean of `H_{T1} P_{T1}`.
    pub raw_budget: Estimate,
    pub budget_residual: f64,
    pub iterations: usize,
    /// `(C, budget)` pairs visited by the outer search, in order.
    pub history: Vec<(f64, f64)>,
    pub paths: PathSet,
    pub seed: u64,
}

struct BudgetEval {
    inner: Vec<InnerSolution>,
    budget: Estimate,
    raw: Estimate,
}

fn evaluate_budget(model: &TwoDate, stops: &[PathState], c: f64) -> Result<BudgetEval> {
    let inner = stops.par_iter().map(|s| model.solve(s.h, s.w, c)).collect::<Result<Vec<_>>>()?;
    let discounted: Vec<f64> = stops.iter().zip(&inner).map(|(s, sol)| s.h * sol.wealth()).collect();
    let adjusted: Vec<f64> =
        stops.par_iter().zip(&discounted).map(|(s, d)| d - s.h * model.continuation(s.w, s.h, c)).collect();
    let cv = stats::mean_estimate(&adjusted);
    Ok(BudgetEval {
        inner,
        budget: Estimate::new(cv.value + model.control_mean(c), cv.std_error),
        raw: stats::mean_estimate(&discounted),
    })
}

/// Calibrates the Lagrange constant `C` of the two-date problem on
/// simulated stopping-date states.
///
/// The same paths are reused for every trial `C`, so the simulated budget
/// is a deterministic, decreasing function of `C` and a log-scale bisection
/// brackets it. The budget is estimated with the control variate
/// `H_{T1} * price_{T1}[i(C H_T)]`, whose mean is known in closed form.
pub fn solve_uncertain_horizon(spec: &ProblemSpec, opts: &SolverOptions) -> Result<SolverSolution> {
    let model = TwoDate::new(spec)?;
    if opts.n_paths < MIN_PATHS {
        return Err(invalid(format!("need at least {MIN_PATHS} paths, got {}", opts.n_paths)));
    }
    if !(opts.budget_tol > 0.0 && opts.budget_tol < 1.0) {
        return Err(invalid(format!("budget tolerance must lie in (0, 1), got {}", opts.budget_tol)));
    }

    let paths = simulate_paths(&spec.params, &spec.horizon.grid(), opts.n_paths, opts.seed)?;
    let stops = paths.column(0);
    let x0 = spec.x0;

    let mut history = Vec::new();
    let eval = |c: f64, history: &mut Vec<(f64, f64)>| -> Result<BudgetEval> {
        let e = evaluate_budget(&model, &stops, c)?;
        history.push((c, e.budget.value));
        Ok(e)
    };
    let converged = |e: &BudgetEval| ((e.budget.value - x0) / x0).abs() <= opts.budget_tol;

    let c0 = calibrate_terminal_multiplier(spec, model.horizon)?;
    let first = eval(c0, &mut history)?;
    if converged(&first) {
        return Ok(finish(spec, opts, paths, c0, first, 1, history));
    }

    // bracket in log C: budget decreasing in C
    let mut log_lo = c0.ln();
    let mut log_hi = c0.ln();
    let mut step = std::f64::consts::LN_2;
    let above = first.budget.value > x0;
    let mut iterations = 1;
    loop {
        if iterations >= opts.max_iterations {
            return Err(non_convergence(iterations, &history, "bracketing"));
        }
        let trial = if above { log_hi + step } else { log_lo - step };
        let e = eval(trial.exp(), &mut history)?;
        iterations += 1;
        if converged(&e) {
            return Ok(finish(spec, opts, paths, trial.exp(), e, iterations, history));
        }
        if above {
            log_lo = log_hi;
            log_hi = trial;
            if e.budget.value < x0 {
                break;
            }
        } else {
            log_hi = log_lo;
            log_lo = trial;
            if e.budget.value > x0 {
                break;
            }
        }
        step *= 2.0;
    }

    while iterations < opts.max_iterations {
        let mid = 0.5 * (log_lo + log_hi);
        let e = eval(mid.exp(), &mut history)?;
        iterations += 1;
        if converged(&e) {
            return Ok(finish(spec, opts, paths, mid.exp(), e, iterations, history));
        }
        if e.budget.value > x0 {
            log_lo = mid;
        } else {
            log_hi = mid;
        }
    }
    Err(non_convergence(iterations, &history, "bisection"))
}

fn non_convergence(iterations: usize, history: &[(f64, f64)], phase: &str) -> Error {
    let tail: Vec<String> = history.iter().rev().take(6).map(|(c, b)| format!("C={c:.6e}:budget={b:.6e}")).collect();
    Error::NonConvergence { iterations, detail: format!("{phase}; last trials {}", tail.join(", ")) }
}

fn finish(
    spec: &ProblemSpec,
    opts: &SolverOptions,
    paths: PathSet,
    c_star: f64,
    eval: BudgetEval,
    iterations: usize,
    history: Vec<(f64, f64)>,
) -> SolverSolution {
    let terminal = paths.column(1);
    let nu_t: Vec<f64> = eval.inner.iter().map(InnerSolution::nu_t).collect();
    let wealth_t = terminal
        .iter()
        .zip(&nu_t)
        .map(|(s, &nu)| if nu.is_finite() { spec.contract.inverse_marginal(nu * s.h) } else { 0.0 })
        .collect();
    SolverSolution {
        spec: spec.clone(),
        c_star,
        nu_t1: eval.inner.iter().map(InnerSolution::nu_t1).collect(),
        nu_t,
        wealth_t1: eval.inner.iter().map(InnerSolution::wealth).collect(),
        wealth_t,
        inner_residuals: eval.inner.iter().map(InnerSolution::residual).collect(),
        budget_residual: (eval.budget.value - spec.x0) / spec.x0,
        budget: eval.budget,
        raw_budget: eval.raw,
        iterations,
        history,
        paths,
        seed: opts.seed,
    }
}

impl SolverSolution {
    pub fn n_paths(&self) -> usize {
        self.nu_t.len()
    }

    pub fn stopping_date(&self) -> f64 {
        self.spec.horizon.dates()[0]
    }

    pub fn stop_probability(&self) -> f64 {
        self.spec.horizon.probs()[0]
    }

    /// Re-solves the multipliers of one path from its stopping-date state.
    pub fn resolve(&self, stop: &PathState) -> Result<InnerSolution> {
        TwoDate::new(&self.spec)?.solve(stop.h, stop.w, self.c_star)
    }

    /// Plain Monte-Carlo estimate of `E[H_{tau ∧ T} P_{tau ∧ T}]` over both
    /// support dates, weighting by the stopping probabilities.
    pub fn stopped_budget(&self) -> Estimate {
        let p = self.stop_probability();
        let values: Vec<f64> = (0..self.n_paths())
            .map(|k| {
                let s1 = self.paths.state(k, 0);
                let s2 = self.paths.state(k, 1);
                p * s1.h * self.wealth_t1[k] + (1.0 - p) * s2.h * self.wealth_t[k]
            })
            .collect();
        stats::mean_estimate(&values)
    }

    /// Optimal wealth at the date of `state`, on a path that has not been
    /// stopped before that date.
    ///
    /// `stop` is the same path's state at the stopping date and is required
    /// for dates after it. Before the stopping date the wealth is the
    /// conditional price of the stop-date wealth, computed by quadrature
    /// over the Brownian value at the stopping date.
    pub fn wealth_at(&self, state: &PathState, stop: Option<&PathState>) -> Result<f64> {
        let t1 = self.stopping_date();
        let horizon = self.spec.horizon.terminal();
        let s = state.t;
        if s > horizon || s < 0.0 {
            return Err(invalid(format!("date {s} outside [0, {horizon}]")));
        }
        if s == 0.0 {
            return Ok(self.spec.x0);
        }
        if s < t1 {
            return self.price_before_stop(state);
        }
        if s == t1 {
            return Ok(self.resolve(state)?.wealth());
        }
        let stop = stop.ok_or_else(|| invalid("state at the stopping date is required after it"))?;
        let nu_t = self.resolve(stop)?.nu_t();
        if s == horizon {
            return Ok(if nu_t.is_finite() { self.spec.contract.inverse_marginal(nu_t * state.h) } else { 0.0 });
        }
        Ok(claim_price(&self.spec.params, &self.spec.contract, s, horizon, state.w, state.h, nu_t))
    }

    /// Cash amount held in the risky asset for `T1 <= s < T`.
    pub fn strategy_at(&self, state: &PathState, stop: Option<&PathState>) -> Result<f64> {
        let t1 = self.stopping_date();
        let horizon = self.spec.horizon.terminal();
        let s = state.t;
        if !(s >= t1 && s < horizon) {
            return Err(invalid(format!("strategy is available on [{t1}, {horizon}), got {s}")));
        }
        let stop = if s == t1 { state } else { stop.ok_or_else(|| invalid("state at the stopping date is required"))? };
        let nu_t = self.resolve(stop)?.nu_t();
        Ok(claim_strategy(&self.spec.params, &self.spec.contract, s, horizon, state.w, state.h, nu_t))
    }

    fn price_before_stop(&self, state: &PathState) -> Result<f64> {
        let model = TwoDate::new(&self.spec)?;
        let t1 = model.t1;
        let sd = (t1 - state.t).sqrt();
        let c = self.c_star;
        let params = self.spec.params;
        let integrand = |z: f64| -> Result<f64> {
            let w1 = state.w + sd * z;
            let h1 = state_price_density(&params, t1, w1);
            let sol = model.solve(h1, w1, c)?;
            Ok(h1 / state.h * sol.wealth() * normal::pdf(z))
        };
        let ruined = |z: f64| -> Result<bool> {
            let w1 = state.w + sd * z;
            Ok(model.solve(state_price_density(&params, t1, w1), w1, c)?.is_ruined())
        };

        let (lo, hi) = (-12.0_f64, 12.0_f64);
        // the funded region is an interval in z with at most one ruin boundary
        let (r_lo, r_hi) = (ruined(lo)?, ruined(hi)?);
        let (a, b) = match (r_lo, r_hi) {
            (false, false) => (lo, hi),
            (true, true) => return Ok(0.0),
            _ => {
                let (mut l, mut h) = (lo, hi);
                for _ in 0..100 {
                    let m = 0.5 * (l + h);
                    if ruined(m)? == r_lo {
                        l = m;
                    } else {
                        h = m;
                    }
                }
                if r_lo {
                    (h, hi)
                } else {
                    (lo, l)
                }
            }
        };
        simpson(integrand, a, b, 4000)
    }
}

fn simpson<F: Fn(f64) -> Result<f64>>(f: F, a: f64, b: f64, intervals: usize) -> Result<f64> {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut terms = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        terms.push(w * f(a + h * i as f64)?);
    }
    Ok(stats::compensated_sum(terms) * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_spec(horizon: f64) -> ProblemSpec {
        ProblemSpec::default().with_horizon(HorizonDistribution::fixed(horizon).unwrap())
    }

    #[test]
    fn fixed_horizon_budget_residual() {
        let sol = solve_fixed_horizon(&fixed_spec(12.0)).unwrap();
        assert!(sol.budget_residual().abs() <= 1e-10);
        assert!(sol.nu() > 0.0);
        let origin = PathState { t: 0.0, w: 0.0, h: 1.0 };
        assert!((sol.wealth_at(&origin).unwrap() - 100.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_horizon_rejects_random_horizon() {
        assert!(solve_fixed_horizon(&ProblemSpec::default()).is_err());
    }

    #[test]
    fn terminal_wealth_avoids_the_gap() {
        let sol = solve_fixed_horizon(&fixed_spec(12.0)).unwrap();
        let xh = sol.spec().contract.x_hat();
        let y = sol.spec().contract.critical_marginal();
        for k in 0..200 {
            let h = (y / sol.nu()) * (0.5 + k as f64 / 100.0);
            let x = sol.terminal_wealth(h);
            assert!(x == 0.0 || x >= xh * (1.0 - 1e-12), "wealth {x} in gap");
        }
    }

    #[test]
    fn inner_solution_satisfies_martingale_equation() {
        let spec = ProblemSpec::default();
        let fixed = solve_fixed_horizon(&fixed_spec(12.0)).unwrap();
        let params = spec.params;
        for w in [-6.0, -2.0, 0.0, 1.5, 5.0] {
            let h = state_price_density(&params, 8.0, w);
            let sol = solve_inner_nu_t(h, w, 1.3 * fixed.nu(), &spec).unwrap();
            match sol {
                InnerSolution::Funded { nu_t, nu_t1, wealth, residual } => {
                    assert!(residual.abs() <= 1e-10, "residual {residual}");
                    let lagrange = 0.5 * nu_t1 + 0.5 * nu_t;
                    assert!((lagrange / (1.3 * fixed.nu()) - 1.0).abs() < 1e-12);
                    let cont = claim_price(&params, &spec.contract, 8.0, 12.0, w, h, nu_t);
                    assert!((cont - wealth).abs() <= 1e-10);
                    assert!(wealth >= spec.contract.x_hat());
                }
                InnerSolution::Ruined => panic!("unexpected ruin at w = {w}"),
            }
        }
    }

    #[test]
    fn inner_requires_single_stopping_date() {
        let spec = fixed_spec(12.0);
        assert!(solve_inner_nu_t(1.0, 0.0, 1e-5, &spec).is_err());
        let two = ProblemSpec::default()
            .with_horizon(HorizonDistribution::new(vec![4.0, 8.0], vec![0.2, 0.2], 12.0).unwrap());
        assert!(solve_inner_nu_t(1.0, 0.0, 1e-5, &two).is_err());
    }

    #[test]
    fn expensive_paths_are_ruined() {
        // a contract whose gap is wide enough that bad states cannot fund x_hat
        let contract = ContractUtility::new(3.0, 0.25, 50.0, 20.0).unwrap();
        let spec = ProblemSpec { contract, ..ProblemSpec::default() };
        let h = state_price_density(&spec.params, 8.0, -12.0);
        let sol = solve_inner_nu_t(h, -12.0, 5e-3, &spec).unwrap();
        assert!(sol.is_ruined());
        assert_eq!(sol.nu_t(), f64::INFINITY);
        assert_eq!(sol.wealth(), 0.0);
    }

    #[test]
    fn solver_rejects_bad_options() {
        let spec = ProblemSpec::default();
        let small = SolverOptions { n_paths: 100, ..SolverOptions::default() };
        assert!(solve_uncertain_horizon(&spec, &small).is_err());
        let tol = SolverOptions { budget_tol: 0.0, ..SolverOptions::default() };
        assert!(solve_uncertain_horizon(&spec, &tol).is_err());
        assert!(solve_uncertain_horizon(&fixed_spec(12.0), &SolverOptions::default()).is_err());
    }
}
