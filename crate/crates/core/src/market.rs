//! Black-Scholes market primitives: the state-price density, exact path
//! sampling on a date grid, and the conditional moment factors `f` and `g`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::normal;

/// Constant drift, riskless rate and volatility of a one-asset market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
}

impl MarketParams {
    pub fn new(mu: f64, r: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("volatility must be positive and finite, got {sigma}")));
        }
        if !mu.is_finite() || !r.is_finite() {
            return Err(invalid("drift and rate must be finite"));
        }
        Ok(Self { mu, r, sigma })
    }

    /// Market price of risk `(mu - r) / sigma`.
    pub fn theta(&self) -> f64 {
        (self.mu - self.r) / self.sigma
    }

    /// Drift of `-log H`: `r + theta^2 / 2`.
    pub(crate) fn density_drift(&self) -> f64 {
        let th = self.theta();
        self.r + 0.5 * th * th
    }
}

impl Default for MarketParams {
    /// mu = 8%, r = 3%, sigma = 20%.
    fn default() -> Self {
        Self { mu: 0.08, r: 0.03, sigma: 0.2 }
    }
}

/// Discrete distribution of the stopping time: `P(tau = T_i) = p_i` for the
/// interior dates, and the remaining mass on the terminal date.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonDistribution {
    dates: Vec<f64>,
    probs: Vec<f64>,
    terminal: f64,
}

impl HorizonDistribution {
    pub fn new(dates: Vec<f64>, probs: Vec<f64>, terminal: f64) -> Result<Self> {
        if dates.len() != probs.len() {
            return Err(invalid(format!("{} stopping dates but {} probabilities", dates.len(), probs.len())));
        }
        if !(terminal > 0.0 && terminal.is_finite()) {
            return Err(invalid(format!("terminal date must be positive, got {terminal}")));
        }
        let mut prev = 0.0;
        for &d in &dates {
            if !(d > prev && d < terminal) {
                return Err(invalid(format!(
                    "stopping dates must be strictly increasing inside (0, {terminal}), got {dates:?}"
                )));
            }
            prev = d;
        }
        if probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(invalid(format!("stopping probabilities must lie in (0, 1), got {probs:?}")));
        }
        if probs.iter().sum::<f64>() >= 1.0 {
            return Err(invalid("stopping probabilities must leave positive terminal mass"));
        }
        Ok(Self { dates, probs, terminal })
    }

    /// Degenerate distribution `tau = T`.
    pub fn fixed(terminal: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), terminal)
    }

    /// One premature stopping date `t1` taken with probability `p`.
    pub fn two_date(t1: f64, p: f64, terminal: f64) -> Result<Self> {
        Self::new(vec![t1], vec![p], terminal)
    }

    pub fn dates(&self) -> &[f64] {
        &self.dates
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    pub fn is_fixed(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn terminal_prob(&self) -> f64 {
        1.0 - self.probs.iter().sum::<f64>()
    }

    /// All support points of `tau ∧ T`, terminal date last.
    pub fn grid(&self) -> Vec<f64> {
        let mut g = self.dates.clone();
        g.push(self.terminal);
        g
    }

    /// Probabilities matching [`grid`](Self::grid).
    pub fn weights(&self) -> Vec<f64> {
        let mut w = self.probs.clone();
        w.push(self.terminal_prob());
        w
    }

    pub fn mean(&self) -> f64 {
        self.grid().iter().zip(self.weights()).map(|(t, p)| t * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.grid().iter().zip(self.weights()).map(|(t, p)| p * (t - m) * (t - m)).sum()
    }
}

/// `H_t = exp(-(r + theta^2/2) t - theta W_t)`.
pub fn state_price_density(params: &MarketParams, t: f64, w: f64) -> f64 {
    (-params.density_drift() * t - params.theta() * w).exp()
}

/// Brownian value and state-price density of one path at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathState {
    pub t: f64,
    pub w: f64,
    pub h: f64,
}

impl PathState {
    pub fn new(params: &MarketParams, t: f64, w: f64) -> Self {
        Self { t, w, h: state_price_density(params, t, w) }
    }

    /// Builds a state from externally supplied values, checking that `h`
    /// agrees with the closed-form density to relative 1e-12.
    pub fn with_density(params: &MarketParams, t: f64, w: f64, h: f64) -> Result<Self> {
        let expected = state_price_density(params, t, w);
        if !(h > 0.0) || ((h - expected) / expected).abs() > 1e-12 {
            return Err(invalid(format!("density {h} inconsistent with closed form {expected} at t = {t}, w = {w}")));
        }
        Ok(Self { t, w, h })
    }
}

/// Simulated paths stored row-major: one row of grid states per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    grid: Vec<f64>,
    states: Vec<PathState>,
}

impl PathSet {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.states.len() / self.grid.len()
    }

    pub fn path(&self, k: usize) -> &[PathState] {
        let n = self.grid.len();
        &self.states[k * n..(k + 1) * n]
    }

    pub fn state(&self, k: usize, j: usize) -> PathState {
        self.states[k * self.grid.len() + j]
    }

    /// All path states at grid index `j`, in path order.
    pub fn column(&self, j: usize) -> Vec<PathState> {
        (0..self.n_paths()).map(|k| self.state(k, j)).collect()
    }

    /// Grid index of date `t`, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.grid.iter().position(|&g| g == t)
    }
}

/// Samples `n_paths` Brownian paths exactly on `grid`.
///
/// Path `k` draws from its own ChaCha stream `k` under `seed`, so the output
/// does not depend on the number of worker threads.
pub fn simulate_paths(params: &MarketParams, grid: &[f64], n_paths: usize, seed: u64) -> Result<PathSet> {
    if grid.is_empty() {
        return Err(invalid("date grid is empty"));
    }
    if n_paths == 0 {
        return Err(invalid("number of paths must be positive"));
    }
    if grid[0] < 0.0 || grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
        return Err(invalid(format!("date grid must be finite, nonnegative and strictly increasing: {grid:?}")));
    }

    let steps: Vec<f64> = grid
        .iter()
        .scan(0.0, |prev, &t| {
            let dt = t - *prev;
            *prev = t;
            Some(dt.sqrt())
        })
        .collect();

    let n = grid.len();
    let mut states = vec![PathState { t: 0.0, w: 0.0, h: 1.0 }; n * n_paths];
    states.par_chunks_mut(n).enumerate().for_each(|(k, row)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut w = 0.0;
        for ((slot, &t), &sd) in row.iter_mut().zip(grid).zip(&steps) {
            let z: f64 = rng.sample(StandardNormal);
            w += sd * z;
            *slot = PathState::new(params, t, w);
        }
    });

    Ok(PathSet { grid: grid.to_vec(), states })
}

/// `f(q, t, T) = E[(H_T / H_t)^q | F_t]`.
pub fn f_factor(q: f64, t: f64, horizon: f64, params: &MarketParams) -> f64 {
    let tau = horizon - t;
    let th = params.theta();
    (-q * params.density_drift() * tau + 0.5 * q * q * th * th * tau).exp()
}

/// Argument of the normal CDF in [`g_factor`]. Together with the sign
/// convention it satisfies `g = f * Phi(d1)` for either sign of theta.
pub fn d1(q: f64, t: f64, horizon: f64, params: &MarketParams, nu: f64, threshold: f64, w_t: f64) -> f64 {
    let th = params.theta();
    let tau = horizon - t;
    // nu * H_T <= threshold  <=>  theta * W_T >= log(nu / threshold) - (r + theta^2/2) T
    let a = ((nu / threshold).ln() - params.density_drift() * horizon) / th;
    th.signum() * (w_t - tau * q * th - a) / tau.sqrt()
}

/// `g(q, t, T) = E[(H_T / H_t)^q 1{nu H_T <= threshold} | F_t]` for an
/// `F_t`-measurable multiplier `nu`.
///
/// At `t == T` this is the indicator itself. `nu = +inf` gives zero.
pub fn g_factor(q: f64, t: f64, horizon: f64, params: &MarketParams, nu: f64, threshold: f64, w_t: f64) -> Result<f64> {
    if t > horizon {
        return Err(invalid(format!("conditioning date {t} is after the horizon {horizon}")));
    }
    if !(threshold > 0.0) || nu.is_nan() || nu < 0.0 {
        return Err(invalid(format!("need nu >= 0 and threshold > 0, got nu = {nu}, threshold = {threshold}")));
    }
    if nu == f64::INFINITY {
        return Ok(0.0);
    }
    if nu == 0.0 {
        return Ok(f_factor(q, t, horizon, params));
    }
    if t == horizon {
        let h = state_price_density(params, horizon, w_t);
        return Ok(if nu * h <= threshold { 1.0 } else { 0.0 });
    }
    if params.theta() == 0.0 {
        let h_t = (-params.r * horizon).exp();
        let hit = if nu * h_t <= threshold { 1.0 } else { 0.0 };
        return Ok(hit * f_factor(q, t, horizon, params));
    }
    let d = d1(q, t, horizon, params, nu, threshold, w_t);
    Ok(f_factor(q, t, horizon, params) * normal::cdf(d))
}
