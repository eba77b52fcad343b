//! Merton problem with a discrete random horizon and power utility.
//!
//! The optimal stopped wealth is `(nu_s H_s)^(-1/gamma)` with the
//! deterministic multiplier `nu_s = (x / f(q, 0, s))^(-gamma)`,
//! `q = (gamma - 1)/gamma`. The risky weight is the classical Merton
//! fraction, whatever the horizon distribution.

use crate::error::{invalid, Result};
use crate::market::{f_factor, HorizonDistribution, MarketParams, PathState};
use crate::payoff::PowerUtility;

#[derive(Debug, Clone, PartialEq)]
pub struct MertonSolution {
    params: MarketParams,
    utility: PowerUtility,
    initial_wealth: f64,
    horizon: HorizonDistribution,
}

pub fn solve_merton(
    params: &MarketParams,
    gamma: f64,
    horizon: &HorizonDistribution,
    x: f64,
) -> Result<MertonSolution> {
    let utility = PowerUtility::new(gamma)?;
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("initial wealth must be positive, got {x}")));
    }
    Ok(MertonSolution { params: *params, utility, initial_wealth: x, horizon: horizon.clone() })
}

impl MertonSolution {
    pub fn initial_wealth(&self) -> f64 {
        self.initial_wealth
    }

    pub fn gamma(&self) -> f64 {
        self.utility.gamma()
    }

    pub fn horizon(&self) -> &HorizonDistribution {
        &self.horizon
    }

    /// Multiplier `nu_s` for `0 <= s <= T`.
    pub fn nu(&self, s: f64) -> f64 {
        let q = self.utility.price_exponent();
        (self.initial_wealth / f_factor(q, 0.0, s, &self.params)).powf(-self.utility.gamma())
    }

    /// Constant fraction of wealth held in the risky asset.
    pub fn fraction(&self) -> f64 {
        let p = &self.params;
        (p.mu - p.r) / (self.utility.gamma() * p.sigma * p.sigma)
    }

    /// Cash amount in the risky asset for wealth `wealth`.
    pub fn risky_amount(&self, wealth: f64) -> f64 {
        self.fraction() * wealth
    }

    /// Relative error of the time-0 budget identity
    /// `sum_i p_i nu_{T_i}^{-1/gamma} f(q,0,T_i) = x` over the support of `tau ∧ T`.
    pub fn budget_residual(&self) -> f64 {
        let q = self.utility.price_exponent();
        let g = self.utility.gamma();
        let total: f64 = self
            .horizon
            .grid()
            .iter()
            .zip(self.horizon.weights())
            .map(|(&t, w)| w * self.nu(t).powf(-1.0 / g) * f_factor(q, 0.0, t, &self.params))
            .sum();
        (total - self.initial_wealth) / self.initial_wealth
    }

    /// Optimal wealth `(nu_s h)^(-1/gamma)` at the state's date. After a
    /// stop the wealth stays frozen at its stopping-date value.
    pub fn wealth(&self, state: &PathState) -> f64 {
        (self.nu(state.t) * state.h).powf(-1.0 / self.utility.gamma())
    }
}

/// Free-function form of [`MertonSolution::wealth`].
pub fn merton_wealth(sol: &MertonSolution, state: &PathState) -> f64 {
    sol.wealth(state)
}
