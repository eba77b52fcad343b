//! Statistics over stopped wealth `P_{tau ∧ T}`: expected utility,
//! certainty equivalent, variance and fixed-vs-uncertain comparisons.
//!
//! Stopping dates are assigned by stratification: out of `n` simulated
//! market paths, exactly `round(p_i n)` stop at `T_i` and the rest run to
//! `T`. Estimates are reported with stratified standard errors, so the
//! only randomness left is in the market paths.

use crate::error::{invalid, Error, Result};
use crate::market::{simulate_paths, HorizonDistribution};
use crate::nonconcave::{solve_fixed_horizon, FixedHorizonSolution, ProblemSpec, SolverSolution};
use crate::payoff::ContractUtility;
use crate::stats::{self, Estimate};
use crate::MertonSolution;

/// Stopped wealth on one path together with the state-price density at
/// the stopping date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedSample {
    pub date: f64,
    pub wealth: f64,
    pub density: f64,
}

/// Equally weighted stopped-wealth samples.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedSampleSet {
    samples: Vec<StoppedSample>,
    horizon: HorizonDistribution,
    seed: u64,
}

/// Number of paths stopping at each support date of `tau ∧ T` under
/// stratified assignment. Sums to `n`.
pub fn stratum_counts(horizon: &HorizonDistribution, n: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = horizon.probs().iter().map(|p| (p * n as f64).round() as usize).collect();
    let assigned: usize = counts.iter().sum();
    counts.push(n.saturating_sub(assigned));
    counts
}

impl StoppedSampleSet {
    /// Validates that every date lies on the support of `tau ∧ T` and that
    /// wealth is nonnegative.
    pub fn new(samples: Vec<StoppedSample>, horizon: HorizonDistribution, seed: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("sample set is empty"));
        }
        let grid = horizon.grid();
        for s in &samples {
            if !grid.contains(&s.date) {
                return Err(invalid(format!("stopping date {} not in {grid:?}", s.date)));
            }
            if !(s.wealth >= 0.0) {
                return Err(invalid(format!("negative or undefined stopped wealth {}", s.wealth)));
            }
        }
        Ok(Self { samples, horizon, seed })
    }

    /// Stratified stopped samples of a two-date solution: the first
    /// `round(p n)` paths stop at `T1`, the others at `T`.
    pub fn from_solution(solution: &SolverSolution) -> Result<Self> {
        let n = solution.n_paths();
        let n_stop = stratum_counts(&solution.spec.horizon, n)[0];
        let samples = (0..n)
            .map(|k| {
                if k < n_stop {
                    let s = solution.paths.state(k, 0);
                    StoppedSample { date: s.t, wealth: solution.wealth_t1[k], density: s.h }
                } else {
                    let s = solution.paths.state(k, 1);
                    StoppedSample { date: s.t, wealth: solution.wealth_t[k], density: s.h }
                }
            })
            .collect();
        Self::new(samples, solution.spec.horizon.clone(), solution.seed)
    }

    /// Terminal wealth of a fixed-horizon solution on freshly simulated paths.
    pub fn from_fixed(solution: &FixedHorizonSolution, n_paths: usize, seed: u64) -> Result<Self> {
        let horizon = solution.spec().horizon.clone();
        let t = horizon.terminal();
        let paths = simulate_paths(&solution.spec().params, &[t], n_paths, seed)?;
        let samples = paths
            .column(0)
            .iter()
            .map(|s| StoppedSample { date: t, wealth: solution.terminal_wealth(s.h), density: s.h })
            .collect();
        Self::new(samples, horizon, seed)
    }

    /// Stratified stopped wealth of the Merton solution on freshly
    /// simulated paths.
    pub fn from_merton(
        solution: &MertonSolution,
        params: &crate::MarketParams,
        n_paths: usize,
        seed: u64,
    ) -> Result<Self> {
        let horizon = solution.horizon().clone();
        let grid = horizon.grid();
        let paths = simulate_paths(params, &grid, n_paths, seed)?;
        let counts = stratum_counts(&horizon, n_paths);
        let mut samples = Vec::with_capacity(n_paths);
        let mut k = 0;
        for (j, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                let s = paths.state(k, j);
                samples.push(StoppedSample { date: s.t, wealth: solution.wealth(&s), density: s.h });
                k += 1;
            }
        }
        Self::new(samples, horizon, seed)
    }

    pub fn samples(&self) -> &[StoppedSample] {
        &self.samples
    }

    pub fn horizon(&self) -> &HorizonDistribution {
        &self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn wealth(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.wealth).collect()
    }

    /// Fraction of samples stopping at each support date.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.samples.len() as f64;
        self.horizon.grid().iter().map(|&t| self.samples.iter().filter(|s| s.date == t).count() as f64 / n).collect()
    }

    /// Mean of `values` with a standard error computed stratum by stratum.
    fn stratified_mean(&self, values: &[f64]) -> Estimate {
        let n = values.len() as f64;
        let mut var = 0.0;
        for t in self.horizon.grid() {
            let group: Vec<f64> =
                self.samples.iter().zip(values).filter(|(s, _)| s.date == t).map(|(_, &v)| v).collect();
            if group.len() > 1 {
                let share = group.len() as f64 / n;
                var += share * share * stats::variance(&group) / group.len() as f64;
            }
        }
        Estimate::new(stats::mean(values), var.sqrt())
    }

    /// `E[H_{tau ∧ T} P_{tau ∧ T}]`, the time-0 cost of the stopped wealth.
    pub fn discounted_budget(&self) -> Estimate {
        let values: Vec<f64> = self.samples.iter().map(|s| s.density * s.wealth).collect();
        self.stratified_mean(&values)
    }

    fn utilities(&self, contract: &ContractUtility) -> Vec<f64> {
        self.samples.iter().map(|s| contract.value(s.wealth).finite().expect("wealth is nonnegative")).collect()
    }
}

/// `E[u(P_{tau ∧ T})]` with its standard error.
pub fn expected_utility(set: &StoppedSampleSet, contract: &ContractUtility) -> Estimate {
    set.stratified_mean(&set.utilities(contract))
}

/// Wealth whose utility equals `eu`, on the increasing branch of `u`.
/// The flat level `U(K)` maps to `B`.
pub fn certainty_equivalent(eu: f64, contract: &ContractUtility) -> Result<f64> {
    contract
        .inverse_value(eu)
        .ok_or_else(|| Error::Infeasible(format!("expected utility {eu} lies below the utility floor of the contract")))
}

/// Certainty equivalent with a delta-method standard error
/// `se(eu) / u'(CE)`.
pub fn certainty_equivalent_estimate(eu: Estimate, contract: &ContractUtility) -> Result<Estimate> {
    let ce = certainty_equivalent(eu.value, contract)?;
    let slope = if ce > contract.threshold() { contract.marginal(ce) } else { contract.marginal(contract.threshold()) };
    Ok(Estimate::new(ce, eu.std_error / slope))
}

/// Unbiased variance of the stopped wealth with its standard error.
pub fn stopped_variance(set: &StoppedSampleSet) -> Estimate {
    stats::variance_estimate(&set.wealth())
}

/// Certainty equivalents and variances of an uncertain-horizon solution
/// next to the fixed-horizon solution with the same expected horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub t_tilde: f64,
    pub eu_uncertain: Estimate,
    pub eu_fixed: Estimate,
    pub ce_uncertain: Estimate,
    pub ce_fixed: Estimate,
    pub variance_uncertain: Estimate,
    pub variance_fixed: Estimate,
    /// Uncertain minus fixed.
    pub ce_difference: Estimate,
    /// Uncertain minus fixed.
    pub variance_difference: Estimate,
}

/// Seed offset for the independent fixed-horizon simulation in
/// [`compare_to_fixed`].
pub const FIXED_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Compares `solution` with the fixed-horizon problem at `t_tilde`, which
/// must equal the expected horizon `E[tau ∧ T]`.
///
/// The fixed-horizon terminal wealth is simulated on independent paths
/// (same size, seed shifted by [`FIXED_SEED_OFFSET`]), so differences carry
/// the combined standard error of both estimates.
pub fn compare_to_fixed(spec: &ProblemSpec, solution: &SolverSolution, t_tilde: f64) -> Result<Comparison> {
    let mean = spec.horizon.mean();
    if (t_tilde - mean).abs() > 1e-9 * mean.max(1.0) {
        return Err(invalid(format!("fixed horizon {t_tilde} differs from the expected horizon {mean}")));
    }
    let fixed_spec = spec.with_horizon(HorizonDistribution::fixed(t_tilde)?);
    let fixed = solve_fixed_horizon(&fixed_spec)?;
    let fixed_set =
        StoppedSampleSet::from_fixed(&fixed, solution.n_paths(), solution.seed.wrapping_add(FIXED_SEED_OFFSET))?;
    let set = StoppedSampleSet::from_solution(solution)?;
    compare_sets(&set, &fixed_set, &spec.contract, t_tilde)
}

/// Comparison record for two independent sample sets.
pub fn compare_sets(
    uncertain: &StoppedSampleSet,
    fixed: &StoppedSampleSet,
    contract: &ContractUtility,
    t_tilde: f64,
) -> Result<Comparison> {
    let eu_uncertain = expected_utility(uncertain, contract);
    let eu_fixed = expected_utility(fixed, contract);
    let ce_uncertain = certainty_equivalent_estimate(eu_uncertain, contract)?;
    let ce_fixed = certainty_equivalent_estimate(eu_fixed, contract)?;
    let variance_uncertain = stopped_variance(uncertain);
    let variance_fixed = stopped_variance(fixed);
    Ok(Comparison {
        t_tilde,
        eu_uncertain,
        eu_fixed,
        ce_uncertain,
        ce_fixed,
        variance_uncertain,
        variance_fixed,
        ce_difference: difference(ce_uncertain, ce_fixed),
        variance_difference: difference(variance_uncertain, variance_fixed),
    })
}

/// Difference of two independent estimates.
pub fn difference(a: Estimate, b: Estimate) -> Estimate {
    Estimate::new(a.value - b.value, a.std_error.hypot(b.std_error))
}

/// Certainty-equivalent difference `CE(b) - CE(a)` of two sample sets
/// built on the same market paths, with a paired delta-method standard
/// error. Both sets must have the same length and path order.
pub fn paired_ce_difference(
    a: &StoppedSampleSet,
    b: &StoppedSampleSet,
    contract: &ContractUtility,
) -> Result<Estimate> {
    if a.len() != b.len() {
        return Err(invalid(format!("paired sets differ in size: {} vs {}", a.len(), b.len())));
    }
    let ce_a = certainty_equivalent_estimate(expected_utility(a, contract), contract)?;
    let ce_b = certainty_equivalent_estimate(expected_utility(b, contract), contract)?;
    let slope = |ce: f64| contract.marginal(ce.max(contract.threshold()));
    let (sa, sb) = (slope(ce_a.value), slope(ce_b.value));
    let linearized: Vec<f64> =
        a.utilities(contract).iter().zip(b.utilities(contract)).map(|(ua, ub)| ub / sb - ua / sa).collect();
    let se = stats::mean_estimate(&linearized).std_error;
    Ok(Estimate::new(ce_b.value - ce_a.value, se))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_set(wealth: f64, n: usize) -> StoppedSampleSet {
        let h = HorizonDistribution::fixed(10.0).unwrap();
        let samples = vec![StoppedSample { date: 10.0, wealth, density: 1.0 }; n];
        StoppedSampleSet::new(samples, h, 0).unwrap()
    }

    #[test]
    fn zero_and_threshold_wealth_give_utility_floor() {
        let c = ContractUtility::default();
        let floor = c.base().value(c.guarantee());
        for w in [0.0, c.threshold()] {
            let eu = expected_utility(&constant_set(w, 10), &c);
            assert_eq!(eu.value, floor);
            assert_eq!(eu.std_error, 0.0);
        }
    }

    #[test]
    fn certainty_equivalent_conventions() {
        let c = ContractUtility::default();
        let floor = c.base().value(c.guarantee());
        assert_eq!(certainty_equivalent(floor, &c).unwrap(), c.threshold());
        let v = c.value(c.x_hat()).finite().unwrap();
        assert!((certainty_equivalent(v, &c).unwrap() - c.x_hat()).abs() < 1e-10);
        assert!(matches!(certainty_equivalent(floor * 1.01, &c), Err(Error::Infeasible(_))));
    }

    #[test]
    fn degenerate_variance_is_zero() {
        let v = stopped_variance(&constant_set(73.0, 50));
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn negative_wealth_rejected() {
        let h = HorizonDistribution::fixed(10.0).unwrap();
        let samples = vec![StoppedSample { date: 10.0, wealth: -1.0, density: 1.0 }];
        assert!(StoppedSampleSet::new(samples, h, 0).is_err());
    }

    #[test]
    fn off_grid_dates_rejected() {
        let h = HorizonDistribution::two_date(8.0, 0.5, 12.0).unwrap();
        let samples = vec![StoppedSample { date: 9.0, wealth: 1.0, density: 1.0 }];
        assert!(StoppedSampleSet::new(samples, h, 0).is_err());
    }

    #[test]
    fn stratum_counts_are_exact() {
        let h = HorizonDistribution::two_date(8.0, 0.3, 12.0).unwrap();
        assert_eq!(stratum_counts(&h, 1000), vec![300, 700]);
        let h = HorizonDistribution::new(vec![2.0, 5.0], vec![0.25, 0.25], 9.0).unwrap();
        assert_eq!(stratum_counts(&h, 10), vec![3, 3, 4]);
    }
}
