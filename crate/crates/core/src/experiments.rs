//! End-to-end pipelines shared by the command-line runner, the acceptance
//! tests and the benchmarks.

use crate::analytics::{
    certainty_equivalent_estimate, compare_sets, expected_utility, paired_ce_difference, stopped_variance, Comparison,
    StoppedSampleSet, FIXED_SEED_OFFSET,
};
use crate::concave::{solve_merton, MertonSolution};
use crate::error::{invalid, Result};
use crate::market::HorizonDistribution;
use crate::nonconcave::{
    solve_fixed_horizon, solve_uncertain_horizon, FixedHorizonSolution, ProblemSpec, SolverOptions, SolverSolution,
};
use crate::stats::Estimate;

/// Merton solution with a simulated budget check.
#[derive(Debug, Clone)]
pub struct MertonRun {
    pub solution: MertonSolution,
    pub fraction: f64,
    /// Simulated `E[H_{tau ∧ T} P_{tau ∧ T}]`.
    pub budget: Estimate,
    pub samples: StoppedSampleSet,
}

pub fn run_merton(spec: &ProblemSpec, n_paths: usize, seed: u64) -> Result<MertonRun> {
    let solution = solve_merton(&spec.params, spec.contract.gamma(), &spec.horizon, spec.x0)?;
    let samples = StoppedSampleSet::from_merton(&solution, &spec.params, n_paths, seed)?;
    Ok(MertonRun { fraction: solution.fraction(), budget: samples.discounted_budget(), samples, solution })
}

/// Fixed-horizon solution with simulated terminal wealth.
#[derive(Debug, Clone)]
pub struct FixedRun {
    pub solution: FixedHorizonSolution,
    pub samples: StoppedSampleSet,
    pub budget: Estimate,
    pub expected_utility: Estimate,
    pub certainty_equivalent: Estimate,
    pub variance: Estimate,
}

pub fn run_fixed(spec: &ProblemSpec, n_paths: usize, seed: u64) -> Result<FixedRun> {
    let solution = solve_fixed_horizon(spec)?;
    let samples = StoppedSampleSet::from_fixed(&solution, n_paths, seed)?;
    let eu = expected_utility(&samples, &spec.contract);
    Ok(FixedRun {
        budget: samples.discounted_budget(),
        certainty_equivalent: certainty_equivalent_estimate(eu, &spec.contract)?,
        variance: stopped_variance(&samples),
        expected_utility: eu,
        samples,
        solution,
    })
}

/// Two-date solution with its comparison against the fixed horizon
/// `E[tau ∧ T]`.
#[derive(Debug, Clone)]
pub struct UncertainRun {
    pub solution: SolverSolution,
    pub samples: StoppedSampleSet,
    pub comparison: Comparison,
}

pub fn run_uncertain(spec: &ProblemSpec, opts: &SolverOptions) -> Result<UncertainRun> {
    let solution = solve_uncertain_horizon(spec, opts)?;
    let samples = StoppedSampleSet::from_solution(&solution)?;
    let t_tilde = spec.horizon.mean();
    let fixed = fixed_reference(spec, t_tilde, opts)?;
    let comparison = compare_sets(&samples, &fixed.samples, &spec.contract, t_tilde)?;
    Ok(UncertainRun { solution, samples, comparison })
}

fn fixed_reference(spec: &ProblemSpec, t_tilde: f64, opts: &SolverOptions) -> Result<FixedRun> {
    let fixed_spec = spec.with_horizon(HorizonDistribution::fixed(t_tilde)?);
    run_fixed(&fixed_spec, opts.n_paths, opts.seed.wrapping_add(FIXED_SEED_OFFSET))
}

/// One point of the mean-preserving spread sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadPoint {
    pub offset: f64,
    pub stop_date: f64,
    pub terminal: f64,
    pub horizon_variance: f64,
    pub certainty_equivalent: Estimate,
    pub variance: Estimate,
    pub budget_residual: f64,
    pub lagrange_constant: f64,
}

/// Mean-preserving spread sweep around the expected horizon of `spec`.
///
/// Each offset `d > 0` gives the two-date horizon
/// `(T1, T) = (m - d, m + d p / (1 - p))` with the stopping probability
/// `p` of `spec`, so `E[tau] = m` throughout. The first returned point is
/// the fixed horizon `m` itself (offset 0), simulated on independent paths.
pub fn spread_sweep(spec: &ProblemSpec, offsets: &[f64], opts: &SolverOptions) -> Result<Vec<SpreadPoint>> {
    let p = single_stop_probability(spec)?;
    let center = spec.horizon.mean();
    let fixed = fixed_reference(spec, center, opts)?;
    let mut points = vec![SpreadPoint {
        offset: 0.0,
        stop_date: center,
        terminal: center,
        horizon_variance: 0.0,
        certainty_equivalent: fixed.certainty_equivalent,
        variance: fixed.variance,
        budget_residual: fixed.solution.budget_residual(),
        lagrange_constant: fixed.solution.nu(),
    }];
    for &d in offsets {
        if !(d > 0.0 && d < center) {
            return Err(invalid(format!("spread offset {d} must lie in (0, {center})")));
        }
        let horizon = HorizonDistribution::two_date(center - d, p, center + d * p / (1.0 - p))?;
        let case = spec.with_horizon(horizon);
        let solution = solve_uncertain_horizon(&case, opts)?;
        let samples = StoppedSampleSet::from_solution(&solution)?;
        let eu = expected_utility(&samples, &case.contract);
        points.push(SpreadPoint {
            offset: d,
            stop_date: case.horizon.dates()[0],
            terminal: case.horizon.terminal(),
            horizon_variance: case.horizon.variance(),
            certainty_equivalent: certainty_equivalent_estimate(eu, &case.contract)?,
            variance: stopped_variance(&samples),
            budget_residual: solution.budget_residual,
            lagrange_constant: solution.c_star,
        });
    }
    Ok(points)
}

/// One point of the stopping-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityPoint {
    pub stop_probability: f64,
    pub certainty_equivalent: Estimate,
    pub variance: Estimate,
    /// Paired change in certainty equivalent from the previous point.
    pub ce_step: Option<Estimate>,
    pub budget_residual: f64,
    pub lagrange_constant: f64,
}

/// Stopping-probability sweep with the dates of `spec` held fixed. All
/// points reuse the same market paths, so adjacent certainty-equivalent
/// changes carry paired standard errors.
pub fn probability_sweep(spec: &ProblemSpec, probs: &[f64], opts: &SolverOptions) -> Result<Vec<ProbabilityPoint>> {
    single_stop_probability(spec)?;
    let t1 = spec.horizon.dates()[0];
    let terminal = spec.horizon.terminal();
    let mut points: Vec<ProbabilityPoint> = Vec::with_capacity(probs.len());
    let mut previous: Option<StoppedSampleSet> = None;
    for &p in probs {
        let case = spec.with_horizon(HorizonDistribution::two_date(t1, p, terminal)?);
        let solution = solve_uncertain_horizon(&case, opts)?;
        let samples = StoppedSampleSet::from_solution(&solution)?;
        let eu = expected_utility(&samples, &case.contract);
        let ce_step = match &previous {
            Some(prev) => Some(paired_ce_difference(prev, &samples, &case.contract)?),
            None => None,
        };
        points.push(ProbabilityPoint {
            stop_probability: p,
            certainty_equivalent: certainty_equivalent_estimate(eu, &case.contract)?,
            variance: stopped_variance(&samples),
            ce_step,
            budget_residual: solution.budget_residual,
            lagrange_constant: solution.c_star,
        });
        previous = Some(samples);
    }
    Ok(points)
}

fn single_stop_probability(spec: &ProblemSpec) -> Result<f64> {
    match spec.horizon.probs() {
        [p] => Ok(*p),
        other => Err(invalid(format!("sweeps need exactly one premature stopping date, got {}", other.len()))),
    }
}
