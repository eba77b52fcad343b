//! Experiment dispatch and output files.

use std::fs;
use std::path::Path;

use horizon_core::analytics::stratum_counts;
use horizon_core::experiments::{probability_sweep, run_fixed, run_merton, run_uncertain, spread_sweep};

use crate::config::{Experiment, ExperimentConfig};
use crate::format::{number, Summary, Table};
use crate::CliError;

pub const SOLUTION_FILE: &str = "solution.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Runs the configured experiment inside a worker pool of the configured
/// size and writes its CSV files into `out_dir`. Returns a one-line
/// human-readable summary.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    fs::create_dir_all(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.workers)))?;
    pool.install(|| match config.experiment {
        Experiment::Merton => merton(config, out_dir),
        Experiment::FixedHorizon => fixed_horizon(config, out_dir),
        Experiment::UncertainHorizon => uncertain_horizon(config, out_dir),
        Experiment::Figure1Sweep => figure1(config, out_dir),
        Experiment::Figure2Sweep => figure2(config, out_dir),
    })
}

fn merton(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = config.spec()?;
    let run = run_merton(&spec, config.n_paths, config.seed)?;

    let mut solution = Table::new(&["path", "stop_date", "density", "wealth"]);
    for (k, s) in run.samples.samples().iter().enumerate() {
        solution.push(vec![k.to_string(), number(s.date), number(s.density), number(s.wealth)]);
    }
    solution.write(&out_dir.join(SOLUTION_FILE))?;

    let mut summary = Summary::new();
    summary.value("fraction", run.fraction);
    summary.value("budget_residual", run.solution.budget_residual());
    summary.estimate("budget", run.budget);
    for t in spec.horizon.grid() {
        summary.value(&format!("nu_{}", number(t)), run.solution.nu(t));
    }
    summary.value("n_paths", config.n_paths as f64);
    summary.write(&out_dir.join(SUMMARY_FILE))?;

    Ok(format!(
        "merton: fraction {} budget {} (se {})",
        number(run.fraction),
        number(run.budget.value),
        number(run.budget.std_error)
    ))
}

fn fixed_horizon(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = config.fixed_spec()?;
    let run = run_fixed(&spec, config.n_paths, config.seed)?;
    let nu = run.solution.nu();

    let mut solution = Table::new(&["path", "stop_date", "density", "nu", "wealth"]);
    for (k, s) in run.samples.samples().iter().enumerate() {
        solution.push(vec![k.to_string(), number(s.date), number(s.density), number(nu), number(s.wealth)]);
    }
    solution.write(&out_dir.join(SOLUTION_FILE))?;

    let mut summary = Summary::new();
    summary.value("horizon", config.horizon.fixed);
    summary.value("nu", nu);
    summary.value("budget_residual", run.solution.budget_residual());
    summary.estimate("budget", run.budget);
    summary.estimate("expected_utility", run.expected_utility);
    summary.estimate("certainty_equivalent", run.certainty_equivalent);
    summary.estimate("variance", run.variance);
    summary.value("x_hat", spec.contract.x_hat());
    summary.value("n_paths", config.n_paths as f64);
    summary.write(&out_dir.join(SUMMARY_FILE))?;

    Ok(format!(
        "fixed-horizon: nu {} certainty equivalent {} (se {})",
        number(nu),
        number(run.certainty_equivalent.value),
        number(run.certainty_equivalent.std_error)
    ))
}

fn uncertain_horizon(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = config.spec()?;
    let run = run_uncertain(&spec, &config.solver_options())?;
    let sol = &run.solution;
    let n_stop = stratum_counts(&spec.horizon, sol.n_paths())[0];

    let mut solution = Table::new(&[
        "path",
        "stop_date",
        "w_stop",
        "density_stop",
        "nu_stop",
        "nu_terminal",
        "wealth_stop",
        "wealth_terminal",
        "stopped_wealth",
    ]);
    for k in 0..sol.n_paths() {
        let stop = sol.paths.state(k, 0);
        let (date, stopped) =
            if k < n_stop { (stop.t, sol.wealth_t1[k]) } else { (spec.horizon.terminal(), sol.wealth_t[k]) };
        solution.push(vec![
            k.to_string(),
            number(date),
            number(stop.w),
            number(stop.h),
            number(sol.nu_t1[k]),
            number(sol.nu_t[k]),
            number(sol.wealth_t1[k]),
            number(sol.wealth_t[k]),
            number(stopped),
        ]);
    }
    solution.write(&out_dir.join(SOLUTION_FILE))?;

    let cmp = &run.comparison;
    let ruined = sol.nu_t.iter().filter(|v| v.is_infinite()).count();
    let max_inner = sol.inner_residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let mut summary = Summary::new();
    summary.value("lagrange_constant", sol.c_star);
    summary.value("iterations", sol.iterations as f64);
    summary.estimate("budget", sol.budget);
    summary.estimate("raw_budget", sol.raw_budget);
    summary.value("budget_residual", sol.budget_residual);
    summary.value("max_inner_residual", max_inner);
    summary.value("ruined_paths", ruined as f64);
    summary.estimate("expected_utility", cmp.eu_uncertain);
    summary.estimate("certainty_equivalent", cmp.ce_uncertain);
    summary.estimate("variance", cmp.variance_uncertain);
    summary.value("fixed_horizon", cmp.t_tilde);
    summary.estimate("certainty_equivalent_fixed", cmp.ce_fixed);
    summary.estimate("variance_fixed", cmp.variance_fixed);
    summary.estimate("certainty_equivalent_difference", cmp.ce_difference);
    summary.estimate("variance_difference", cmp.variance_difference);
    summary.value("x_hat", spec.contract.x_hat());
    summary.value("n_paths", config.n_paths as f64);
    summary.write(&out_dir.join(SUMMARY_FILE))?;

    Ok(format!(
        "uncertain-horizon: C {} budget residual {} certainty equivalent {} (se {}) vs fixed {} (se {})",
        number(sol.c_star),
        number(sol.budget_residual),
        number(cmp.ce_uncertain.value),
        number(cmp.ce_uncertain.std_error),
        number(cmp.ce_fixed.value),
        number(cmp.ce_fixed.std_error)
    ))
}

/// Smallest `(next - previous) / se` over adjacent points; positive when
/// the sequence increases everywhere.
fn min_step_z(values: &[horizon_core::Estimate]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1].value - w[0].value) / w[0].std_error.hypot(w[1].std_error))
        .fold(f64::INFINITY, f64::min)
}

fn figure1(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = config.spec()?;
    let points = spread_sweep(&spec, &config.sweep.offsets, &config.solver_options())?;

    let mut sweep = Table::new(&[
        "offset",
        "stop_date",
        "terminal",
        "horizon_variance",
        "certainty_equivalent",
        "certainty_equivalent_se",
        "variance",
        "variance_se",
        "budget_residual",
        "lagrange_constant",
    ]);
    for p in &points {
        sweep.push(vec![
            number(p.offset),
            number(p.stop_date),
            number(p.terminal),
            number(p.horizon_variance),
            number(p.certainty_equivalent.value),
            number(p.certainty_equivalent.std_error),
            number(p.variance.value),
            number(p.variance.std_error),
            number(p.budget_residual),
            number(p.lagrange_constant),
        ]);
    }
    sweep.write(&out_dir.join(SWEEP_FILE))?;

    let variances: Vec<_> = points.iter().map(|p| p.variance).collect();
    let ces: Vec<_> = points.iter().map(|p| p.certainty_equivalent).collect();
    let negated: Vec<_> = ces.iter().map(|e| horizon_core::Estimate::new(-e.value, e.std_error)).collect();
    let mut summary = Summary::new();
    summary.value("points", points.len() as f64);
    summary.value("expected_horizon", spec.horizon.mean());
    summary.value("variance_min_step_z", min_step_z(&variances));
    summary.value("certainty_equivalent_max_step_z", -min_step_z(&negated));
    summary.write(&out_dir.join(SUMMARY_FILE))?;

    Ok(format!(
        "figure1-sweep: {} points, variance {} -> {}, certainty equivalent {} -> {}",
        points.len(),
        number(variances[0].value),
        number(variances[variances.len() - 1].value),
        number(ces[0].value),
        number(ces[ces.len() - 1].value)
    ))
}

fn figure2(config: &ExperimentConfig, out_dir: &Path) -> Result<String, CliError> {
    let spec = config.spec()?;
    let points = probability_sweep(&spec, &config.sweep.probs, &config.solver_options())?;

    let mut sweep = Table::new(&[
        "stop_probability",
        "certainty_equivalent",
        "certainty_equivalent_se",
        "certainty_equivalent_step",
        "certainty_equivalent_step_se",
        "variance",
        "variance_se",
        "budget_residual",
        "lagrange_constant",
    ]);
    for p in &points {
        let (step, step_se) =
            p.ce_step.map_or((String::new(), String::new()), |s| (number(s.value), number(s.std_error)));
        sweep.push(vec![
            number(p.stop_probability),
            number(p.certainty_equivalent.value),
            number(p.certainty_equivalent.std_error),
            step,
            step_se,
            number(p.variance.value),
            number(p.variance.std_error),
            number(p.budget_residual),
            number(p.lagrange_constant),
        ]);
    }
    sweep.write(&out_dir.join(SWEEP_FILE))?;

    let max_step_z =
        points.iter().filter_map(|p| p.ce_step).map(|s| s.value / s.std_error).fold(f64::NEG_INFINITY, f64::max);
    let mut summary = Summary::new();
    summary.value("points", points.len() as f64);
    summary.value("certainty_equivalent_max_step_z", max_step_z);
    summary.write(&out_dir.join(SUMMARY_FILE))?;

    let first = points[0].certainty_equivalent.value;
    let last = points[points.len() - 1].certainty_equivalent.value;
    Ok(format!(
        "figure2-sweep: {} points, certainty equivalent {} -> {}, largest paired step z {}",
        points.len(),
        number(first),
        number(last),
        number(max_step_z)
    ))
}
