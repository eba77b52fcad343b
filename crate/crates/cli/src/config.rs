//! TOML experiment configuration. Every key is optional; missing keys take
//! the reference values below.
//!
//! ```toml
//! experiment = "uncertain-horizon"  # merton | fixed-horizon | uncertain-horizon | figure1-sweep | figure2-sweep
//! x0 = 100.0
//! n_paths = 100000
//! seed = 20240101
//! budget_tol = 1e-4
//! max_iterations = 200
//! workers = 0                       # 0 = one worker per core
//!
//! [market]
//! mu = 0.08
//! r = 0.03
//! sigma = 0.2
//!
//! [contract]
//! gamma = 3.0
//! alpha = 0.25
//! threshold = 50.0
//! guarantee = 1.0
//!
//! [horizon]
//! dates = [8.0]
//! probs = [0.5]
//! terminal = 12.0
//! fixed = 10.0                      # horizon of the fixed-horizon experiment
//!
//! [sweep]
//! offsets = [1.0, 2.0, 3.0, 4.0, 5.0]
//! probs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use horizon_core::{ContractUtility, HorizonDistribution, MarketParams, ProblemSpec, SolverOptions};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Merton,
    FixedHorizon,
    UncertainHorizon,
    Figure1Sweep,
    Figure2Sweep,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Experiment::Merton => "merton",
            Experiment::FixedHorizon => "fixed-horizon",
            Experiment::UncertainHorizon => "uncertain-horizon",
            Experiment::Figure1Sweep => "figure1-sweep",
            Experiment::Figure2Sweep => "figure2-sweep",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarketConfig {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self { mu: 0.08, r: 0.03, sigma: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub guarantee: f64,
}

impl Default for ContractConfig {
    fn default() -> Self {
        Self { gamma: 3.0, alpha: 0.25, threshold: 50.0, guarantee: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HorizonConfig {
    pub dates: Vec<f64>,
    pub probs: Vec<f64>,
    pub terminal: f64,
    pub fixed: f64,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self { dates: vec![8.0], probs: vec![0.5], terminal: 12.0, fixed: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub offsets: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { offsets: vec![1.0, 2.0, 3.0, 4.0, 5.0], probs: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub x0: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub budget_tol: f64,
    pub max_iterations: usize,
    pub workers: usize,
    pub market: MarketConfig,
    pub contract: ContractConfig,
    pub horizon: HorizonConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::UncertainHorizon,
            x0: 100.0,
            n_paths: 100_000,
            seed: 20_240_101,
            budget_tol: 1e-4,
            max_iterations: 200,
            workers: 0,
            market: MarketConfig::default(),
            contract: ContractConfig::default(),
            horizon: HorizonConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

impl FromStr for ExperimentConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
        text.parse()
    }

    /// Problem with the configured random horizon.
    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let m = &self.market;
        let c = &self.contract;
        let h = &self.horizon;
        Ok(ProblemSpec::new(
            MarketParams::new(m.mu, m.r, m.sigma)?,
            ContractUtility::new(c.gamma, c.alpha, c.threshold, c.guarantee)?,
            HorizonDistribution::new(h.dates.clone(), h.probs.clone(), h.terminal)?,
            self.x0,
        )?)
    }

    /// Problem with the deterministic horizon `horizon.fixed`.
    pub fn fixed_spec(&self) -> Result<ProblemSpec, CliError> {
        Ok(self.spec()?.with_horizon(HorizonDistribution::fixed(self.horizon.fixed)?))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            n_paths: self.n_paths,
            seed: self.seed,
            budget_tol: self.budget_tol,
            max_iterations: self.max_iterations,
        }
    }
}
