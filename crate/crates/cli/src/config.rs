use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wenk::model::AffineMap;
use wenk::oracle::GridSpec;
use wenk::samplers::{step_count, Method, SamplerConfig};
use wenk::{builtin_problem, GaussianPrior, InverseProblem, Matrix, ProblemId, Vector};

use crate::CliError;

/// A builtin problem by name, or an inline affine problem
/// `G(u) = A u + b` with Gaussian prior and noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Builtin(ProblemId),
    Linear(LinearProblemSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProblemSpec {
    pub name: String,
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    pub y: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_cov: Option<Vec<Vec<f64>>>,
}

fn matrix(what: &str, rows: &[Vec<f64>]) -> Result<Matrix, CliError> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!(
            "{what} must be a non-empty rectangular matrix"
        )));
    }
    Matrix::from_row_major(rows.len(), cols, rows.concat())
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
}

impl ProblemSpec {
    pub fn name(&self) -> String {
        match self {
            ProblemSpec::Builtin(id) => id.as_str().to_string(),
            ProblemSpec::Linear(l) => l.name.clone(),
        }
    }

    pub fn builtin(&self) -> Option<ProblemId> {
        match self {
            ProblemSpec::Builtin(id) => Some(*id),
            ProblemSpec::Linear(_) => None,
        }
    }

    pub fn build(&self) -> Result<InverseProblem, CliError> {
        match self {
            ProblemSpec::Builtin(id) => Ok(builtin_problem(*id)),
            ProblemSpec::Linear(l) => {
                let a = matrix("a", &l.a)?;
                let (k, dim) = a.shape();
                let b = Vector::new(l.b.clone().unwrap_or_else(|| vec![0.0; k]));
                let prior_mean =
                    Vector::new(l.prior_mean.clone().unwrap_or_else(|| vec![0.0; dim]));
                let prior_cov = match &l.prior_cov {
                    Some(c) => matrix("prior_cov", c)?,
                    None => Matrix::identity(dim),
                };
                let prior = GaussianPrior::new(prior_mean, prior_cov)
                    .map_err(|e| CliError::Config(format!("prior: {e}")))?;
                InverseProblem::new(
                    l.name.clone(),
                    Arc::new(AffineMap::new(a, b)),
                    prior,
                    Vector::new(l.y.clone()),
                    matrix("gamma", &l.gamma)?,
                )
                .map_err(|e| CliError::Config(format!("problem {}: {e}", l.name)))
            }
        }
    }

    /// 1e-3 except for the stiff examples.
    pub fn default_dt(&self) -> f64 {
        self.builtin().map_or(1e-3, |id| id.default_dt())
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_orders() -> Vec<u32> {
    (1..=5).collect()
}

fn default_stride() -> usize {
    100
}

/// Flat JSON experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub method: Method,
    pub n_particles: usize,
    /// Defaults per problem when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Replaces the default quadrature grid of the oracle and histograms.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_orders")]
    pub moment_orders: Vec<u32>,
    /// Every `snapshot_stride`-th snapshot goes into the trajectory CSV;
    /// the first and last are always written.
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSpec, method: Method, n_particles: usize) -> Self {
        ExperimentConfig {
            problem,
            method,
            n_particles,
            dt: None,
            seeds: default_seeds(),
            out_dir: default_out_dir(),
            grid: None,
            moment_orders: default_orders(),
            snapshot_stride: default_stride(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| self.problem.default_dt())
    }

    pub fn sampler_config(&self, seed: u64) -> SamplerConfig {
        SamplerConfig::new(self.method, self.n_particles, self.dt(), seed)
    }

    pub fn grid_for(&self, dim: usize) -> GridSpec {
        self.grid
            .clone()
            .unwrap_or_else(|| GridSpec::default_for(dim))
    }

    /// Checks everything that can be checked without running a sampler,
    /// and returns the built problem.
    pub fn validate(&self) -> Result<InverseProblem, CliError> {
        if self.n_particles == 0 {
            return Err(CliError::Config("n_particles must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must not be empty".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(CliError::Config(
                "snapshot_stride must be at least 1".into(),
            ));
        }
        if self.moment_orders.is_empty() || self.moment_orders.contains(&0) {
            return Err(CliError::Config(
                "moment_orders must be positive integers".into(),
            ));
        }
        let problem = self.problem.build()?;
        if !(1..=2).contains(&problem.dim_in()) {
            return Err(CliError::Config(format!(
                "reference quadrature supports 1 or 2 parameters, got {}",
                problem.dim_in()
            )));
        }
        step_count(self.dt()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(g) = &self.grid {
            if g.dim() != problem.dim_in() {
                return Err(CliError::Config(format!(
                    "grid has {} axes, problem has {} parameters",
                    g.dim(),
                    problem.dim_in()
                )));
            }
        }
        Ok(problem)
    }
}
