//! Reference values: trapezoid quadrature of the tempered density on a
//! tensor grid (one or two dimensions), the closed-form Gaussian path for
//! affine forward maps, the expected-misfit curve and the inconsistency
//! indicator of unweighted Kalman inversion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::EnsembleStats;
use crate::model::{InverseProblem, ModelError};
use crate::numkit::{Matrix, NumError, SpdFactor, Vector};
use crate::samplers::{wenki_rates, FlowTerms};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("non-finite density value at grid node {0}")]
    NonFiniteDensity(usize),
    #[error("forward map is not affine; no closed-form Gaussian path")]
    NotLinear,
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Per-axis bounds and node counts of a tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nodes: Vec<usize>,
}

impl GridSpec {
    /// `[-10, 10]` with 4001 nodes in 1D; `[-8, 8]²` with 801 nodes per
    /// axis in 2D.
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => GridSpec::uniform(1, -10.0, 10.0, 4001),
            _ => GridSpec::uniform(dim, -8.0, 8.0, 801),
        }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64, nodes: usize) -> Self {
        GridSpec {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
            nodes: vec![nodes; dim],
        }
    }

    /// Halves the spacing on every axis.
    pub fn refined(&self) -> Self {
        GridSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            nodes: self.nodes.iter().map(|n| 2 * n - 1).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    fn validate(&self, dim: usize) -> Result<(), OracleError> {
        if self.lower.len() != dim || self.upper.len() != dim || self.nodes.len() != dim {
            return Err(OracleError::BadGrid(format!(
                "grid has {} axes, problem has dimension {dim}",
                self.nodes.len()
            )));
        }
        if !(1..=2).contains(&dim) {
            return Err(OracleError::BadGrid(format!(
                "quadrature supports 1 or 2 dimensions, got {dim}"
            )));
        }
        for i in 0..dim {
            if self.upper[i].partial_cmp(&self.lower[i]) != Some(std::cmp::Ordering::Greater)
                || self.nodes[i] < 2
            {
                return Err(OracleError::BadGrid(format!("axis {i} is degenerate")));
            }
        }
        Ok(())
    }

    fn axis(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.nodes[i];
        let h = (self.upper[i] - self.lower[i]) / (n - 1) as f64;
        let coords = (0..n).map(|j| self.lower[i] + j as f64 * h).collect();
        let weights = (0..n)
            .map(|j| if j == 0 || j == n - 1 { 0.5 * h } else { h })
            .collect();
        (coords, weights)
    }
}

/// Tempered density `ρ(·, t)` tabulated on a tensor grid.
#[derive(Clone, Debug)]
pub struct GridOracle {
    spec: GridSpec,
    t: f64,
    points: Vec<Vector>,
    quad_weights: Vec<f64>,
    log_density: Vec<f64>,
    log_normalizer: f64,
    /// Normalized quadrature masses `qᵢ ρ(uᵢ) / Z`.
    masses: Vec<f64>,
}

impl GridOracle {
    pub fn new(problem: &InverseProblem, t: f64, spec: &GridSpec) -> Result<Self, OracleError> {
        spec.validate(problem.dim_in())?;
        let td = problem.tempered(t)?;
        let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..spec.dim()).map(|i| spec.axis(i)).collect();
        let mut points = Vec::new();
        let mut quad_weights = Vec::new();
        match axes.as_slice() {
            [(x, wx)] => {
                for (xi, wi) in x.iter().zip(wx) {
                    points.push(Vector::scalar(*xi));
                    quad_weights.push(*wi);
                }
            }
            [(x, wx), (y, wy)] => {
                for (xi, wi) in x.iter().zip(wx) {
                    for (yj, wj) in y.iter().zip(wy) {
                        points.push(Vector::from([*xi, *yj]));
                        quad_weights.push(wi * wj);
                    }
                }
            }
            _ => unreachable!("validated dimension"),
        }
        let mut log_density = Vec::with_capacity(points.len());
        for (i, u) in points.iter().enumerate() {
            let ld = td.log_unnormalized_density(u)?;
            if ld.is_nan() || ld == f64::INFINITY {
                return Err(OracleError::NonFiniteDensity(i));
            }
            log_density.push(ld);
        }
        let max = log_density
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_density
            .iter()
            .zip(&quad_weights)
            .map(|(l, q)| q * (l - max).exp())
            .collect();
        let total: f64 = scaled.iter().sum();
        let log_normalizer = max + total.ln();
        let masses = scaled.into_iter().map(|s| s / total).collect();
        Ok(GridOracle {
            spec: spec.clone(),
            t,
            points,
            quad_weights,
            log_density,
            log_normalizer,
            masses,
        })
    }

    pub fn with_default_grid(problem: &InverseProblem, t: f64) -> Result<Self, OracleError> {
        Self::new(problem, t, &GridSpec::default_for(problem.dim_in()))
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `log Z(t)` of the unnormalized density on this grid.
    pub fn log_normalizer(&self) -> f64 {
        self.log_normalizer
    }

    /// `∫ ρ / Z` by the same rule; equals one up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.log_density
            .iter()
            .zip(&self.quad_weights)
            .map(|(l, q)| q * (l - self.log_normalizer).exp())
            .sum()
    }

    pub fn expectation<F: Fn(&Vector) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.masses)
            .map(|(u, m)| m * f(u))
            .sum()
    }

    /// `E|u|ᵏ` under `ρ(·, t)`.
    pub fn grid_moment(&self, k: u32) -> f64 {
        self.expectation(|u| u.norm().powi(k as i32))
    }

    /// Exact (quadrature) means and covariances of `(u, G(u))`.
    pub fn stats(&self, problem: &InverseProblem) -> EnsembleStats {
        let model = problem.model();
        let outputs: Vec<Vector> = self.points.iter().map(|u| model.eval(u)).collect();
        EnsembleStats::from_samples(&self.points, &outputs, &self.masses)
    }
}

/// Moments `E|u|ᵏ` at time `t` on the default grid.
pub fn grid_moment(problem: &InverseProblem, t: f64, k: u32) -> Result<f64, OracleError> {
    Ok(GridOracle::with_default_grid(problem, t)?.grid_moment(k))
}

/// Closed-form mean and covariance of `ρ(·, t)` for `G(u) = A u + b`.
#[derive(Clone, Debug)]
pub struct GaussianFlow<'a> {
    problem: &'a InverseProblem,
    a: Matrix,
    b: Vector,
}

impl<'a> GaussianFlow<'a> {
    pub fn new(problem: &'a InverseProblem) -> Result<Self, OracleError> {
        let (a, b) = problem
            .model()
            .affine_parts()
            .ok_or(OracleError::NotLinear)?;
        Ok(GaussianFlow { problem, a, b })
    }

    /// `Cov_A = (t AᵀΓ⁻¹A + Γ₀⁻¹)⁻¹`,
    /// `u_A = Cov_A (t AᵀΓ⁻¹(y - b) + Γ₀⁻¹ u₀)`.
    ///
    /// `AᵀΓ⁻¹(y - b)` equals `AᵀΓ⁻¹A u*` for any least-squares minimizer
    /// `u*` of the misfit, so no minimizer needs to be formed.
    pub fn at(&self, t: f64) -> Result<(Vector, Matrix), OracleError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(ModelError::InvalidTime(t).into());
        }
        let gf = self.problem.gamma_factor();
        let prior = self.problem.prior();
        let prior_precision = prior.factor().inverse();
        let fisher = self.a.transpose().mul(&gf.solve_matrix(&self.a));
        let precision = fisher.scale(t).add(&prior_precision);
        let precision_factor = SpdFactor::new(&precision)?;
        let cov = precision_factor.inverse();
        let data_term = self
            .a
            .tr_mul_vec(&gf.solve(&self.problem.y().sub(&self.b)))
            .scale(t);
        let rhs = data_term.add(&prior.factor().solve(prior.mean()));
        let mean = precision_factor.solve(&rhs);
        Ok((mean, cov))
    }

    /// Exact statistics of `(u, G(u))` under the Gaussian `ρ(·, t)`.
    pub fn stats(&self, t: f64) -> Result<EnsembleStats, OracleError> {
        let (mean, cov) = self.at(t)?;
        let cov_up = cov.mul(&self.a.transpose());
        let cov_pp = self.a.mul(&cov_up);
        Ok(EnsembleStats {
            mean_g: self.a.mul_vec(&mean).add(&self.b),
            mean_u: mean,
            cov_uu: cov,
            cov_up,
            cov_pp,
        })
    }
}

pub fn gaussian_flow(problem: &InverseProblem, t: f64) -> Result<(Vector, Matrix), OracleError> {
    GaussianFlow::new(problem)?.at(t)
}

/// `E_{ρ(t)} |y - G(u)|²_Γ` at each node.
pub fn misfit_curve(
    problem: &InverseProblem,
    t_nodes: &[f64],
    spec: &GridSpec,
) -> Result<Vec<f64>, OracleError> {
    let model = problem.model();
    t_nodes
        .iter()
        .map(|&t| {
            let o = GridOracle::new(problem, t, spec)?;
            Ok(o.expectation(|u| problem.gamma_norm_sq(&problem.y().sub(&model.eval(u)))))
        })
        .collect()
}

/// Equispaced nodes `0, 1/(n-1), …, 1`.
pub fn equispaced(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// `∫₀¹ ∫ (1 + |u|²) |R₁ + R₂ + R₃| ρ du dt` with quadrature statistics at
/// each time node and the trapezoid rule in `t`.
pub fn enki_inconsistency(
    problem: &InverseProblem,
    t_nodes: &[f64],
    spec: &GridSpec,
) -> Result<f64, OracleError> {
    if t_nodes.len() < 2 || t_nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OracleError::BadGrid(
            "need at least two increasing time nodes".into(),
        ));
    }
    let mut values = Vec::with_capacity(t_nodes.len());
    for &t in t_nodes {
        let o = GridOracle::new(problem, t, spec)?;
        let terms = FlowTerms::new(problem, o.stats(problem))?;
        let td = problem.tempered(t)?;
        let inner: f64 = o
            .points()
            .iter()
            .zip(o.masses())
            .map(|(u, m)| {
                let p = problem.point(u);
                let rate = wenki_rates(&td, &p, &terms).total();
                m * (1.0 + u.norm_squared()) * rate.abs()
            })
            .sum();
        values.push(inner);
    }
    Ok(t_nodes
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum())
}
