//! Weighted particle ensembles, their empirical statistics and weight
//! diagnostics.
//!
//! Weights are kept as normalized log-weights. Linear weights are derived on
//! demand as `exp(ℓₙ - max ℓ) / Σ exp(ℓₘ - max ℓ)`, which gives exactly `1/N`
//! for a uniform ensemble.

use thiserror::Error;

use crate::model::ForwardModel;
use crate::numkit::{Matrix, RandomSource, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("ensemble has no particles")]
    Empty,
    #[error("every log-weight is -inf or NaN; nothing left to normalize")]
    AllWeightsVanished,
    #[error("particle {index} has dimension {actual}, expected {expected}")]
    RaggedParticles {
        index: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{particles} particles but {weights} weights")]
    WeightCount { particles: usize, weights: usize },
    #[error("non-finite particle coordinate at index {0}")]
    NonFiniteParticle(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedEnsemble {
    particles: Vec<Vector>,
    log_weights: Vec<f64>,
    t: f64,
}

impl WeightedEnsemble {
    /// Equal weights `1/N`.
    pub fn uniform(particles: Vec<Vector>, t: f64) -> Result<Self, EnsembleError> {
        let n = particles.len();
        Self::check_particles(&particles)?;
        Ok(WeightedEnsemble {
            particles,
            log_weights: vec![-(n as f64).ln(); n],
            t,
        })
    }

    /// Builds an ensemble from unnormalized log-weights and normalizes them.
    pub fn from_log_weights(
        particles: Vec<Vector>,
        log_weights: Vec<f64>,
        t: f64,
    ) -> Result<Self, EnsembleError> {
        Self::check_particles(&particles)?;
        if log_weights.len() != particles.len() {
            return Err(EnsembleError::WeightCount {
                particles: particles.len(),
                weights: log_weights.len(),
            });
        }
        let log_weights = normalize_log_weights(&log_weights)?;
        Ok(WeightedEnsemble {
            particles,
            log_weights,
            t,
        })
    }

    /// Builds an ensemble from unnormalized linear weights.
    pub fn from_weights(
        particles: Vec<Vector>,
        weights: &[f64],
        t: f64,
    ) -> Result<Self, EnsembleError> {
        let logs = weights.iter().map(|w| w.ln()).collect();
        Self::from_log_weights(particles, logs, t)
    }

    fn check_particles(particles: &[Vector]) -> Result<(), EnsembleError> {
        let first = particles.first().ok_or(EnsembleError::Empty)?;
        for (index, p) in particles.iter().enumerate() {
            if p.len() != first.len() {
                return Err(EnsembleError::RaggedParticles {
                    index,
                    expected: first.len(),
                    actual: p.len(),
                });
            }
            if !p.is_finite() {
                return Err(EnsembleError::NonFiniteParticle(index));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn particles(&self) -> &[Vector] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        linear_weights(&self.log_weights)
    }

    pub fn is_uniform(&self) -> bool {
        self.log_weights.windows(2).all(|w| w[0] == w[1])
    }

    /// Adds `increments[n]` to each log-weight and renormalizes.
    pub fn reweight(&mut self, increments: &[f64]) -> Result<(), EnsembleError> {
        if increments.len() != self.len() {
            return Err(EnsembleError::WeightCount {
                particles: self.len(),
                weights: increments.len(),
            });
        }
        let raw: Vec<f64> = self
            .log_weights
            .iter()
            .zip(increments)
            .map(|(l, d)| l + d)
            .collect();
        self.log_weights = normalize_log_weights(&raw)?;
        Ok(())
    }

    pub(crate) fn with_parts(particles: Vec<Vector>, log_weights: Vec<f64>, t: f64) -> Self {
        WeightedEnsemble {
            particles,
            log_weights,
            t,
        }
    }

    pub(crate) fn set_t(&mut self, t: f64) {
        self.t = t;
    }
}

/// Subtracts log-sum-exp so the weights sum to one.
pub fn normalize_log_weights(raw: &[f64]) -> Result<Vec<f64>, EnsembleError> {
    if raw.is_empty() {
        return Err(EnsembleError::Empty);
    }
    let max = raw
        .iter()
        .copied()
        .filter(|x| !x.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(EnsembleError::AllWeightsVanished);
    }
    if max == f64::INFINITY {
        // Every +inf entry shares the mass.
        let count = raw.iter().filter(|x| **x == f64::INFINITY).count() as f64;
        return Ok(raw
            .iter()
            .map(|x| {
                if *x == f64::INFINITY {
                    -count.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect());
    }
    let sum: f64 = raw
        .iter()
        .map(|x| if x.is_nan() { 0.0 } else { (x - max).exp() })
        .sum();
    let shift = max + sum.ln();
    Ok(raw
        .iter()
        .map(|x| {
            if x.is_nan() {
                f64::NEG_INFINITY
            } else {
                x - shift
            }
        })
        .collect())
}

fn linear_weights(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|x| x / sum).collect()
}

/// Renormalizes the ensemble's weights (already normalized ensembles are
/// returned unchanged up to rounding).
pub fn normalize_weights(mut e: WeightedEnsemble) -> Result<WeightedEnsemble, EnsembleError> {
    e.log_weights = normalize_log_weights(&e.log_weights)?;
    Ok(e)
}

/// First and second empirical moments of the joint `(u, G(u))` cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleStats {
    pub mean_u: Vector,
    pub mean_g: Vector,
    pub cov_uu: Matrix,
    pub cov_up: Matrix,
    pub cov_pp: Matrix,
}

impl EnsembleStats {
    /// Weighted statistics from particles, their forward outputs and
    /// normalized weights. Reductions run in ascending particle order.
    pub fn from_samples(particles: &[Vector], outputs: &[Vector], weights: &[f64]) -> Self {
        debug_assert_eq!(particles.len(), outputs.len());
        debug_assert_eq!(particles.len(), weights.len());
        let l = particles[0].len();
        let k = outputs[0].len();
        let mut mean_u = Vector::zeros(l);
        let mut mean_g = Vector::zeros(k);
        for ((u, g), w) in particles.iter().zip(outputs).zip(weights) {
            mean_u.axpy(*w, u);
            mean_g.axpy(*w, g);
        }
        let mut cov_uu = Matrix::zeros(l, l);
        let mut cov_up = Matrix::zeros(l, k);
        let mut cov_pp = Matrix::zeros(k, k);
        let mut du = vec![0.0; l];
        let mut dg = vec![0.0; k];
        for ((u, g), w) in particles.iter().zip(outputs).zip(weights) {
            for i in 0..l {
                du[i] = u[i] - mean_u[i];
            }
            for i in 0..k {
                dg[i] = g[i] - mean_g[i];
            }
            for i in 0..l {
                for j in 0..l {
                    cov_uu[(i, j)] += w * du[i] * du[j];
                }
                for j in 0..k {
                    cov_up[(i, j)] += w * du[i] * dg[j];
                }
            }
            for i in 0..k {
                for j in 0..k {
                    cov_pp[(i, j)] += w * dg[i] * dg[j];
                }
            }
        }
        EnsembleStats {
            mean_u,
            mean_g,
            cov_uu,
            cov_up,
            cov_pp,
        }
    }

    pub fn cov_pu(&self) -> Matrix {
        self.cov_up.transpose()
    }
}

/// Evaluates `G` at every particle, ascending index order.
pub fn forward_outputs(e: &WeightedEnsemble, model: &dyn ForwardModel) -> Vec<Vector> {
    e.particles().iter().map(|u| model.eval(u)).collect()
}

/// Weighted (`Σ wⁿ ·`) or plain (`1/N Σ ·`) ensemble statistics.
pub fn stats(e: &WeightedEnsemble, model: &dyn ForwardModel, weighted: bool) -> EnsembleStats {
    let outputs = forward_outputs(e, model);
    stats_with_outputs(e, &outputs, weighted)
}

pub fn stats_with_outputs(
    e: &WeightedEnsemble,
    outputs: &[Vector],
    weighted: bool,
) -> EnsembleStats {
    let weights = if weighted {
        e.weights()
    } else {
        vec![1.0 / e.len() as f64; e.len()]
    };
    EnsembleStats::from_samples(e.particles(), outputs, &weights)
}

/// `Var(Nw) ≈ (1/N) Σ (N wⁿ)² - 1`
pub fn weight_variance(e: &WeightedEnsemble) -> f64 {
    let n = e.len() as f64;
    let sum_sq: f64 = e.weights().iter().map(|w| w * w).sum();
    (n * sum_sq - 1.0).max(0.0)
}

/// `Σ wⁿ |uⁿ|ᵏ` with the Euclidean norm.
pub fn weighted_moment(e: &WeightedEnsemble, k: u32) -> f64 {
    e.weights()
        .iter()
        .zip(e.particles())
        .map(|(w, u)| w * u.norm().powi(k as i32))
        .sum()
}

/// `1 / Σ (wⁿ)²`
pub fn effective_sample_size(e: &WeightedEnsemble) -> f64 {
    1.0 / e.weights().iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform offset, `N` equally spaced pointers
/// into the cumulative weights. The result carries uniform weights.
pub fn systematic_resample(e: &WeightedEnsemble, rng: &mut RandomSource) -> WeightedEnsemble {
    let n = e.len();
    let weights = e.weights();
    let offset = rng.uniform();
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut idx = 0;
    for i in 0..n {
        let pointer = (offset + i as f64) / n as f64;
        while pointer > cumulative && idx + 1 < n {
            idx += 1;
            cumulative += weights[idx];
        }
        out.push(e.particles[idx].clone());
    }
    WeightedEnsemble::with_parts(out, vec![-(n as f64).ln(); n], e.t)
}
