//! The six samplers and the time-marching driver.
//!
//! | method   | particles move      | weights                         |
//! |----------|---------------------|---------------------------------|
//! | `is`     | no                  | `exp(-Φ)`                       |
//! | `ensrf`  | deterministic ODE   | uniform                         |
//! | `enki`   | perturbed-data SDE  | uniform                         |
//! | `wensrf` | as `ensrf`          | `exp(∫ P₁ + P₂ dt)`             |
//! | `wenki`  | as `enki`           | `exp(∫ R₁ + R₂ + R₃ dt)`        |
//! | `wenkf`  | one Kalman proposal | target / proposal density ratio |

mod config;
mod rates;
mod steps;

pub use config::{step_count, Method, SamplerConfig};
pub use rates::{wenki_rates, wensrf_rates, FlowTerms, KalmanRates, SquareRootRates};
pub use steps::{
    enki_step, ensrf_step, importance_sampling, importance_weights_at, prior_ensemble, run,
    run_with, wenkf_reweight, wenkf_weights, wenki_step, wensrf_step, RunOutput, Trajectory,
    RETIRED_LOG_WEIGHT,
};

use thiserror::Error;

use crate::ensemble::EnsembleError;
use crate::model::ModelError;
use crate::numkit::NumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite {what} at particle {particle}")]
    NonFinite { what: &'static str, particle: usize },
    #[error("step {step} (t = {t}): {source}")]
    AtStep {
        step: usize,
        t: f64,
        #[source]
        source: Box<SamplerError>,
    },
}

impl SamplerError {
    /// True for configuration problems, false for numerical failures.
    pub fn is_config(&self) -> bool {
        match self {
            SamplerError::Config(_) => true,
            SamplerError::AtStep { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
