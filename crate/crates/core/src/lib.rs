//! Ensemble samplers for Bayesian inverse problems with a Gaussian prior and
//! Gaussian observation noise.
//!
//! Six samplers share one particle representation ([`WeightedEnsemble`]):
//! importance sampling, the ensemble square-root filter and ensemble Kalman
//! inversion (unweighted particle flows), their weighted corrections that
//! stay consistent for nonlinear forward maps, and the one-shot weighted
//! ensemble Kalman filter. [`oracle`] supplies quadrature and closed-form
//! reference values to check them against.

pub mod ensemble;
pub mod model;
pub mod numkit;
pub mod oracle;
pub mod samplers;

pub use ensemble::{EnsembleError, EnsembleStats, WeightedEnsemble};
pub use model::{builtin_problem, ForwardModel, GaussianPrior, InverseProblem, ProblemId};
pub use numkit::{Matrix, NumError, RandomSource, Vector};
