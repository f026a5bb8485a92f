//! Inverse problem definition and the tempered density path.
//!
//! The tempered density interpolates log-linearly between the Gaussian prior
//! (`t = 0`) and the posterior (`t = 1`):
//!
//! ```text
//! log ρ(u, t) = -t Φ(u; y) - ½ (u - u₀)ᵀ Γ₀⁻¹ (u - u₀) + const(t)
//! Φ(u; y)     = ½ (y - G(u))ᵀ Γ⁻¹ (y - G(u))
//! ```
//!
//! Normalizing constants are never computed here; the oracle handles them by
//! quadrature.

pub mod diagnostics;
mod finite_diff;
mod problems;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numkit::{Matrix, NumError, SpdFactor, Vector};

pub use finite_diff::FiniteDifferenceModel;
pub use problems::{
    builtin_problem, AffineMap, Example1, Example2, Example3, Example4, Example5, ProblemId,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("tempering time {0} outside [0, 1]")]
    InvalidTime(f64),
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// A smooth forward map `G: ℝᴸ → ℝᴷ` with analytic first and second
/// derivatives. Implementations must be pure.
pub trait ForwardModel: Send + Sync + fmt::Debug {
    /// `L`
    fn dim_in(&self) -> usize;
    /// `K`
    fn dim_out(&self) -> usize;
    fn eval(&self, u: &Vector) -> Vector;
    /// `K × L` matrix with entries `∂ⱼ Gᵢ`.
    fn jacobian(&self, u: &Vector) -> Matrix;
    /// `∂ᵢ ∇G(u)`: the `K × L` matrix with entries `∂ᵢ ∂ⱼ G_k`.
    fn second_derivative(&self, u: &Vector, i: usize) -> Matrix;

    /// `(A, b)` when `G(u) = A u + b`.
    fn affine_parts(&self) -> Option<(Matrix, Vector)> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct GaussianPrior {
    mean: Vector,
    cov: Matrix,
    factor: SpdFactor,
}

impl GaussianPrior {
    pub fn new(mean: Vector, cov: Matrix) -> Result<Self, ModelError> {
        if cov.shape() != (mean.len(), mean.len()) {
            return Err(ModelError::DimensionMismatch {
                what: "prior covariance",
                expected: mean.len(),
                actual: cov.rows(),
            });
        }
        let factor = SpdFactor::new(&cov)?;
        Ok(GaussianPrior { mean, cov, factor })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianPrior::new(Vector::zeros(dim), Matrix::identity(dim)).expect("identity is SPD")
    }

    pub fn mean(&self) -> &Vector {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `Γ₀⁻¹ (u - u₀)`
    pub fn precision_times_offset(&self, u: &Vector) -> Vector {
        self.factor.solve(&u.sub(&self.mean))
    }

    /// `-½ (u - u₀)ᵀ Γ₀⁻¹ (u - u₀)`
    pub fn log_unnormalized(&self, u: &Vector) -> f64 {
        -0.5 * self.factor.inv_quad(&u.sub(&self.mean))
    }
}

/// Data `y`, noise covariance `Γ`, Gaussian prior and forward model.
#[derive(Clone)]
pub struct InverseProblem {
    name: String,
    model: Arc<dyn ForwardModel>,
    prior: GaussianPrior,
    y: Vector,
    gamma: Matrix,
    gamma_factor: SpdFactor,
}

impl fmt::Debug for InverseProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InverseProblem")
            .field("name", &self.name)
            .field("model", &self.model)
            .field("y", &self.y)
            .field("gamma", &self.gamma)
            .finish_non_exhaustive()
    }
}

impl InverseProblem {
    pub fn new(
        name: impl Into<String>,
        model: Arc<dyn ForwardModel>,
        prior: GaussianPrior,
        y: Vector,
        gamma: Matrix,
    ) -> Result<Self, ModelError> {
        if y.len() != model.dim_out() {
            return Err(ModelError::DimensionMismatch {
                what: "data",
                expected: model.dim_out(),
                actual: y.len(),
            });
        }
        if prior.dim() != model.dim_in() {
            return Err(ModelError::DimensionMismatch {
                what: "prior mean",
                expected: model.dim_in(),
                actual: prior.dim(),
            });
        }
        if gamma.shape() != (y.len(), y.len()) {
            return Err(ModelError::DimensionMismatch {
                what: "noise covariance",
                expected: y.len(),
                actual: gamma.rows(),
            });
        }
        let gamma_factor = SpdFactor::new(&gamma)?;
        Ok(InverseProblem {
            name: name.into(),
            model,
            prior,
            y,
            gamma,
            gamma_factor,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn model(&self) -> &dyn ForwardModel {
        self.model.as_ref()
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }

    pub fn y(&self) -> &Vector {
        &self.y
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn gamma_factor(&self) -> &SpdFactor {
        &self.gamma_factor
    }

    pub fn dim_in(&self) -> usize {
        self.model.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.model.dim_out()
    }

    fn check_input(&self, u: &Vector) -> Result<(), ModelError> {
        if u.len() != self.dim_in() {
            return Err(ModelError::DimensionMismatch {
                what: "parameter",
                expected: self.dim_in(),
                actual: u.len(),
            });
        }
        Ok(())
    }

    /// `|v|²_Γ = vᵀ Γ⁻¹ v`
    pub fn gamma_norm_sq(&self, v: &Vector) -> f64 {
        self.gamma_factor.inv_quad(v)
    }

    /// Least-squares misfit `Φ(u; y) = ½ |y - G(u)|²_Γ`.
    pub fn misfit(&self, u: &Vector) -> Result<f64, ModelError> {
        self.check_input(u)?;
        Ok(self.misfit_of_output(&self.model.eval(u)))
    }

    pub fn misfit_of_output(&self, g: &Vector) -> f64 {
        0.5 * self.gamma_norm_sq(&self.y.sub(g))
    }

    /// Evaluates `G`, `∇G` and the weighted residual at `u` once so the
    /// various rate terms can share them.
    pub fn point(&self, u: &Vector) -> PointEval {
        let g = self.model.eval(u);
        let jacobian = self.model.jacobian(u);
        let residual = self.y.sub(&g);
        let weighted_residual = self.gamma_factor.solve(&residual);
        PointEval {
            u: u.clone(),
            g,
            jacobian,
            residual,
            weighted_residual,
        }
    }

    /// Tempered density at time `t`.
    pub fn tempered(&self, t: f64) -> Result<TemperedDensity<'_>, ModelError> {
        TemperedDensity::new(self, t)
    }
}

/// Cached per-point quantities: `G(u)`, `∇G(u)`, `y - G(u)` and
/// `Γ⁻¹ (y - G(u))`.
#[derive(Clone, Debug)]
pub struct PointEval {
    pub u: Vector,
    pub g: Vector,
    pub jacobian: Matrix,
    pub residual: Vector,
    pub weighted_residual: Vector,
}

/// `ρ(u, t) ∝ exp(-t Φ(u; y)) ρ_prior(u)`
#[derive(Clone, Copy, Debug)]
pub struct TemperedDensity<'a> {
    problem: &'a InverseProblem,
    t: f64,
}

impl<'a> TemperedDensity<'a> {
    pub fn new(problem: &'a InverseProblem, t: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(ModelError::InvalidTime(t));
        }
        Ok(TemperedDensity { problem, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn problem(&self) -> &'a InverseProblem {
        self.problem
    }

    /// `-t Φ(u) - ½ (u - u₀)ᵀ Γ₀⁻¹ (u - u₀)`
    pub fn log_unnormalized_density(&self, u: &Vector) -> Result<f64, ModelError> {
        let phi = self.problem.misfit(u)?;
        Ok(-self.t * phi + self.problem.prior.log_unnormalized(u))
    }

    /// Score `∇ log ρ(u, t) = t ∇Gᵀ Γ⁻¹ (y - G) - Γ₀⁻¹ (u - u₀)`.
    pub fn score_v(&self, u: &Vector) -> Result<Vector, ModelError> {
        self.problem.check_input(u)?;
        Ok(self.score_at(&self.problem.point(u)))
    }

    pub fn score_at(&self, p: &PointEval) -> Vector {
        let mut v = p.jacobian.tr_mul_vec(&p.weighted_residual).scale(self.t);
        v.axpy(-1.0, &self.problem.prior.precision_times_offset(&p.u));
        v
    }

    /// `L × L` matrix whose column `i` is `(∂ᵢ∇G)ᵀ Γ⁻¹ (y - G)`.
    pub fn curvature_w(&self, u: &Vector) -> Result<Matrix, ModelError> {
        self.problem.check_input(u)?;
        Ok(self.curvature_at(&self.problem.point(u)))
    }

    pub fn curvature_at(&self, p: &PointEval) -> Matrix {
        curvature(self.problem.model(), p)
    }

    /// `VVᵀ - t ∇Gᵀ Γ⁻¹ ∇G - Γ₀⁻¹ + t W`, which equals `∇²ρ / ρ`.
    pub fn density_hessian_ratio(&self, u: &Vector) -> Result<Matrix, ModelError> {
        self.problem.check_input(u)?;
        let p = self.problem.point(u);
        let v = self.score_at(&p);
        let gj = self.problem.gamma_factor.solve_matrix(&p.jacobian);
        let fisher = p.jacobian.transpose().mul(&gj);
        let prior_precision = self.problem.prior.factor.inverse();
        let mut h = v.outer(&v);
        h.axpy(-self.t, &fisher);
        h.axpy(-1.0, &prior_precision);
        h.axpy(self.t, &self.curvature_at(&p));
        Ok(h)
    }
}

/// Column `i` is `(∂ᵢ∇G)ᵀ Γ⁻¹ (y - G)`; independent of `t`.
pub(crate) fn curvature(model: &dyn ForwardModel, p: &PointEval) -> Matrix {
    let l = model.dim_in();
    let mut w = Matrix::zeros(l, l);
    for i in 0..l {
        let d = model.second_derivative(&p.u, i);
        w.set_column(i, &d.tr_mul_vec(&p.weighted_residual));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex3() -> InverseProblem {
        builtin_problem(ProblemId::Example3)
    }

    #[test]
    fn misfit_values() {
        let p = builtin_problem(ProblemId::LinearGaussian1d);
        // G = identity, y = 2
        assert_eq!(p.misfit(&Vector::scalar(2.0)).unwrap(), 0.0);
        assert_eq!(ex3().misfit(&Vector::scalar(3.0)).unwrap(), 8.0);
        assert_eq!(ex3().misfit(&Vector::scalar(5.0)).unwrap(), 0.0);
    }

    #[test]
    fn misfit_dimension_error() {
        assert!(matches!(
            ex3().misfit(&Vector::zeros(2)),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_density_values() {
        let lin = builtin_problem(ProblemId::LinearGaussian1d);
        let td0 = lin.tempered(0.0).unwrap();
        assert_eq!(
            td0.log_unnormalized_density(&Vector::scalar(0.0)).unwrap(),
            0.0
        );
        let td1 = lin.tempered(1.0).unwrap();
        assert_eq!(
            td1.log_unnormalized_density(&Vector::scalar(1.0)).unwrap(),
            -1.0
        );
        let p = ex3();
        let half = p.tempered(0.5).unwrap();
        assert_eq!(
            half.log_unnormalized_density(&Vector::scalar(5.0)).unwrap(),
            -12.5
        );
    }

    #[test]
    fn tempering_time_is_checked() {
        let p = ex3();
        assert!(matches!(p.tempered(1.5), Err(ModelError::InvalidTime(_))));
        assert!(matches!(p.tempered(-0.1), Err(ModelError::InvalidTime(_))));
    }

    #[test]
    fn score_values() {
        let lin = builtin_problem(ProblemId::LinearGaussian1d);
        let v = lin
            .tempered(0.0)
            .unwrap()
            .score_v(&Vector::scalar(2.0))
            .unwrap();
        assert_eq!(v[0], -2.0);
        let v = ex3()
            .tempered(1.0)
            .unwrap()
            .score_v(&Vector::scalar(4.0))
            .unwrap();
        assert_eq!(v[0], -2.0);
    }

    #[test]
    fn curvature_values() {
        let lin = builtin_problem(ProblemId::LinearGaussian2d);
        let w = lin
            .tempered(0.7)
            .unwrap()
            .curvature_w(&Vector::from([0.3, -1.0]))
            .unwrap();
        assert_eq!(w, Matrix::zeros(2, 2));
        let w = ex3()
            .tempered(1.0)
            .unwrap()
            .curvature_w(&Vector::scalar(4.0))
            .unwrap();
        assert_eq!(w[(0, 0)], -2.0);
    }

    #[test]
    fn time_derivative_is_minus_misfit() {
        // log ρ is affine in t, so its t-difference between two points is
        // exactly the misfit difference.
        let p = builtin_problem(ProblemId::Example1);
        let (a, b) = (Vector::scalar(0.3), Vector::scalar(-1.2));
        let (t0, t1) = (0.25, 0.75);
        let d = |u: &Vector| {
            let l1 = p.tempered(t1).unwrap().log_unnormalized_density(u).unwrap();
            let l0 = p.tempered(t0).unwrap().log_unnormalized_density(u).unwrap();
            (l1 - l0) / (t1 - t0)
        };
        let dphi = p.misfit(&a).unwrap() - p.misfit(&b).unwrap();
        assert!(((d(&a) - d(&b)) + dphi).abs() < 1e-12);
    }
}
