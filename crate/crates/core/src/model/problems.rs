//! The five nonlinear test problems and two linear-Gaussian references.
//!
//! All use a standard normal prior and zero data unless stated.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ForwardModel, GaussianPrior, InverseProblem, ModelError};
use crate::numkit::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemId {
    #[serde(rename = "example1")]
    Example1,
    #[serde(rename = "example2")]
    Example2,
    #[serde(rename = "example3")]
    Example3,
    #[serde(rename = "example4")]
    Example4,
    #[serde(rename = "example5")]
    Example5,
    #[serde(rename = "linear_gaussian_1d")]
    LinearGaussian1d,
    #[serde(rename = "linear_gaussian_2d")]
    LinearGaussian2d,
}

impl ProblemId {
    pub const ALL: [ProblemId; 7] = [
        ProblemId::Example1,
        ProblemId::Example2,
        ProblemId::Example3,
        ProblemId::Example4,
        ProblemId::Example5,
        ProblemId::LinearGaussian1d,
        ProblemId::LinearGaussian2d,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemId::Example1 => "example1",
            ProblemId::Example2 => "example2",
            ProblemId::Example3 => "example3",
            ProblemId::Example4 => "example4",
            ProblemId::Example5 => "example5",
            ProblemId::LinearGaussian1d => "linear_gaussian_1d",
            ProblemId::LinearGaussian2d => "linear_gaussian_2d",
        }
    }

    /// Time step at which the flows are stable for this problem. The
    /// quartic problem needs a much finer step than the others.
    pub fn default_dt(&self) -> f64 {
        match self {
            ProblemId::Example2 => 1e-5,
            ProblemId::Example4 => 1e-4,
            _ => 1e-3,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ProblemId::Example4 | ProblemId::Example5 | ProblemId::LinearGaussian2d => 2,
            _ => 1,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            ProblemId::LinearGaussian1d | ProblemId::LinearGaussian2d
        )
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| ModelError::UnknownProblem(s.to_string()))
    }
}

/// Builds a fully wired built-in problem.
pub fn builtin_problem(id: ProblemId) -> InverseProblem {
    let scalar = |model: Arc<dyn ForwardModel>| {
        InverseProblem::new(
            id.as_str(),
            model,
            GaussianPrior::standard(1),
            Vector::scalar(0.0),
            Matrix::identity(1),
        )
    };
    let built = match id {
        ProblemId::Example1 => scalar(Arc::new(Example1)),
        ProblemId::Example2 => scalar(Arc::new(Example2)),
        ProblemId::Example3 => scalar(Arc::new(Example3)),
        ProblemId::Example4 => InverseProblem::new(
            id.as_str(),
            Arc::new(Example4::default()),
            GaussianPrior::standard(2),
            Vector::scalar(0.0),
            Matrix::identity(1),
        ),
        ProblemId::Example5 => InverseProblem::new(
            id.as_str(),
            Arc::new(Example5),
            GaussianPrior::standard(2),
            Vector::zeros(2),
            Matrix::identity(2),
        ),
        ProblemId::LinearGaussian1d => InverseProblem::new(
            id.as_str(),
            Arc::new(AffineMap::new(Matrix::identity(1), Vector::zeros(1))),
            GaussianPrior::standard(1),
            Vector::scalar(2.0),
            Matrix::identity(1),
        ),
        ProblemId::LinearGaussian2d => InverseProblem::new(
            id.as_str(),
            Arc::new(AffineMap::new(Matrix::identity(2), Vector::zeros(2))),
            GaussianPrior::standard(2),
            Vector::from([2.0, 1.0]),
            Matrix::from_rows(&[[1.0, 0.3], [0.3, 0.5]]),
        ),
    };
    built.expect("built-in problems are well formed")
}

/// `G(u) = 4 cos(2(u - 3)) + sin(u - 3)`, multimodal posterior.
#[derive(Clone, Copy, Debug)]
pub struct Example1;

impl ForwardModel for Example1 {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval(&self, u: &Vector) -> Vector {
        let s = u[0] - 3.0;
        Vector::scalar(4.0 * (2.0 * s).cos() + s.sin())
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        let s = u[0] - 3.0;
        Matrix::scalar(-8.0 * (2.0 * s).sin() + s.cos())
    }
    fn second_derivative(&self, u: &Vector, _i: usize) -> Matrix {
        let s = u[0] - 3.0;
        Matrix::scalar(-16.0 * (2.0 * s).cos() - s.sin())
    }
}

/// `G(u) = (u - 3)⁴ - 1`
#[derive(Clone, Copy, Debug)]
pub struct Example2;

impl ForwardModel for Example2 {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval(&self, u: &Vector) -> Vector {
        Vector::scalar((u[0] - 3.0).powi(4) - 1.0)
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        Matrix::scalar(4.0 * (u[0] - 3.0).powi(3))
    }
    fn second_derivative(&self, u: &Vector, _i: usize) -> Matrix {
        Matrix::scalar(12.0 * (u[0] - 3.0).powi(2))
    }
}

/// `G(u) = (u - 5)²`
#[derive(Clone, Copy, Debug)]
pub struct Example3;

impl ForwardModel for Example3 {
    fn dim_in(&self) -> usize {
        1
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval(&self, u: &Vector) -> Vector {
        Vector::scalar((u[0] - 5.0).powi(2))
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        Matrix::scalar(2.0 * (u[0] - 5.0))
    }
    fn second_derivative(&self, _u: &Vector, _i: usize) -> Matrix {
        Matrix::scalar(2.0)
    }
}

/// Four-centre Gaussian-mixture likelihood written as a scalar forward map.
///
/// With `Φ_mix(u) = -log(¼ Σ exp(-|u - cᵢ|² / width))` the map is
/// `G(u) = √(2 Φ_mix(u))`, so that `½ |0 - G(u)|² = Φ_mix(u)` for `y = 0`,
/// `Γ = 1`. Every centre contributes at most `¼` to the sum, hence
/// `Φ_mix > 0` and the square root is smooth.
#[derive(Clone, Debug)]
pub struct Example4 {
    centers: [[f64; 2]; 4],
    width: f64,
}

impl Default for Example4 {
    fn default() -> Self {
        Example4 {
            centers: [[6.0, 3.0], [3.0, 6.0], [3.0, 0.0], [0.0, 3.0]],
            width: 0.2,
        }
    }
}

impl Example4 {
    /// `(Φ, ∇Φ, ∇²Φ)` of the mixture misfit.
    fn misfit_parts(&self, u: &Vector) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let (u1, u2) = (u[0], u[1]);
        let s: Vec<f64> = self
            .centers
            .iter()
            .map(|c| -((u1 - c[0]).powi(2) + (u2 - c[1]).powi(2)) / self.width)
            .collect();
        let smax = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = s.iter().map(|x| (x - smax).exp()).collect();
        let total: f64 = e.iter().sum();
        let phi = -(smax + total.ln()) + 4.0_f64.ln();
        let p: Vec<f64> = e.iter().map(|x| x / total).collect();
        // ∇sᵢ = -2 (u - cᵢ) / width; ∇²sᵢ = -2 I / width
        let k = 2.0 / self.width;
        let grads: Vec<[f64; 2]> = self
            .centers
            .iter()
            .map(|c| [-k * (u1 - c[0]), -k * (u2 - c[1])])
            .collect();
        let mut mg = [0.0; 2];
        for (pi, g) in p.iter().zip(&grads) {
            mg[0] += pi * g[0];
            mg[1] += pi * g[1];
        }
        // Φ = log 4 - logsumexp(s):  ∇Φ = -E[∇s],  ∇²Φ = -(E[∇²s] + Cov[∇s])
        let grad = [-mg[0], -mg[1]];
        let mut hess = [[k, 0.0], [0.0, k]];
        for (pi, g) in p.iter().zip(&grads) {
            for a in 0..2 {
                for b in 0..2 {
                    hess[a][b] -= pi * (g[a] - mg[a]) * (g[b] - mg[b]);
                }
            }
        }
        (phi, grad, hess)
    }
}

impl ForwardModel for Example4 {
    fn dim_in(&self) -> usize {
        2
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval(&self, u: &Vector) -> Vector {
        let (phi, _, _) = self.misfit_parts(u);
        Vector::scalar((2.0 * phi).sqrt())
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        let (phi, grad, _) = self.misfit_parts(u);
        let g = (2.0 * phi).sqrt();
        Matrix::from_rows(&[[grad[0] / g, grad[1] / g]])
    }
    fn second_derivative(&self, u: &Vector, i: usize) -> Matrix {
        // ∂ᵢ∂ⱼ √(2Φ) = ∂ᵢ∂ⱼΦ / G - ∂ᵢΦ ∂ⱼΦ / G³
        let (phi, grad, hess) = self.misfit_parts(u);
        let g = (2.0 * phi).sqrt();
        let g3 = g * g * g;
        Matrix::from_rows(&[[
            hess[i][0] / g - grad[i] * grad[0] / g3,
            hess[i][1] / g - grad[i] * grad[1] / g3,
        ]])
    }
}

/// `G(u) = ((u₁-3)² + (u₂-3)²/2, (u₁-3)²/2 + (u₂-3)²)`
#[derive(Clone, Copy, Debug)]
pub struct Example5;

impl ForwardModel for Example5 {
    fn dim_in(&self) -> usize {
        2
    }
    fn dim_out(&self) -> usize {
        2
    }
    fn eval(&self, u: &Vector) -> Vector {
        let (a, b) = (u[0] - 3.0, u[1] - 3.0);
        Vector::from([a * a + 0.5 * b * b, 0.5 * a * a + b * b])
    }
    fn jacobian(&self, u: &Vector) -> Matrix {
        let (a, b) = (u[0] - 3.0, u[1] - 3.0);
        Matrix::from_rows(&[[2.0 * a, b], [a, 2.0 * b]])
    }
    fn second_derivative(&self, _u: &Vector, i: usize) -> Matrix {
        if i == 0 {
            Matrix::from_rows(&[[2.0, 0.0], [1.0, 0.0]])
        } else {
            Matrix::from_rows(&[[0.0, 1.0], [0.0, 2.0]])
        }
    }
}

/// `G(u) = A u + b`
#[derive(Clone, Debug)]
pub struct AffineMap {
    a: Matrix,
    b: Vector,
}

impl AffineMap {
    pub fn new(a: Matrix, b: Vector) -> Self {
        assert_eq!(
            a.rows(),
            b.len(),
            "offset length must equal output dimension"
        );
        AffineMap { a, b }
    }
}

impl ForwardModel for AffineMap {
    fn dim_in(&self) -> usize {
        self.a.cols()
    }
    fn dim_out(&self) -> usize {
        self.a.rows()
    }
    fn eval(&self, u: &Vector) -> Vector {
        self.a.mul_vec(u).add(&self.b)
    }
    fn jacobian(&self, _u: &Vector) -> Matrix {
        self.a.clone()
    }
    fn second_derivative(&self, _u: &Vector, _i: usize) -> Matrix {
        Matrix::zeros(self.a.rows(), self.a.cols())
    }
    fn affine_parts(&self) -> Option<(Matrix, Vector)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example3_derivatives() {
        let m = Example3;
        let u = Vector::scalar(3.0);
        assert_eq!(m.eval(&u)[0], 4.0);
        assert_eq!(m.jacobian(&u)[(0, 0)], -4.0);
        assert_eq!(m.second_derivative(&u, 0)[(0, 0)], 2.0);
    }

    #[test]
    fn example2_stationary_point() {
        let u = Vector::scalar(3.0);
        assert_eq!(Example2.eval(&u)[0], -1.0);
        assert_eq!(Example2.jacobian(&u)[(0, 0)], 0.0);
    }

    #[test]
    fn example5_minimum() {
        assert_eq!(
            Example5.jacobian(&Vector::from([3.0, 3.0])),
            Matrix::zeros(2, 2)
        );
    }

    #[test]
    fn example4_reproduces_mixture_misfit() {
        let m = Example4::default();
        for u in [[0.0, 0.0], [6.0, 3.0], [1.5, 2.5], [-3.0, 4.0]] {
            let u = Vector::from(u);
            let direct: f64 = m
                .centers
                .iter()
                .map(|c| (-((u[0] - c[0]).powi(2) + (u[1] - c[1]).powi(2)) / 0.2).exp())
                .sum::<f64>()
                / 4.0;
            let g = m.eval(&u)[0];
            assert!((0.5 * g * g - (-direct.ln())).abs() < 1e-12);
            assert!(g > 0.0);
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in ProblemId::ALL {
            assert_eq!(id.as_str().parse::<ProblemId>().unwrap(), id);
            let p = builtin_problem(id);
            assert_eq!(p.dim_in(), id.dim());
            assert_eq!(p.name(), id.as_str());
        }
        assert!(matches!(
            "example9".parse::<ProblemId>(),
            Err(ModelError::UnknownProblem(_))
        ));
    }
}
