use std::fmt;

use super::ForwardModel;
use crate::numkit::{Matrix, Vector};

/// Wraps an evaluation-only map and supplies derivatives by central
/// differences. First derivatives use `h = √ε (1 + |uᵢ|)`, second
/// derivatives `h = ε^{1/3} (1 + |uᵢ|)`.
pub struct FiniteDifferenceModel<F> {
    dim_in: usize,
    dim_out: usize,
    f: F,
}

impl<F> FiniteDifferenceModel<F>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
{
    pub fn new(dim_in: usize, dim_out: usize, f: F) -> Self {
        FiniteDifferenceModel { dim_in, dim_out, f }
    }

    fn shifted(u: &Vector, steps: &[(usize, f64)]) -> Vector {
        let mut v = u.clone();
        for &(i, h) in steps {
            v[i] += h;
        }
        v
    }
}

impl<F> fmt::Debug for FiniteDifferenceModel<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteDifferenceModel")
            .field("dim_in", &self.dim_in)
            .field("dim_out", &self.dim_out)
            .finish()
    }
}

impl<F> ForwardModel for FiniteDifferenceModel<F>
where
    F: Fn(&Vector) -> Vector + Send + Sync,
{
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn eval(&self, u: &Vector) -> Vector {
        (self.f)(u)
    }

    fn jacobian(&self, u: &Vector) -> Matrix {
        let mut jac = Matrix::zeros(self.dim_out, self.dim_in);
        for j in 0..self.dim_in {
            let h = f64::EPSILON.sqrt() * (1.0 + u[j].abs());
            let fp = (self.f)(&Self::shifted(u, &[(j, h)]));
            let fm = (self.f)(&Self::shifted(u, &[(j, -h)]));
            jac.set_column(j, &fp.sub(&fm).scale(0.5 / h));
        }
        jac
    }

    fn second_derivative(&self, u: &Vector, i: usize) -> Matrix {
        let eps3 = f64::EPSILON.cbrt();
        let hi = eps3 * (1.0 + u[i].abs());
        let mut out = Matrix::zeros(self.dim_out, self.dim_in);
        for j in 0..self.dim_in {
            let col = if i == j {
                let fp = (self.f)(&Self::shifted(u, &[(i, hi)]));
                let f0 = (self.f)(u);
                let fm = (self.f)(&Self::shifted(u, &[(i, -hi)]));
                fp.sub(&f0.scale(2.0)).add(&fm).scale(1.0 / (hi * hi))
            } else {
                let hj = eps3 * (1.0 + u[j].abs());
                let fpp = (self.f)(&Self::shifted(u, &[(i, hi), (j, hj)]));
                let fpm = (self.f)(&Self::shifted(u, &[(i, hi), (j, -hj)]));
                let fmp = (self.f)(&Self::shifted(u, &[(i, -hi), (j, hj)]));
                let fmm = (self.f)(&Self::shifted(u, &[(i, -hi), (j, -hj)]));
                fpp.sub(&fpm).sub(&fmp).add(&fmm).scale(0.25 / (hi * hj))
            };
            out.set_column(j, &col);
        }
        out
    }
}
