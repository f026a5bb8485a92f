//! Log-weight rates of the weighted flows.
//!
//! Both rates are `∂ₜ log ρ + (∇·(bρ) - ½ Tr(D ∇²ρ)) / ρ` for the respective
//! drift `b` and diffusion `D`, expanded in terms of the score `V`, the
//! curvature `W` and the ensemble statistics. Norms `|·|_Γ` are squared
//! weighted norms `vᵀ Γ⁻¹ v`.

use crate::ensemble::EnsembleStats;
use crate::model::{InverseProblem, PointEval, TemperedDensity};
use crate::numkit::{Matrix, NumError, Vector};

/// Per-step quantities that depend only on the ensemble statistics.
#[derive(Clone, Debug)]
pub struct FlowTerms {
    pub stats: EnsembleStats,
    /// `Cov_pu`
    pub cov_pu: Matrix,
    /// `Γ⁻¹ Cov_pu` (`K × L`)
    pub gamma_inv_cov_pu: Matrix,
    /// `D = Cov_up Γ⁻¹ Cov_pu` (`L × L`)
    pub diffusion: Matrix,
    /// `Tr(Cov_pp Γ⁻¹)`
    pub trace_pp: f64,
    /// `|y - Ḡ|²_Γ`
    pub mean_misfit_sq: f64,
    /// `Tr(D Γ₀⁻¹)`
    pub trace_diffusion_prior: f64,
    /// `Ḡ - 2y`
    pub srf_shift: Vector,
}

impl FlowTerms {
    pub fn new(problem: &InverseProblem, stats: EnsembleStats) -> Result<Self, NumError> {
        let gf = problem.gamma_factor();
        let cov_pu = stats.cov_pu();
        let gamma_inv_cov_pu = gf.solve_matrix(&cov_pu);
        let diffusion = stats.cov_up.mul(&gamma_inv_cov_pu);
        let trace_pp = gf.solve_matrix(&stats.cov_pp).trace();
        let mean_misfit_sq = problem.gamma_norm_sq(&problem.y().sub(&stats.mean_g));
        let prior_inv_d = problem.prior().factor().solve_matrix(&diffusion);
        let trace_diffusion_prior = prior_inv_d.trace();
        let srf_shift = stats.mean_g.sub(&problem.y().scale(2.0));
        Ok(FlowTerms {
            stats,
            cov_pu,
            gamma_inv_cov_pu,
            diffusion,
            trace_pp,
            mean_misfit_sq,
            trace_diffusion_prior,
            srf_shift,
        })
    }

    /// `Tr(Cov_up Γ⁻¹ ∇G)`
    fn trace_gain_jacobian(&self, jacobian: &Matrix) -> f64 {
        jacobian
            .as_slice()
            .iter()
            .zip(self.gamma_inv_cov_pu.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `Cov_up Γ⁻¹ (G(u) + Ḡ - 2y)`, the square-root filter direction.
    pub fn srf_direction(&self, g: &Vector) -> Vector {
        self.gamma_inv_cov_pu.tr_mul_vec(&g.add(&self.srf_shift))
    }
}

fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..a.cols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareRootRates {
    pub p1: f64,
    pub p2: f64,
}

impl SquareRootRates {
    pub fn total(&self) -> f64 {
        self.p1 + self.p2
    }
}

/// `P₁ = ½(|y - Ḡ|²_Γ - |y - G|²_Γ) + ½ Tr(Cov_pp Γ⁻¹)`
/// `P₂ = -½ Tr(Cov_up Γ⁻¹ ∇G) - ½ Vᵀ Cov_up Γ⁻¹ (G + Ḡ - 2y)`
pub fn wensrf_rates(td: &TemperedDensity<'_>, p: &PointEval, terms: &FlowTerms) -> SquareRootRates {
    let misfit_sq = p.residual.dot(&p.weighted_residual);
    let p1 = 0.5 * (terms.mean_misfit_sq - misfit_sq) + 0.5 * terms.trace_pp;
    let v = td.score_at(p);
    let direction = terms.srf_direction(&p.g);
    let p2 = -0.5 * terms.trace_gain_jacobian(&p.jacobian) - 0.5 * v.dot(&direction);
    SquareRootRates { p1, p2 }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KalmanRates {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl KalmanRates {
    pub fn total(&self) -> f64 {
        self.r1 + self.r2 + self.r3
    }
}

/// `R₁ = ½ Tr(Cov_pp Γ⁻¹) - Tr(∇Gᵀ Γ⁻¹ Cov_pu) + ½ Tr(D [t ∇Gᵀ Γ⁻¹ ∇G + Γ₀⁻¹])`
/// `R₂ = ½ |y - Ḡ|²_Γ - ½ |y - G - Cov_pu V|²_Γ`
/// `R₃ = -(t/2) Tr(D W)`
pub fn wenki_rates(td: &TemperedDensity<'_>, p: &PointEval, terms: &FlowTerms) -> KalmanRates {
    let problem = td.problem();
    let t = td.t();
    let gf = problem.gamma_factor();

    let gamma_inv_jac = gf.solve_matrix(&p.jacobian);
    let fisher = p.jacobian.transpose().mul(&gamma_inv_jac);
    let r1 = 0.5 * terms.trace_pp - terms.trace_gain_jacobian(&p.jacobian)
        + 0.5 * (t * trace_product(&terms.diffusion, &fisher) + terms.trace_diffusion_prior);

    let v = td.score_at(p);
    let shifted = p.residual.sub(&terms.cov_pu.mul_vec(&v));
    let r2 = 0.5 * terms.mean_misfit_sq - 0.5 * gf.inv_quad(&shifted);

    let r3 = if t == 0.0 {
        0.0
    } else {
        -0.5 * t * trace_product(&terms.diffusion, &td.curvature_at(p))
    };
    KalmanRates { r1, r2, r3 }
}
