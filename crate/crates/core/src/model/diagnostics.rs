//! Finite-difference cross-checks of the analytic score and of the density
//! Hessian identity. Errors are relative with a floor of one:
//! `‖analytic - fd‖ / max(‖fd‖, 1)`.

use super::{ModelError, TemperedDensity};
use crate::numkit::{Matrix, Vector};

fn step_for(td: &TemperedDensity<'_>, u: &Vector, base: f64) -> Result<f64, ModelError> {
    let v = td.score_v(u)?.norm();
    Ok(base / v.max(1.0))
}

fn shifted(u: &Vector, i: usize, h: f64) -> Vector {
    let mut v = u.clone();
    v[i] += h;
    v
}

fn fd_gradient(td: &TemperedDensity<'_>, u: &Vector, h: f64) -> Result<Vector, ModelError> {
    let mut g = Vector::zeros(u.len());
    for i in 0..u.len() {
        let p = td.log_unnormalized_density(&shifted(u, i, h))?;
        let m = td.log_unnormalized_density(&shifted(u, i, -h))?;
        g[i] = (p - m) / (2.0 * h);
    }
    Ok(g)
}

/// `∇²ρ / ρ` from central differences of `ρ(·) / ρ(u)`.
fn fd_hessian_ratio(td: &TemperedDensity<'_>, u: &Vector, h: f64) -> Result<Matrix, ModelError> {
    let l0 = td.log_unnormalized_density(u)?;
    let r = |v: &Vector| -> Result<f64, ModelError> {
        Ok((td.log_unnormalized_density(v)? - l0).exp())
    };
    let n = u.len();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let diag = (r(&shifted(u, i, h))? - 2.0 + r(&shifted(u, i, -h))?) / (h * h);
        out[(i, i)] = diag;
        for j in 0..i {
            let pp = r(&shifted(&shifted(u, i, h), j, h))?;
            let pm = r(&shifted(&shifted(u, i, h), j, -h))?;
            let mp = r(&shifted(&shifted(u, i, -h), j, h))?;
            let mm = r(&shifted(&shifted(u, i, -h), j, -h))?;
            let v = (pp - pm - mp + mm) / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Richardson-extrapolated estimates over a geometric sweep of steps; the
/// estimate closest to its neighbour is kept.
fn sweep<T, F, D>(base: f64, mut estimate: F, dist: D) -> Result<T, ModelError>
where
    F: FnMut(f64) -> Result<T, ModelError>,
    D: Fn(&T, &T) -> f64,
{
    let mut prev: Option<T> = None;
    let mut best: Option<(f64, T)> = None;
    for k in 0..7 {
        let h = base * 0.4f64.powi(k);
        let cur = estimate(h)?;
        if let Some(p) = prev.take() {
            let d = dist(&p, &cur);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
        prev = Some(cur);
    }
    Ok(best.expect("sweep has at least two steps").1)
}

/// Relative error of `score_v` against a Richardson-extrapolated central
/// difference of the log density.
pub fn score_error(td: &TemperedDensity<'_>, u: &Vector) -> Result<f64, ModelError> {
    let base = step_for(td, u, 1e-1)?;
    let fd = sweep(
        base,
        |h| {
            let coarse = fd_gradient(td, u, h)?;
            let fine = fd_gradient(td, u, 0.5 * h)?;
            Ok(fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0)))
        },
        |a, b| a.sub(b).norm(),
    )?;
    let analytic = td.score_v(u)?;
    Ok(analytic.sub(&fd).norm() / fd.norm().max(1.0))
}

/// Relative (Frobenius) error of `VVᵀ - t∇GᵀΓ⁻¹∇G - Γ₀⁻¹ + tW` against a
/// Richardson-extrapolated finite-difference `∇²ρ / ρ`.
pub fn hessian_identity_error(td: &TemperedDensity<'_>, u: &Vector) -> Result<f64, ModelError> {
    let base = step_for(td, u, 1e-1)?;
    let fd = sweep(
        base,
        |h| {
            let coarse = fd_hessian_ratio(td, u, h)?;
            let fine = fd_hessian_ratio(td, u, 0.5 * h)?;
            Ok(fine.scale(4.0 / 3.0).sub(&coarse.scale(1.0 / 3.0)))
        },
        |a, b| a.sub(b).frobenius_norm(),
    )?;
    let analytic = td.density_hessian_ratio(u)?;
    Ok(analytic.sub(&fd).frobenius_norm() / fd.frobenius_norm().max(1.0))
}
