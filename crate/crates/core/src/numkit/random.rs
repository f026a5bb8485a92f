use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Matrix, NumError, SpdFactor, Vector};

/// Seeded random stream. Normal variates come from the ziggurat sampler in
/// `rand_distr` applied to a ChaCha8 stream, so a given seed reproduces the
/// same variates on every run of the same build.
///
/// Not `Sync` by intent of use: parallel work should create one source per
/// task with its own seed.
#[derive(Clone, Debug)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn standard_normal_vector(&mut self, n: usize) -> Vector {
        Vector::new((0..n).map(|_| self.standard_normal()).collect())
    }

    /// `mean + L z` for a pre-factored covariance `L Lᵀ`.
    pub fn gaussian_with_factor(&mut self, mean: &Vector, factor: &SpdFactor) -> Vector {
        let z = self.standard_normal_vector(mean.len());
        mean.add(&factor.mul_lower(&z))
    }
}

/// Draws from `N(mean, cov)`. An all-zero `cov` returns `mean` exactly
/// (the variates are still consumed so the stream position does not depend
/// on the covariance).
pub fn gaussian_vector(
    rng: &mut RandomSource,
    mean: &Vector,
    cov: &Matrix,
) -> Result<Vector, NumError> {
    if cov.shape() != (mean.len(), mean.len()) {
        return Err(NumError::DimensionMismatch {
            expected: mean.len(),
            actual: cov.rows(),
        });
    }
    if cov.as_slice().iter().all(|x| *x == 0.0) {
        let _ = rng.standard_normal_vector(mean.len());
        return Ok(mean.clone());
    }
    let factor = SpdFactor::new(cov)?;
    Ok(rng.gaussian_with_factor(mean, &factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_returns_mean() {
        let mut rng = RandomSource::new(3);
        let mean = Vector::from([1.5, -2.0]);
        let x = gaussian_vector(&mut rng, &mean, &Matrix::zeros(2, 2)).unwrap();
        assert_eq!(x, mean);
    }

    #[test]
    fn same_seed_same_stream() {
        let cov = Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]);
        let mean = Vector::from([0.0, 1.0]);
        let mut a = RandomSource::new(42);
        let mut b = RandomSource::new(42);
        for _ in 0..100 {
            let x = gaussian_vector(&mut a, &mean, &cov).unwrap();
            let y = gaussian_vector(&mut b, &mean, &cov).unwrap();
            assert_eq!(x.as_slice(), y.as_slice());
        }
    }

    #[test]
    fn invalid_covariance() {
        let mut rng = RandomSource::new(0);
        let cov = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
        assert!(matches!(
            gaussian_vector(&mut rng, &Vector::zeros(2), &cov),
            Err(NumError::NotSpd { .. })
        ));
    }

    #[test]
    fn scalar_moments() {
        let n = 100_000;
        let mut rng = RandomSource::new(7);
        let cov = Matrix::identity(1);
        let mean = Vector::zeros(1);
        let draws: Vec<f64> = (0..n)
            .map(|_| gaussian_vector(&mut rng, &mean, &cov).unwrap()[0])
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(m.abs() < 4.0 / (n as f64).sqrt(), "mean {m}");
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }

    #[test]
    fn two_by_two_covariance() {
        // Standard error of a sample covariance entry for Gaussian data is
        // sqrt((s_ii s_jj + s_ij²) / n).
        let n = 100_000;
        let cov = Matrix::from_rows(&[[2.0, -0.8], [-0.8, 1.0]]);
        let mean = Vector::from([1.0, -1.0]);
        let mut rng = RandomSource::new(11);
        let draws: Vec<Vector> = (0..n)
            .map(|_| gaussian_vector(&mut rng, &mean, &cov).unwrap())
            .collect();
        let mut m = Vector::zeros(2);
        for d in &draws {
            m.axpy(1.0 / n as f64, d);
        }
        let mut c = Matrix::zeros(2, 2);
        for d in &draws {
            let r = d.sub(&m);
            c.axpy(1.0 / n as f64, &r.outer(&r));
        }
        for i in 0..2 {
            for j in 0..2 {
                let se = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / n as f64).sqrt();
                assert!(
                    (c[(i, j)] - cov[(i, j)]).abs() < 5.0 * se,
                    "entry ({i},{j}): {} vs {}",
                    c[(i, j)],
                    cov[(i, j)]
                );
            }
        }
    }
}
