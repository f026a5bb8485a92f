use super::config::step_count;
use super::rates::{wenki_rates, wensrf_rates, FlowTerms};
use super::{Method, SamplerConfig, SamplerError};
use crate::ensemble::{normalize_log_weights, weight_variance, EnsembleStats, WeightedEnsemble};
use crate::model::{InverseProblem, PointEval, TemperedDensity};
use crate::numkit::{RandomSource, SpdFactor, Vector};

/// Normalized log-weight below which a particle's linear weight is exactly
/// zero in double precision. Such particles are retired: they keep their
/// position and get log-weight `-inf`, so they can neither influence the
/// weighted statistics nor run away under the flow.
pub const RETIRED_LOG_WEIGHT: f64 = -800.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Flow {
    SquareRoot,
    Kalman,
}

/// `n` i.i.d. prior draws with uniform weights at `t = 0`.
pub fn prior_ensemble(
    problem: &InverseProblem,
    n: usize,
    rng: &mut RandomSource,
) -> Result<WeightedEnsemble, SamplerError> {
    let prior = problem.prior();
    let particles = (0..n)
        .map(|_| rng.gaussian_with_factor(prior.mean(), prior.factor()))
        .collect();
    Ok(WeightedEnsemble::uniform(particles, 0.0)?)
}

/// Prior draws weighted by the likelihood `exp(-Φ)`.
pub fn importance_sampling(
    problem: &InverseProblem,
    n: usize,
    rng: &mut RandomSource,
) -> Result<WeightedEnsemble, SamplerError> {
    let prior = prior_ensemble(problem, n, rng)?;
    importance_weights_at(problem, prior.particles(), 1.0)
}

/// Weights `∝ exp(-t Φ)` on fixed particles, i.e. importance sampling of
/// the tempered density from the prior.
pub fn importance_weights_at(
    problem: &InverseProblem,
    particles: &[Vector],
    t: f64,
) -> Result<WeightedEnsemble, SamplerError> {
    let mut log_weights = Vec::with_capacity(particles.len());
    for u in particles {
        log_weights.push(-t * problem.misfit(u)?);
    }
    Ok(WeightedEnsemble::from_log_weights(
        particles.to_vec(),
        log_weights,
        t,
    )?)
}

/// Weighted ensemble Kalman filter: one Kalman update from prior draws with
/// gain built from the initial ensemble, a Gaussian draw around each
/// conditional mean, then importance weights posterior / proposal.
pub fn wenkf_weights(
    problem: &InverseProblem,
    n: usize,
    rng: &mut RandomSource,
) -> Result<WeightedEnsemble, SamplerError> {
    let initial = prior_ensemble(problem, n, rng)?;
    let model = problem.model();
    let outputs: Vec<Vector> = initial.particles().iter().map(|u| model.eval(u)).collect();
    let stats =
        EnsembleStats::from_samples(initial.particles(), &outputs, &vec![1.0 / n as f64; n]);
    let innovation_cov = stats.cov_pp.add(problem.gamma());
    let s_factor = SpdFactor::new(&innovation_cov)?;
    // gain = Cov_up S⁻¹, stored transposed as S⁻¹ Cov_pu
    let gain_t = s_factor.solve_matrix(&stats.cov_pu());
    let gain = gain_t.transpose();
    let means: Vec<Vector> = initial
        .particles()
        .iter()
        .zip(&outputs)
        .map(|(u0, g0)| u0.add(&gain.mul_vec(&problem.y().sub(g0))))
        .collect();
    let proposal_cov = gain.mul(problem.gamma()).mul(&gain_t);
    let proposal = SpdFactor::new(&proposal_cov)?;
    let particles: Vec<Vector> = means
        .iter()
        .map(|m| rng.gaussian_with_factor(m, &proposal))
        .collect();
    let log_weights = wenkf_reweight(problem, &particles, &means, &proposal)?;
    Ok(WeightedEnsemble::from_log_weights(
        particles,
        log_weights,
        1.0,
    )?)
}

/// Unnormalized log-weights `log ρ_pos(uⁿ) - log N(uⁿ; mⁿ, C)`.
pub fn wenkf_reweight(
    problem: &InverseProblem,
    particles: &[Vector],
    means: &[Vector],
    proposal: &SpdFactor,
) -> Result<Vec<f64>, SamplerError> {
    let target = problem.tempered(1.0)?;
    let log_norm =
        -0.5 * proposal.log_det() - 0.5 * proposal.dim() as f64 * (2.0 * std::f64::consts::PI).ln();
    particles
        .iter()
        .zip(means)
        .map(|(u, m)| {
            let log_q = log_norm - 0.5 * proposal.inv_quad(&u.sub(m));
            Ok(target.log_unnormalized_density(u)? - log_q)
        })
        .collect()
}

/// One forward-Euler step of the square-root filter flow with unweighted
/// statistics. Weights are left untouched.
pub fn ensrf_step(
    e: &WeightedEnsemble,
    problem: &InverseProblem,
    dt: f64,
) -> Result<WeightedEnsemble, SamplerError> {
    flow_step(
        e,
        problem,
        dt,
        next_time(e, dt),
        Flow::SquareRoot,
        false,
        false,
        None,
    )
}

/// One perturbed-data ensemble Kalman inversion step with unweighted
/// statistics.
pub fn enki_step(
    e: &WeightedEnsemble,
    problem: &InverseProblem,
    dt: f64,
    rng: &mut RandomSource,
) -> Result<WeightedEnsemble, SamplerError> {
    flow_step(
        e,
        problem,
        dt,
        next_time(e, dt),
        Flow::Kalman,
        false,
        false,
        Some(rng),
    )
}

/// Square-root filter move with weighted statistics plus the `P₁ + P₂`
/// log-weight update.
pub fn wensrf_step(
    e: &WeightedEnsemble,
    problem: &InverseProblem,
    dt: f64,
) -> Result<WeightedEnsemble, SamplerError> {
    flow_step(
        e,
        problem,
        dt,
        next_time(e, dt),
        Flow::SquareRoot,
        true,
        true,
        None,
    )
}

/// Kalman inversion move with weighted statistics plus the `R₁ + R₂ + R₃`
/// log-weight update.
pub fn wenki_step(
    e: &WeightedEnsemble,
    problem: &InverseProblem,
    dt: f64,
    rng: &mut RandomSource,
) -> Result<WeightedEnsemble, SamplerError> {
    flow_step(
        e,
        problem,
        dt,
        next_time(e, dt),
        Flow::Kalman,
        true,
        true,
        Some(rng),
    )
}

fn next_time(e: &WeightedEnsemble, dt: f64) -> f64 {
    let t = e.t() + dt;
    if (t - 1.0).abs() <= 1e-12 {
        1.0
    } else {
        t
    }
}

#[allow(clippy::too_many_arguments)]
fn flow_step(
    e: &WeightedEnsemble,
    problem: &InverseProblem,
    dt: f64,
    t_next: f64,
    flow: Flow,
    reweigh: bool,
    stats_weighted: bool,
    rng: Option<&mut RandomSource>,
) -> Result<WeightedEnsemble, SamplerError> {
    let n = e.len();
    let model = problem.model();
    let td = TemperedDensity::new(problem, e.t().clamp(0.0, 1.0))?;

    let alive: Vec<bool> = if reweigh {
        e.log_weights()
            .iter()
            .map(|l| *l > RETIRED_LOG_WEIGHT)
            .collect()
    } else {
        vec![true; n]
    };

    let points: Vec<PointEval>;
    let outputs: Vec<Vector> = if reweigh {
        points = e.particles().iter().map(|u| problem.point(u)).collect();
        points.iter().map(|p| p.g.clone()).collect()
    } else {
        points = Vec::new();
        e.particles().iter().map(|u| model.eval(u)).collect()
    };
    let weights = if stats_weighted {
        e.weights()
    } else {
        vec![1.0 / n as f64; n]
    };
    let stats = EnsembleStats::from_samples(e.particles(), &outputs, &weights);
    let terms = FlowTerms::new(problem, stats)?;

    let mut increments = Vec::with_capacity(if reweigh { n } else { 0 });
    if reweigh {
        for (i, p) in points.iter().enumerate() {
            if !alive[i] {
                increments.push(f64::NEG_INFINITY);
                continue;
            }
            let rate = match flow {
                Flow::SquareRoot => wensrf_rates(&td, p, &terms).total(),
                Flow::Kalman => wenki_rates(&td, p, &terms).total(),
            };
            if !rate.is_finite() {
                return Err(SamplerError::NonFinite {
                    what: "weight rate",
                    particle: i,
                });
            }
            increments.push(dt * rate);
        }
    }

    let mut moved = Vec::with_capacity(n);
    match flow {
        Flow::SquareRoot => {
            for ((u, g), live) in e.particles().iter().zip(&outputs).zip(&alive) {
                let mut next = u.clone();
                if *live {
                    next.axpy(-0.5 * dt, &terms.srf_direction(g));
                }
                moved.push(next);
            }
        }
        Flow::Kalman => {
            let rng = rng.expect("Kalman flow needs a random source");
            let innovation = terms.stats.cov_pp.add(&problem.gamma().scale(1.0 / dt));
            let s_factor = SpdFactor::new(&innovation)?;
            let noise_scale = 1.0 / dt.sqrt();
            let k = problem.dim_out();
            for ((u, g), live) in e.particles().iter().zip(&outputs).zip(&alive) {
                // drawn for retired particles too, so the stream layout
                // does not depend on the weights
                let z = rng.standard_normal_vector(k);
                let mut next = u.clone();
                if *live {
                    let xi = problem.gamma_factor().mul_lower(&z).scale(noise_scale);
                    let innov = problem.y().add(&xi).sub(g);
                    next.axpy(1.0, &terms.stats.cov_up.mul_vec(&s_factor.solve(&innov)));
                }
                moved.push(next);
            }
        }
    }
    for (i, u) in moved.iter().enumerate() {
        if !u.is_finite() {
            return Err(SamplerError::NonFinite {
                what: "particle position",
                particle: i,
            });
        }
    }

    let log_weights = if reweigh {
        let raw: Vec<f64> = e
            .log_weights()
            .iter()
            .zip(&increments)
            .map(|(l, d)| l + d)
            .collect();
        normalize_log_weights(&raw)?
    } else {
        e.log_weights().to_vec()
    };
    Ok(WeightedEnsemble::with_parts(moved, log_weights, t_next))
}

/// Every snapshot of a run plus its weight-variance series.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<WeightedEnsemble>,
    /// `(t, Var(Nw))` per snapshot.
    pub weight_variance: Vec<(f64, f64)>,
}

impl Trajectory {
    pub fn final_ensemble(&self) -> &WeightedEnsemble {
        self.snapshots
            .last()
            .expect("a run records at least one snapshot")
    }
}

/// Summary of a run whose snapshots were streamed to an observer.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub final_ensemble: WeightedEnsemble,
    pub weight_variance: Vec<(f64, f64)>,
}

/// Runs a sampler from `N` prior draws to `t = 1`, recording every snapshot.
pub fn run(problem: &InverseProblem, config: &SamplerConfig) -> Result<Trajectory, SamplerError> {
    let mut snapshots = Vec::new();
    let out = run_with(problem, config, |_, e| snapshots.push(e.clone()))?;
    Ok(Trajectory {
        snapshots,
        weight_variance: out.weight_variance,
    })
}

/// Like [`run`] but hands each snapshot (with its step index) to
/// `observer` instead of storing it. Single-shot methods produce one
/// snapshot at `t = 1`.
pub fn run_with<F>(
    problem: &InverseProblem,
    config: &SamplerConfig,
    mut observer: F,
) -> Result<RunOutput, SamplerError>
where
    F: FnMut(usize, &WeightedEnsemble),
{
    let steps = config.steps()?;
    let mut rng = RandomSource::new(config.seed);
    let n = config.n_particles;
    let at_step = |step: usize, t: f64| {
        move |source: SamplerError| SamplerError::AtStep {
            step,
            t,
            source: Box::new(source),
        }
    };

    if config.method.is_single_shot() {
        let e = match config.method {
            Method::Is => importance_sampling(problem, n, &mut rng),
            _ => wenkf_weights(problem, n, &mut rng),
        }
        .map_err(at_step(1, 0.0))?;
        observer(1, &e);
        let var = vec![(e.t(), weight_variance(&e))];
        return Ok(RunOutput {
            final_ensemble: e,
            weight_variance: var,
        });
    }

    step_count(config.dt)?;
    let (flow, reweigh) = match config.method {
        Method::Ensrf => (Flow::SquareRoot, false),
        Method::Enki => (Flow::Kalman, false),
        Method::Wensrf => (Flow::SquareRoot, true),
        Method::Wenki => (Flow::Kalman, true),
        Method::Is | Method::Wenkf => unreachable!("handled above"),
    };
    let mut e = prior_ensemble(problem, n, &mut rng)?;
    let mut series = Vec::with_capacity(steps + 1);
    series.push((0.0, weight_variance(&e)));
    observer(0, &e);
    for m in 0..steps {
        let t_next = (m + 1) as f64 / steps as f64;
        let noise = match flow {
            Flow::Kalman => Some(&mut rng),
            Flow::SquareRoot => None,
        };
        let mut next = flow_step(
            &e,
            problem,
            config.dt,
            t_next,
            flow,
            reweigh,
            config.stats_weighted,
            noise,
        )
        .map_err(at_step(m + 1, e.t()))?;
        next.set_t(t_next);
        e = next;
        series.push((t_next, weight_variance(&e)));
        observer(m + 1, &e);
    }
    Ok(RunOutput {
        final_ensemble: e,
        weight_variance: series,
    })
}
