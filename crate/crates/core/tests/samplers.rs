use std::sync::Arc;

use wenk::ensemble::{stats_with_outputs, weight_variance, weighted_moment};
use wenk::model::AffineMap;
use wenk::numkit::SpdFactor;
use wenk::oracle::GaussianFlow;
use wenk::samplers::{
    enki_step, ensrf_step, importance_sampling, importance_weights_at, run, wenkf_reweight,
    wenkf_weights, wenki_rates, wenki_step, wensrf_rates, wensrf_step, FlowTerms, Method,
    SamplerConfig, SamplerError,
};
use wenk::{
    builtin_problem, GaussianPrior, InverseProblem, Matrix, ProblemId, RandomSource, Vector,
    WeightedEnsemble,
};

fn identity_problem(y: f64) -> InverseProblem {
    InverseProblem::new(
        "identity",
        Arc::new(AffineMap::new(Matrix::identity(1), Vector::zeros(1))),
        GaussianPrior::standard(1),
        Vector::scalar(y),
        Matrix::identity(1),
    )
    .unwrap()
}

fn scalar_ensemble(values: &[f64], t: f64) -> WeightedEnsemble {
    WeightedEnsemble::uniform(values.iter().map(|v| Vector::scalar(*v)).collect(), t).unwrap()
}

fn mean_var(e: &WeightedEnsemble) -> (f64, f64) {
    let n = e.len() as f64;
    let m = e.particles().iter().map(|u| u[0]).sum::<f64>() / n;
    let v = e
        .particles()
        .iter()
        .map(|u| (u[0] - m).powi(2))
        .sum::<f64>()
        / n;
    (m, v)
}

#[test]
fn ensrf_hand_step() {
    let p = identity_problem(1.0);
    let e = ensrf_step(&scalar_ensemble(&[0.0, 2.0], 0.0), &p, 0.1).unwrap();
    assert!((e.particles()[0][0] - 0.05).abs() < 1e-15);
    assert!((e.particles()[1][0] - 1.95).abs() < 1e-15);
    assert!((e.t() - 0.1).abs() < 1e-15);
    assert!(e.is_uniform());
}

#[test]
fn degenerate_ensembles_are_fixed_points() {
    let mut rng = RandomSource::new(3);
    for id in ProblemId::ALL {
        let p = builtin_problem(id);
        let u = Vector::from(vec![0.7; p.dim_in()]);
        let e = WeightedEnsemble::uniform(vec![u.clone(); 5], 0.3).unwrap();
        let outs = [
            ensrf_step(&e, &p, 1e-3).unwrap(),
            enki_step(&e, &p, 1e-3, &mut rng).unwrap(),
            wensrf_step(&e, &p, 1e-3).unwrap(),
            wenki_step(&e, &p, 1e-3, &mut rng).unwrap(),
        ];
        for out in outs {
            for v in out.particles() {
                assert_eq!(v, &u, "{id}");
            }
            assert_eq!(out.log_weights(), e.log_weights(), "{id}");
        }
    }
}

#[test]
fn enki_gain_small_dt() {
    let p = identity_problem(1.0);
    let dt = 1e-4;
    let e = scalar_ensemble(&[0.0, 2.0], 0.0);
    let mut rng = RandomSource::new(11);
    let out = enki_step(&e, &p, dt, &mut rng).unwrap();
    let mut replay = RandomSource::new(11);
    for (i, u) in e.particles().iter().enumerate() {
        let xi = replay.standard_normal() / dt.sqrt();
        // Cov_up = 1, Γ = 1
        let first_order = dt * (1.0 + xi - u[0]);
        let moved = out.particles()[i][0] - u[0];
        assert!((moved - first_order).abs() <= 2.0 * dt * first_order.abs() + 1e-12);
    }
}

#[test]
fn linear_rates_vanish_with_exact_statistics() {
    let mut rng = RandomSource::new(5);
    for id in [ProblemId::LinearGaussian1d, ProblemId::LinearGaussian2d] {
        let p = builtin_problem(id);
        let flow = GaussianFlow::new(&p).unwrap();
        for j in 0..10 {
            let t = j as f64 / 9.0;
            let terms = FlowTerms::new(&p, flow.stats(t).unwrap()).unwrap();
            let td = p.tempered(t).unwrap();
            for _ in 0..100 {
                let u = rng.standard_normal_vector(p.dim_in()).scale(3.0);
                let pt = p.point(&u);
                let r = wenki_rates(&td, &pt, &terms).total();
                let s = wensrf_rates(&td, &pt, &terms).total();
                assert!(r.abs() <= 1e-8, "{id} t={t} wenki {r}");
                assert!(s.abs() <= 1e-8, "{id} t={t} wensrf {s}");
            }
        }
    }
}

#[test]
fn importance_weights() {
    let p = builtin_problem(ProblemId::Example3);
    let e = importance_weights_at(&p, &[Vector::scalar(5.0), Vector::scalar(3.0)], 1.0).unwrap();
    let w = e.weights();
    assert!((w[0] / w[1] / 8f64.exp() - 1.0).abs() < 1e-12);

    let constant = InverseProblem::new(
        "constant",
        Arc::new(AffineMap::new(Matrix::zeros(1, 1), Vector::scalar(2.0))),
        GaussianPrior::standard(1),
        Vector::scalar(0.0),
        Matrix::identity(1),
    )
    .unwrap();
    let mut rng = RandomSource::new(1);
    let e = importance_sampling(&constant, 50, &mut rng).unwrap();
    assert!(e.is_uniform());
    assert_eq!(e.t(), 1.0);
}

#[test]
fn importance_sampling_linear_posterior() {
    let p = builtin_problem(ProblemId::LinearGaussian1d);
    let mut rng = RandomSource::new(2024);
    let e = importance_sampling(&p, 100_000, &mut rng).unwrap();
    // E|u| for N(1, 1/2) by quadrature
    let oracle = wenk::oracle::GridOracle::with_default_grid(&p, 1.0).unwrap();
    let target = oracle.grid_moment(1);
    let w = e.weights();
    let est = weighted_moment(&e, 1);
    let var: f64 = w
        .iter()
        .zip(e.particles())
        .map(|(wi, u)| wi * wi * (u.norm() - est).powi(2))
        .sum();
    assert!(
        (est - target).abs() <= 3.0 * var.sqrt(),
        "{est} vs {target}"
    );
}

#[test]
fn kalman_flows_recover_linear_posterior() {
    let p = builtin_problem(ProblemId::LinearGaussian1d);
    for method in [Method::Enki, Method::Ensrf] {
        let traj = run(&p, &SamplerConfig::new(method, 10_000, 1e-3, 9)).unwrap();
        let (m, v) = mean_var(traj.final_ensemble());
        assert!((m - 1.0).abs() <= 0.05, "{method} mean {m}");
        assert!((v - 0.5).abs() <= 0.05, "{method} var {v}");
    }
}

#[test]
fn wenkf_single_particle() {
    let p = builtin_problem(ProblemId::LinearGaussian1d);
    let mut rng = RandomSource::new(0);
    // one particle has zero spread, so the proposal is singular
    assert!(matches!(
        wenkf_weights(&p, 1, &mut rng),
        Err(SamplerError::Numeric(_))
    ));
    let e =
        WeightedEnsemble::from_log_weights(vec![Vector::scalar(0.3)], vec![-42.0], 1.0).unwrap();
    assert_eq!(e.weights(), vec![1.0]);
}

#[test]
fn wenkf_exact_proposal_has_no_weight_variance() {
    let p = builtin_problem(ProblemId::LinearGaussian1d);
    let proposal = SpdFactor::new(&Matrix::scalar(0.5)).unwrap();
    let mut rng = RandomSource::new(4);
    let means = vec![Vector::scalar(1.0); 64];
    let particles: Vec<Vector> = means
        .iter()
        .map(|m| rng.gaussian_with_factor(m, &proposal))
        .collect();
    let lw = wenkf_reweight(&p, &particles, &means, &proposal).unwrap();
    let e = WeightedEnsemble::from_log_weights(particles, lw, 1.0).unwrap();
    assert!(weight_variance(&e) < 1e-20);
}

#[test]
fn wenkf_proposal_marginal_is_linear_posterior() {
    // K = 1/2 on average, so the conditional means are N(1, 1/4) and the
    // proposal adds variance 1/4.
    let p = builtin_problem(ProblemId::LinearGaussian1d);
    let mut rng = RandomSource::new(8);
    let e = wenkf_weights(&p, 20_000, &mut rng).unwrap();
    let (m, v) = mean_var(&e);
    assert!((m - 1.0).abs() < 0.03, "{m}");
    assert!((v - 0.5).abs() < 0.03, "{v}");
    assert!(weight_variance(&e) > 0.0);
}

#[test]
fn run_snapshot_times() {
    let p = builtin_problem(ProblemId::Example3);
    let traj = run(&p, &SamplerConfig::new(Method::Ensrf, 10, 0.25, 0)).unwrap();
    let times: Vec<f64> = traj.snapshots.iter().map(|e| e.t()).collect();
    assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(traj.weight_variance.len(), 5);
    for m in [Method::Is, Method::Wenkf] {
        let traj = run(&p, &SamplerConfig::new(m, 10, 0.25, 0)).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.final_ensemble().t(), 1.0);
    }
}

#[test]
fn run_rejects_bad_dt() {
    let p = builtin_problem(ProblemId::Example3);
    let err = run(&p, &SamplerConfig::new(Method::Wenki, 10, 0.3, 0)).unwrap_err();
    assert!(err.is_config());
}

#[test]
fn run_is_deterministic() {
    let p = builtin_problem(ProblemId::Example5);
    for m in Method::ALL {
        let c = SamplerConfig::new(m, 50, 0.01, 77);
        let a = run(&p, &c).unwrap();
        let b = run(&p, &c).unwrap();
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            for (u, v) in x.particles().iter().zip(y.particles()) {
                let ub: Vec<u64> = u.iter().map(|z| z.to_bits()).collect();
                let vb: Vec<u64> = v.iter().map(|z| z.to_bits()).collect();
                assert_eq!(ub, vb);
            }
            let lx: Vec<u64> = x.log_weights().iter().map(|z| z.to_bits()).collect();
            let ly: Vec<u64> = y.log_weights().iter().map(|z| z.to_bits()).collect();
            assert_eq!(lx, ly);
        }
    }
}

#[test]
fn weights_stay_finite_on_builtin_problems() {
    for id in ProblemId::ALL {
        let p = builtin_problem(id);
        for m in [Method::Wenki, Method::Wensrf] {
            // a shortened horizon keeps the test quick for the small-step problems
            let dt = id.default_dt().max(1e-3);
            let c = SamplerConfig::new(m, 40, dt, 3);
            let traj = run(&p, &c);
            if id == ProblemId::Example2 {
                continue;
            }
            let traj = traj.unwrap();
            let e = traj.final_ensemble();
            assert!(e
                .log_weights()
                .iter()
                .all(|l| l.is_finite() || *l == f64::NEG_INFINITY));
            assert!(e.particles().iter().all(|u| u.is_finite()));
        }
    }
}

#[test]
fn importance_weight_variance_exceeds_wenki() {
    let p = builtin_problem(ProblemId::Example3);
    let is = run(&p, &SamplerConfig::new(Method::Is, 1000, 1e-3, 1)).unwrap();
    let wenki = run(&p, &SamplerConfig::new(Method::Wenki, 1000, 1e-3, 1)).unwrap();
    assert!(weight_variance(is.final_ensemble()) > weight_variance(wenki.final_ensemble()));
}

#[test]
fn weighted_stats_of_ensemble() {
    let p = identity_problem(0.0);
    let e = scalar_ensemble(&[1.0, 3.0], 0.0);
    let outs: Vec<Vector> = e.particles().to_vec();
    let s = stats_with_outputs(&e, &outs, true);
    assert_eq!(s.mean_u[0], 2.0);
    assert_eq!(s.cov_up[(0, 0)], 1.0);
    let _ = p;
}

#[test]
fn zero_weight_particles_are_retired() {
    let p = builtin_problem(ProblemId::Example5);
    let particles = vec![
        Vector::from([2.5, 3.1]),
        Vector::from([3.2, 2.7]),
        Vector::from([40.0, 35.0]),
    ];
    let e = WeightedEnsemble::from_log_weights(particles, vec![0.0, 0.1, -2000.0], 0.5).unwrap();
    let mut rng = RandomSource::new(0);
    for out in [
        wenki_step(&e, &p, 1e-3, &mut rng).unwrap(),
        wensrf_step(&e, &p, 1e-3).unwrap(),
    ] {
        assert_eq!(out.particles()[2], e.particles()[2]);
        assert_eq!(out.log_weights()[2], f64::NEG_INFINITY);
        assert_ne!(out.particles()[0], e.particles()[0]);
        assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
