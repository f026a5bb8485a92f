use wenk::model::diagnostics::{hessian_identity_error, score_error};
use wenk::numkit::SpdFactor;
use wenk::{builtin_problem, Matrix, ProblemId, RandomSource, Vector};

const PAPER_EXAMPLES: [ProblemId; 5] = [
    ProblemId::Example1,
    ProblemId::Example2,
    ProblemId::Example3,
    ProblemId::Example4,
    ProblemId::Example5,
];

#[test]
fn score_and_hessian_identity_match_finite_differences() {
    let mut rng = RandomSource::new(17);
    for id in PAPER_EXAMPLES {
        let p = builtin_problem(id);
        let (mut worst_s, mut worst_h) = (0.0f64, 0.0f64);
        for _ in 0..100 {
            let u = rng.standard_normal_vector(p.dim_in());
            let t = rng.uniform();
            let td = p.tempered(t).unwrap();
            worst_s = worst_s.max(score_error(&td, &u).unwrap());
            worst_h = worst_h.max(hessian_identity_error(&td, &u).unwrap());
        }
        println!("{id}: score {worst_s:.1e} hessian {worst_h:.1e}");
        assert!(worst_s <= 1e-5, "{id}: score {worst_s:e}");
        assert!(worst_h <= 1e-4, "{id}: hessian {worst_h:e}");
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let mut rng = RandomSource::new(29);
    for id in PAPER_EXAMPLES {
        let p = builtin_problem(id);
        let model = p.model();
        for _ in 0..50 {
            let u = rng.standard_normal_vector(model.dim_in());
            let jac = model.jacobian(&u);
            for j in 0..model.dim_in() {
                let h = 1e-6 * (1.0 + u[j].abs());
                let mut up = u.clone();
                up[j] += h;
                let mut um = u.clone();
                um[j] -= h;
                let fd = model.eval(&up).sub(&model.eval(&um)).scale(0.5 / h);
                let col = jac.column(j);
                let err = col.sub(&fd).norm() / fd.norm().max(1.0);
                assert!(err <= 1e-6, "{id} jacobian column {j}: {err:e}");
                for i in 0..model.dim_in() {
                    let d2 = model.second_derivative(&u, i);
                    let fd2 = model
                        .jacobian(&up)
                        .sub(&model.jacobian(&um))
                        .scale(0.5 / h)
                        .column(i);
                    let err = d2.column(j).sub(&fd2).norm() / fd2.norm().max(1.0);
                    assert!(err <= 1e-5, "{id} second derivative ({i},{j}): {err:e}");
                }
            }
        }
    }
}

#[test]
fn prior_hessian_is_recovered_at_t_zero() {
    let p = builtin_problem(ProblemId::Example5);
    let td = p.tempered(0.0).unwrap();
    let u = Vector::from([0.4, -1.1]);
    let v = td.score_v(&u).unwrap();
    let expected = v
        .outer(&v)
        .sub(&SpdFactor::new(p.prior().cov()).unwrap().inverse());
    let got = td.density_hessian_ratio(&u).unwrap();
    assert!(got.sub(&expected).frobenius_norm() < 1e-12);
    let _ = Matrix::identity(2);
}
