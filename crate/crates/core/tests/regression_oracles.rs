mod common;

use actmap::regression::{
    load_model, save_model, train, train_svr, RegressionModel, RegressorConfig, RegressorKind, SvrKernel, SvrParams,
};
use common::qp::random_matrix;
use common::SplitMix64;

#[test]
fn smo_two_point_solution() {
    println!("{}", common::qp::check_smo_two_point().unwrap());
}

#[test]
fn smo_objective_matches_projected_gradient_oracle() {
    println!("{}", common::qp::check_smo_vs_projected_gradient().unwrap());
}

#[test]
fn svr_dual_feasibility() {
    println!("{}", common::qp::check_dual_feasibility().unwrap());
}

#[test]
fn gpr_matches_dense_solve() {
    println!("{}", common::qp::check_gpr_dense_solve().unwrap());
}

#[test]
fn gpr_one_point_closed_form() {
    println!("{}", common::qp::check_gpr_one_point().unwrap());
}

#[test]
fn svr_interpolates_training_points() {
    let mut rng = SplitMix64::new(31);
    let x = random_matrix(&mut rng, 12, 3);
    let y: Vec<f64> = x.iter().map(|r| r[0] - 2.0 * r[1] + 0.5 * r[2]).collect();
    let params = SvrParams { c: 1e4, epsilon: 0.0, tolerance: 1e-6, ..Default::default() };
    let m = train_svr(&x, &y, SvrKernel::Linear, &params).unwrap();
    for (r, t) in x.iter().zip(&y) {
        assert!((m.predict(r).unwrap() - t).abs() < 1e-3);
    }
}

#[test]
fn standardization_invariance() {
    let mut rng = SplitMix64::new(12);
    let x = random_matrix(&mut rng, 30, 5);
    let y: Vec<f64> = x.iter().map(|r| r[0] + (2.0 * r[1]).cos() - r[4]).collect();
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * 10.0).collect()).collect();
    let queries = random_matrix(&mut rng, 8, 5);
    let config = RegressorConfig { svr: SvrParams { tolerance: 1e-9, ..Default::default() }, ..Default::default() };
    for kind in RegressorKind::ALL {
        let a = train(kind, &x, &y, &config).unwrap();
        let b = train(kind, &scaled, &y, &config).unwrap();
        for q in &queries {
            let qs: Vec<f64> = q.iter().map(|v| v * 10.0).collect();
            let (pa, pb) = (a.predict(q).unwrap(), b.predict(&qs).unwrap());
            assert!((pa - pb).abs() < 1e-6, "{kind}: {pa} vs {pb}");
        }
    }
}

#[test]
fn row_order_invariance() {
    let mut rng = SplitMix64::new(4);
    let x = random_matrix(&mut rng, 40, 3);
    let y: Vec<f64> = x.iter().map(|r| r[0] * r[1] + r[2]).collect();
    let mut order: Vec<usize> = (0..40).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let queries = random_matrix(&mut rng, 10, 3);
    let config = RegressorConfig { svr: SvrParams { tolerance: 1e-9, ..Default::default() }, ..Default::default() };
    for kind in RegressorKind::ALL {
        let a = train(kind, &x, &y, &config).unwrap();
        let b = train(kind, &xs, &ys, &config).unwrap();
        let tol = if kind == RegressorKind::Gpr { 1e-9 } else { 1e-6 };
        for q in &queries {
            let (pa, pb) = (a.predict(q).unwrap(), b.predict(q).unwrap());
            assert!((pa - pb).abs() < tol, "{kind}: {pa} vs {pb}");
        }
    }
}

#[test]
fn saved_model_predicts_identically() {
    let mut rng = SplitMix64::new(8);
    let x = random_matrix(&mut rng, 25, 4);
    let y: Vec<f64> = x.iter().map(|r| r.iter().sum()).collect();
    let dir = tempfile::tempdir().unwrap();
    for kind in RegressorKind::ALL {
        let m = train(kind, &x, &y, &RegressorConfig::default()).unwrap();
        let path = dir.path().join(format!("{kind}.amf"));
        save_model(&path, &m).unwrap();
        let back: RegressionModel = load_model(&path).unwrap();
        assert_eq!(back, m);
        for q in random_matrix(&mut rng, 5, 4) {
            assert_eq!(m.predict(&q).unwrap().to_bits(), back.predict(&q).unwrap().to_bits());
        }
    }
}
