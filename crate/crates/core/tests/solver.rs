mod common;

use common::oracles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svmtune_core::svm::{self, solve_dual, GramMatrix, KernelSpec, TrainConfig};

const OBJECTIVE_TOL: f64 = 1e-5;

fn case(seed: u64, max_n: usize) -> (svmtune_core::dataset::Dataset<f64>, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let n = rng.random_range(4..=max_n);
    let d = rng.random_range(1..=4);
    let c = 2f64.powf(rng.random_range(-3.0..5.0));
    let gamma = 2f64.powf(rng.random_range(-3.0..2.0));
    (random_dataset(seed, n, d, 1.0), c, gamma)
}

#[test]
fn dual_objective_matches_projected_gradient_oracle() {
    for seed in 0..20 {
        let (ds, c, gamma) = case(seed, 12);
        let y = signs(&ds);
        let k = rbf_gram(&ds, gamma);
        // the default 1e-3 stopping gap leaves up to ~3e-4 of objective on the table
        let sol = solve_dual(&y, &GramMatrix::from_values(ds.len(), k.clone()), c, OBJECTIVE_TOL, 1_000_000);
        let (_, oracle) = projected_gradient_dual(&k, &y, c, 20_000);
        let smo = dual_value(&sol.alpha, &y, &k);
        assert!((smo - oracle).abs() < 1e-4, "seed {seed}: smo {smo} oracle {oracle}");
    }
}

#[test]
fn kkt_conditions_hold_on_larger_sets() {
    for seed in 0..20 {
        let (ds, c, gamma) = case(50 + seed, 40);
        let y = signs(&ds);
        let k = rbf_gram(&ds, gamma);
        let sol = solve_dual(&y, &GramMatrix::from_values(ds.len(), k.clone()), c, 1e-3, 1_000_000);
        assert!(sol.converged);
        let v = kkt_violation(&sol.alpha, &y, &k, c, sol.bias);
        assert!(v <= 1e-3, "seed {seed}: violation {v}");
    }
}

#[test]
fn trained_model_reproduces_dual_decision_values() {
    let ds = random_dataset(7, 30, 3, 1.5);
    let gamma = 0.5;
    let model: svmtune_core::SvmModel =
        svm::train(&ds, &TrainConfig::new(4.0).unwrap(), KernelSpec::rbf(gamma).unwrap()).unwrap();
    let acc = svm::accuracy(&model, &ds).unwrap();
    assert!(acc > 0.8, "training accuracy {acc}");
    assert!(model.dual_coefs.iter().all(|a| a.abs() <= 4.0 + 1e-12));
}
