mod common;

use catembed::boost::{fit, GbtModel, GbtParams, Node, Tree};
use catembed::explain::tree_shap;
use catembed::seed;
use common::{brute_force_shap, model_value};
use ndarray::{array, Array2};
use rand::Rng;

fn random_model(s: u64) -> (GbtModel, Array2<f64>) {
    let mut rng = seed::rng(seed::derive(s, &[0x5a]));
    let n = rng.random_range(8..=64);
    let d = rng.random_range(2..=8);
    let mut x = Array2::zeros((n, d));
    for v in x.iter_mut() {
        // coarse grid so ties and repeated thresholds occur
        *v = (rng.random_range(0..6) as f64) * 0.5;
    }
    let y: Vec<f64> = x
        .rows()
        .into_iter()
        .map(|r| {
            r[0] * 2.0 - r[1] + if r[d - 1] > 1.0 { 3.0 } else { 0.0 } + rng.random_range(-1.0..1.0)
        })
        .collect();
    let params = GbtParams {
        n_rounds: rng.random_range(1..=4),
        max_depth: rng.random_range(1..=3),
        learning_rate: 0.3,
        ..Default::default()
    };
    (fit(&x, &y, &params).unwrap(), x)
}

#[test]
fn matches_exhaustive_oracle_on_random_trees() {
    for s in 0..20 {
        let (m, x) = random_model(s);
        let shap = tree_shap(&m, &x).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let oracle = brute_force_shap(&m, row);
            for (f, o) in oracle.iter().enumerate() {
                assert!(
                    (shap.values[[i, f]] - o).abs() < 1e-9,
                    "seed {s} row {i} feature {f}"
                );
            }
        }
        assert!((shap.base_value - model_value(&m, x.row(0), 0)).abs() < 1e-9);
    }
}

#[test]
fn depth_one_two_features() {
    let x = array![[0.0, 1.0], [1.0, 0.0], [0.0, 0.0], [1.0, 1.0]];
    let y = [0.0, 4.0, 1.0, 5.0];
    let params = GbtParams {
        n_rounds: 1,
        max_depth: 1,
        learning_rate: 1.0,
        lambda: 0.0,
        ..Default::default()
    };
    let m = fit(&x, &y, &params).unwrap();
    let shap = tree_shap(&m, &x).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        let o = brute_force_shap(&m, row);
        assert!((shap.values[[i, 0]] - o[0]).abs() < 1e-12);
        assert_eq!(shap.values[[i, 1]], 0.0, "unused feature gets exactly zero");
    }
}

/// Two stumps on identical columns with identical leaves: the model is
/// symmetric in the duplicated features.
fn symmetric_model() -> GbtModel {
    let stump = |feature: usize| Tree {
        nodes: vec![
            Node::Split {
                feature,
                threshold: 0.5,
                left: 1,
                right: 2,
                default_left: true,
                gain: 1.0,
                cover: 4.0,
                grad: 0.0,
            },
            Node::Leaf {
                weight: -1.0,
                cover: 2.0,
                grad: 2.0,
            },
            Node::Leaf {
                weight: 2.0,
                cover: 2.0,
                grad: -2.0,
            },
        ],
    };
    GbtModel {
        base_score: 0.5,
        trees: vec![stump(0), stump(1)],
        n_features: 3,
        feature_names: vec!["a".into(), "a_copy".into(), "unused".into()],
        params: GbtParams {
            learning_rate: 1.0,
            ..Default::default()
        },
    }
}

#[test]
fn duplicated_features_symmetric_model() {
    let m = symmetric_model();
    let x = array![[0.0, 0.0, 7.0], [1.0, 1.0, -7.0]];
    let shap = tree_shap(&m, &x).unwrap();
    for (i, row) in x.rows().into_iter().enumerate() {
        let o = brute_force_shap(&m, row);
        assert!((o[0] - o[1]).abs() < 1e-12);
        let gap = (shap.values[[i, 0]] - shap.values[[i, 1]]).abs();
        println!("row {i}: TreeSHAP symmetry gap {gap:e}");
        assert!(gap < 1e-12);
        assert_eq!(shap.values[[i, 2]], 0.0);
    }
}

#[test]
fn local_accuracy_on_larger_models() {
    for s in 0..5u64 {
        let mut rng = seed::rng(s);
        let (n, d) = (150, 10);
        let x: Array2<f64> = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r[0] * r[1] + r[2].sin() * 3.0 + r[3])
            .collect();
        let m = fit(&x, &y, &GbtParams::default()).unwrap();
        let shap = tree_shap(&m, &x).unwrap();
        let pred = m.predict(&x).unwrap();
        for i in 0..n {
            let total = shap.base_value + shap.values.row(i).sum();
            assert!((total - pred[i]).abs() <= (1e-6 * pred[i].abs()).max(1e-9));
        }
    }
}
