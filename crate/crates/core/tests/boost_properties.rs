use catembed::boost::{fit, grouped_importance, total_gain_importance, GbtModel, GbtParams, Node};
use catembed::seed;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

fn data_strategy() -> impl Strategy<Value = (Array2<f64>, Vec<f64>)> {
    (4usize..40, 1usize..4).prop_flat_map(|(n, d)| {
        (
            proptest::collection::vec(-5.0f64..5.0, n * d),
            proptest::collection::vec(-10.0f64..10.0, n),
        )
            .prop_map(move |(x, y)| (Array2::from_shape_vec((n, d), x).unwrap(), y))
    })
}

fn params_strategy() -> impl Strategy<Value = GbtParams> {
    (1usize..6, 1usize..4, 0.05f64..1.0, 0.0f64..3.0, 0.0f64..2.0).prop_map(
        |(r, depth, eta, lambda, gamma)| GbtParams {
            n_rounds: r,
            max_depth: depth,
            learning_rate: eta,
            lambda,
            gamma,
            ..Default::default()
        },
    )
}

fn half_term(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn train_mse(model: &GbtModel, x: &Array2<f64>, y: &[f64], t: usize) -> f64 {
    let p = model.predict_with_trees(x, t).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_gain_matches_formula((x, y) in data_strategy(), params in params_strategy()) {
        let m = fit(&x, &y, &params).unwrap();
        for tree in &m.trees {
            prop_assert!((tree.nodes[0].cover() - y.len() as f64).abs() < 1e-12);
            for node in &tree.nodes {
                match node {
                    Node::Split { left, right, gain, cover, grad, .. } => {
                        let (l, r) = (&tree.nodes[*left], &tree.nodes[*right]);
                        prop_assert!((l.cover() + r.cover() - cover).abs() < 1e-9);
                        let expect = 0.5
                            * (half_term(l.grad(), l.cover(), params.lambda)
                                + half_term(r.grad(), r.cover(), params.lambda)
                                - half_term(*grad, *cover, params.lambda))
                            - params.gamma;
                        prop_assert!((gain - expect).abs() <= 1e-10 * expect.abs().max(1.0));
                        prop_assert!(*gain > 0.0);
                    }
                    Node::Leaf { weight, cover, grad } => {
                        prop_assert!((weight + grad / (cover + params.lambda)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn boosting_is_monotone_and_additive((x, y) in data_strategy(), params in params_strategy()) {
        let m = fit(&x, &y, &params).unwrap();
        let mut prev = train_mse(&m, &x, &y, 0);
        for t in 1..=m.trees.len() {
            let cur = train_mse(&m, &x, &y, t);
            prop_assert!(cur <= prev + 1e-12, "round {t}: {cur} > {prev}");
            prev = cur;

            let before = m.predict_with_trees(&x, t - 1).unwrap();
            let after = m.predict_with_trees(&x, t).unwrap();
            for (i, row) in x.rows().into_iter().enumerate() {
                let step = params.learning_rate * m.trees[t - 1].leaf_weight(row);
                prop_assert!((after[i] - before[i] - step).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn prediction_ignores_row_order((x, y) in data_strategy(), params in params_strategy(), rot in 0usize..40) {
        let m = fit(&x, &y, &params).unwrap();
        let n = x.nrows();
        let order: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let shuffled = x.select(ndarray::Axis(0), &order);
        let (a, b) = (m.predict(&x).unwrap(), m.predict(&shuffled).unwrap());
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(a[i].to_bits(), b[k].to_bits());
        }
    }

    #[test]
    fn total_gain_matches_traversal((x, y) in data_strategy(), params in params_strategy()) {
        let m = fit(&x, &y, &params).unwrap();
        let mut acc = vec![0.0; x.ncols()];
        for t in &m.trees {
            let mut stack = vec![0usize];
            while let Some(i) = stack.pop() {
                if let Node::Split { feature, gain, left, right, .. } = &t.nodes[i] {
                    acc[*feature] += gain;
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        let imp = total_gain_importance(&m);
        for (a, b) in acc.iter().zip(imp.values()) {
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
        let singles: Vec<String> = m.feature_names.clone();
        let g = grouped_importance(&imp.values().copied().collect::<Vec<_>>(), &singles).unwrap();
        prop_assert_eq!(g.len(), imp.len());
        let one = vec!["all".to_string(); x.ncols()];
        let total = grouped_importance(&imp.values().copied().collect::<Vec<_>>(), &one).unwrap();
        prop_assert!((total["all"] - imp.values().sum::<f64>()).abs() < 1e-9);
    }
}

#[test]
fn nonlinear_fit_drops_below_tenth_of_variance() {
    let mut rng = seed::rng(11);
    let n = 200;
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0));
        x[[i, 0]] = a;
        x[[i, 1]] = b;
        y.push(f64::sin(a) * 2.0 + b * b);
    }
    let params = GbtParams {
        n_rounds: 100,
        ..Default::default()
    };
    let m = fit(&x, &y, &params).unwrap();
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let first = train_mse(&m, &x, &y, 1);
    let last = train_mse(&m, &x, &y, 100);
    assert!(last < first);
    assert!(last < 0.1 * var, "mse {last} vs variance {var}");
}

#[test]
fn noise_column_keeps_top_feature() {
    let kept: usize = (0..100u64)
        .into_par_iter()
        .map(|s| {
            let mut rng = seed::rng(seed::derive(s, &[9]));
            let n = 120;
            let mut x = Array2::zeros((n, 4));
            let mut y = Vec::with_capacity(n);
            for i in 0..n {
                for j in 0..3 {
                    x[[i, j]] = StandardNormal.sample(&mut rng);
                }
                x[[i, 3]] = StandardNormal.sample(&mut rng);
                let e: f64 = StandardNormal.sample(&mut rng);
                y.push(3.0 * x[[i, 0]] + x[[i, 1]] + 0.5 * x[[i, 2]] + 0.3 * e);
            }
            let params = GbtParams {
                n_rounds: 50,
                ..Default::default()
            };
            let top = |m: &GbtModel| {
                let imp = total_gain_importance(m);
                imp.iter()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(k, _)| k.clone())
                    .unwrap()
            };
            let base = fit(&x.slice(ndarray::s![.., 0..3]).to_owned(), &y, &params).unwrap();
            let noisy = fit(&x, &y, &params).unwrap();
            (top(&base) == top(&noisy)) as usize
        })
        .sum();
    assert!(kept >= 90, "top feature kept in {kept}/100 seeds");
}
