//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use catembed::boost::{GbtModel, Node, Tree};
use ndarray::{Array1, Array2, ArrayView1};

/// Cover-weighted conditional expectation of one tree given the features in
/// `known` (bitmask) fixed to `row`.
fn tree_value(tree: &Tree, node: usize, row: ArrayView1<f64>, known: u64, scale: f64) -> f64 {
    match &tree.nodes[node] {
        Node::Leaf { weight, .. } => scale * weight,
        Node::Split {
            feature,
            threshold,
            left,
            right,
            default_left,
            cover,
            ..
        } => {
            if known >> feature & 1 == 1 {
                let v = row[*feature];
                let go_left = if v.is_nan() {
                    *default_left
                } else {
                    v < *threshold
                };
                tree_value(
                    tree,
                    if go_left { *left } else { *right },
                    row,
                    known,
                    scale,
                )
            } else {
                let (cl, cr) = (tree.nodes[*left].cover(), tree.nodes[*right].cover());
                (cl * tree_value(tree, *left, row, known, scale)
                    + cr * tree_value(tree, *right, row, known, scale))
                    / cover
            }
        }
    }
}

pub fn model_value(model: &GbtModel, row: ArrayView1<f64>, known: u64) -> f64 {
    let eta = model.params.learning_rate;
    model.base_score
        + model
            .trees
            .iter()
            .map(|t| tree_value(t, 0, row, known, eta))
            .sum::<f64>()
}

/// Exact Shapley values by enumerating every coalition.
pub fn brute_force_shap(model: &GbtModel, row: ArrayView1<f64>) -> Vec<f64> {
    let m = model.n_features;
    assert!(m <= 16, "exhaustive oracle is exponential");
    let values: Vec<f64> = (0..1u64 << m).map(|s| model_value(model, row, s)).collect();
    let fact: Vec<f64> = (0..=m)
        .scan(1.0, |acc, i| {
            if i > 0 {
                *acc *= i as f64;
            }
            Some(*acc)
        })
        .collect();
    (0..m)
        .map(|i| {
            let mut phi = 0.0;
            for s in 0..1u64 << m {
                if s >> i & 1 == 1 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact[size] * fact[m - size - 1] / fact[m];
                phi += w * (values[(s | 1 << i) as usize] - values[s as usize]);
            }
            phi
        })
        .collect()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues
/// descending; eigenvectors as rows.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[[i, j]] * a[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].total_cmp(&a[[i, i]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vecs = Array2::zeros((n, n));
    for (r, &i) in order.iter().enumerate() {
        vecs.row_mut(r).assign(&v.column(i));
    }
    (values, vecs)
}

pub fn sample_covariance(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean: Array1<f64> = x.mean_axis(ndarray::Axis(0)).unwrap();
    let c = x - &mean;
    c.t().dot(&c) / (n - 1.0)
}

/// One-sided sign-test p-value for `wins` successes out of `n` at p = 1/2.
pub fn sign_test_p(wins: usize, n: usize) -> f64 {
    use statrs::distribution::{Binomial, DiscreteCDF};
    if wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).unwrap();
    b.sf(wins as u64 - 1)
}
