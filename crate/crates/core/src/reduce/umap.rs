//! Exact small-scale UMAP: brute-force k-NN, smooth distance calibration,
//! fuzzy union, spectral initialisation and negative-sampling SGD layout.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UmapParams {
    /// `None` uses `min(15, n - 1)`.
    pub n_neighbors: Option<usize>,
    pub target_dim: usize,
    pub min_dist: f64,
    pub spread: f64,
    pub n_epochs: usize,
    pub negative_sample_rate: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for UmapParams {
    fn default() -> Self {
        Self {
            n_neighbors: None,
            target_dim: 3,
            min_dist: 0.1,
            spread: 1.0,
            n_epochs: 500,
            negative_sample_rate: 5,
            learning_rate: 1.0,
            seed: 42,
        }
    }
}

impl UmapParams {
    pub fn neighbors_for(&self, n: usize) -> usize {
        self.n_neighbors
            .unwrap_or_else(|| 15.min(n.saturating_sub(1)))
    }

    fn validate(&self, n: usize) -> Result<usize> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!(
                "UMAP needs at least 4 samples, got {n}"
            )));
        }
        let k = self.neighbors_for(n);
        if k < 2 || k >= n {
            return Err(Error::InvalidParameter(format!(
                "n_neighbors = {k} must lie in 2..={}",
                n - 1
            )));
        }
        if self.target_dim == 0 {
            return Err(Error::InvalidParameter(
                "target_dim must be at least 1".into(),
            ));
        }
        if !(self.min_dist >= 0.0 && self.spread > 0.0 && self.min_dist <= self.spread) {
            return Err(Error::InvalidParameter(
                "need 0 <= min_dist <= spread, spread > 0".into(),
            ));
        }
        if self.n_epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter(
                "n_epochs and learning_rate must be positive".into(),
            ));
        }
        Ok(k)
    }
}

/// Neighbors of each point sorted by (distance, index), self excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnGraph {
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

pub fn knn_graph(x: &Array2<f64>, k: usize) -> KnnGraph {
    let n = x.nrows();
    let mut indices = Vec::with_capacity(n);
    let mut distances = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let d2: f64 = x
                    .row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2.sqrt(), j)
            })
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        row.truncate(k);
        indices.push(row.iter().map(|p| p.1).collect());
        distances.push(row.iter().map(|p| p.0).collect());
    }
    KnnGraph { indices, distances }
}

const SMOOTH_TOLERANCE: f64 = 1e-5;
const MIN_SCALE: f64 = 1e-3;

/// Per-point `(sigma, rho)`: `rho` is the nearest non-zero neighbor distance,
/// `sigma` solves `Σ exp(-(d - rho)/sigma) = log2(k)` by bisection.
pub fn smooth_knn_dist(distances: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<f64>) {
    let target = (k as f64).log2();
    let mean_all = {
        let all: Vec<f64> = distances.iter().flatten().copied().collect();
        all.iter().sum::<f64>() / all.len().max(1) as f64
    };
    let mut sigmas = Vec::with_capacity(distances.len());
    let mut rhos = Vec::with_capacity(distances.len());
    for row in distances {
        let rho = row.iter().copied().find(|&d| d > 0.0).unwrap_or(0.0);
        let (mut lo, mut hi, mut mid) = (0.0f64, f64::INFINITY, 1.0f64);
        for _ in 0..64 {
            let psum: f64 = row
                .iter()
                .map(|&d| {
                    let e = d - rho;
                    if e > 0.0 {
                        (-e / mid).exp()
                    } else {
                        1.0
                    }
                })
                .sum();
            if (psum - target).abs() < SMOOTH_TOLERANCE {
                break;
            }
            if psum > target {
                hi = mid;
                mid = (lo + hi) / 2.0;
            } else {
                lo = mid;
                mid = if hi.is_infinite() {
                    mid * 2.0
                } else {
                    (lo + hi) / 2.0
                };
            }
        }
        let floor = if rho > 0.0 {
            MIN_SCALE * row.iter().sum::<f64>() / row.len() as f64
        } else {
            MIN_SCALE * mean_all
        };
        sigmas.push(mid.max(floor));
        rhos.push(rho);
    }
    (sigmas, rhos)
}

/// Symmetric fuzzy membership matrix `A + Aᵀ - A∘Aᵀ`.
pub fn fuzzy_simplicial_set(graph: &KnnGraph, sigmas: &[f64], rhos: &[f64]) -> Array2<f64> {
    let n = graph.indices.len();
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for (&j, &d) in graph.indices[i].iter().zip(&graph.distances[i]) {
            let e = (d - rhos[i]).max(0.0);
            a[[i, j]] = if sigmas[i] > 0.0 {
                (-e / sigmas[i]).exp()
            } else {
                1.0
            };
        }
    }
    let at = a.t().to_owned();
    &a + &at - &a * &at
}

/// Fit `1 / (1 + a x^(2b))` to the offset-exponential target curve by
/// Gauss-Newton with Levenberg damping.
pub fn find_ab_params(spread: f64, min_dist: f64) -> (f64, f64) {
    let xs: Vec<f64> = (0..300).map(|i| 3.0 * spread * i as f64 / 299.0).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            if x < min_dist {
                1.0
            } else {
                (-(x - min_dist) / spread).exp()
            }
        })
        .collect();
    let sse = |a: f64, b: f64| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let f = 1.0 / (1.0 + a * x.powf(2.0 * b));
                (f - y) * (f - y)
            })
            .sum()
    };
    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cost = sse(a, b);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for (&x, &y) in xs.iter().zip(&ys) {
            if x <= 0.0 {
                continue;
            }
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let r = f - y;
            let da = -p / (den * den);
            let db = -a * p * 2.0 * x.ln() / (den * den);
            jtj[0][0] += da * da;
            jtj[0][1] += da * db;
            jtj[1][1] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        jtj[1][0] = jtj[0][1];
        let mut improved = false;
        for _ in 0..20 {
            let m00 = jtj[0][0] * (1.0 + lambda);
            let m11 = jtj[1][1] * (1.0 + lambda);
            let det = m00 * m11 - jtj[0][1] * jtj[1][0];
            if det.abs() < 1e-300 {
                lambda *= 10.0;
                continue;
            }
            let sa = -(m11 * jtr[0] - jtj[0][1] * jtr[1]) / det;
            let sb = -(m00 * jtr[1] - jtj[1][0] * jtr[0]) / det;
            let (na, nb) = (a + sa, b + sb);
            if na > 0.0 && nb > 0.0 {
                let c = sse(na, nb);
                if c < cost {
                    let done = (cost - c) < 1e-15 * cost.max(1e-300);
                    a = na;
                    b = nb;
                    cost = c;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = !done;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

fn spectral_init(graph: &Array2<f64>, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = graph.nrows();
    let random =
        |rng: &mut ChaCha8Rng| Array2::from_shape_fn((n, dim), |_| rng.random_range(-10.0..10.0));
    if n <= dim + 1 {
        return random(rng);
    }
    let deg: Vec<f64> = graph.rows().into_iter().map(|r| r.sum()).collect();
    if deg.iter().any(|&d| d <= 0.0) {
        return random(rng);
    }
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let w = graph[[i, j]] / (deg[i] * deg[j]).sqrt();
        if i == j {
            1.0 - w
        } else {
            -w
        }
    });
    let eig = SymmetricEigen::new(lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });
    let mut out = Array2::zeros((n, dim));
    for (c, &idx) in order.iter().skip(1).take(dim).enumerate() {
        let v = eig.eigenvectors.column(idx);
        // deterministic sign: largest-magnitude entry positive
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            out[[i, c]] = s * v[i];
        }
    }
    // rescale each axis to [0, 10]
    for mut col in out.columns_mut() {
        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        for v in col.iter_mut() {
            *v = if span > 0.0 {
                10.0 * (*v - lo) / span
            } else {
                0.0
            };
        }
    }
    out
}

fn clip(v: f64) -> f64 {
    v.clamp(-4.0, 4.0)
}

struct Layout<'a> {
    head: Vec<usize>,
    tail: Vec<usize>,
    epochs_per_sample: Vec<f64>,
    a: f64,
    b: f64,
    params: &'a UmapParams,
}

impl Layout<'_> {
    fn optimize(&self, emb: &mut Array2<f64>, rng: &mut ChaCha8Rng) {
        let (n, dim) = emb.dim();
        let (a, b) = (self.a, self.b);
        let neg_rate = self.params.negative_sample_rate.max(1) as f64;
        let epochs_per_negative: Vec<f64> = self
            .epochs_per_sample
            .iter()
            .map(|e| e / neg_rate)
            .collect();
        let mut next_sample = self.epochs_per_sample.clone();
        let mut next_negative = epochs_per_negative.clone();
        let n_epochs = self.params.n_epochs;
        let mut cur = vec![0.0; dim];
        for epoch in 0..n_epochs {
            let alpha = self.params.learning_rate * (1.0 - epoch as f64 / n_epochs as f64);
            let e = epoch as f64;
            for edge in 0..self.head.len() {
                if next_sample[edge] > e {
                    continue;
                }
                let (j, k) = (self.head[edge], self.tail[edge]);
                let d2: f64 = (0..dim).map(|c| (emb[[j, c]] - emb[[k, c]]).powi(2)).sum();
                let coeff = if d2 > 0.0 {
                    -2.0 * a * b * d2.powf(b - 1.0) / (a * d2.powf(b) + 1.0)
                } else {
                    0.0
                };
                for c in 0..dim {
                    let g = clip(coeff * (emb[[j, c]] - emb[[k, c]]));
                    emb[[j, c]] += g * alpha;
                    emb[[k, c]] -= g * alpha;
                }
                next_sample[edge] += self.epochs_per_sample[edge];

                let n_neg =
                    ((e - next_negative[edge]) / epochs_per_negative[edge]).max(0.0) as usize;
                for c in 0..dim {
                    cur[c] = emb[[j, c]];
                }
                for _ in 0..n_neg {
                    let k = rng.random_range(0..n);
                    if k == j {
                        continue;
                    }
                    let d2: f64 = (0..dim).map(|c| (cur[c] - emb[[k, c]]).powi(2)).sum();
                    let coeff = if d2 > 0.0 {
                        2.0 * b / ((0.001 + d2) * (a * d2.powf(b) + 1.0))
                    } else {
                        0.0
                    };
                    for c in 0..dim {
                        let g = if coeff > 0.0 {
                            clip(coeff * (cur[c] - emb[[k, c]]))
                        } else {
                            4.0
                        };
                        cur[c] += g * alpha;
                    }
                }
                for c in 0..dim {
                    emb[[j, c]] = cur[c];
                }
                next_negative[edge] += n_neg as f64 * epochs_per_negative[edge];
            }
        }
    }
}

/// Embed the rows of `x` into `params.target_dim` dimensions.
pub fn umap_fit_transform(x: &Array2<f64>, params: &UmapParams) -> Result<Array2<f64>> {
    let n = x.nrows();
    let k = params.validate(n)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("UMAP input".into()));
    }
    let graph = knn_graph(x, k);
    let (sigmas, rhos) = smooth_knn_dist(&graph.distances, k);
    let fuzzy = fuzzy_simplicial_set(&graph, &sigmas, &rhos);

    let mut rng = seed::rng(seed::derive(params.seed, &[0x0a]));
    let mut emb = spectral_init(&fuzzy, params.target_dim, &mut rng);
    for v in emb.iter_mut() {
        *v += rng.random_range(-1e-4..1e-4);
    }

    let max_w = fuzzy.iter().copied().fold(0.0f64, f64::max);
    let cutoff = max_w / params.n_epochs as f64;
    let (mut head, mut tail, mut eps) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        for j in 0..n {
            let w = fuzzy[[i, j]];
            if i != j && w > 0.0 && w >= cutoff {
                head.push(i);
                tail.push(j);
                eps.push(max_w / w);
            }
        }
    }
    let (a, b) = find_ab_params(params.spread, params.min_dist);
    Layout {
        head,
        tail,
        epochs_per_sample: eps,
        a,
        b,
        params,
    }
    .optimize(&mut emb, &mut rng);

    if emb.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("UMAP layout diverged".into()));
    }
    Ok(emb)
}
