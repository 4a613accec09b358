use catembed::reduce::umap::{knn_graph, smooth_knn_dist};
use catembed::reduce::{umap_fit_transform, UmapParams};
use catembed::seed;
use catembed::similarity::similarity_matrix;
use catembed::synth::{default_catalog, standin_table};
use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};

fn blobs(s: u64) -> Array2<f64> {
    let mut rng = seed::rng(s);
    Array2::from_shape_fn((20, 50), |(i, j)| {
        let centre = if i < 10 {
            0.0
        } else if j % 2 == 0 {
            8.0
        } else {
            -8.0
        };
        let e: f64 = StandardNormal.sample(&mut rng);
        centre + e
    })
}

fn dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn separates_two_blobs() {
    for s in 0..5 {
        let x = blobs(s);
        let z = umap_fit_transform(
            &x,
            &UmapParams {
                target_dim: 2,
                seed: s,
                ..Default::default()
            },
        )
        .unwrap();
        let (mut within, mut nw, mut across, mut na) = (0.0, 0, 0.0, 0);
        for i in 0..20 {
            for j in i + 1..20 {
                let d = dist(z.row(i), z.row(j));
                if (i < 10) == (j < 10) {
                    within += d;
                    nw += 1;
                } else {
                    across += d;
                    na += 1;
                }
            }
        }
        assert!(within / nw as f64 <= across / na as f64, "seed {s}");
    }
}

#[test]
fn deterministic_given_seed() {
    let x = blobs(1);
    let p = UmapParams::default();
    let a = umap_fit_transform(&x, &p).unwrap();
    let b = umap_fit_transform(&x, &p).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|v| v.is_finite()));
}

#[test]
fn knn_matches_all_pairs_sort() {
    let x = blobs(2);
    let k = 6;
    let g = knn_graph(&x, k);
    for i in 0..x.nrows() {
        let mut all: Vec<(f64, usize)> = (0..x.nrows())
            .filter(|&j| j != i)
            .map(|j| (dist(x.row(i), x.row(j)), j))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<usize> = all[..k].iter().map(|p| p.1).collect();
        assert_eq!(g.indices[i], expect);
    }
}

#[test]
fn calibration_hits_log2_k() {
    let x = blobs(3);
    let k = 8;
    let g = knn_graph(&x, k);
    let (sigmas, rhos) = smooth_knn_dist(&g.distances, k);
    for i in 0..x.nrows() {
        let s: f64 = g.distances[i]
            .iter()
            .map(|d| (-((d - rhos[i]).max(0.0)) / sigmas[i]).exp())
            .sum();
        assert!((s - (k as f64).log2()).abs() < 1e-3, "row {i}: {s}");
    }
}

#[test]
fn reduced_standin_similarity_is_well_formed() {
    let descriptions: Vec<String> = default_catalog()
        .into_iter()
        .map(|c| c.description)
        .collect();
    let t = standin_table(descriptions.iter().map(String::as_str), 384, 4, "standin").unwrap();
    let z = umap_fit_transform(&t.matrix(), &UmapParams::default()).unwrap();
    let reduced = t.with_matrix("standin+umap3", &z).unwrap();
    let m = similarity_matrix(&reduced).unwrap();
    let n = descriptions.len();
    for i in 0..n {
        assert!((m.values[[i, i]] - 1.0).abs() < 1e-9);
        for j in 0..n {
            assert!((m.values[[i, j]] - m.values[[j, i]]).abs() < 1e-12);
        }
    }
}
