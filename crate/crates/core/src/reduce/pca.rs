use nalgebra::DMatrix;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Principal components of a centered data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub column_means: Array1<f64>,
    /// `k × d`, orthonormal rows, largest-magnitude entry of each row positive.
    pub components: Array2<f64>,
    /// Sample variance (n-1 denominator) along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

fn check_finite(x: &Array2<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA input".into()));
    }
    Ok(())
}

pub fn pca_fit(x: &Array2<f64>, k: usize) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n < 2 || d == 0 {
        return Err(Error::Empty(
            "PCA needs at least 2 samples and 1 feature".into(),
        ));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::InvalidParameter(format!(
            "k = {k} outside 1..={}",
            (n - 1).min(d)
        )));
    }
    check_finite(x)?;

    let means = x.mean_axis(Axis(0)).expect("n >= 2");
    let centered = x - &means;
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
    if total_variance == 0.0 {
        return Err(Error::Degenerate("all rows are identical".into()));
    }

    let m = DMatrix::from_fn(n, d, |i, j| centered[[i, j]]);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
            .then(a.cmp(&b))
    });

    let mut components = Array2::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let s = svd.singular_values[idx];
        explained_variance.push(s * s / (n - 1) as f64);
        let v: Vec<f64> = (0..d).map(|j| v_t[(idx, j)]).collect();
        let pivot = v.iter().copied().fold(
            0.0f64,
            |best, x| if x.abs() > best.abs() { x } else { best },
        );
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[[row, j]] = sign * v[j];
        }
    }

    Ok(PcaModel {
        column_means: means,
        components,
        explained_variance,
        total_variance,
    })
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// `(X - means) · componentsᵀ`
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.ncols(),
            });
        }
        Ok((x - &self.column_means).dot(&self.components.t()))
    }

    /// `Z · components + means`
    pub fn inverse(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        if z.ncols() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: self.k(),
                found: z.ncols(),
            });
        }
        Ok(z.dot(&self.components) + &self.column_means)
    }

    /// Mean over samples of the squared reconstruction residual norm.
    pub fn reconstruction_error(&self, x: &Array2<f64>) -> Result<f64> {
        let back = self.inverse(&self.transform(x)?)?;
        let sq: f64 = (x - &back).iter().map(|v| v * v).sum();
        Ok(sq / x.nrows() as f64)
    }
}

pub fn pca_transform(model: &PcaModel, x: &Array2<f64>) -> Result<Array2<f64>> {
    model.transform(x)
}

pub fn pca_inverse(model: &PcaModel, z: &Array2<f64>) -> Result<Array2<f64>> {
    model.inverse(z)
}

pub fn reconstruction_error(model: &PcaModel, x: &Array2<f64>) -> Result<f64> {
    model.reconstruction_error(x)
}

/// Reconstruction error for every k in `1..=max_k`, for choosing a target dimension.
pub fn reconstruction_curve(x: &Array2<f64>, max_k: usize) -> Result<Vec<(usize, f64)>> {
    (1..=max_k)
        .map(|k| {
            let m = pca_fit(x, k)?;
            Ok((k, m.reconstruction_error(x)?))
        })
        .collect()
}
