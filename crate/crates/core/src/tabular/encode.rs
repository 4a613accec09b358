use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: f64,
    pub std: f64,
}

impl StandardizationParams {
    pub fn fit(column: &[f64]) -> Result<Self> {
        if column.is_empty() {
            return Err(Error::Empty("cannot standardize an empty column".into()));
        }
        if column.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("standardization input".into()));
        }
        let n = column.len() as f64;
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        // spread at rounding level (e.g. a constant column with a mean-imputed
        // cell) is noise whose size depends on summation order
        let std = var.sqrt();
        let std = if std <= 1e-12 * mean.abs().max(1.0) {
            0.0
        } else {
            std
        };
        Ok(Self { mean, std })
    }

    /// z-score; a zero-spread column maps to 0.
    pub fn apply_one(&self, x: f64) -> f64 {
        if self.std > 0.0 {
            (x - self.mean) / self.std
        } else {
            0.0
        }
    }

    pub fn apply(&self, column: &[f64]) -> Vec<f64> {
        column.iter().map(|&x| self.apply_one(x)).collect()
    }
}

/// Categories in first-appearance order.
fn distinct_in_order(column: &[String]) -> IndexMap<String, usize> {
    let mut map = IndexMap::new();
    for c in column {
        let next = map.len();
        map.entry(c.clone()).or_insert(next);
    }
    map
}

/// Integer code per category, written out as most-significant-first bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryEncoder {
    codes: IndexMap<String, usize>,
    bits: usize,
}

impl BinaryEncoder {
    pub fn fit(column: &[String]) -> Self {
        let codes = distinct_in_order(column);
        let n = codes.len().max(2);
        // ceil(log2(n))
        let bits = (usize::BITS - (n - 1).leading_zeros()) as usize;
        Self { codes, bits }
    }

    pub fn bit_count(&self) -> usize {
        self.bits
    }

    pub fn code(&self, category: &str) -> Option<usize> {
        self.codes.get(category).copied()
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.codes.keys().map(String::as_str)
    }

    pub fn encode_one(&self, category: &str) -> Vec<f64> {
        match self.code(category) {
            Some(code) => (0..self.bits)
                .rev()
                .map(|b| ((code >> b) & 1) as f64)
                .collect(),
            None => {
                log::warn!("unseen category {category:?}; encoded as all-zero bits");
                vec![0.0; self.bits]
            }
        }
    }

    /// Bit columns (outer index = bit, most significant first).
    pub fn apply(&self, column: &[String]) -> Vec<Vec<f64>> {
        let rows: Vec<Vec<f64>> = column.iter().map(|c| self.encode_one(c)).collect();
        (0..self.bits)
            .map(|b| rows.iter().map(|r| r[b]).collect())
            .collect()
    }

    pub fn decode(bits: &[f64]) -> usize {
        bits.iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b >= 0.5))
    }
}

/// One indicator column per category seen at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoder {
    categories: IndexMap<String, usize>,
}

impl OneHotEncoder {
    pub fn fit(column: &[String]) -> Self {
        Self {
            categories: distinct_in_order(column),
        }
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn width(&self) -> usize {
        self.categories.len()
    }

    /// Indicator columns in category order; unseen categories give an all-zero row.
    pub fn apply(&self, column: &[String]) -> Vec<Vec<f64>> {
        let mut cols = vec![vec![0.0; column.len()]; self.categories.len()];
        for (r, c) in column.iter().enumerate() {
            match self.categories.get(c) {
                Some(&i) => cols[i][r] = 1.0,
                None => log::warn!("unseen category {c:?}; encoded as all-zero indicators"),
            }
        }
        cols
    }
}
