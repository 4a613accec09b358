use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that maps a description text to a fixed-length vector.
pub trait DescriptionEmbedder {
    fn dimension(&self) -> usize;
    fn embed(&self, description: &str) -> Result<Vec<f64>>;
}

/// Exact-match description → vector table, in insertion order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    source: String,
    dimension: usize,
    entries: IndexMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_rows(source: impl Into<String>, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let dimension = rows
            .first()
            .map(|r| r.1.len())
            .ok_or_else(|| Error::EmbeddingTable("table has no rows".into()))?;
        if dimension == 0 {
            return Err(Error::EmbeddingTable("zero-dimensional vectors".into()));
        }
        let mut entries = IndexMap::with_capacity(rows.len());
        for (desc, v) in rows {
            if v.len() != dimension {
                return Err(Error::EmbeddingTable(format!(
                    "ragged rows: `{desc}` has {} values, expected {dimension}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::EmbeddingTable(format!(
                    "non-finite value for `{desc}`"
                )));
            }
            if entries.contains_key(&desc) {
                return Err(Error::EmbeddingTable(format!(
                    "duplicate description `{desc}`"
                )));
            }
            entries.insert(desc, v);
        }
        Ok(Self {
            source: source.into(),
            dimension,
            entries,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, description: &str) -> Option<&[f64]> {
        self.entries.get(description).map(Vec::as_slice)
    }

    pub fn descriptions(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Rows as a dense matrix in insertion order.
    pub fn matrix(&self) -> ndarray::Array2<f64> {
        let n = self.len();
        let mut m = ndarray::Array2::zeros((n, self.dimension));
        for (i, v) in self.entries.values().enumerate() {
            for (j, x) in v.iter().enumerate() {
                m[[i, j]] = *x;
            }
        }
        m
    }

    /// Same descriptions, new vectors (e.g. after dimensionality reduction).
    pub fn with_matrix(&self, source: impl Into<String>, m: &ndarray::Array2<f64>) -> Result<Self> {
        if m.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: m.nrows(),
            });
        }
        let rows = self
            .descriptions()
            .zip(m.rows())
            .map(|(d, r)| (d.to_string(), r.to_vec()))
            .collect();
        Self::from_rows(source, rows)
    }

    /// CSV with header `description,d0,...,d{n-1}`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let source = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_reader(file, source)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, source: impl Into<String>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0).map(str::trim) != Some("description") {
            return Err(Error::EmbeddingTable(
                "first header field must be `description`".into(),
            ));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let desc = rec.get(0).unwrap_or_default().to_string();
            let v = rec
                .iter()
                .skip(1)
                .map(|c| {
                    c.trim().parse::<f64>().map_err(|_| {
                        Error::EmbeddingTable(format!("row {}: bad number {c:?}", i + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push((desc, v));
        }
        let table = Self::from_rows(source, rows)?;
        if header.len() != table.dimension + 1 {
            return Err(Error::EmbeddingTable(format!(
                "header declares {} dimensions, rows have {}",
                header.len() - 1,
                table.dimension
            )));
        }
        Ok(table)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["description".to_string()];
        header.extend((0..self.dimension).map(|i| format!("d{i}")));
        w.write_record(&header)?;
        for (d, v) in &self.entries {
            let mut rec = vec![d.clone()];
            rec.extend(v.iter().map(|x| x.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

impl DescriptionEmbedder for EmbeddingTable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, description: &str) -> Result<Vec<f64>> {
        self.get(description)
            .map(<[f64]>::to_vec)
            .ok_or_else(|| Error::UnknownDescription(description.to_string()))
    }
}

/// Derived numeric columns for one embedded feature.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedColumns {
    pub group: String,
    /// `dimension` columns, each with one value per input row.
    pub columns: Vec<Vec<f64>>,
}

/// Expand a column of descriptions into `dimension` numeric columns.
pub fn embed_column(
    descriptions: &[String],
    embedder: &dyn DescriptionEmbedder,
    group: &str,
) -> Result<EmbeddedColumns> {
    let d = embedder.dimension();
    let mut cache: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut columns = vec![Vec::with_capacity(descriptions.len()); d];
    for desc in descriptions {
        if !cache.contains_key(desc.as_str()) {
            let v = embedder.embed(desc)?;
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            cache.insert(desc, v);
        }
        for (col, x) in columns.iter_mut().zip(&cache[desc.as_str()]) {
            col.push(*x);
        }
    }
    Ok(EmbeddedColumns {
        group: group.to_string(),
        columns,
    })
}

/// Evaluate an embedder on every description, producing a lookup table.
pub fn materialize<'a>(
    embedder: &dyn DescriptionEmbedder,
    descriptions: impl IntoIterator<Item = &'a str>,
    source: &str,
) -> Result<EmbeddingTable> {
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for d in descriptions {
        if rows.iter().all(|(k, _)| k != d) {
            rows.push((d.to_string(), embedder.embed(d)?));
        }
    }
    EmbeddingTable::from_rows(source, rows)
}
