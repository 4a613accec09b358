//! Cosine similarity and pairwise similarity matrices.

use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;
use rayon::prelude::*;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};

/// Cosine of the angle between `a` and `b`, clamped to [-1, 1].
/// A zero-norm operand yields 0.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        log::warn!("cosine similarity with a zero vector; returning 0");
        return 0.0;
    }
    (ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub labels: Vec<String>,
    pub values: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[[i, j]])
    }

    /// Replace labels through a `description -> short label` map; unmapped
    /// labels are kept.
    pub fn relabel(&self, map: &HashMap<String, String>) -> SimilarityMatrix {
        SimilarityMatrix {
            labels: self
                .labels
                .iter()
                .map(|l| map.get(l).cloned().unwrap_or_else(|| l.clone()))
                .collect(),
            values: self.values.clone(),
        }
    }

    /// CSV with labels on the first row and first column; values written
    /// with 17 significant digits.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_writer(file)
    }

    pub fn to_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty("similarity matrix has no entries".into()));
        }
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut rec = vec![label.clone()];
            rec.extend(self.values.row(i).iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let n = labels.len();
        if n == 0 {
            return Err(Error::Empty("similarity matrix has no entries".into()));
        }
        let mut values = Array2::zeros((n, n));
        let mut rows = 0;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if i >= n || rec.len() != n + 1 {
                return Err(Error::RowLength {
                    row: i + 1,
                    expected: n + 1,
                    found: rec.len(),
                });
            }
            for j in 0..n {
                values[[i, j]] = rec[j + 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Schema(format!("bad number at row {}", i + 1)))?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows,
            });
        }
        Ok(Self { labels, values })
    }
}

/// Pairwise cosine similarities in table insertion order.
pub fn similarity_matrix(table: &EmbeddingTable) -> Result<SimilarityMatrix> {
    if table.is_empty() {
        return Err(Error::Empty("embedding table has no entries".into()));
    }
    let rows: Vec<(&str, &[f64])> = table.iter().collect();
    let n = rows.len();
    // Each pair is computed once and mirrored, so symmetry is exact.
    let upper: Vec<(usize, usize, f64)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (i..n).map(move |j| (i, j, cosine(rows[i].1, rows[j].1)))
        })
        .collect();
    let mut values = Array2::zeros((n, n));
    for (i, j, v) in upper {
        values[[i, j]] = v;
        values[[j, i]] = v;
    }
    Ok(SimilarityMatrix {
        labels: rows.iter().map(|(d, _)| d.to_string()).collect(),
        values,
    })
}

/// `description,label` CSV used to shorten axis labels.
pub fn load_label_map(path: impl AsRef<Path>) -> Result<HashMap<String, String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut map = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Schema(
                "label map rows need `description,label`".into(),
            ));
        }
        map.insert(rec[0].to_string(), rec[1].to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_and_opposite() {
        let a = [1.0, -2.0, 3.0];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((cosine(&a, &a) - 1.0).abs() < 1e-15);
        assert!((cosine(&a, &neg) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn forty_five_degrees() {
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn single_entry_matrix() {
        let t = EmbeddingTable::from_rows("x", vec![("a".into(), vec![2.0, 1.0])]).unwrap();
        let m = similarity_matrix(&t).unwrap();
        assert_eq!(m.values.dim(), (1, 1));
        assert!((m.values[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_by_two_file_content() {
        let m = SimilarityMatrix {
            labels: vec!["a".into(), "b".into()],
            values: ndarray::arr2(&[[1.0, 0.5], [0.5, 1.0]]),
        };
        let mut buf = Vec::new();
        m.to_writer(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            ",a,b\n\
             a,1.0000000000000000e0,5.0000000000000000e-1\n\
             b,5.0000000000000000e-1,1.0000000000000000e0\n"
        );
    }

    #[test]
    fn empty_export_is_error() {
        let m = SimilarityMatrix {
            labels: vec![],
            values: Array2::zeros((0, 0)),
        };
        assert!(m.to_writer(Vec::new()).is_err());
    }

    #[test]
    fn relabel_with_map() {
        let m = SimilarityMatrix {
            labels: vec!["rhombus 80 degrees".into(), "x".into()],
            values: Array2::eye(2),
        };
        let map = HashMap::from([("rhombus 80 degrees".to_string(), "R80".to_string())]);
        assert_eq!(m.relabel(&map).labels, vec!["R80", "x"]);
    }

    proptest! {
        #[test]
        fn export_round_trip(vals in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let m = SimilarityMatrix {
                labels: vec!["a".into(), "b, c".into(), "\"d\"".into()],
                values: Array2::from_shape_vec((3, 3), vals).unwrap(),
            };
            let mut buf = Vec::new();
            m.to_writer(&mut buf).unwrap();
            prop_assert_eq!(SimilarityMatrix::from_reader(buf.as_slice()).unwrap(), m);
        }

        #[test]
        fn cosine_in_range(
            a in proptest::collection::vec(-1e150f64..1e150, 4),
            b in proptest::collection::vec(-1e150f64..1e150, 4),
        ) {
            let c = cosine(&a, &b);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
