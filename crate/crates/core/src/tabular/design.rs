use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::encode::{BinaryEncoder, OneHotEncoder, StandardizationParams};
use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};
use crate::embed::{embed_column, EmbeddingTable};
use crate::error::{Error, Result};

/// Embedding lookup for one feature plus per-dimension standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedEncoder {
    pub description_source: String,
    pub table: EmbeddingTable,
    pub scalers: Vec<StandardizationParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum FittedEncoder {
    Standardize(StandardizationParams),
    Binary(BinaryEncoder),
    OneHot(OneHotEncoder),
    Embedded(EmbeddedEncoder),
}

/// Fitted encoders keyed by feature name, in schema order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EncoderSet {
    pub encoders: IndexMap<String, FittedEncoder>,
}

fn complete_numeric(ds: &Dataset, name: &str) -> Result<Vec<f64>> {
    ds.numeric(name)?
        .iter()
        .map(|x| x.ok_or_else(|| Error::MissingValue(name.to_string())))
        .collect()
}

fn complete_categorical(ds: &Dataset, name: &str) -> Result<Vec<String>> {
    ds.categorical(name)?
        .iter()
        .map(|x| {
            x.clone()
                .ok_or_else(|| Error::MissingValue(name.to_string()))
        })
        .collect()
}

/// Target column as a dense vector; missing or non-finite targets are errors.
pub fn target_vector(ds: &Dataset, schema: &FeatureSchema) -> Result<Vec<f64>> {
    let y = complete_numeric(ds, &schema.target().name)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target".into()));
    }
    Ok(y)
}

impl EncoderSet {
    /// Fit one encoder per input feature according to its schema kind.
    /// `tables` supplies the description lookup for every embedded feature.
    pub fn fit(
        ds: &Dataset,
        schema: &FeatureSchema,
        tables: &BTreeMap<String, EmbeddingTable>,
    ) -> Result<Self> {
        if ds.row_count() == 0 {
            return Err(Error::Empty(
                "cannot fit encoders on an empty dataset".into(),
            ));
        }
        let mut encoders = IndexMap::new();
        for f in schema.inputs() {
            let enc = match f.kind {
                FeatureKind::Numeric => FittedEncoder::Standardize(StandardizationParams::fit(
                    &complete_numeric(ds, &f.name)?,
                )?),
                FeatureKind::CategoricalBinary => {
                    FittedEncoder::Binary(BinaryEncoder::fit(&complete_categorical(ds, &f.name)?))
                }
                FeatureKind::CategoricalOnehot => {
                    FittedEncoder::OneHot(OneHotEncoder::fit(&complete_categorical(ds, &f.name)?))
                }
                FeatureKind::CategoricalEmbedded => {
                    let table = tables
                        .get(&f.name)
                        .ok_or_else(|| Error::MissingEncoder(f.name.clone()))?
                        .clone();
                    let source = description_column(f);
                    let descriptions = complete_categorical(ds, source)?;
                    let embedded = embed_column(&descriptions, &table, &f.name)?;
                    let scalers = embedded
                        .columns
                        .iter()
                        .map(|c| StandardizationParams::fit(c))
                        .collect::<Result<Vec<_>>>()?;
                    FittedEncoder::Embedded(EmbeddedEncoder {
                        description_source: source.to_string(),
                        table,
                        scalers,
                    })
                }
                FeatureKind::Target => unreachable!("inputs() excludes the target"),
            };
            encoders.insert(f.name.clone(), enc);
        }
        Ok(Self { encoders })
    }
}

fn description_column(f: &FeatureSpec) -> &str {
    f.description_source.as_deref().unwrap_or(&f.name)
}

/// Numeric model input with one group label per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    /// Originating feature of each column.
    pub group_of: Vec<String>,
    /// Report tag per group, in column order of first appearance.
    pub group_tags: IndexMap<String, String>,
}

impl DesignMatrix {
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    /// Groups in column order, each with its member column indices.
    pub fn groups(&self) -> IndexMap<String, Vec<usize>> {
        let mut out: IndexMap<String, Vec<usize>> = IndexMap::new();
        for (i, g) in self.group_of.iter().enumerate() {
            out.entry(g.clone()).or_default().push(i);
        }
        out
    }

    /// Same columns, every column its own group (tag preserved).
    pub fn ungrouped(&self) -> DesignMatrix {
        let group_tags = self
            .feature_names
            .iter()
            .zip(&self.group_of)
            .map(|(n, g)| (n.clone(), self.group_tags[g].clone()))
            .collect();
        DesignMatrix {
            values: self.values.clone(),
            feature_names: self.feature_names.clone(),
            group_of: self.feature_names.clone(),
            group_tags,
        }
    }
}

/// Build the model matrix: schema order, then derivation order within a feature.
pub fn assemble_design_matrix(
    ds: &Dataset,
    schema: &FeatureSchema,
    encoders: &EncoderSet,
) -> Result<DesignMatrix> {
    let n = ds.row_count();
    if n == 0 {
        return Err(Error::Empty("dataset has no rows".into()));
    }
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    let mut group_of = Vec::new();
    let mut group_tags = IndexMap::new();

    for f in schema.inputs() {
        let enc = encoders
            .encoders
            .get(&f.name)
            .ok_or_else(|| Error::MissingEncoder(f.name.clone()))?;
        let derived: Vec<(String, Vec<f64>)> = match enc {
            FittedEncoder::Standardize(p) => {
                vec![(f.name.clone(), p.apply(&complete_numeric(ds, &f.name)?))]
            }
            FittedEncoder::Binary(b) => b
                .apply(&complete_categorical(ds, &f.name)?)
                .into_iter()
                .enumerate()
                .map(|(i, c)| (format!("{}[b{i}]", f.name), c))
                .collect(),
            FittedEncoder::OneHot(o) => {
                let cats: Vec<String> = o.categories().map(str::to_string).collect();
                o.apply(&complete_categorical(ds, &f.name)?)
                    .into_iter()
                    .zip(cats)
                    .map(|(c, cat)| (format!("{}={cat}", f.name), c))
                    .collect()
            }
            FittedEncoder::Embedded(e) => {
                let descriptions = complete_categorical(ds, &e.description_source)?;
                let embedded = embed_column(&descriptions, &e.table, &f.name)?;
                embedded
                    .columns
                    .into_iter()
                    .zip(&e.scalers)
                    .enumerate()
                    .map(|(i, (c, s))| (format!("{}[d{i}]", f.name), s.apply(&c)))
                    .collect()
            }
        };
        group_tags.insert(f.name.clone(), f.group_tag().to_string());
        for (name, col) in derived {
            names.push(name);
            group_of.push(f.name.clone());
            columns.push(col);
        }
    }

    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name) {
            return Err(Error::DuplicateColumn(name.clone()));
        }
    }

    let d = columns.len();
    let values = Array2::from_shape_fn((n, d), |(r, c)| columns[c][r]);
    Ok(DesignMatrix {
        values,
        feature_names: names,
        group_of,
        group_tags,
    })
}
