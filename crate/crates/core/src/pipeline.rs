//! End-to-end model pipeline: imputation, encoding, optional embedding
//! reduction and boosting, fitted on training rows only.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::boost::{self, GbtModel, GbtParams};
use crate::embed::{materialize, train_doc2vec, Corpus, Doc2VecParams, EmbeddingTable};
use crate::error::{Error, Result};
use crate::reduce::{pca_fit, umap_fit_transform, UmapParams};
use crate::tabular::{
    assemble_design_matrix, target_vector, Column, Dataset, DesignMatrix, EncoderSet, FeatureKind,
    FeatureSchema, ImputePlan, Imputer,
};

fn default_space() -> String {
    "default".to_string()
}

/// Encoder override for one categorical feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum EncoderChoice {
    Binary,
    OneHot,
    /// Features naming the same `space` share one model trained on the union
    /// of their descriptions.
    Doc2Vec {
        #[serde(default)]
        params: Doc2VecParams,
        #[serde(default = "default_space")]
        space: String,
    },
    Table {
        table: EmbeddingTable,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum Reduction {
    #[default]
    None,
    Pca {
        k: usize,
    },
    Umap(UmapParams),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingScope {
    /// Doc2Vec corpora come from the training rows of each fit.
    #[default]
    PerFold,
    /// Doc2Vec corpora come from every row of the dataset (descriptions only).
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub schema: FeatureSchema,
    #[serde(default)]
    pub encoders: BTreeMap<String, EncoderChoice>,
    #[serde(default)]
    pub reduction: Reduction,
    #[serde(default)]
    pub gbt: GbtParams,
    #[serde(default)]
    pub impute: ImputePlan,
    #[serde(default)]
    pub embedding_scope: EmbeddingScope,
}

impl PipelineSpec {
    pub fn new(schema: FeatureSchema) -> Self {
        Self {
            schema,
            encoders: BTreeMap::new(),
            reduction: Reduction::None,
            gbt: GbtParams::default(),
            impute: ImputePlan::default(),
            embedding_scope: EmbeddingScope::PerFold,
        }
    }

    /// Schema with overrides applied, plus the embedding choice per embedded feature.
    pub fn resolve(&self) -> Result<(FeatureSchema, BTreeMap<String, EncoderChoice>)> {
        for name in self.encoders.keys() {
            match self.schema.get(name) {
                None => return Err(Error::UnknownColumn(name.clone())),
                Some(f) if !f.kind.is_categorical() => {
                    return Err(Error::Schema(format!(
                        "encoder override on non-categorical feature `{name}`"
                    )))
                }
                Some(_) => {}
            }
        }
        let mut schema = self.schema.clone();
        let mut embedded = BTreeMap::new();
        for f in schema.features.iter_mut() {
            let choice = match (self.encoders.get(&f.name), f.kind) {
                (Some(c), _) => c.clone(),
                (None, FeatureKind::CategoricalEmbedded) => EncoderChoice::Doc2Vec {
                    params: Doc2VecParams::default(),
                    space: default_space(),
                },
                _ => continue,
            };
            match &choice {
                EncoderChoice::Binary => f.kind = FeatureKind::CategoricalBinary,
                EncoderChoice::OneHot => f.kind = FeatureKind::CategoricalOnehot,
                EncoderChoice::Doc2Vec { .. } | EncoderChoice::Table { .. } => {
                    f.kind = FeatureKind::CategoricalEmbedded;
                    if f.description_source.is_none() {
                        f.description_source = Some(f.name.clone());
                    }
                    embedded.insert(f.name.clone(), choice);
                }
            }
        }
        schema.validate()?;
        Ok((schema, embedded))
    }
}

/// Everything learned from one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub schema: FeatureSchema,
    pub imputer: Imputer,
    pub encoders: EncoderSet,
    pub model: GbtModel,
}

fn input_columns(schema: &FeatureSchema) -> Vec<&str> {
    let mut cols: Vec<&str> = schema.inputs().map(|f| f.name.as_str()).collect();
    for a in schema.auxiliary_columns() {
        if !cols.contains(&a) {
            cols.push(a);
        }
    }
    cols
}

fn descriptions(ds: &Dataset, column: &str) -> Result<BTreeSet<String>> {
    match ds.column(column)? {
        Column::Categorical(v) => Ok(v.iter().flatten().cloned().collect()),
        Column::Numeric(_) => Err(Error::ColumnType {
            column: column.to_string(),
            expected: "categorical",
        }),
    }
}

fn reduce_table(table: &EmbeddingTable, reduction: &Reduction) -> Result<EmbeddingTable> {
    match reduction {
        Reduction::None => Ok(table.clone()),
        Reduction::Pca { k } => {
            let x = table.matrix();
            let m = pca_fit(&x, *k)?;
            table.with_matrix(format!("{}+pca{k}", table.source()), &m.transform(&x)?)
        }
        Reduction::Umap(params) => {
            let z = umap_fit_transform(&table.matrix(), params)?;
            table.with_matrix(format!("{}+umap{}", table.source(), params.target_dim), &z)
        }
    }
}

/// Restrict `table` to `wanted` descriptions in sorted order.
fn restrict(table: &EmbeddingTable, wanted: &BTreeSet<String>) -> Result<EmbeddingTable> {
    let rows = wanted
        .iter()
        .map(|d| {
            table
                .get(d)
                .map(|v| (d.clone(), v.to_vec()))
                .ok_or_else(|| Error::UnknownDescription(d.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    EmbeddingTable::from_rows(table.source(), rows)
}

struct Prepared {
    schema: FeatureSchema,
    imputer: Imputer,
    train: Dataset,
    tables: BTreeMap<String, EmbeddingTable>,
}

/// Imputation plus one (reduced) embedding table per embedded feature.
fn prepare(spec: &PipelineSpec, train: &Dataset, universe: &Dataset) -> Result<Prepared> {
    let (schema, embedded) = spec.resolve()?;
    let columns = input_columns(&schema);
    let imputer = Imputer::fit(train, &columns, &spec.impute)?;
    let train = imputer.apply(train)?;
    let universe = imputer.apply(universe)?;

    let source_of = |name: &str| -> String {
        schema
            .get(name)
            .and_then(|f| f.description_source.clone())
            .unwrap_or_else(|| name.to_string())
    };

    // Doc2Vec spaces: member features and shared parameters.
    let mut spaces: BTreeMap<&str, (Doc2VecParams, Vec<&str>)> = BTreeMap::new();
    for (name, choice) in &embedded {
        if let EncoderChoice::Doc2Vec { params, space } = choice {
            let entry = spaces
                .entry(space.as_str())
                .or_insert_with(|| (params.clone(), Vec::new()));
            if entry.0 != *params {
                return Err(Error::InvalidParameter(format!(
                    "features in embedding space `{space}` disagree on parameters"
                )));
            }
            entry.1.push(name.as_str());
        }
    }

    let mut tables: BTreeMap<String, EmbeddingTable> = BTreeMap::new();
    for (space, (params, members)) in &spaces {
        let mut corpus_text = BTreeSet::new();
        let mut wanted = BTreeSet::new();
        for m in members {
            let src = source_of(m);
            let corpus_rows = match spec.embedding_scope {
                EmbeddingScope::PerFold => &train,
                EmbeddingScope::Global => &universe,
            };
            corpus_text.extend(descriptions(corpus_rows, &src)?);
            wanted.extend(descriptions(&universe, &src)?);
        }
        let corpus = Corpus::from_descriptions(corpus_text.iter().map(String::as_str));
        let model = train_doc2vec(&corpus, params)?;
        let table = materialize(
            &model,
            wanted.iter().map(String::as_str),
            &format!("doc2vec:{space}"),
        )?;
        let table = reduce_table(&table, &spec.reduction)?;
        for m in members {
            tables.insert(m.to_string(), table.clone());
        }
    }
    for (name, choice) in &embedded {
        if let EncoderChoice::Table { table } = choice {
            let wanted = descriptions(&universe, &source_of(name))?;
            let t = reduce_table(&restrict(table, &wanted)?, &spec.reduction)?;
            tables.insert(name.clone(), t);
        }
    }

    Ok(Prepared {
        schema,
        imputer,
        train,
        tables,
    })
}

impl FittedPipeline {
    /// Fit on `train`. `universe` supplies the description texts (never
    /// targets) that embedding tables must cover, typically the full dataset.
    pub fn fit(spec: &PipelineSpec, train: &Dataset, universe: &Dataset) -> Result<Self> {
        let Prepared {
            schema,
            imputer,
            train,
            tables,
        } = prepare(spec, train, universe)?;
        let encoders = EncoderSet::fit(&train, &schema, &tables)?;
        let x = assemble_design_matrix(&train, &schema, &encoders)?;
        let y = target_vector(&train, &schema)?;
        let model = boost::fit_design(&x, &y, &spec.gbt)?;
        Ok(Self {
            schema,
            imputer,
            encoders,
            model,
        })
    }

    /// The embedding tables `fit` would build, keyed by feature, without
    /// training a model.
    pub fn embedding_tables(
        spec: &PipelineSpec,
        train: &Dataset,
        universe: &Dataset,
    ) -> Result<BTreeMap<String, EmbeddingTable>> {
        Ok(prepare(spec, train, universe)?.tables)
    }

    pub fn design(&self, ds: &Dataset) -> Result<DesignMatrix> {
        let ds = self.imputer.apply(ds)?;
        assemble_design_matrix(&ds, &self.schema, &self.encoders)
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.model.predict(&self.design(ds)?.values)
    }

    pub fn target(&self, ds: &Dataset) -> Result<Vec<f64>> {
        target_vector(ds, &self.schema)
    }

    /// Canonical serialized form, for bit-level model comparisons.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}
