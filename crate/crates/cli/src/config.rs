//! JSON run configuration. Relative paths resolve against the directory of
//! the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use catembed::boost::GbtParams;
use catembed::embed::{Doc2VecParams, EmbeddingTable};
use catembed::eval::BandMode;
use catembed::explain::GroupAggregation;
use catembed::pipeline::{EmbeddingScope, EncoderChoice, PipelineSpec, Reduction};
use catembed::seed;
use catembed::tabular::{Dataset, FeatureSchema, ImputePlan};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum EncoderConfig {
    Binary,
    #[serde(alias = "one_hot")]
    Onehot,
    Doc2vec {
        #[serde(default)]
        params: Doc2VecParams,
        #[serde(default = "default_space")]
        space: String,
    },
    /// External embedding table (CSV: description, d0, d1, ...).
    Table {
        path: String,
    },
}

fn default_space() -> String {
    "default".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantConfig {
    pub name: String,
    #[serde(default)]
    pub encoders: BTreeMap<String, EncoderConfig>,
    #[serde(default)]
    pub reduction: Reduction,
    #[serde(default)]
    pub embedding_scope: EmbeddingScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub k: usize,
    pub fractions: Vec<f64>,
    pub band: BandMode,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            k: 5,
            fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            band: BandMode::OneSigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSettings {
    pub aggregation: GroupAggregation,
    pub top_k: usize,
}

impl Default for ExplainSettings {
    fn default() -> Self {
        Self {
            aggregation: GroupAggregation::SumThenAbs,
            top_k: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: String,
    pub schema: String,
    /// Master seed; every stage seed is derived from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub gbt: GbtParams,
    #[serde(default)]
    pub impute: ImputePlan,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub explain: ExplainSettings,
    pub variants: Vec<VariantConfig>,
}

/// Stage identifiers for seed derivation.
mod stage {
    pub const EVAL: u64 = 1;
    pub const GBT: u64 = 2;
    pub const DOC2VEC: u64 = 3;
    pub const UMAP: u64 = 4;
}

fn name_key(name: &str) -> u64 {
    let d = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed_override: Option<u64>) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: RunConfig = serde_json::from_str(&text)?;
        if let Some(s) = seed_override {
            config.seed = s;
        }
        config.validate()?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> CliResult<PathBuf> {
        match (flag, &self.config.output_dir) {
            (Some(p), _) => Ok(p.to_path_buf()),
            (None, Some(p)) => Ok(self.resolve(p)),
            (None, None) => Err(CliError::Config(
                "no output directory: pass --out or set output_dir".into(),
            )),
        }
    }

    pub fn load_data(&self) -> CliResult<(FeatureSchema, Dataset)> {
        let schema = FeatureSchema::load(self.resolve(&self.config.schema))?;
        let ds = Dataset::load(self.resolve(&self.config.dataset), &schema)?;
        Ok((schema, ds))
    }

    /// Every file the config refers to, labelled, for the manifest.
    pub fn input_files(&self, variants: &[&VariantConfig]) -> Vec<(String, String, PathBuf)> {
        let mut out = vec![
            (
                "dataset".to_string(),
                self.config.dataset.clone(),
                self.resolve(&self.config.dataset),
            ),
            (
                "schema".to_string(),
                self.config.schema.clone(),
                self.resolve(&self.config.schema),
            ),
        ];
        for v in variants {
            for (feature, enc) in &v.encoders {
                if let EncoderConfig::Table { path } = enc {
                    out.push((
                        format!("{}/{}", v.name, feature),
                        path.clone(),
                        self.resolve(path),
                    ));
                }
            }
        }
        out
    }

    pub fn variants(&self, only: Option<&str>) -> CliResult<Vec<&VariantConfig>> {
        match only {
            None => Ok(self.config.variants.iter().collect()),
            Some(name) => self
                .config
                .variants
                .iter()
                .find(|v| v.name == name)
                .map(|v| vec![v])
                .ok_or_else(|| CliError::Config(format!("no variant named `{name}`"))),
        }
    }

    pub fn eval_seed(&self, variant: &VariantConfig) -> u64 {
        seed::derive(self.config.seed, &[stage::EVAL, name_key(&variant.name)])
    }

    /// Pipeline for one variant, with stage seeds derived from the master seed.
    pub fn pipeline_spec(
        &self,
        schema: &FeatureSchema,
        variant: &VariantConfig,
    ) -> CliResult<PipelineSpec> {
        let key = name_key(&variant.name);
        let master = self.config.seed;
        let mut spec = PipelineSpec::new(schema.clone());
        spec.gbt = GbtParams {
            seed: seed::derive(master, &[stage::GBT, key]),
            ..self.config.gbt.clone()
        };
        spec.impute = self.config.impute.clone();
        spec.embedding_scope = variant.embedding_scope;
        spec.reduction = match &variant.reduction {
            Reduction::Umap(p) => Reduction::Umap(catembed::reduce::UmapParams {
                seed: seed::derive(master, &[stage::UMAP, key]),
                ..p.clone()
            }),
            r => r.clone(),
        };
        for (feature, enc) in &variant.encoders {
            let choice = match enc {
                EncoderConfig::Binary => EncoderChoice::Binary,
                EncoderConfig::Onehot => EncoderChoice::OneHot,
                EncoderConfig::Doc2vec { params, space } => EncoderChoice::Doc2Vec {
                    params: Doc2VecParams {
                        seed: seed::derive(master, &[stage::DOC2VEC, key]),
                        ..params.clone()
                    },
                    space: space.clone(),
                },
                EncoderConfig::Table { path } => EncoderChoice::Table {
                    table: EmbeddingTable::load(self.resolve(path))?,
                },
            };
            spec.encoders.insert(feature.clone(), choice);
        }
        spec.resolve()?;
        Ok(spec)
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.variants.is_empty() {
            return Err(CliError::Config("at least one variant is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variants {
            let safe = !v.name.is_empty()
                && v.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !safe {
                return Err(CliError::Config(format!(
                    "variant name `{}` must be non-empty [A-Za-z0-9_-]",
                    v.name
                )));
            }
            if !seen.insert(v.name.as_str()) {
                return Err(CliError::Config(format!("duplicate variant `{}`", v.name)));
            }
        }
        if self.eval.k < 2 {
            return Err(CliError::Config("eval.k must be at least 2".into()));
        }
        self.gbt.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> RunConfig {
        serde_json::from_str(r#"{"dataset":"d.csv","schema":"s.json","variants":[{"name":"a"}]}"#)
            .unwrap()
    }

    #[test]
    fn defaults_fill_in() {
        let c = minimal();
        assert_eq!(c.eval.k, 5);
        assert_eq!(c.seed, 0);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_variants() {
        let mut c = minimal();
        c.variants.push(c.variants[0].clone());
        assert!(c.validate().is_err());
        c.variants = vec![VariantConfig {
            name: "a/b".into(),
            ..minimal().variants[0].clone()
        }];
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let r: Result<RunConfig, _> =
            serde_json::from_str(r#"{"dataset":"d","schema":"s","variants":[],"bogus":1}"#);
        assert!(r.is_err());
    }

    #[test]
    fn stage_seeds_differ_by_variant() {
        let l = LoadedConfig {
            config: minimal(),
            base_dir: PathBuf::new(),
        };
        let a = VariantConfig {
            name: "a".into(),
            ..minimal().variants[0].clone()
        };
        let b = VariantConfig {
            name: "b".into(),
            ..a.clone()
        };
        assert_ne!(l.eval_seed(&a), l.eval_seed(&b));
        assert_eq!(l.eval_seed(&a), l.eval_seed(&a.clone()));
    }
}
