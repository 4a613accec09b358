use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Report tags for groups; they drive bar coloring in importance plots.
pub mod tags {
    pub const NUMERIC: &str = "numeric";
    pub const RECIPE: &str = "recipe";
    pub const INSERT_GEOMETRY: &str = "insert-geometry";
    pub const CATEGORICAL: &str = "categorical";
    pub const TARGET: &str = "target";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    CategoricalBinary,
    CategoricalOnehot,
    CategoricalEmbedded,
    Target,
}

impl FeatureKind {
    pub fn is_categorical(self) -> bool {
        matches!(
            self,
            FeatureKind::CategoricalBinary
                | FeatureKind::CategoricalOnehot
                | FeatureKind::CategoricalEmbedded
        )
    }

    /// Numeric and target columns hold numbers; everything else holds text.
    pub fn is_numeric_column(self) -> bool {
        matches!(self, FeatureKind::Numeric | FeatureKind::Target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Column holding the textual description of each category. May name the
    /// feature itself when the category label already is its description.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description_source: Option<String>,
    /// Report tag (`numeric`, `recipe`, `insert-geometry`, ...).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Self {
            name: name.into(),
            kind,
            description_source: None,
            tag: None,
        }
    }

    pub fn with_description_source(mut self, column: impl Into<String>) -> Self {
        self.description_source = Some(column.into());
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = Some(tag.into());
        self
    }

    pub fn group_tag(&self) -> &str {
        match (&self.tag, self.kind) {
            (Some(t), _) => t,
            (None, FeatureKind::Numeric) => tags::NUMERIC,
            (None, FeatureKind::Target) => tags::TARGET,
            (None, _) => tags::CATEGORICAL,
        }
    }
}

/// Ordered list of feature specifications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let schema = Self { features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for f in &self.features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature with empty name".into()));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.kind == FeatureKind::CategoricalEmbedded && f.description_source.is_none() {
                return Err(Error::Schema(format!(
                    "embedded feature `{}` needs a description_source",
                    f.name
                )));
            }
        }
        let targets = self
            .features
            .iter()
            .filter(|f| f.kind == FeatureKind::Target)
            .count();
        if targets != 1 {
            return Err(Error::Schema(format!(
                "expected exactly one target feature, found {targets}"
            )));
        }
        Ok(())
    }

    pub fn target(&self) -> &FeatureSpec {
        self.features
            .iter()
            .find(|f| f.kind == FeatureKind::Target)
            .expect("validated schema has a target")
    }

    pub fn get(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Input features in schema order (target excluded).
    pub fn inputs(&self) -> impl Iterator<Item = &FeatureSpec> {
        self.features
            .iter()
            .filter(|f| f.kind != FeatureKind::Target)
    }

    /// Description columns referenced by embedded features that are not
    /// themselves schema features.
    pub fn auxiliary_columns(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for f in &self.features {
            if let Some(src) = f.description_source.as_deref() {
                if self.get(src).is_none() && !out.contains(&src) {
                    out.push(src);
                }
            }
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema: FeatureSchema = serde_json::from_str(&text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::new("x", FeatureKind::Numeric),
            FeatureSpec::new("y", FeatureKind::Target),
        ]
    }

    #[test]
    fn requires_exactly_one_target() {
        let mut f = base();
        f.push(FeatureSpec::new("y2", FeatureKind::Target));
        assert!(FeatureSchema::new(f).is_err());
        assert!(FeatureSchema::new(vec![FeatureSpec::new("x", FeatureKind::Numeric)]).is_err());
    }

    #[test]
    fn rejects_duplicate_names() {
        let mut f = base();
        f.push(FeatureSpec::new("x", FeatureKind::CategoricalBinary));
        assert!(matches!(FeatureSchema::new(f), Err(Error::Schema(_))));
    }

    #[test]
    fn embedded_needs_description_source() {
        let mut f = base();
        f.push(FeatureSpec::new("shape", FeatureKind::CategoricalEmbedded));
        assert!(FeatureSchema::new(f).is_err());
        let mut f = base();
        f.push(
            FeatureSpec::new("shape", FeatureKind::CategoricalEmbedded)
                .with_description_source("shape"),
        );
        assert!(FeatureSchema::new(f).is_ok());
    }

    #[test]
    fn json_shape() {
        let json = r#"{"features":[
            {"name":"a","kind":"numeric"},
            {"name":"s","kind":"categorical_embedded","description_source":"s_text","tag":"insert-geometry"},
            {"name":"t","kind":"target"}]}"#;
        let schema: FeatureSchema = serde_json::from_str(json).unwrap();
        schema.validate().unwrap();
        assert_eq!(schema.auxiliary_columns(), vec!["s_text"]);
        assert_eq!(schema.features[1].group_tag(), tags::INSERT_GEOMETRY);
        assert_eq!(schema.features[0].group_tag(), tags::NUMERIC);
    }
}
