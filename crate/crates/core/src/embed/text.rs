use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lowercase word tokens; punctuation and other symbols act as separators.
pub fn preprocess(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub tag: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut tags = HashSet::new();
        for d in &documents {
            if !tags.insert(d.tag.as_str()) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate document tag `{}`",
                    d.tag
                )));
            }
        }
        Ok(Self { documents })
    }

    /// One document per distinct description, tagged by the description
    /// itself and sorted by tag so the corpus does not depend on row order.
    pub fn from_descriptions<'a>(descriptions: impl IntoIterator<Item = &'a str>) -> Self {
        let mut uniq: Vec<&str> = descriptions.into_iter().collect();
        uniq.sort_unstable();
        uniq.dedup();
        Self {
            documents: uniq
                .into_iter()
                .map(|d| Document {
                    tag: d.to_string(),
                    tokens: preprocess(d),
                })
                .collect(),
        }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}
