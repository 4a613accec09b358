//! Dense, meaning-aware encodings for categorical tabular features.
//!
//! Categorical inputs such as insert shapes or production recipes are
//! replaced by embeddings of their short textual descriptions, instead of
//! one-hot or binary indicator columns. The crate also carries everything
//! needed to measure the downstream effect on a boosted regression model:
//! k-fold learning curves, `total_gain` importance and TreeSHAP attributions
//! aggregated per original feature.
//!
//! Module map:
//!
//! - [`tabular`]: datasets, imputation, standardization, one-hot/binary encoders,
//!   design-matrix assembly with feature groups
//! - [`iso`]: decomposition of ISO indexable-insert designation codes
//! - [`embed`]: paragraph-vector training and external embedding tables
//! - [`similarity`]: cosine similarity matrices
//! - [`reduce`]: PCA and UMAP
//! - [`boost`]: gradient-boosted regression trees
//! - [`explain`]: TreeSHAP and grouped reports
//! - [`eval`]: cross-validation, learning curves, KS normality tests
//! - [`synth`]: synthetic reactor-run data with planted effects
//! - [`pipeline`]: encoder + model orchestration used by `eval` and the CLI

pub mod boost;
pub mod embed;
pub mod error;
pub mod eval;
pub mod explain;
pub mod iso;
pub mod pipeline;
pub mod reduce;
pub mod seed;
pub mod similarity;
pub mod synth;
pub mod tabular;

pub use error::{Error, Result};
