//! Tabular data model, imputation, standardization, classic categorical
//! encoders and design-matrix assembly.

mod dataset;
mod design;
mod encode;
mod impute;
mod schema;

pub use dataset::{Column, Dataset};
pub use design::{
    assemble_design_matrix, target_vector, DesignMatrix, EmbeddedEncoder, EncoderSet, FittedEncoder,
};
pub use encode::{BinaryEncoder, OneHotEncoder, StandardizationParams};
pub use impute::{impute, FillValue, ImputePlan, ImputeStrategy, Imputer};
pub use schema::{tags, FeatureKind, FeatureSchema, FeatureSpec};
