//! Dimensionality reduction of embedding matrices.

mod pca;
pub mod umap;

pub use pca::{
    pca_fit, pca_inverse, pca_transform, reconstruction_curve, reconstruction_error, PcaModel,
};
pub use umap::{umap_fit_transform, UmapParams};
