//! Description embeddings: PV-DBOW training on short category descriptions,
//! and loading of externally produced embedding tables.

mod doc2vec;
mod table;
mod text;

pub use doc2vec::{train_doc2vec, Doc2VecModel, Doc2VecParams};
pub use table::{embed_column, materialize, DescriptionEmbedder, EmbeddedColumns, EmbeddingTable};
pub use text::{preprocess, Corpus, Document};
