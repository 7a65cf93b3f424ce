//! Lossless multilingual BPE tokenizer toolkit.
//!
//! * [`corpus`]: JSONL corpora, weighted sampling, per-language splits.
//! * [`model`]: block-structured vocabulary, merge rules, model files.
//! * [`trainer`]: BPE training with character coverage, digit splitting,
//!   byte fallback, user-defined symbols and whitespace-run pieces.
//! * [`codec`]: reversible encode/decode.
//! * [`metrics`]: fertility and proportion of continued words.
//! * [`analysis`]: vocabulary overlap, cross-evaluation, vocabulary sweeps.
//!
//! ```
//! use lbpe::{train_bpe, TrainerConfig};
//!
//! let config = TrainerConfig {
//!     vocabulary_size: 320,
//!     ..TrainerConfig::default()
//! };
//! let docs = ["the cat sat on the mat", "the dog sat on the log"];
//! let model = train_bpe(&docs, &config).unwrap();
//! let ids = model.encode_ids("the cat  sat\n");
//! assert_eq!(model.decode(&ids).unwrap(), "the cat  sat\n");
//! ```

pub mod analysis;
pub mod codec;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod model;
mod segment;
pub mod trainer;

pub use codec::{DecodeMode, EncodedSequence};
pub use corpus::{CorpusSpec, Document, SourceSpec};
pub use error::{Error, ModelError, Result};
pub use metrics::{EvalReport, PieceClass, PieceCounts};
pub use model::{
    load_model, save_model, ModelFile, Piece, PieceKind, TokenId, TokenizerModel, TrainerConfig,
    WS_MARKER,
};
pub use trainer::{train_bpe, Trainer, TrainingOutput};
