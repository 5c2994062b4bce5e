//! Tweet analytics: corpus handling, text preprocessing, lexicon-based
//! sentiment, word-frequency and timeline aggregates, bag-of-words features,
//! a feedforward party classifier and its confusion-matrix evaluation.
//!
//! Batch operations take an [`exec::Execution`] and run on rayon when the
//! default `parallel` feature is enabled.

pub mod analytics;
pub mod corpus;
pub mod evaluation;
pub mod exec;
pub mod features;
pub mod neuralnet;
pub mod sentiment;
pub mod textprep;

pub use corpus::{Corpus, LabelSet, Leaning, PartyLabel, Tweet};
pub use evaluation::ConfusionMatrix;
pub use exec::Execution;
pub use features::{DocumentVector, LabeledDataset, Vocabulary};
pub use neuralnet::{NetworkConfig, NetworkParams};
pub use sentiment::{Scorer, SentimentScore};
pub use textprep::{Preprocessor, TokenSequence};
