//! Poisson-centered diagnostics for text generated during language-model
//! training: segmentation and labeling, windowed count statistics, lexical
//! metrics, transition detection, and synthetic ground-truth generators.

pub mod corpus;
pub mod detector;
pub mod error;
pub mod lexmetrics;
pub mod manifest;
pub mod rng;
pub mod segmenter;
pub mod stats;
pub mod synth;

pub use corpus::{load_corpus, CorpusBundle};
pub use error::{Error, Result};
pub use manifest::{RunManifest, SampleRecord};
pub use segmenter::{label_stream, Label, LabeledWord, LabeledWordStream, StreamSource};
