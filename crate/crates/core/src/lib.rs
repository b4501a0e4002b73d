//! Algorithms for low-resource machine translation experiments.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that does not
//! touch the filesystem: corpus handling, byte-pair encoding, smoothed n-gram
//! language models, an IBM Model 1 lexical translation model with a windowed
//! beam decoder, noisy-channel reranking, probability-averaging ensembles,
//! back-translation / self-training data generation, random hyper-parameter
//! search, corpus BLEU, bitext mining and a synthetic language-pair generator.
//!
//! Enable the `parallel` feature to run sentence- and trial-level work on the
//! rayon thread pool. Results are identical with and without it.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod augment;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod lm;
mod math;
pub mod metrics;
pub mod mine;
mod par;
pub mod rerank;
pub mod search;
pub mod seed;
pub mod subword;
pub mod synth;
pub mod tm;
mod vocab;

pub use corpus::{DataMix, Direction, Pair, Sentence, Side, Tag, TaggedDataset};
pub use ensemble::Ensemble;
pub use error::{Error, Result};
pub use lm::NGramLM;
pub use rerank::{NBestEntry, NBestList, NoisyChannelWeights};
pub use subword::BpeModel;
pub use tm::{DecoderSettings, LexModel, Translator};
