//! Top-k n-gram counting over byte-sequence corpora.
//!
//! The main entry point is [`intergrams::run_intergrams`], a multi-pass
//! counter that grows grams one byte per pass and only counts grams whose
//! prefix survived the previous pass. [`hashgram`] is the two-pass hashing
//! baseline and [`oracle`] the exact dictionary counter both are checked
//! against. [`theory`] evaluates the Zipf recall bounds for the prefix
//! filter, and [`synth`] generates Zipf corpora to exercise them.

pub mod corpus;
pub mod counting;
pub mod error;
pub mod hashgram;
pub mod intergrams;
pub mod metrics;
pub mod oracle;
pub mod synth;
pub mod theory;
pub mod topk;
pub mod trie;
pub mod trigram;

pub use corpus::{Corpus, CorpusSpec, CorpusStats, RecordMode, Sequence};
pub use counting::{CountMode, CountTable, MergeStrategy, PassOptions, SeenBitset};
pub use error::{Error, Result};
pub use hashgram::{run_hashgram, HashgramConfig, HashgramOutput, SecondPass};
pub use intergrams::{run_intergrams, IntergramConfig, IntergramOutput, PassResult};
pub use metrics::{featurize, jaccard, prefix_recall, FeatureMatrix, RunReport};
pub use oracle::{naive_count, GramCountMap};
pub use synth::{generate_corpus, SynthCorpus, SynthSpec};
pub use theory::{BoundInputs, ZipfModel};
pub use topk::{GramCount, TopKList};
pub use trie::PrefixTrie;
