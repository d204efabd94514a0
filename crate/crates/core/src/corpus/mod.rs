//! Reverse-QA samples: data model, file format, splitting, synthetic
//! generation and indexing.

mod io;
mod sample;
mod split;
mod synthetic;
mod vocab;

pub use io::{
    corpus_fingerprint, load_corpus, parse_corpus, save_corpus, write_corpus, CorpusStats,
    LabelCounts,
};
pub use sample::{Label, QuestionType, Sample};
pub use split::{split, SplitGranularity, SplitSpec, Splits};
pub use synthetic::{generate_synthetic, NoiseConfig, SyntheticConfig};
pub use vocab::{
    index_all, option_indicator, truncate_and_index, IndexedSample, Vocab, DEFAULT_MAX_LEN,
    UNK, UNK_INDEX,
};
