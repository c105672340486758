//! Sentence-pair ingestion, vocabulary, embedding tables, splitting and
//! batching.
//!
//! Inputs are expected to be English already; no translation or
//! lemmatization happens here.

mod embeddings;
mod pair;
mod split;
mod vocab;

pub use embeddings::{
    load_embeddings, load_embeddings_binary, load_embeddings_text, write_embeddings_binary, write_embeddings_text,
    EmbeddingFormat, EmbeddingOrigin, EmbeddingTable, RANDOM_ROW_SCALE,
};
pub use pair::{format_sts, parse_sts_str, parse_sts_tsv, tokenize, SentencePair};
pub use split::{batch_indices, batches, load_frequencies, split_80_20, DatasetSplit, MIN_SPLIT_PAIRS};
pub use vocab::{oov_stats, OovStats, Vocabulary, UNK, UNK_TOKEN};
