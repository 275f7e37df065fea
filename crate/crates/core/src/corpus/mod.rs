//! On-disk formats and in-memory stores: embeddings (`.ceb`), caption
//! corpora and judgments (JSONL), and metric tables (CSV).
//!
//! Embedding ids follow one convention throughout the crate:
//!
//! * image embeddings are keyed by `image_id`,
//! * candidate caption embeddings by `"<image_id>/<candidate_id>"`,
//! * reference caption embeddings by the reference text itself.

mod embedding;
mod text;

pub use embedding::{read_embedding_store, write_embedding_store, Embedding, EmbeddingStore};
pub use text::{
    load_corpus, read_captions, read_judgments, read_metric_table, CaptionCorpus, CaptionItem,
    JudgmentSet, MetricTable, PairKey, PairwiseJudgment,
};
