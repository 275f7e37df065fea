//! Caption evaluation from precomputed CLIP embeddings.
//!
//! * [`scoring`]: CLIP-S (`w * max(cos(c, v), 0)`), RefCLIP-S (harmonic mean
//!   with the best reference cosine) and corpus averages.
//! * [`rankstats`]: tie-aware Kendall tau-b / tau-c, Spearman and Pearson.
//! * [`harness`]: Likert correlation (flattened or averaged ratings),
//!   pairwise preference accuracy with resampled references, FOIL detection
//!   and system-level correlation.
//! * [`selection`]: greedy forward selection of metrics by cross-validated
//!   R², repeated over bootstrap resamples.
//! * [`diagnostics`]: best-of-N random-metric simulation and cosine
//!   similarity distributions.
//! * [`corpus`]: the `.ceb` embedding format and JSONL/CSV inputs.
//!
//! The `capeval` binary wraps all of this in subcommands; see [`cli`].

pub mod cli;
pub mod corpus;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod rankstats;
pub mod report;
pub mod scoring;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
