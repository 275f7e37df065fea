//! CLIP-S and RefCLIP-S.
//!
//! ```text
//! CLIP-S(c, v)        = w * max(cos(c, v), 0)
//! RefCLIP-S(c, R, v)  = H( CLIP-S(c, v), max(max_{r in R} cos(c, r), 0) )
//! H(x, y)             = 2xy / (x + y),  H = 0 if x or y is 0
//! ```
//!
//! The weight `w` applies to the image term only. Embeddings are treated as
//! opaque; any prompt prefixing happened when they were produced.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionCorpus, Embedding, EmbeddingStore, PairKey};
use crate::error::{Error, Result};

pub const DEFAULT_W: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    w: f64,
    /// When off, CLIP-S is `w * cos` and may be negative. RefCLIP-S always
    /// clamps both terms since the harmonic mean needs nonnegative inputs.
    pub clamp_negative: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            w: DEFAULT_W,
            clamp_negative: true,
        }
    }
}

impl ScoreConfig {
    pub fn new(w: f64) -> Result<Self> {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!(
                "w must be a positive finite number, got {w}"
            )));
        }
        Ok(ScoreConfig {
            w,
            clamp_negative: true,
        })
    }

    pub fn w(&self) -> f64 {
        self.w
    }
}

/// Which per-pair score a downstream protocol consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "clip-s")]
    ClipS,
    #[serde(rename = "ref-clip-s")]
    RefClipS,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub image_id: String,
    pub candidate_id: String,
    pub clip_s: f64,
    pub ref_clip_s: Option<f64>,
    pub raw_cos_image: f64,
    pub raw_max_ref_cos: Option<f64>,
}

impl ScoredPair {
    pub fn key(&self) -> PairKey {
        PairKey::new(&self.image_id, &self.candidate_id)
    }

    pub fn get(&self, kind: ScoreKind) -> Option<f64> {
        match kind {
            ScoreKind::ClipS => Some(self.clip_s),
            ScoreKind::RefClipS => self.ref_clip_s,
        }
    }
}

/// Dot product of two unit vectors, clamped into [-1, 1].
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

pub fn clip_score_from_cosine(cos: f64, cfg: &ScoreConfig) -> f64 {
    if cfg.clamp_negative {
        cfg.w * cos.max(0.0)
    } else {
        cfg.w * cos
    }
}

pub fn clip_score(candidate: &Embedding, image: &Embedding, cfg: &ScoreConfig) -> Result<f64> {
    Ok(clip_score_from_cosine(cosine(candidate, image)?, cfg))
}

/// `2xy / (x + y)` for nonnegative inputs, 0 when either is 0.
pub fn harmonic_mean(x: f64, y: f64) -> f64 {
    debug_assert!(x >= 0.0 && y >= 0.0);
    if x <= 0.0 || y <= 0.0 {
        0.0
    } else {
        2.0 * x * y / (x + y)
    }
}

pub fn max_reference_cosine(candidate: &Embedding, references: &[&Embedding]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::InvalidInput(
            "RefCLIP-S needs at least one reference".into(),
        ));
    }
    references
        .iter()
        .map(|r| cosine(candidate, r))
        .try_fold(f64::NEG_INFINITY, |acc, c| Ok(acc.max(c?)))
}

/// RefCLIP-S from the raw image cosine and the raw best reference cosine.
pub fn ref_clip_score_from_cosines(cos_image: f64, max_ref_cos: f64, cfg: &ScoreConfig) -> f64 {
    harmonic_mean(cfg.w * cos_image.max(0.0), max_ref_cos.max(0.0))
}

pub fn ref_clip_score(
    candidate: &Embedding,
    references: &[&Embedding],
    image: &Embedding,
    cfg: &ScoreConfig,
) -> Result<f64> {
    let max_ref = max_reference_cosine(candidate, references)?;
    let cos_image = cosine(candidate, image)?;
    Ok(ref_clip_score_from_cosines(cos_image, max_ref, cfg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub pairs: Vec<ScoredPair>,
    pub corpus_clip_s: f64,
    /// Present only when every item had at least one reference.
    pub corpus_ref_clip_s: Option<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresSummary {
    pub corpus_clip_s: f64,
    pub corpus_ref_clip_s: Option<f64>,
    pub w: f64,
    pub n: usize,
}

impl CorpusScores {
    pub fn summary(&self) -> ScoresSummary {
        ScoresSummary {
            corpus_clip_s: self.corpus_clip_s,
            corpus_ref_clip_s: self.corpus_ref_clip_s,
            w: self.w,
            n: self.pairs.len(),
        }
    }

    pub fn score_map(&self, kind: ScoreKind) -> Result<HashMap<PairKey, f64>> {
        score_map(&self.pairs, kind)
    }
}

/// Collects one score per pair; fails if `kind` is missing for any pair.
pub fn score_map(pairs: &[ScoredPair], kind: ScoreKind) -> Result<HashMap<PairKey, f64>> {
    pairs
        .iter()
        .map(|p| {
            p.get(kind).map(|s| (p.key(), s)).ok_or_else(|| {
                Error::InvalidInput(format!("pair {} has no {kind:?} score", p.key()))
            })
        })
        .collect()
}

/// Sequential mean in input order.
fn ordered_mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0f64, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Scores every corpus item. `references` is optional; when supplied, every
/// reference text of every item must resolve in it.
pub fn corpus_scores(
    corpus: &CaptionCorpus,
    candidates: &EmbeddingStore,
    images: &EmbeddingStore,
    references: Option<&EmbeddingStore>,
    cfg: &ScoreConfig,
) -> Result<CorpusScores> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty corpus".into()));
    }
    let mut missing = BTreeSet::new();
    for item in corpus.items() {
        let cand = item.candidate_embedding_id();
        if !candidates.contains(&cand) {
            missing.insert(format!("candidate:{cand}"));
        }
        if !images.contains(&item.image_id) {
            missing.insert(format!("image:{}", item.image_id));
        }
        if let Some(refs) = references {
            for r in &item.references {
                if !refs.contains(r) {
                    missing.insert(format!("reference:{r}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing.into_iter().collect()));
    }

    let pairs = corpus
        .items()
        .par_iter()
        .map(|item| -> Result<ScoredPair> {
            let c = candidates.get(&item.candidate_embedding_id()).unwrap();
            let v = images.get(&item.image_id).unwrap();
            let raw_cos_image = cosine(c, v)?;
            let (raw_max_ref_cos, ref_clip_s) = match references {
                Some(store) if !item.references.is_empty() => {
                    let refs: Vec<&Embedding> = item
                        .references
                        .iter()
                        .map(|r| store.get(r).unwrap())
                        .collect();
                    let m = max_reference_cosine(c, &refs)?;
                    (
                        Some(m),
                        Some(ref_clip_score_from_cosines(raw_cos_image, m, cfg)),
                    )
                }
                _ => (None, None),
            };
            Ok(ScoredPair {
                image_id: item.image_id.clone(),
                candidate_id: item.candidate_id.clone(),
                clip_s: clip_score_from_cosine(raw_cos_image, cfg),
                ref_clip_s,
                raw_cos_image,
                raw_max_ref_cos,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let corpus_clip_s = ordered_mean(pairs.iter().map(|p| p.clip_s));
    let corpus_ref_clip_s = if pairs.iter().all(|p| p.ref_clip_s.is_some()) {
        Some(ordered_mean(pairs.iter().filter_map(|p| p.ref_clip_s)))
    } else {
        None
    };
    Ok(CorpusScores {
        pairs,
        corpus_clip_s,
        corpus_ref_clip_s,
        w: cfg.w,
    })
}

pub fn write_scores_jsonl(scores: &CorpusScores, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in &scores.pairs {
        write_json_line(&mut w, p, path)?;
    }
    write_json_line(&mut w, &scores.summary(), path)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json_line<T: Serialize>(w: &mut impl Write, value: &T, path: &Path) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::Invariant(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

/// Reads a scores file written by [`write_scores_jsonl`]: pair lines followed
/// by exactly one summary line.
pub fn read_scores_jsonl(path: impl AsRef<Path>) -> Result<(Vec<ScoredPair>, ScoresSummary)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(u64, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u64 + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let Some((&(last_no, last), body)) = lines.split_last() else {
        return Err(Error::load(path, 1, "empty scores file"));
    };
    let summary: ScoresSummary = serde_json::from_str(last)
        .map_err(|e| Error::load(path, last_no, format!("expected summary line: {e}")))?;
    let mut pairs = Vec::with_capacity(body.len());
    let mut seen = std::collections::HashSet::new();
    for &(no, l) in body {
        let p: ScoredPair =
            serde_json::from_str(l).map_err(|e| Error::load(path, no, e.to_string()))?;
        if !seen.insert(p.key()) {
            return Err(Error::load(path, no, format!("duplicate pair {}", p.key())));
        }
        pairs.push(p);
    }
    if pairs.len() != summary.n {
        return Err(Error::load(
            path,
            last_no,
            format!(
                "summary declares n={} but file has {} pairs",
                summary.n,
                pairs.len()
            ),
        ));
    }
    Ok((pairs, summary))
}
