//! Evaluation protocols over per-pair metric scores and human judgments.
//!
//! * caption-level Likert correlation, with ratings either flattened (one
//!   point per individual rating, "method A") or averaged per pair
//!   ("method B");
//! * pairwise preference accuracy against the majority vote, optionally
//!   averaged over several random draws of `k` references per image;
//! * FOIL hallucination detection (true caption vs. foil);
//! * system-level Spearman / Pearson against M1 and M2.
//!
//! Reference sets are taken as given. Whether a rated candidate should be
//! removed from its own references (as some Composite setups do) is decided
//! when the captions file is prepared.

use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CaptionCorpus, CaptionItem, Embedding, EmbeddingStore, JudgmentSet, PairKey};
use crate::error::{Error, Result};
use crate::rankstats::{PairedSample, Statistic};
use crate::scoring::{self, ScoreConfig, ScoreKind, ScoredPair};

pub const DEFAULT_TIE_SEED: u64 = 20210707;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// One point per individual rating; the pair's score is repeated.
    #[serde(rename = "A")]
    FlattenA,
    /// One point per pair, against the mean rating.
    #[serde(rename = "B")]
    MeanB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertProtocolConfig {
    pub aggregation: Aggregation,
    pub statistic: Statistic,
    /// Snap human values to the nearest multiple of this width before
    /// correlating (e.g. 1/3 for proportions of three binary votes).
    pub bin_width: Option<f64>,
}

impl Default for LikertProtocolConfig {
    fn default() -> Self {
        LikertProtocolConfig {
            aggregation: Aggregation::FlattenA,
            statistic: Statistic::TauC,
            bin_width: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertOutcome {
    pub value: f64,
    /// Judged (image, candidate) pairs.
    pub pairs: usize,
    /// Points fed to the statistic.
    pub points: usize,
}

pub fn likert_correlation(
    scores: &HashMap<PairKey, f64>,
    judgments: &JudgmentSet,
    cfg: &LikertProtocolConfig,
) -> Result<LikertOutcome> {
    if let Some(w) = cfg.bin_width {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bin width must be positive, got {w}"
            )));
        }
    }
    let snap = |v: f64| match cfg.bin_width {
        Some(w) => (v / w).round() * w,
        None => v,
    };
    let mut missing = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (key, ratings) in &judgments.likert {
        let Some(&score) = scores.get(key) else {
            missing.push(key.to_string());
            continue;
        };
        match cfg.aggregation {
            Aggregation::FlattenA => {
                for &r in ratings {
                    xs.push(score);
                    ys.push(snap(r));
                }
            }
            Aggregation::MeanB => {
                xs.push(score);
                ys.push(snap(ratings.iter().sum::<f64>() / ratings.len() as f64));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing));
    }
    let value = cfg.statistic.compute(&PairedSample::new(&xs, &ys)?)?;
    Ok(LikertOutcome {
        value,
        pairs: judgments.likert.len(),
        points: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Each score tie is a fair coin flip from a ChaCha8 stream seeded here,
    /// consumed in input order.
    SeededRandom { seed: u64 },
    /// Each score tie earns half a point.
    HalfCredit,
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::SeededRandom {
            seed: DEFAULT_TIE_SEED,
        }
    }
}

struct TieBreaker {
    policy: TiePolicy,
    rng: Option<ChaCha8Rng>,
}

impl TieBreaker {
    fn new(policy: TiePolicy) -> Self {
        let rng = match policy {
            TiePolicy::SeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            TiePolicy::HalfCredit => None,
        };
        TieBreaker { policy, rng }
    }

    fn credit(&mut self) -> f64 {
        match self.policy {
            TiePolicy::HalfCredit => 0.5,
            TiePolicy::SeededRandom { .. } => {
                if self.rng.as_mut().unwrap().random_bool(0.5) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub score_a: f64,
    pub score_b: f64,
    pub votes_a: u32,
    pub votes_b: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyOutcome {
    pub accuracy: f64,
    /// Pairs in the denominator.
    pub evaluated: usize,
    /// Pairs without a majority vote, excluded from the denominator.
    pub vote_ties_dropped: usize,
    /// Evaluated pairs whose two scores were equal.
    pub score_ties: usize,
}

/// Credit for one comparison where `preferred` should outscore `other`.
fn judge(preferred: f64, other: f64, ties: &mut TieBreaker, score_ties: &mut usize) -> f64 {
    if preferred > other {
        1.0
    } else if preferred < other {
        0.0
    } else {
        *score_ties += 1;
        ties.credit()
    }
}

/// Fraction of majority-decided pairs where the preferred caption scores
/// strictly higher.
pub fn pairwise_accuracy(pairs: &[PreferencePair], policy: TiePolicy) -> Result<AccuracyOutcome> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no pairwise judgments".into()));
    }
    let mut ties = TieBreaker::new(policy);
    let (mut credit, mut evaluated, mut dropped, mut score_ties) = (0.0, 0usize, 0usize, 0usize);
    for p in pairs {
        let (preferred, other) = match p.votes_a.cmp(&p.votes_b) {
            std::cmp::Ordering::Greater => (p.score_a, p.score_b),
            std::cmp::Ordering::Less => (p.score_b, p.score_a),
            std::cmp::Ordering::Equal => {
                dropped += 1;
                continue;
            }
        };
        evaluated += 1;
        credit += judge(preferred, other, &mut ties, &mut score_ties);
    }
    if evaluated == 0 {
        return Err(Error::Undefined(format!(
            "no pairs with a majority preference ({dropped} vote ties dropped)"
        )));
    }
    Ok(AccuracyOutcome {
        accuracy: credit / evaluated as f64,
        evaluated,
        vote_ties_dropped: dropped,
        score_ties,
    })
}

/// Pairs up the scores of both sides of every pairwise judgment.
pub fn preference_pairs(
    judgments: &JudgmentSet,
    scores: &HashMap<PairKey, f64>,
) -> Result<Vec<PreferencePair>> {
    let mut missing = BTreeSet::new();
    let mut out = Vec::with_capacity(judgments.pairwise.len());
    for j in &judgments.pairwise {
        let (a, b) = (scores.get(&j.key_a()), scores.get(&j.key_b()));
        if a.is_none() {
            missing.insert(j.key_a().to_string());
        }
        if b.is_none() {
            missing.insert(j.key_b().to_string());
        }
        if let (Some(&score_a), Some(&score_b)) = (a, b) {
            out.push(PreferencePair {
                score_a,
                score_b,
                votes_a: j.votes_a,
                votes_b: j.votes_b,
            });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIds(missing.into_iter().collect()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoilPair {
    pub true_score: f64,
    pub foil_score: f64,
}

/// Fraction of pairs where the true caption outscores its foil. Chance is 0.5.
pub fn foil_accuracy(pairs: &[FoilPair], policy: TiePolicy) -> Result<AccuracyOutcome> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no FOIL pairs".into()));
    }
    let mut ties = TieBreaker::new(policy);
    let mut score_ties = 0;
    let credit: f64 = pairs
        .iter()
        .map(|p| judge(p.true_score, p.foil_score, &mut ties, &mut score_ties))
        .sum();
    Ok(AccuracyOutcome {
        accuracy: credit / pairs.len() as f64,
        evaluated: pairs.len(),
        vote_ties_dropped: 0,
        score_ties,
    })
}

/// Reads FOIL pairs out of pairwise judgments: the side with more votes is
/// the true caption.
pub fn foil_pairs(
    judgments: &JudgmentSet,
    scores: &HashMap<PairKey, f64>,
) -> Result<Vec<FoilPair>> {
    preference_pairs(judgments, scores)?
        .into_iter()
        .zip(&judgments.pairwise)
        .map(|(p, j)| match p.votes_a.cmp(&p.votes_b) {
            std::cmp::Ordering::Greater => Ok(FoilPair {
                true_score: p.score_a,
                foil_score: p.score_b,
            }),
            std::cmp::Ordering::Less => Ok(FoilPair {
                true_score: p.score_b,
                foil_score: p.score_a,
            }),
            std::cmp::Ordering::Equal => Err(Error::InvalidInput(format!(
                "FOIL record {}/{} vs {} does not say which caption is true",
                j.image_id, j.candidate_a_id, j.candidate_b_id
            ))),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub refs_per_draw: usize,
    pub draws: usize,
    pub seed: u64,
    pub tie_policy: TiePolicy,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        ResampleConfig {
            refs_per_draw: 5,
            draws: 5,
            seed: 0,
            tie_policy: TiePolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampledOutcome {
    pub mean: f64,
    pub per_draw: Vec<AccuracyOutcome>,
}

/// Pairwise accuracy averaged over `draws` random reference subsets.
///
/// For draw `d`, `refs_per_draw` references are sampled without replacement
/// from each judged image's pool using a ChaCha8 stream seeded with
/// `seed + d`; images are visited in sorted id order. Score ties use the same
/// tie policy in every draw, so a reference-free scorer gives identical draws.
pub fn resampled_reference_eval<F>(
    corpus: &CaptionCorpus,
    judgments: &JudgmentSet,
    reference_pool: &IndexMap<String, Vec<String>>,
    cfg: &ResampleConfig,
    scorer: F,
) -> Result<ResampledOutcome>
where
    F: Fn(&CaptionItem, &[&str]) -> Result<f64> + Sync,
{
    if cfg.draws == 0 {
        return Err(Error::InvalidInput("draws must be at least 1".into()));
    }
    let images: BTreeSet<&str> = judgments
        .pairwise
        .iter()
        .map(|j| j.image_id.as_str())
        .collect();
    for &image in &images {
        let have = reference_pool.get(image).map_or(0, Vec::len);
        if have < cfg.refs_per_draw {
            return Err(Error::InvalidInput(format!(
                "image {image} has {have} references, cannot draw {}",
                cfg.refs_per_draw
            )));
        }
    }
    let mut needed: Vec<PairKey> = Vec::new();
    let mut seen = HashSet::new();
    for j in &judgments.pairwise {
        for key in [j.key_a(), j.key_b()] {
            if corpus.get(&key).is_none() {
                return Err(Error::MissingIds(vec![key.to_string()]));
            }
            if seen.insert(key.clone()) {
                needed.push(key);
            }
        }
    }

    let per_draw = (0..cfg.draws)
        .into_par_iter()
        .map(|d| -> Result<AccuracyOutcome> {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(d as u64));
            let drawn: HashMap<&str, Vec<&str>> = images
                .iter()
                .map(|&image| {
                    let pool = &reference_pool[image];
                    let picked = sample(&mut rng, pool.len(), cfg.refs_per_draw)
                        .into_iter()
                        .map(|i| pool[i].as_str())
                        .collect();
                    (image, picked)
                })
                .collect();
            let scores = needed
                .iter()
                .map(|key| {
                    let item = corpus.get(key).unwrap();
                    Ok((key.clone(), scorer(item, &drawn[item.image_id.as_str()])?))
                })
                .collect::<Result<HashMap<_, _>>>()?;
            pairwise_accuracy(&preference_pairs(judgments, &scores)?, cfg.tie_policy)
        })
        .collect::<Result<Vec<_>>>()?;

    let mean = per_draw.iter().map(|o| o.accuracy).sum::<f64>() / per_draw.len() as f64;
    Ok(ResampledOutcome { mean, per_draw })
}

/// Scores a caption against its image and an explicit reference set, looking
/// embeddings up by the crate's id convention.
pub struct StoreScorer<'a> {
    pub candidates: &'a EmbeddingStore,
    pub images: &'a EmbeddingStore,
    pub references: Option<&'a EmbeddingStore>,
    pub config: ScoreConfig,
    pub kind: ScoreKind,
}

impl StoreScorer<'_> {
    pub fn score(&self, item: &CaptionItem, refs: &[&str]) -> Result<f64> {
        let id = item.candidate_embedding_id();
        let c = self
            .candidates
            .get(&id)
            .ok_or_else(|| Error::MissingIds(vec![format!("candidate:{id}")]))?;
        let v = self
            .images
            .get(&item.image_id)
            .ok_or_else(|| Error::MissingIds(vec![format!("image:{}", item.image_id)]))?;
        match self.kind {
            ScoreKind::ClipS => scoring::clip_score(c, v, &self.config),
            ScoreKind::RefClipS => {
                let store = self.references.ok_or_else(|| {
                    Error::InvalidInput("RefCLIP-S needs reference embeddings".into())
                })?;
                let mut missing = Vec::new();
                let embs: Vec<&Embedding> = refs
                    .iter()
                    .filter_map(|r| {
                        let e = store.get(r);
                        if e.is_none() {
                            missing.push(format!("reference:{r}"));
                        }
                        e
                    })
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::MissingIds(missing));
                }
                scoring::ref_clip_score(c, &embs, v, &self.config)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system_id: String,
    pub metric_mean: f64,
    pub human_m1: f64,
    pub human_m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemCorrelation {
    pub spearman_m1: f64,
    pub spearman_m2: f64,
    pub pearson_m1: f64,
    pub pearson_m2: f64,
}

/// Correlates per-system metric means with M1 and M2. With only a dozen
/// systems these numbers have very low statistical power; see
/// [`crate::diagnostics::power_simulation`].
pub fn system_level_correlation(summaries: &[SystemSummary]) -> Result<SystemCorrelation> {
    if summaries.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "system-level correlation needs at least 3 systems, got {}",
            summaries.len()
        )));
    }
    let mut ids = HashSet::new();
    for s in summaries {
        if !ids.insert(s.system_id.as_str()) {
            return Err(Error::InvalidInput(format!(
                "duplicate system {:?}",
                s.system_id
            )));
        }
    }
    let metric: Vec<f64> = summaries.iter().map(|s| s.metric_mean).collect();
    let m1: Vec<f64> = summaries.iter().map(|s| s.human_m1).collect();
    let m2: Vec<f64> = summaries.iter().map(|s| s.human_m2).collect();
    let s1 = PairedSample::new(&metric, &m1)?;
    let s2 = PairedSample::new(&metric, &m2)?;
    Ok(SystemCorrelation {
        spearman_m1: Statistic::Spearman.compute(&s1)?,
        spearman_m2: Statistic::Spearman.compute(&s2)?,
        pearson_m1: Statistic::Pearson.compute(&s1)?,
        pearson_m2: Statistic::Pearson.compute(&s2)?,
    })
}

/// Mean score per system, where a pair's `candidate_id` names its system.
/// Systems appear in first-seen order.
pub fn system_means(pairs: &[ScoredPair], kind: ScoreKind) -> Result<IndexMap<String, f64>> {
    let mut acc: IndexMap<String, (f64, usize)> = IndexMap::new();
    for p in pairs {
        let s = p.get(kind).ok_or_else(|| {
            Error::InvalidInput(format!("pair {} has no {kind:?} score", p.key()))
        })?;
        let e = acc.entry(p.candidate_id.clone()).or_insert((0.0, 0));
        e.0 += s;
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect())
}
