//! Caption-level correlation with Likert ratings: one point per rating (A)
//! against one mean per caption (B).
//!
//! ```bash
//! cargo run --example likert_aggregation
//! ```

use std::collections::HashMap;

use capeval::corpus::{JudgmentSet, PairKey};
use capeval::harness::{likert_correlation, Aggregation, LikertProtocolConfig};
use capeval::rankstats::Statistic;
use capeval::report::percent;
use capeval::scoring::{corpus_scores, ScoreConfig, ScoreKind};
use capeval::synthetic::{generate, SyntheticSpec};

fn main() -> capeval::Result<()> {
    // three captions whose raters disagree on the first one
    let mut judgments = JudgmentSet::default();
    let mut scores = HashMap::new();
    for (i, (score, ratings)) in [
        (0.1, vec![1.0, 3.0]),
        (0.2, vec![2.0, 2.0]),
        (0.3, vec![4.0, 4.0]),
    ]
    .into_iter()
    .enumerate()
    {
        let key = PairKey::new(format!("img{i}"), "c0");
        judgments.likert.insert(key.clone(), ratings);
        scores.insert(key, score);
    }
    for aggregation in [Aggregation::FlattenA, Aggregation::MeanB] {
        let cfg = LikertProtocolConfig {
            aggregation,
            ..LikertProtocolConfig::default()
        };
        let out = likert_correlation(&scores, &judgments, &cfg)?;
        println!(
            "{aggregation:?}: tau-c {:.4} over {} points",
            out.value, out.points
        );
    }

    let data = generate(&SyntheticSpec::default())?;
    let scored = corpus_scores(
        &data.corpus,
        &data.candidates,
        &data.images,
        Some(&data.references),
        &ScoreConfig::default(),
    )?;
    for kind in [ScoreKind::ClipS, ScoreKind::RefClipS] {
        let map = scored.score_map(kind)?;
        for (aggregation, statistic) in [
            (Aggregation::FlattenA, Statistic::TauC),
            (Aggregation::MeanB, Statistic::TauB),
        ] {
            let cfg = LikertProtocolConfig {
                aggregation,
                statistic,
                bin_width: None,
            };
            let out = likert_correlation(&map, &data.judgments, &cfg)?;
            println!(
                "synthetic {kind:?} {aggregation:?} {statistic:?}: {}",
                percent(out.value)
            );
        }
    }
    Ok(())
}
