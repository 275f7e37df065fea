//! Pairwise preference accuracy, with RefCLIP-S rescored on five random
//! draws of five references each.
//!
//! ```bash
//! cargo run --example pairwise_preference
//! ```

use capeval::harness::{
    pairwise_accuracy, preference_pairs, resampled_reference_eval, ResampleConfig, StoreScorer,
    TiePolicy,
};
use capeval::report::percent;
use capeval::scoring::{corpus_scores, ScoreConfig, ScoreKind};
use capeval::synthetic::{generate, SyntheticSpec};

fn main() -> capeval::Result<()> {
    let data = generate(&SyntheticSpec {
        images: 60,
        ..SyntheticSpec::default()
    })?;
    let cfg = ScoreConfig::default();
    let scores = corpus_scores(
        &data.corpus,
        &data.candidates,
        &data.images,
        Some(&data.references),
        &cfg,
    )?;

    for policy in [TiePolicy::default(), TiePolicy::HalfCredit] {
        let prefs = preference_pairs(&data.judgments, &scores.score_map(ScoreKind::ClipS)?)?;
        let out = pairwise_accuracy(&prefs, policy)?;
        println!(
            "CLIP-S {policy:?}: {} ({} pairs, {} vote ties dropped, {} score ties)",
            percent(out.accuracy),
            out.evaluated,
            out.vote_ties_dropped,
            out.score_ties
        );
    }

    let scorer = StoreScorer {
        candidates: &data.candidates,
        images: &data.images,
        references: Some(&data.references),
        config: cfg,
        kind: ScoreKind::RefClipS,
    };
    let pool = data.corpus.reference_pool();
    let rc = ResampleConfig {
        seed: 1,
        ..ResampleConfig::default()
    };
    let out = resampled_reference_eval(&data.corpus, &data.judgments, &pool, &rc, |item, refs| {
        scorer.score(item, refs)
    })?;
    let per_draw: Vec<f64> = out.per_draw.iter().map(|d| percent(d.accuracy)).collect();
    println!(
        "RefCLIP-S, 5 refs x 5 draws: mean {} per draw {per_draw:?}",
        percent(out.mean)
    );
    Ok(())
}
