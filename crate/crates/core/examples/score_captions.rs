//! Score a synthetic corpus with CLIP-S and RefCLIP-S, then round-trip the
//! embeddings and scores through their on-disk formats.
//!
//! ```bash
//! cargo run --example score_captions
//! ```

use capeval::corpus::{read_embedding_store, write_embedding_store};
use capeval::scoring::{corpus_scores, read_scores_jsonl, write_scores_jsonl, ScoreConfig};
use capeval::synthetic::{generate, SyntheticSpec};

fn main() -> capeval::Result<()> {
    let data = generate(&SyntheticSpec {
        images: 8,
        ..SyntheticSpec::default()
    })?;
    let dir = std::env::temp_dir().join("capeval-score-example");
    std::fs::create_dir_all(&dir).map_err(|e| capeval::Error::Invariant(e.to_string()))?;

    let cand_path = dir.join("cand.ceb");
    write_embedding_store(&data.candidates, &cand_path)?;
    let candidates = read_embedding_store(&cand_path)?;
    println!(
        "{} candidate embeddings of dim {}",
        candidates.len(),
        candidates.dimension()
    );

    let scores = corpus_scores(
        &data.corpus,
        &candidates,
        &data.images,
        Some(&data.references),
        &ScoreConfig::default(),
    )?;
    for p in scores.pairs.iter().take(4) {
        println!(
            "{:<10} raw cos {:.3}  CLIP-S {:.3}  RefCLIP-S {:.3}",
            p.key().to_string(),
            p.raw_cos_image,
            p.clip_s,
            p.ref_clip_s.unwrap_or(f64::NAN)
        );
    }
    println!("corpus CLIP-S    {:.4}", scores.corpus_clip_s);
    println!(
        "corpus RefCLIP-S {:.4}",
        scores.corpus_ref_clip_s.unwrap_or(f64::NAN)
    );

    let path = dir.join("scores.jsonl");
    write_scores_jsonl(&scores, &path)?;
    let (pairs, summary) = read_scores_jsonl(&path)?;
    assert_eq!(pairs, scores.pairs);
    println!(
        "wrote {} ({} pairs, w = {})",
        path.display(),
        summary.n,
        summary.w
    );
    Ok(())
}
