//! FOIL-style detection: does the true caption outscore a near-duplicate
//! with one wrong word?
//!
//! ```bash
//! cargo run --example foil_detection
//! ```

use capeval::corpus::Embedding;
use capeval::harness::{foil_accuracy, FoilPair, TiePolicy};
use capeval::report::percent;
use capeval::scoring::{clip_score, ref_clip_score, ScoreConfig};
use capeval::synthetic::{random_unit, with_cosine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> capeval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = ScoreConfig::default();
    let (mut no_refs, mut with_refs) = (Vec::new(), Vec::new());
    for _ in 0..500 {
        let image = random_unit(64, &mut rng);
        let truth = with_cosine(&image, 0.3, &mut rng);
        // the foil is close to the truth but drifts away from the image
        let foil = with_cosine(&truth, 0.9, &mut rng);
        let reference = with_cosine(&truth, rng.random_range(0.6..0.9), &mut rng);
        let [v, t, f, r] =
            [image, truth, foil, reference].map(|x| Embedding::from_f64(&x).unwrap());
        no_refs.push(FoilPair {
            true_score: clip_score(&t, &v, &cfg)?,
            foil_score: clip_score(&f, &v, &cfg)?,
        });
        with_refs.push(FoilPair {
            true_score: ref_clip_score(&t, &[&r], &v, &cfg)?,
            foil_score: ref_clip_score(&f, &[&r], &v, &cfg)?,
        });
    }
    for (name, pairs) in [("CLIP-S", &no_refs), ("RefCLIP-S, 1 ref", &with_refs)] {
        let out = foil_accuracy(pairs, TiePolicy::default())?;
        println!("{name}: {} (chance 50.0)", percent(out.accuracy));
    }
    Ok(())
}
