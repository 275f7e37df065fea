//! Synthetic embeddings and judgments for demos and end-to-end tests.
//!
//! Each image gets a random unit vector `v` and a "gold caption" direction
//! `t`. A candidate of latent quality `q` in [0, 1) is
//! `normalize((0.05 + 0.3q) v + (0.1 + 0.6q) t + n)` for isotropic noise `n`
//! of norm ~1, so both its image and reference cosines grow with `q`, in
//! roughly the 0 to 0.4 range real image-text cosines occupy. References
//! sit at cosine 0.8 to `t`. Humans rate `1 + 3q` plus noise, rounded to 1..=4,
//! and pairwise voters prefer the higher-quality side with probability
//! `sigmoid(6 (q_a - q_b))`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::{
    CaptionCorpus, CaptionItem, Embedding, EmbeddingStore, JudgmentSet, PairKey, PairwiseJudgment,
};
use crate::error::Result;

/// Uniformly random direction on the unit sphere.
pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// A random unit vector whose cosine with the unit vector `base` is `cos`.
pub fn with_cosine<R: Rng + ?Sized>(base: &[f64], cos: f64, rng: &mut R) -> Vec<f64> {
    assert!((-1.0..=1.0).contains(&cos));
    loop {
        let r = random_unit(base.len(), rng);
        let along: f64 = r.iter().zip(base).map(|(a, b)| a * b).sum();
        let orth: Vec<f64> = r.iter().zip(base).map(|(a, b)| a - along * b).collect();
        let norm = orth.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            let sin = (1.0 - cos * cos).sqrt();
            return base
                .iter()
                .zip(&orth)
                .map(|(b, o)| cos * b + sin * o / norm)
                .collect();
        }
    }
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub images: usize,
    pub candidates_per_image: usize,
    pub references_per_image: usize,
    pub ratings_per_pair: usize,
    pub voters_per_pair: u32,
    pub dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            images: 40,
            candidates_per_image: 4,
            references_per_image: 6,
            ratings_per_pair: 3,
            voters_per_pair: 48,
            dim: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: CaptionCorpus,
    /// Likert ratings for every pair; pairwise votes for candidates
    /// (0, 1), (2, 3), ... of each image.
    pub judgments: JudgmentSet,
    pub candidates: EmbeddingStore,
    pub images: EmbeddingStore,
    pub references: EmbeddingStore,
    pub quality: HashMap<PairKey, f64>,
}

pub fn reference_text(image: usize, r: usize) -> String {
    format!("reference {r} for image {image}")
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut items = Vec::new();
    let mut judgments = JudgmentSet::default();
    let mut candidates = EmbeddingStore::new(spec.dim)?;
    let mut images = EmbeddingStore::new(spec.dim)?;
    let mut references = EmbeddingStore::new(spec.dim)?;
    let mut quality = HashMap::new();
    let noise_scale = 1.0 / (spec.dim as f64).sqrt();

    for i in 0..spec.images {
        let image_id = format!("img{i:04}");
        let v = random_unit(spec.dim, &mut rng);
        let t = with_cosine(&v, 0.3, &mut rng);
        images.insert(&image_id, Embedding::from_f64(&v)?)?;
        let refs: Vec<String> = (0..spec.references_per_image)
            .map(|r| reference_text(i, r))
            .collect();
        for text in &refs {
            references.insert(text, Embedding::from_f64(&with_cosine(&t, 0.8, &mut rng))?)?;
        }
        let mut qs = Vec::with_capacity(spec.candidates_per_image);
        for j in 0..spec.candidates_per_image {
            let q: f64 = rng.random();
            let (a, b) = (0.05 + 0.3 * q, 0.1 + 0.6 * q);
            let raw: Vec<f64> = v
                .iter()
                .zip(&t)
                .map(|(vv, tt)| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    a * vv + b * tt + noise_scale * n
                })
                .collect();
            let item = CaptionItem {
                image_id: image_id.clone(),
                candidate_id: format!("c{j}"),
                caption: format!("candidate {j} for image {i}"),
                references: refs.clone(),
            };
            candidates.insert(
                item.candidate_embedding_id(),
                Embedding::from_f64(&normalize(raw))?,
            )?;
            let ratings = (0..spec.ratings_per_pair)
                .map(|_| {
                    let n: f64 = StandardNormal.sample(&mut rng);
                    (1.0 + 3.0 * q + 0.6 * n).round().clamp(1.0, 4.0)
                })
                .collect();
            judgments.likert.insert(item.key(), ratings);
            quality.insert(item.key(), q);
            items.push(item);
            qs.push(q);
        }
        for pair in (0..spec.candidates_per_image)
            .collect::<Vec<_>>()
            .chunks_exact(2)
        {
            let (ja, jb) = (pair[0], pair[1]);
            let p_a = 1.0 / (1.0 + (-6.0 * (qs[ja] - qs[jb])).exp());
            let votes_a = (0..spec.voters_per_pair)
                .filter(|_| rng.random_bool(p_a))
                .count() as u32;
            judgments.pairwise.push(PairwiseJudgment {
                image_id: image_id.clone(),
                candidate_a_id: format!("c{ja}"),
                candidate_b_id: format!("c{jb}"),
                votes_a,
                votes_b: spec.voters_per_pair - votes_a,
            });
        }
    }

    Ok(SyntheticData {
        corpus: CaptionCorpus::new(items)?,
        judgments,
        candidates,
        images,
        references,
        quality,
    })
}
