//! Brute-force oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::path::Path;

use capeval::corpus::{write_embedding_store, MetricTable};
use capeval::selection::fold_assignment;
use capeval::synthetic::{self, SyntheticData, SyntheticSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// (concordant, discordant, tied x only, tied y only, tied both) by
/// enumerating every pair.
pub fn brute_pairs(x: &[f64], y: &[f64]) -> (u64, u64, u64, u64, u64) {
    let (mut c, mut d, mut tx, mut ty, mut txy) = (0, 0, 0, 0, 0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            match (dx == 0.0, dy == 0.0) {
                (true, true) => txy += 1,
                (true, false) => tx += 1,
                (false, true) => ty += 1,
                _ if dx * dy > 0.0 => c += 1,
                _ => d += 1,
            }
        }
    }
    (c, d, tx, ty, txy)
}

pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let (c, d, tx, ty, _) = brute_pairs(x, y);
    let (c, d, tx, ty) = (c as f64, d as f64, tx as f64, ty as f64);
    (c - d) / ((c + d + tx) * (c + d + ty)).sqrt()
}

pub fn distinct(v: &[f64]) -> usize {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s.len()
}

pub fn brute_tau_c(x: &[f64], y: &[f64]) -> f64 {
    let (c, d, ..) = brute_pairs(x, y);
    let n = x.len() as f64;
    let m = distinct(x).min(distinct(y)) as f64;
    2.0 * m * (c as f64 - d as f64) / (n * n * (m - 1.0))
}

/// Textbook two-pass Pearson.
pub fn textbook_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Rank by counting: rank(v_i) = #{v_j < v_i} + (#{v_j == v_i} + 1) / 2.
pub fn counting_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|a| {
            let less = v.iter().filter(|b| *b < a).count() as f64;
            let equal = v.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Random integer-valued sample with values in `0..alphabet`.
pub fn integer_sample(rng: &mut ChaCha8Rng, n: usize, alphabet: u32) -> Vec<f64> {
    (0..n)
        .map(|_| f64::from(rng.random_range(0..alphabet)))
        .collect()
}

/// Least squares with intercept via normal equations and Gauss-Jordan with
/// partial pivoting. Deliberately a different method from the library's QR.
pub fn normal_equations(columns: &[&[f64]], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let p = columns.len() + 1;
    let row = |i: usize, j: usize| if j == 0 { 1.0 } else { columns[j - 1][i] };
    let mut a = vec![vec![0.0; p + 1]; p];
    for (r, a_r) in a.iter_mut().enumerate() {
        for (c, cell) in a_r.iter_mut().enumerate() {
            *cell = if c < p {
                (0..n).map(|i| row(i, r) * row(i, c)).sum()
            } else {
                (0..n).map(|i| row(i, r) * y[i]).sum()
            };
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for r in 0..p {
            if r != col {
                let f = a[r][col];
                let src = a[col].clone();
                for (v, s) in a[r].iter_mut().zip(&src) {
                    *v -= f * s;
                }
            }
        }
    }
    a.iter().map(|r| r[p]).collect()
}

pub fn predict(coef: &[f64], columns: &[&[f64]], i: usize) -> f64 {
    coef[0]
        + columns
            .iter()
            .zip(&coef[1..])
            .map(|(c, b)| b * c[i])
            .sum::<f64>()
}

/// Held-out R² averaged over the library's folds, fitted with
/// [`normal_equations`].
pub fn oracle_cv_r2(columns: &[&[f64]], y: &[f64], folds: usize, seed: u64) -> f64 {
    let assignment = fold_assignment(y.len(), folds, seed).unwrap();
    let mut total = 0.0;
    for test in &assignment {
        let train: Vec<usize> = (0..y.len()).filter(|i| !test.contains(i)).collect();
        let take = |v: &[f64], rows: &[usize]| rows.iter().map(|&r| v[r]).collect::<Vec<f64>>();
        let tc: Vec<Vec<f64>> = columns.iter().map(|c| take(c, &train)).collect();
        let tr: Vec<&[f64]> = tc.iter().map(Vec::as_slice).collect();
        let coef = normal_equations(&tr, &take(y, &train));
        let actual = take(y, test);
        let mean = actual.iter().sum::<f64>() / actual.len() as f64;
        let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
        let ss_res: f64 = test
            .iter()
            .zip(&actual)
            .map(|(&r, a)| (a - predict(&coef, columns, r)).powi(2))
            .sum();
        total += 1.0 - ss_res / ss_tot;
    }
    total / folds as f64
}

/// Best-scoring subset of each size, found by scoring every nonempty subset.
pub fn exhaustive_best_subsets(
    table: &MetricTable,
    folds: usize,
    seed: u64,
) -> Vec<(Vec<String>, f64)> {
    let mut names: Vec<&str> = table.metric_names().collect();
    names.sort_unstable();
    let k = names.len();
    let mut best: Vec<Option<(Vec<String>, f64)>> = vec![None; k + 1];
    for mask in 1u32..(1 << k) {
        let subset: Vec<&str> = (0..k)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| names[i])
            .collect();
        let cols: Vec<&[f64]> = subset.iter().map(|n| table.metric(n).unwrap()).collect();
        let r2 = oracle_cv_r2(&cols, table.human(), folds, seed);
        let slot = &mut best[subset.len()];
        if slot.as_ref().is_none_or(|(_, b)| r2 > *b) {
            *slot = Some((subset.iter().map(|s| s.to_string()).collect(), r2));
        }
    }
    best.into_iter().flatten().collect()
}

/// `human = 0.9 m1 + 0.3 m2 + N(0, 0.1²)` plus two pure-noise metrics.
pub fn planted_table(n: usize, seed: u64) -> MetricTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let mut col = || (0..n).map(|_| std.sample(&mut rng)).collect::<Vec<f64>>();
    let (m1, m2, n1, n2) = (col(), col(), col(), col());
    let human: Vec<f64> = (0..n)
        .map(|i| 0.9 * m1[i] + 0.3 * m2[i] + noise.sample(&mut rng))
        .collect();
    MetricTable::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        human,
        [
            ("m1".to_string(), m1),
            ("m2".to_string(), m2),
            ("noise_a".to_string(), n1),
            ("noise_b".to_string(), n2),
        ],
    )
    .unwrap()
}

pub struct CliFixture {
    pub captions: std::path::PathBuf,
    pub judgments: std::path::PathBuf,
    /// One record per pairwise judgment with the higher-quality side as the
    /// true caption (1 vote to 0).
    pub foil: std::path::PathBuf,
    pub cand: std::path::PathBuf,
    pub img: std::path::PathBuf,
    pub refs: std::path::PathBuf,
    pub table: std::path::PathBuf,
    pub systems: std::path::PathBuf,
    pub data: SyntheticData,
}

/// Writes a small synthetic corpus, its embeddings, a metric table and a
/// systems file under `dir`.
pub fn write_fixture(dir: &Path) -> CliFixture {
    let data = synthetic::generate(&SyntheticSpec {
        images: 12,
        seed: 3,
        ..SyntheticSpec::default()
    })
    .unwrap();
    let captions = dir.join("captions.jsonl");
    let mut text = String::new();
    for item in data.corpus.items() {
        text.push_str(&serde_json::to_string(item).unwrap());
        text.push('\n');
    }
    std::fs::write(&captions, text).unwrap();

    let judgments = dir.join("judgments.jsonl");
    let mut text = String::new();
    for (key, ratings) in &data.judgments.likert {
        let line = serde_json::json!({
            "kind": "likert", "image_id": key.image_id, "candidate_id": key.candidate_id, "ratings": ratings,
        });
        text.push_str(&format!("{line}\n"));
    }
    for p in &data.judgments.pairwise {
        let line = serde_json::json!({
            "kind": "pairwise", "image_id": p.image_id, "candidate_a_id": p.candidate_a_id,
            "candidate_b_id": p.candidate_b_id, "votes_a": p.votes_a, "votes_b": p.votes_b,
        });
        text.push_str(&format!("{line}\n"));
    }
    std::fs::write(&judgments, text).unwrap();

    let foil = dir.join("foil.jsonl");
    let mut text = String::new();
    for p in &data.judgments.pairwise {
        let qa = data.quality[&p.key_a()];
        let qb = data.quality[&p.key_b()];
        let line = serde_json::json!({
            "kind": "pairwise", "image_id": p.image_id, "candidate_a_id": p.candidate_a_id,
            "candidate_b_id": p.candidate_b_id, "votes_a": u32::from(qa > qb), "votes_b": u32::from(qa <= qb),
        });
        text.push_str(&format!("{line}\n"));
    }
    std::fs::write(&foil, text).unwrap();

    let cand = dir.join("cand.ceb");
    let img = dir.join("img.ceb");
    let refs = dir.join("refs.ceb");
    write_embedding_store(&data.candidates, &cand).unwrap();
    write_embedding_store(&data.images, &img).unwrap();
    write_embedding_store(&data.references, &refs).unwrap();

    let table_data = planted_table(60, 11);
    let table = dir.join("metric_table.csv");
    let names: Vec<&str> = table_data.metric_names().collect();
    let mut text = format!("instance_id,human,{}\n", names.join(","));
    for i in 0..table_data.len() {
        let vals: Vec<String> = names
            .iter()
            .map(|n| table_data.metric(n).unwrap()[i].to_string())
            .collect();
        text.push_str(&format!(
            "{},{},{}\n",
            table_data.instance_ids()[i],
            table_data.human()[i],
            vals.join(",")
        ));
    }
    std::fs::write(&table, text).unwrap();

    let systems = dir.join("systems.csv");
    let mut text = String::from("system_id,human_m1,human_m2,metric_mean\n");
    for (i, (m1, m2, mm)) in [
        (0.2, 0.3, 0.61),
        (0.4, 0.35, 0.70),
        (0.3, 0.5, 0.66),
        (0.6, 0.55, 0.74),
        (0.5, 0.6, 0.72),
    ]
    .iter()
    .enumerate()
    {
        text.push_str(&format!("sys{i},{m1},{m2},{mm}\n"));
    }
    std::fs::write(&systems, text).unwrap();

    CliFixture {
        captions,
        judgments,
        foil,
        cand,
        img,
        refs,
        table,
        systems,
        data,
    }
}
