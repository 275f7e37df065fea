//! Greedy forward selection of metrics by 5-fold cross-validated R², repeated
//! over ten bootstrap resamples.
//!
//! ```bash
//! cargo run --release --example forward_selection
//! ```

use capeval::corpus::MetricTable;
use capeval::selection::bootstrap_forward_select;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> capeval::Result<()> {
    let n = 500;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut col = || (0..n).map(|_| unit.sample(&mut rng)).collect::<Vec<f64>>();
    let (clip_s, bleu, noise_a, noise_b) = (col(), col(), col(), col());
    let human = (0..n)
        .map(|i| 0.9 * clip_s[i] + 0.3 * bleu[i] + 0.1 * unit.sample(&mut rng))
        .collect();
    let table = MetricTable::new(
        (0..n).map(|i| format!("x{i}")).collect(),
        human,
        [
            ("clip_s".to_string(), clip_s),
            ("bleu".to_string(), bleu),
            ("noise_a".to_string(), noise_a),
            ("noise_b".to_string(), noise_b),
        ],
    )?;

    let result = bootstrap_forward_select(&table, 5, 10, 0)?;
    for step in 0..table.num_metrics() {
        println!("step {}: {:?}", step + 1, result.pick_counts(step));
    }
    for p in result.r2_curve() {
        println!("R² after {} metrics: {:.4} ± {:.4}", p.step, p.mean, p.std);
    }
    Ok(())
}
