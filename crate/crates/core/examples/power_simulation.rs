//! How good does a random metric look when the best of N runs is reported
//! over a dozen systems?
//!
//! ```bash
//! cargo run --release --example power_simulation
//! ```

use capeval::diagnostics::{power_simulation, PowerSimConfig, REPORTED_BEST_OF_TEN};

fn main() -> capeval::Result<()> {
    for trials in [1, 5, 10, 20] {
        let out = power_simulation(&PowerSimConfig::evenly_spaced(12, trials, 1000, 7))?;
        println!(
            "best of {trials:>2}: Spearman {:.3}  Pearson {:.3}  (single run {:.3} / {:.3})",
            out.mean_best_spearman,
            out.mean_best_pearson,
            out.mean_single_spearman,
            out.mean_single_pearson
        );
    }
    println!("published best-of-10 figure: {REPORTED_BEST_OF_TEN}");
    Ok(())
}
