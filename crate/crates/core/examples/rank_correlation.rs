//! Kendall tau-b / tau-c, Spearman and Pearson on small tied samples.
//!
//! ```bash
//! cargo run --example rank_correlation
//! ```

use capeval::rankstats::{pair_counts, PairedSample, Statistic};

fn main() -> capeval::Result<()> {
    let samples: [(&str, &[f64], &[f64]); 3] = [
        ("no ties", &[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]),
        ("tie in x", &[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]),
        (
            "Likert-like",
            &[0.2, 0.2, 0.5, 0.7, 0.9, 0.9],
            &[1.0, 2.0, 2.0, 3.0, 4.0, 4.0],
        ),
    ];
    for (name, x, y) in samples {
        let s = PairedSample::new(x, y)?;
        let c = pair_counts(&s);
        println!(
            "{name}: C={} D={} Tx={} Ty={} Txy={}",
            c.concordant, c.discordant, c.tied_x, c.tied_y, c.tied_xy
        );
        for stat in [
            Statistic::TauB,
            Statistic::TauC,
            Statistic::Spearman,
            Statistic::Pearson,
        ] {
            println!("  {:<9} {:+.4}", format!("{stat:?}"), stat.compute(&s)?);
        }
    }

    let constant = [1.0, 1.0, 1.0];
    let err = Statistic::TauC
        .compute(&PairedSample::new(&constant, &[1.0, 2.0, 3.0])?)
        .unwrap_err();
    println!("constant column: {err}");
    Ok(())
}
