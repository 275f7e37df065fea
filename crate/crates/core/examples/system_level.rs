//! System-level Spearman and Pearson against two human measures.
//!
//! ```bash
//! cargo run --example system_level
//! ```

use capeval::harness::{system_level_correlation, SystemSummary};
use capeval::report::percent;

fn main() -> capeval::Result<()> {
    let rows = [
        ("sys-a", 0.61, 0.20, 0.31),
        ("sys-b", 0.70, 0.41, 0.35),
        ("sys-c", 0.66, 0.30, 0.52),
        ("sys-d", 0.74, 0.62, 0.55),
        ("sys-e", 0.72, 0.50, 0.61),
        ("human", 0.78, 0.64, 0.70),
    ];
    let systems: Vec<SystemSummary> = rows
        .iter()
        .map(|&(id, metric_mean, human_m1, human_m2)| SystemSummary {
            system_id: id.into(),
            metric_mean,
            human_m1,
            human_m2,
        })
        .collect();
    let c = system_level_correlation(&systems)?;
    println!(
        "Spearman M1 {:>6}  M2 {:>6}",
        percent(c.spearman_m1),
        percent(c.spearman_m2)
    );
    println!(
        "Pearson  M1 {:>6}  M2 {:>6}",
        percent(c.pearson_m1),
        percent(c.pearson_m2)
    );
    println!(
        "{} systems only: see the power_simulation example before trusting these",
        systems.len()
    );
    Ok(())
}
