//! Raw cosine distributions and where the w = 2.5 rescaling puts them.
//!
//! ```bash
//! cargo run --example rescale_diagnostics
//! ```

use capeval::diagnostics::similarity_distributions;
use capeval::scoring::DEFAULT_W;
use capeval::synthetic::{generate, SyntheticSpec};

fn main() -> capeval::Result<()> {
    let data = generate(&SyntheticSpec::default())?;
    let d = similarity_distributions(
        &data.candidates,
        &data.images,
        Some(&data.references),
        &data.corpus,
        50,
        DEFAULT_W,
    )?;
    for h in std::iter::once(&d.candidate_image).chain(&d.candidate_reference) {
        let s = &h.summary;
        println!(
            "{:?}: n={} negative={} min {:.3} p50 {:.3} max {:.3}",
            h.kind, s.count, s.negative_count, s.min, s.p50, s.max
        );
        println!(
            "  after x{}: min {:.3} p50 {:.3} max {:.3}",
            h.w, h.rescaled.min, h.rescaled.p50, h.rescaled.max
        );
        let peak = h
            .counts
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| **c)
            .unwrap()
            .0;
        println!(
            "  busiest bin [{:.3}, {:.3})",
            h.bin_edges[peak],
            h.bin_edges[peak + 1]
        );
    }
    Ok(())
}
