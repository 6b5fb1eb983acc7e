//! The binary-search nature separates truthful from strategic forecasting.
//!
//! The nature halves in on a threshold α*: it starts at ½ and moves the
//! current point up after a 1 and down after a 0, with step sizes shrinking
//! geometrically from ε/2. That enforces a deterministic alignment — x_t = 1
//! exactly when p_t ends up below α* — so a truthful forecaster owns a large
//! two-sided interval error at α*, while the strategic constant-½ forecaster
//! hides all outcomes behind a single prediction level and pays only the
//! O(√T) noise of a fair coin.
//!
//! In exact arithmetic the truthful error would be T/4. Double precision
//! caps it well below that: the halving step underflows to zero after about
//! 50 steps, every later prediction collides with α* exactly, and the strict
//! comparisons of the interval error ignore the collided block. The gap is
//! still visible, just not linear in T.
//!
//!     cargo run --example binary_search_gap

use calib::environments::NatureSpec;
use calib::forecasters::ForecasterSpec;
use calib::harness::{run_episode, truthfulness_gap, GapExperiment, GapParams};

fn main() -> calib::Result<()> {
    let t = 1000;

    // Count distinct prediction levels in one truthful episode: the halving
    // bottoms out long before the horizon does.
    let eps = 0.25 / (t as f64).sqrt();
    let tr = run_episode(
        &NatureSpec::binary_search(eps, t),
        &ForecasterSpec::truthful(),
        1,
    )?;
    let mut levels = tr.p.clone();
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup();
    println!(
        "one truthful episode at T = {t}: {} distinct prediction levels",
        levels.len()
    );
    println!();

    let params = GapParams {
        epsilon: None, // default ε = 1/(4√T)
        c: None,
        measure: None, // default two-sided interval error (vcal)
    };
    let gap = truthfulness_gap(GapExperiment::BinarySearch, t, params, 100, 2024)?;

    println!("binary-search gap at T = {t}, 100 replicates, interval error:");
    println!(
        "  truthful   mean {:>7.2}  (95% CI [{:.2}, {:.2}])",
        gap.truthful.mean, gap.truthful.ci_lo, gap.truthful.ci_hi
    );
    println!(
        "  constant ½ mean {:>7.2}  (95% CI [{:.2}, {:.2}])",
        gap.strategic.mean, gap.strategic.ci_lo, gap.strategic.ci_hi
    );
    println!("  ratio truthful/strategic: {:.2}", gap.ratio);
    println!();
    println!(
        "  scales: √T = {:.1}, idealized exact-arithmetic truthful error T/4 = {}",
        (t as f64).sqrt(),
        t / 4
    );
    Ok(())
}
