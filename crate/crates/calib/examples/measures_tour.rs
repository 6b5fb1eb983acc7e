//! Tour of the calibration measures on a tiny hand-built transcript.
//!
//! Computes every measure on the same four-step transcript and prints the
//! value together with how it was obtained (exact optimization, certified
//! interval, or Monte Carlo subset average).
//!
//!     cargo run --example measures_tour

use calib::measures::{self, Exactness, SubsetSampler};

fn describe(value: &measures::MeasureValue) -> String {
    match value.exactness {
        Exactness::Exact => format!("{:<12.6} (exact)", value.value),
        Exactness::Interval { lo, hi } => {
            format!(
                "{:<12.6} (certified interval [{lo:.6}, {hi:.6}])",
                value.value
            )
        }
        Exactness::MonteCarlo { stderr, m } => {
            format!(
                "{:<12.6} (Monte Carlo, {m} subsets, stderr {stderr:.2e})",
                value.value
            )
        }
    }
}

fn main() -> calib::Result<()> {
    // Outcomes and predictions; the forecaster overshoots at level 0.3 and
    // undershoots at level 0.8.
    let x = [0u8, 1, 0, 1];
    let p = [0.3, 0.3, 0.8, 0.8];

    println!("transcript:");
    for t in 0..x.len() {
        println!("  t={}  x={}  p={}", t + 1, x[t], p[t]);
    }
    println!();

    println!("threshold-sweep error");
    println!("  {:<16}{}", "step", describe(&measures::step_ce(&x, &p)?));
    println!(
        "  {:<16}{}",
        "step_sub",
        describe(&measures::step_ce_sub(
            &x,
            &p,
            &mut SubsetSampler::monte_carlo(2000, 7)?
        )?)
    );
    println!(
        "  {:<16}{}",
        "step_sub_exact",
        describe(&measures::step_ce_sub_exact(&x, &p)?)
    );
    println!();

    println!("interval / scoring-rule errors");
    println!("  {:<16}{}", "vcal", describe(&measures::vcal(&x, &p)?));
    println!(
        "  {:<16}{}",
        "ucal",
        describe(&measures::ucal_bounds(&x, &p)?)
    );
    println!();

    println!("other distances");
    println!("  {:<16}{}", "sign", describe(&measures::sign_ce(&x, &p)?));
    println!("  {:<16}{}", "ece", describe(&measures::ece(&x, &p)?));
    println!("  {:<16}{}", "smce", describe(&measures::smce(&x, &p)?));
    println!(
        "  {:<16}{}",
        "ssce",
        describe(&measures::ssce(&x, &p, &mut SubsetSampler::exhaustive())?)
    );
    println!();

    // A perfectly calibrated transcript (p matches x exactly) zeroes all of
    // them; completeness is an invariant, not an approximation.
    let xz = [1u8, 0, 1];
    let pz = [1.0, 0.0, 1.0];
    println!("perfectly calibrated transcript:");
    println!(
        "  {:<16}{}",
        "step",
        describe(&measures::step_ce(&xz, &pz)?)
    );
    println!("  {:<16}{}", "smce", describe(&measures::smce(&xz, &pz)?));
    println!();

    // The per-transcript optimality floor uses γ(v) = v for v ≤ 1, √v above.
    for v in [0.25, 1.0, 16.0] {
        println!("gamma({v:>5}) = {}", measures::gamma(v)?);
    }
    Ok(())
}
