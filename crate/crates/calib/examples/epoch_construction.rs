//! Walk through the epoch nature step by step, then run its gap experiment.
//!
//! The epoch nature spends the first fifth of the horizon locating a random
//! threshold by noisy halving: k epochs, each drawing p* uniformly from a
//! width-c window around the current center w, recentring w by ±2^-(i+3)
//! after epoch i according to the empirical outcome mean. The remaining four
//! fifths pin outcomes near 0 and near 1. Against this nature the truthful
//! forecaster pays a threshold-sweep error ~√(T log(1/c)) while the patching
//! strategy pays only ~√(cT).
//!
//!     cargo run --example epoch_construction

use calib::environments::{sample_outcome, NatureSpec};
use calib::harness::{truthfulness_gap, GapExperiment, GapParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> calib::Result<()> {
    // c = 2^-6 gives k = ⌊log2(1/(8c))⌋ = 3 epochs; T must be a multiple of
    // 5k = 15.
    let c = 0.015625;
    let t = 150;
    let nature = NatureSpec::epoch_binary_search(c, t);

    let mut nat = nature.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let epoch_len = t / 15;
    println!("one episode, step by step (T = {t}, c = {c}, 3 epochs of {epoch_len}):");
    let mut window_lo = f64::INFINITY;
    let mut window_hi = f64::NEG_INFINITY;
    for s in 0..t {
        let pstar = nat.next_pstar(&mut rng)?;
        let x = sample_outcome(pstar, &mut rng)?;
        nat.observe(x)?;
        if s < t / 5 {
            window_lo = window_lo.min(pstar);
            window_hi = window_hi.max(pstar);
            if (s + 1) % epoch_len == 0 {
                println!(
                    "  epoch {} drew p* from [{:.6}, {:.6}] (width ≤ c = {c})",
                    (s + 1) / epoch_len,
                    window_lo,
                    window_hi
                );
                window_lo = f64::INFINITY;
                window_hi = f64::NEG_INFINITY;
            }
        }
    }
    println!(
        "  settled threshold α* = {:.6} (the final window center)",
        nat.alpha_star().expect("set once the last epoch ends")
    );
    println!();

    // The full experiment at a larger horizon: truthful vs patching under the
    // threshold-sweep error.
    let t_big = 1500;
    let gap = truthfulness_gap(
        GapExperiment::Epoch,
        t_big,
        GapParams {
            epsilon: None,
            c: Some(c),
            measure: None,
        },
        100,
        5,
    )?;
    let floor = (c * t_big as f64).sqrt();
    println!("gap experiment at T = {t_big}, 100 replicates, step error:");
    println!("  truthful mean {:>7.2}", gap.truthful.mean);
    println!(
        "  patching mean {:>7.2}   (√(cT) = {floor:.2} for scale)",
        gap.strategic.mean
    );
    println!("  ratio: {:.2}", gap.ratio);
    Ok(())
}
