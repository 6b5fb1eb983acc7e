//! Truthful forecasting against product natures is near-optimal.
//!
//! For a nature that draws outcomes independently with fixed per-step
//! probabilities, no forecaster can beat an error floor of γ(Var_T), where
//! Var_T = Σ p*_t(1 − p*_t) and γ(v) = min(v, √v̄) interpolates between the
//! small- and large-variance regimes. The truthful forecaster's
//! subset-averaged threshold error lands within a small constant of that
//! floor across a battery of qualitatively different product vectors.
//!
//!     cargo run --example product_truthfulness

use calib::environments::NatureSpec;
use calib::forecasters::ForecasterSpec;
use calib::harness::{opt_floor, replicate_values, report_from_values, run_episode, MeasureSpec};
use calib::measures::MeasureKind;
use calib::mix_seed;

fn battery(t: usize) -> Vec<(&'static str, Vec<f64>)> {
    let tf = t as f64;
    vec![
        ("all one half", vec![0.5; t]),
        ("all 0.9", vec![0.9; t]),
        ("deterministic zeros", vec![0.0; t]),
        ("tiny uniform 1/T", vec![1.0 / tf; t]),
        ("ramp k/T", (1..=t).map(|k| k as f64 / tf).collect()),
        (
            "alternating 0.2/0.8",
            (0..t).map(|k| if k % 2 == 0 { 0.2 } else { 0.8 }).collect(),
        ),
        (
            "single coin flip",
            std::iter::once(0.5)
                .chain(std::iter::repeat(0.0))
                .take(t)
                .collect(),
        ),
    ]
}

fn main() -> calib::Result<()> {
    let t = 400;
    let n = 200;
    let measure = MeasureSpec::StepSub { m: 400 };
    let truthful = ForecasterSpec::truthful();

    println!("product natures, T = {t}, {n} replicates, subset-averaged step error:");
    println!(
        "  {:<22} {:>10} {:>10} {:>8}",
        "nature", "mean error", "floor", "ratio"
    );
    for (idx, (label, pstar)) in battery(t).into_iter().enumerate() {
        let nature = NatureSpec::product(pstar);
        let seed = mix_seed(99, idx as u64);
        let values = replicate_values(&nature, &truthful, measure, n, seed)?;
        let report = report_from_values(MeasureKind::StepSub, &values, seed);

        // Episodes are pure functions of (specs, seed), so replaying the
        // replicate seeds recovers the exact transcripts behind the values.
        let transcripts = (0..n)
            .map(|i| run_episode(&nature, &truthful, mix_seed(seed, i as u64)))
            .collect::<calib::Result<Vec<_>>>()?;
        let floor = opt_floor(&transcripts)?;

        let ratio = if floor > 0.0 {
            format!("{:>8.2}", report.mean / floor)
        } else {
            // deterministic natures have a zero floor; the error is 0 too
            format!("{:>8}", "0/0")
        };
        println!(
            "  {label:<22} {:>10.3} {:>10.3} {ratio}",
            report.mean, floor
        );
    }
    println!();
    println!("every ratio sits well under 10: truthfulness is near-optimal here,");
    println!("in contrast to the adaptive natures of the gap experiments.");
    Ok(())
}
