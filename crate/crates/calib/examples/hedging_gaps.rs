//! Hedging against two-block natures: exact zero error for the strategist.
//!
//! The hedging nature draws p* = 0.2 for the first half of the horizon and
//! 0.8 for the second. A forecaster that hedges at 0.4 / 0.6 instead of
//! reporting the truth makes the strict two-sided interval error vanish
//! outright ­— not merely shrink — because each prediction level sits on the
//! majority side of its block's outcomes. The smoothed variant blurs each
//! block over a width-2c window and the same hedge still zeroes the error.
//!
//!     cargo run --example hedging_gaps

use calib::harness::{truthfulness_gap, GapExperiment, GapParams, MeasureSpec};

fn main() -> calib::Result<()> {
    let t = 1000;
    let n = 200;

    let plain = truthfulness_gap(
        GapExperiment::Hedging,
        t,
        GapParams {
            epsilon: None,
            c: None,
            measure: None,
        },
        n,
        7,
    )?;
    println!("hedging nature, T = {t}, {n} replicates, interval error:");
    println!("  truthful   mean {:>7.3}", plain.truthful.mean);
    println!(
        "  hedge(0.4/0.6) mean {:>7.3}  (zero on every episode)",
        plain.strategic.mean
    );
    println!();

    // The subset-averaged variant can't be gamed the same way: averaging the
    // restricted error over random subsets keeps the truthful/strategic gap
    // bounded. Here even the subset average stays tiny for the strategist,
    // which is the point of checking both.
    let sub = truthfulness_gap(
        GapExperiment::Hedging,
        t,
        GapParams {
            epsilon: None,
            c: None,
            measure: Some(MeasureSpec::VcalSub { m: 200 }),
        },
        n,
        7,
    )?;
    println!("same experiment under the subset-averaged interval error:");
    println!("  truthful   mean {:>7.3}", sub.truthful.mean);
    println!("  hedge      mean {:>7.3}", sub.strategic.mean);
    println!();

    let smooth = truthfulness_gap(
        GapExperiment::SmoothedHedging,
        t,
        GapParams {
            epsilon: None,
            c: Some(0.1),
            measure: None,
        },
        n,
        7,
    )?;
    println!("smoothed hedging nature (c = 0.1), interval error:");
    println!("  truthful   mean {:>7.3}", smooth.truthful.mean);
    println!("  hedge      mean {:>7.3}", smooth.strategic.mean);
    println!("  truthful error grows like √T while the hedge stays at exactly 0");
    Ok(())
}
