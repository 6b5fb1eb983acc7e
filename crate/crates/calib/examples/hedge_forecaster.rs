//! The randomized no-regret forecaster on a discrete prediction grid.
//!
//! The forecaster keeps multiplicative weights on 2k one-sided experts over
//! the grid {0, 1/(k-1), …, 1}, predicts by randomizing between the two grid
//! points where the suffix weight imbalance changes sign, and achieves
//! O(√(T log k)) threshold-sweep error against any outcome process — here
//! demonstrated against the adaptive binary-search nature and an i.i.d.
//! Bern(½) stream, with a log-log rate fit over a horizon grid.
//!
//!     cargo run --example hedge_forecaster

use calib::environments::NatureSpec;
use calib::forecasters::{ForecasterSpec, HedgeState};
use calib::harness::{scaling_fit, MeasureSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> calib::Result<()> {
    // The state machine directly: predictions land on the grid, weights stay
    // normalized, and the cumulative hedge cost tracks the forecaster's own
    // scoring of its randomized choices.
    let k = 5;
    let mut hedge = HedgeState::new(k, 64, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    println!("k = {k} grid, first steps against alternating outcomes:");
    for t in 0..6 {
        let p = hedge.predict(&mut rng);
        let x = (t % 2) as u8;
        hedge.update(x, p)?;
        println!(
            "  t={} predicted {:.2} saw {} (learning rate {:.3})",
            t + 1,
            p,
            x,
            hedge.eta()
        );
    }
    println!(
        "  cumulative hedge cost after {} steps: {:.3}",
        hedge.steps_taken(),
        hedge.cumulative_cost()
    );
    println!();

    // Rate fit: mean step error vs horizon, k tied to the horizon. A slope
    // near ½ in log-log space is the √T signature.
    let grid = [256, 512, 1024, 2048];
    for (label, nature_for) in [
        (
            "binary-search nature",
            Box::new(|t: usize| NatureSpec::binary_search(0.25 / (t as f64).sqrt(), t))
                as Box<dyn Fn(usize) -> NatureSpec>,
        ),
        (
            "constant-half nature",
            Box::new(NatureSpec::constant_half) as Box<dyn Fn(usize) -> NatureSpec>,
        ),
    ] {
        let report = scaling_fit(
            &grid,
            nature_for,
            |t| ForecasterSpec::hedge_step(Some(t), None),
            MeasureSpec::Step,
            60,
            11,
        )?;
        println!("{label}:");
        for pt in &report.points {
            let bound = 3.0 * (pt.t as f64 * (pt.t as f64).ln()).sqrt();
            println!(
                "  T={:>5}  mean step error {:>7.2}  (3√(T ln T) = {bound:.1})",
                pt.t, pt.report.mean
            );
        }
        println!(
            "  fitted rate: T^{:.3}  (log-space residual {:.3})",
            report.slope, report.residual
        );
        println!();
    }
    Ok(())
}
