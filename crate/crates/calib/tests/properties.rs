//! Randomized invariant checks: measure identities that must hold on every
//! transcript, naive re-derivations of the supremum measures, and protocol
//! guarantees of the simulated natures and forecasters.

use calib::environments::{sample_outcome, NatureSpec};
use calib::forecasters::{ForecasterSpec, HedgeState};
use calib::harness::{read_transcript_csv, run_episode, write_transcript_csv, Transcript};
use calib::measures::{self, Exactness, SubsetSampler};
use calib::oracle::smce_grid_oracle;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

/// Outcomes paired with free predictions in [0,1].
fn instance(max_t: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    prop::collection::vec((0u8..=1, 0.0..=1.0f64), 0..=max_t)
        .prop_map(|rows| rows.into_iter().unzip())
}

/// Instances whose prediction levels are multiples of 1/512 drawn from a
/// small palette, so levels repeat and compare equal bit-for-bit.
fn dyadic_instance(max_t: usize) -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (
        prop::collection::vec(0u32..=512, 1..=6),
        prop::collection::vec((0u8..=1, 0usize..6), 0..=max_t),
    )
        .prop_map(|(palette, rows)| {
            rows.into_iter()
                .map(|(x, i)| (x, palette[i % palette.len()] as f64 / 512.0))
                .unzip()
        })
}

// ---------------------------------------------------------------------------
// naive re-derivations (independent of the optimized sweep implementations)
// ---------------------------------------------------------------------------

/// Threshold-sweep error by direct scan over candidate thresholds.
fn step_direct(x: &[u8], p: &[f64]) -> f64 {
    let mut best = 0.0f64;
    let mut cands: Vec<f64> = p.to_vec();
    cands.push(1.0);
    for &a in &cands {
        let s: f64 = x
            .iter()
            .zip(p)
            .filter(|(_, &q)| q <= a)
            .map(|(&b, &q)| b as f64 - q)
            .sum();
        best = best.max(s.abs());
    }
    best
}

/// Two-sided interval error by enumerating both one-sided limits of the two
/// piecewise-linear branches at every breakpoint.
fn vcal_limits(x: &[u8], p: &[f64]) -> f64 {
    let mut qs: Vec<f64> = vec![0.0, 1.0];
    qs.extend_from_slice(p);
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    qs.dedup();
    let mut best = 0.0f64;
    for &q in &qs {
        let mut lt = (0.0f64, 0.0f64); // (count, outcome sum) over p <  q
        let mut le = (0.0f64, 0.0f64); // over p ≤ q
        let mut gt = (0.0f64, 0.0f64); // over p >  q
        let mut ge = (0.0f64, 0.0f64); // over p ≥ q
        for (&b, &pt) in x.iter().zip(p) {
            let b = b as f64;
            if pt < q {
                lt = (lt.0 + 1.0, lt.1 + b);
            }
            if pt <= q {
                le = (le.0 + 1.0, le.1 + b);
            }
            if pt > q {
                gt = (gt.0 + 1.0, gt.1 + b);
            }
            if pt >= q {
                ge = (ge.0 + 1.0, ge.1 + b);
            }
        }
        best = best.max(lt.1 - q * lt.0); // under-branch at α = q
        best = best.max(q * gt.0 - gt.1); // over-branch at α = q
        if q < 1.0 {
            best = best.max(le.1 - q * le.0); // under-branch as α → q⁺
        }
        if q > 0.0 {
            best = best.max(q * ge.0 - ge.1); // over-branch as α → q⁻
        }
    }
    2.0 * best
}

/// Signed-threshold error by evaluating at every level (where the tied group
/// drops out) and inside every open interval between levels (where the sign
/// pattern is constant, so a midpoint is exact).
fn sign_limits(x: &[u8], p: &[f64]) -> f64 {
    let mut qs: Vec<f64> = vec![0.0, 1.0];
    qs.extend_from_slice(p);
    qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    qs.dedup();
    let mut cands = qs.clone();
    for w in qs.windows(2) {
        cands.push(0.5 * (w[0] + w[1]));
    }
    let mut best = 0.0f64;
    for &a in &cands {
        let s: f64 = x
            .iter()
            .zip(p)
            .map(|(&b, &q)| {
                let sgn = if a > q {
                    1.0
                } else if a < q {
                    -1.0
                } else {
                    0.0
                };
                sgn * (b as f64 - q)
            })
            .sum();
        best = best.max(s.abs());
    }
    best
}

proptest! {
    #[test]
    fn step_matches_direct_scan((x, p) in instance(48)) {
        let fast = measures::step_ce(&x, &p).unwrap().value;
        prop_assert!((fast - step_direct(&x, &p)).abs() <= TOL);
    }

    #[test]
    fn vcal_matches_limit_enumeration((x, p) in instance(48)) {
        let fast = measures::vcal(&x, &p).unwrap().value;
        prop_assert!((fast - vcal_limits(&x, &p)).abs() <= TOL);
    }

    #[test]
    fn sign_matches_limit_enumeration((x, p) in instance(48)) {
        let fast = measures::sign_ce(&x, &p).unwrap().value;
        prop_assert!((fast - sign_limits(&x, &p)).abs() <= TOL);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smce_matches_grid_program_on_dyadic_levels((x, p) in dyadic_instance(10)) {
        // levels and relaxation distances are multiples of 1/512, so the
        // 1/512 function grid contains an exact maximizer
        let fast = measures::smce(&x, &p).unwrap().value;
        let reference = smce_grid_oracle(&x, &p, 1.0 / 512.0).unwrap();
        prop_assert!((fast - reference).abs() <= TOL);
    }
}

// ---------------------------------------------------------------------------
// order-free identities and mutual bounds
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn measures_are_permutation_invariant(rows in prop::collection::vec((0u8..=1, 0.0..=1.0f64), 0..=12), seed in any::<u64>()) {
        let (x, p): (Vec<u8>, Vec<f64>) = rows.iter().copied().unzip();
        let mut shuffled = rows;
        // deterministic Fisher-Yates driven by the generated seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (xs, ps): (Vec<u8>, Vec<f64>) = shuffled.into_iter().unzip();

        let pairs = [
            (measures::step_ce(&x, &p).unwrap().value, measures::step_ce(&xs, &ps).unwrap().value),
            (measures::vcal(&x, &p).unwrap().value, measures::vcal(&xs, &ps).unwrap().value),
            (measures::sign_ce(&x, &p).unwrap().value, measures::sign_ce(&xs, &ps).unwrap().value),
            (measures::ece(&x, &p).unwrap().value, measures::ece(&xs, &ps).unwrap().value),
            (measures::smce(&x, &p).unwrap().value, measures::smce(&xs, &ps).unwrap().value),
            (
                measures::step_ce_sub_exact(&x, &p).unwrap().value,
                measures::step_ce_sub_exact(&xs, &ps).unwrap().value,
            ),
        ];
        for (a, b) in pairs {
            prop_assert!((a - b).abs() <= TOL, "{a} vs {b}");
        }
    }

    #[test]
    fn mutual_bounds_hold((x, p) in instance(12)) {
        let t = x.len() as f64;
        let step = measures::step_ce(&x, &p).unwrap().value;
        let sub = measures::step_ce_sub_exact(&x, &p).unwrap().value;
        let vcal = measures::vcal(&x, &p).unwrap().value;
        let sign = measures::sign_ce(&x, &p).unwrap().value;
        let ece = measures::ece(&x, &p).unwrap().value;
        let smce = measures::smce(&x, &p).unwrap().value;
        let ucal = measures::ucal_bounds(&x, &p).unwrap();
        let total: f64 = x.iter().zip(&p).map(|(&b, &q)| (b as f64 - q).abs()).sum();

        for v in [step, sub, vcal, sign, ece, smce] {
            prop_assert!(v >= 0.0);
        }
        // subset averaging halves the sweep error at worst and costs at most √T
        prop_assert!(0.5 * step <= sub + TOL);
        prop_assert!(sub <= 0.5 * step + t.sqrt() + TOL);
        // the signed sweep dominates the one-sided sweep, by at most 3×
        prop_assert!(step <= sign + TOL);
        prop_assert!(sign <= 3.0 * step + TOL);
        // interval error vs sweep error
        prop_assert!(vcal <= 8.0 * step + TOL);
        // the sweep error never exceeds the per-level residual mass
        prop_assert!(step <= ece + TOL);
        prop_assert!(smce <= ece + TOL);
        prop_assert!(step <= total + TOL);
        // the scoring-rule form is certified by [vcal, 2·vcal]
        match ucal.exactness {
            Exactness::Interval { lo, hi } => {
                prop_assert_eq!(lo, vcal);
                prop_assert_eq!(hi, 2.0 * vcal);
                prop_assert_eq!(ucal.value, lo);
            }
            other => prop_assert!(false, "expected an interval, got {other:?}"),
        }
    }

    #[test]
    fn perfectly_calibrated_binary_transcripts_score_zero(bits in prop::collection::vec(0u8..=1, 0..=14)) {
        let p: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
        prop_assert_eq!(measures::step_ce(&bits, &p).unwrap().value, 0.0);
        prop_assert_eq!(measures::vcal(&bits, &p).unwrap().value, 0.0);
        prop_assert_eq!(measures::sign_ce(&bits, &p).unwrap().value, 0.0);
        prop_assert_eq!(measures::ece(&bits, &p).unwrap().value, 0.0);
        prop_assert_eq!(measures::smce(&bits, &p).unwrap().value, 0.0);
        prop_assert_eq!(measures::step_ce_sub_exact(&bits, &p).unwrap().value, 0.0);
        let mut s = SubsetSampler::exhaustive();
        prop_assert_eq!(measures::ssce(&bits, &p, &mut s).unwrap().value, 0.0);
    }
}

// ---------------------------------------------------------------------------
// natures keep their stated ranges and alignments
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn halving_nature_aligns_outcomes_with_its_threshold(
        eps in 0.02f64..0.24,
        t in 1usize..=32,
        seed in any::<u64>(),
    ) {
        let mut nat = NatureSpec::binary_search(eps, t).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut steps = Vec::with_capacity(t);
        for _ in 0..t {
            let ps = nat.next_pstar(&mut rng).unwrap();
            prop_assert!((0.25..=0.75).contains(&ps));
            let x = sample_outcome(ps, &mut rng).unwrap();
            nat.observe(x).unwrap();
            steps.push((ps, x));
        }
        // the walk always moves toward the side of the realized outcome, and
        // the geometric step decay keeps it there: a 1 at level p pins the
        // final threshold strictly above p, a 0 strictly below
        let astar = nat.alpha_star().unwrap();
        for (ps, x) in steps {
            if x == 1 {
                prop_assert!(ps < astar, "outcome 1 at {ps} but threshold {astar}");
            } else {
                prop_assert!(ps > astar, "outcome 0 at {ps} but threshold {astar}");
            }
        }
    }

    #[test]
    fn smoothed_nature_draws_inside_its_windows(
        c in 1e-3f64..0.19,
        half in 1usize..=60,
        seed in any::<u64>(),
    ) {
        let t = 2 * half;
        let mut nat = NatureSpec::smoothed_hedging(c, t).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in 0..t {
            let ps = nat.next_pstar(&mut rng).unwrap();
            let center = if s < half { 0.2 } else { 0.8 };
            prop_assert!(ps >= center - c && ps < center + c, "p* = {ps} at step {s}");
            nat.observe(sample_outcome(ps, &mut rng).unwrap()).unwrap();
        }
    }

    #[test]
    fn epoch_nature_respects_its_three_phases(
        cexp in 4i32..=10,
        mult in 1usize..=3,
        seed in any::<u64>(),
    ) {
        let c = 0.5f64.powi(cexp);
        let k = (cexp - 3) as usize; // ⌊log2(1/(8c))⌋ for c = 2^-cexp
        let t = 5 * k * mult;
        let mut nat = NatureSpec::epoch_binary_search(c, t).build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in 0..t {
            let ps = nat.next_pstar(&mut rng).unwrap();
            if s < t / 5 {
                // halving windows never escape the middle of the unit interval
                prop_assert!(ps > 0.25 && ps < 0.75, "p* = {ps} in epoch phase");
                prop_assert!(nat.alpha_star().is_none() || s + 1 == t / 5);
            } else if s < 3 * t / 5 {
                prop_assert!((0.0..c).contains(&ps), "p* = {ps} in low phase");
            } else {
                prop_assert!((1.0 - c..1.0).contains(&ps), "p* = {ps} in high phase");
            }
            nat.observe(sample_outcome(ps, &mut rng).unwrap()).unwrap();
        }
        let astar = nat.alpha_star().unwrap();
        prop_assert!(astar > 0.25 && astar < 0.75);
    }
}

// ---------------------------------------------------------------------------
// forecaster protocol guarantees
// ---------------------------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hedge_predictions_stay_on_grid_and_weights_normalized(
        k in 2usize..=8,
        outcomes in prop::collection::vec(0u8..=1, 1..=64),
        seed in any::<u64>(),
    ) {
        let mut hedge = HedgeState::new(k, outcomes.len(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &x in &outcomes {
            let p = hedge.predict(&mut rng);
            let j = (p * (k - 1) as f64).round();
            prop_assert!(p == j / (k - 1) as f64, "prediction {p} off the {k}-point grid");
            hedge.update(x, p).unwrap();
            let total: f64 = hedge.suffix_imbalance().first().copied().unwrap_or(0.0);
            // the imbalance at the bottom of the grid is bounded by the total
            // weight, which renormalization pins to 1
            prop_assert!(total.abs() <= 1.0 + 1e-12);
        }
        prop_assert_eq!(hedge.steps_taken(), outcomes.len());
        prop_assert!(hedge.cumulative_cost().is_finite());
    }

    #[test]
    fn hedge_rejects_updates_off_its_grid(k in 3usize..=9, seed in any::<u64>()) {
        let mut hedge = HedgeState::new(k, 16, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let _ = hedge.predict(&mut rng);
        let off = 0.5 / (k - 1) as f64; // halfway between two grid points
        prop_assert!(hedge.update(1, off).is_err());
    }
}

// ---------------------------------------------------------------------------
// episodes are pure functions of (specs, seed)
// ---------------------------------------------------------------------------

fn episode_setup() -> impl Strategy<Value = (NatureSpec, ForecasterSpec)> {
    prop_oneof![
        (prop::collection::vec(0.0..=1.0f64, 1..=60), 0.0..=1.0f64)
            .prop_map(|(ps, lvl)| (NatureSpec::product(ps), ForecasterSpec::constant(lvl))),
        prop::collection::vec(0.0..=1.0f64, 1..=60)
            .prop_map(|ps| (NatureSpec::product(ps), ForecasterSpec::truthful())),
        (0.02f64..0.24, 1usize..=50).prop_map(|(eps, t)| {
            (
                NatureSpec::binary_search(eps, t),
                ForecasterSpec::truthful(),
            )
        }),
        (1usize..=40).prop_map(|half| {
            (
                NatureSpec::hedging_fifths(2 * half),
                ForecasterSpec::hedging_fifths(),
            )
        }),
        (2usize..=6, 1usize..=30).prop_map(|(k, steps)| {
            (
                NatureSpec::constant_half(k * steps),
                ForecasterSpec::hedge_step(Some(k), None),
            )
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replaying_a_seed_reproduces_the_episode(
        (nature, forecaster) in episode_setup(),
        seed in any::<u64>(),
    ) {
        let a = run_episode(&nature, &forecaster, seed).unwrap();
        let b = run_episode(&nature, &forecaster, seed).unwrap();
        prop_assert_eq!(&a.x, &b.x);
        prop_assert!(a.p.iter().zip(&b.p).all(|(u, v)| u.to_bits() == v.to_bits()));
        prop_assert!(a.pstar.iter().zip(&b.pstar).all(|(u, v)| u.to_bits() == v.to_bits()));
        prop_assert_eq!(a.var_t.to_bits(), b.var_t.to_bits());
    }

    #[test]
    fn transcript_csv_round_trips_bit_exactly(
        rows in prop::collection::vec((0u8..=1, 0.0..=1.0f64, 0.0..=1.0f64), 0..=40),
    ) {
        let x: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let pstar: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let p: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let var_t = pstar.iter().map(|q| q * (1.0 - q)).sum();
        let tr = Transcript { x: x.clone(), pstar: pstar.clone(), p: p.clone(), var_t };

        let mut buf = Vec::new();
        write_transcript_csv(&mut buf, &tr).unwrap();
        let (rx, rp, rpstar) = read_transcript_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(rx, x);
        prop_assert!(rp.iter().zip(&p).all(|(u, v)| u.to_bits() == v.to_bits()));
        let rpstar = rpstar.unwrap_or_default();
        prop_assert!(rpstar.iter().zip(&pstar).all(|(u, v)| u.to_bits() == v.to_bits()));
    }

    #[test]
    fn subset_sampling_is_seed_deterministic((x, p) in instance(30), seed in any::<u64>()) {
        let mut s1 = SubsetSampler::monte_carlo(64, seed).unwrap();
        let mut s2 = SubsetSampler::monte_carlo(64, seed).unwrap();
        let a = measures::step_ce_sub(&x, &p, &mut s1).unwrap().value;
        let b = measures::step_ce_sub(&x, &p, &mut s2).unwrap().value;
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
