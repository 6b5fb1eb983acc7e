//! Brute-force reference evaluators for validating the optimized measures.
//!
//! These deliberately share no algorithmic structure with the exact
//! implementations in [`crate::measures`]: sup-type measures are evaluated on
//! a dense threshold grid, subset averages by direct recursive enumeration,
//! and the smoothed error by dynamic programming over a discretized function
//! range. Agreement within the documented slack certifies the sorted-walk and
//! piecewise-linear machinery.

use crate::measures::{self, MeasureKind};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Objective for [`grid_sup_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupObjective {
    /// |Σ (x−p)·1{p ≤ α}|
    Step,
    /// |Σ (x−p)·sgn(α − p)|
    Sign,
    /// 2·max{X₋ − αN₋, αN₊ − X₊} over strict comparisons p < α, p > α
    Vcal,
}

/// Maximize the objective over the threshold grid {0, h, 2h, …, 1} augmented
/// with p_t ± 1e−7 for every prediction, by direct evaluation.
///
/// Because evaluation is plain (no one-sided limits), the result can
/// undershoot a supremum attained only in the limit; for the piecewise-linear
/// `Vcal` objective the grid also quantizes the maximizer. Either effect is
/// bounded by T·h, so compare against the exact value with a `T·h`-sized
/// tolerance.
pub fn grid_sup_oracle(
    x: &[u8],
    p: &[f64],
    objective: SupObjective,
    grid_step: f64,
) -> Result<f64> {
    measures::validate_pair(x, p)?;
    if !(grid_step > 0.0 && grid_step <= 1e-3) {
        return Err(Error::arg(format!(
            "grid_step must lie in (0, 1e-3], got {grid_step}"
        )));
    }
    let mut alphas: Vec<f64> = Vec::new();
    let n = (1.0 / grid_step).ceil() as usize;
    for k in 0..=n {
        alphas.push((k as f64 * grid_step).min(1.0));
    }
    for &pt in p {
        for cand in [pt - 1e-7, pt + 1e-7] {
            if (0.0..=1.0).contains(&cand) {
                alphas.push(cand);
            }
        }
    }
    let mut best = 0.0f64;
    for &alpha in &alphas {
        best = best.max(eval_objective(x, p, objective, alpha));
    }
    Ok(best)
}

fn eval_objective(x: &[u8], p: &[f64], objective: SupObjective, alpha: f64) -> f64 {
    match objective {
        SupObjective::Step => {
            let mut s = 0.0;
            for (&xi, &pi) in x.iter().zip(p) {
                if pi <= alpha {
                    s += xi as f64 - pi;
                }
            }
            s.abs()
        }
        SupObjective::Sign => {
            let mut s = 0.0;
            for (&xi, &pi) in x.iter().zip(p) {
                if pi < alpha {
                    s += xi as f64 - pi;
                } else if pi > alpha {
                    s -= xi as f64 - pi;
                }
            }
            s.abs()
        }
        SupObjective::Vcal => {
            let (mut n_lo, mut x_lo, mut n_hi, mut x_hi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for (&xi, &pi) in x.iter().zip(p) {
                if pi < alpha {
                    n_lo += 1.0;
                    x_lo += xi as f64;
                } else if pi > alpha {
                    n_hi += 1.0;
                    x_hi += xi as f64;
                }
            }
            2.0 * (x_lo - alpha * n_lo).max(alpha * n_hi - x_hi).max(0.0)
        }
    }
}

/// Measure averaged inside [`subset_enumeration_oracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerMeasure {
    Step,
    Smce,
}

const SUBSET_ORACLE_MAX_T: usize = 16;

/// Average the inner measure over all 2^T subsets by include/exclude
/// recursion, materializing each subset. Capped at T ≤ 16.
///
/// The `Step` inner evaluation is an independent quadratic scan over level
/// candidates, so this doubles as a reference for the restricted sorted walk.
pub fn subset_enumeration_oracle(x: &[u8], p: &[f64], inner: InnerMeasure) -> Result<f64> {
    measures::validate_pair(x, p)?;
    let t = x.len();
    if t > SUBSET_ORACLE_MAX_T {
        return Err(Error::cap(format!(
            "subset enumeration walks 2^T subsets and is capped at T = {SUBSET_ORACLE_MAX_T} \
             (got T = {t})"
        )));
    }
    let mut sub_x: Vec<u8> = Vec::with_capacity(t);
    let mut sub_p: Vec<f64> = Vec::with_capacity(t);
    let mut acc = 0.0f64;
    recurse(x, p, 0, &mut sub_x, &mut sub_p, inner, &mut acc);
    Ok(acc / (1u64 << t) as f64)
}

fn recurse(
    x: &[u8],
    p: &[f64],
    i: usize,
    sub_x: &mut Vec<u8>,
    sub_p: &mut Vec<f64>,
    inner: InnerMeasure,
    acc: &mut f64,
) {
    if i == x.len() {
        *acc += match inner {
            InnerMeasure::Step => step_reference(sub_x, sub_p),
            InnerMeasure::Smce => measures::smce_value(sub_x, sub_p),
        };
        return;
    }
    recurse(x, p, i + 1, sub_x, sub_p, inner, acc);
    sub_x.push(x[i]);
    sub_p.push(p[i]);
    recurse(x, p, i + 1, sub_x, sub_p, inner, acc);
    sub_x.pop();
    sub_p.pop();
}

/// Quadratic direct evaluation of the threshold-sweep sup: for every candidate
/// threshold (each prediction value), rescan the whole sequence.
fn step_reference(x: &[u8], p: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &alpha in p {
        let mut s = 0.0;
        for (&xi, &pi) in x.iter().zip(p) {
            if pi <= alpha {
                s += xi as f64 - pi;
            }
        }
        best = best.max(s.abs());
    }
    best
}

const SMCE_ORACLE_MAX_LEVELS: usize = 6;

/// Maximize Σ w_j f_j over f values restricted to the grid {−1, −1+h, …, 1}
/// under the Lipschitz constraints |f_{j+1} − f_j| ≤ q_{j+1} − q_j (with a
/// 1e−12 feasibility tolerance), by per-level window scans. Capped at 6
/// distinct levels.
///
/// The grid restriction can only lose value, so this is a lower bound on the
/// smoothed error; the loss is at most m·h·Σ|w_j|. When every level is a
/// multiple of the grid step, the continuous optimum sits on grid points
/// (vertex values of the exact program are ±1 plus signed sums of level gaps)
/// and the bound is tight.
pub fn smce_grid_oracle(x: &[u8], p: &[f64], f_grid_step: f64) -> Result<f64> {
    measures::validate_pair(x, p)?;
    if !(f_grid_step > 0.0 && f_grid_step <= 1.0) {
        return Err(Error::arg(format!(
            "f_grid_step must lie in (0, 1], got {f_grid_step}"
        )));
    }
    if x.is_empty() {
        return Ok(0.0);
    }
    // group by distinct level, independently of the measures module: sort
    // (p, x) pairs and fold runs of equal p
    let mut pairs: Vec<(f64, u8)> = p.iter().copied().zip(x.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut levels: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &(pv, xv) in &pairs {
        if levels.last() == Some(&pv) {
            *weights.last_mut().unwrap() += xv as f64 - pv;
        } else {
            levels.push(pv);
            weights.push(xv as f64 - pv);
        }
    }
    let m = levels.len();
    if m > SMCE_ORACLE_MAX_LEVELS {
        return Err(Error::cap(format!(
            "the function-grid scan is capped at {SMCE_ORACLE_MAX_LEVELS} distinct prediction \
             levels (got {m})"
        )));
    }

    let h = f_grid_step;
    let n = (2.0 / h).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| (-1.0 + i as f64 * h).min(1.0)).collect();
    const FEAS_TOL: f64 = 1e-12;

    let mut value: Vec<f64> = grid.iter().map(|&g| weights[0] * g).collect();
    let mut next = vec![0.0f64; grid.len()];
    for j in 1..m {
        let d = levels[j] - levels[j - 1] + FEAS_TOL;
        let width = (d / h).ceil() as usize + 1;
        for (i, &g) in grid.iter().enumerate() {
            let lo = i.saturating_sub(width);
            let hi = (i + width).min(grid.len() - 1);
            let mut best = f64::MIN;
            for i2 in lo..=hi {
                if (grid[i2] - g).abs() <= d {
                    best = best.max(value[i2]);
                }
            }
            next[i] = best + weights[j] * g;
        }
        std::mem::swap(&mut value, &mut next);
    }
    Ok(value.iter().copied().fold(0.0f64, f64::max))
}

/// One optimized-vs-reference comparison from [`random_instance_battery`].
#[derive(Clone, Debug)]
pub struct OracleReport {
    pub measure: MeasureKind,
    /// sequence length of the instance
    pub t: usize,
    /// number of distinct prediction levels
    pub levels: usize,
    pub optimized: f64,
    pub oracle: f64,
    pub abs_diff: f64,
    /// instance descriptor for reproducing failures
    pub instance: String,
}

/// Generate seeded random instances for cross-checking. Prediction levels are
/// drawn from a per-instance palette of at most 6 multiples of 1/512 —
/// exactly representable, so repeated levels compare equal bit-for-bit and
/// the default function grid of [`smce_grid_oracle`] (step 1/512) contains
/// every vertex of the exact smoothed-error program. A tenth of the instances
/// are degenerate binary ones with x = p.
pub fn random_instances(n: usize, t_max: usize, seed: u64) -> Vec<(Vec<u8>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.random_range(0..=t_max);
        if rng.random::<f64>() < 0.1 {
            // perfectly calibrated binary instance: every measure must vanish
            let x: Vec<u8> = (0..t).map(|_| rng.random_range(0..=1) as u8).collect();
            let p: Vec<f64> = x.iter().map(|&b| b as f64).collect();
            out.push((x, p));
            continue;
        }
        let n_levels = rng.random_range(1..=6usize);
        let mut palette: Vec<f64> = Vec::with_capacity(n_levels);
        while palette.len() < n_levels {
            let level = rng.random_range(0..=512u32) as f64 / 512.0;
            if !palette.contains(&level) {
                palette.push(level);
            }
        }
        let bias = rng.random::<f64>();
        let x: Vec<u8> = (0..t).map(|_| (rng.random::<f64>() < bias) as u8).collect();
        let p: Vec<f64> = (0..t)
            .map(|_| palette[rng.random_range(0..palette.len())])
            .collect();
        out.push((x, p));
    }
    out
}

/// Run every optimized measure against its brute-force reference on seeded
/// random instances, returning one report per comparison.
///
/// `t_max` must be ≤ 16 so the subset enumeration stays feasible.
pub fn random_instance_battery(
    n_instances: usize,
    t_max: usize,
    grid_step: f64,
    f_grid_step: f64,
    seed: u64,
) -> Result<Vec<OracleReport>> {
    if t_max > SUBSET_ORACLE_MAX_T {
        return Err(Error::cap(format!(
            "the battery includes subset enumeration, so t_max is capped at \
             {SUBSET_ORACLE_MAX_T} (got {t_max})"
        )));
    }
    let instances = random_instances(n_instances, t_max, seed);
    let mut reports = Vec::with_capacity(n_instances * 6);
    for (idx, (x, p)) in instances.iter().enumerate() {
        let mut distinct: Vec<f64> = p.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        let m = distinct.len();
        let desc = format!("instance {idx} (T={}, levels={m})", x.len());
        let mut push = |measure: MeasureKind, optimized: f64, oracle: f64| {
            reports.push(OracleReport {
                measure,
                t: x.len(),
                levels: m,
                optimized,
                oracle,
                abs_diff: (optimized - oracle).abs(),
                instance: desc.clone(),
            });
        };

        push(
            MeasureKind::Step,
            measures::step_ce(x, p)?.value,
            grid_sup_oracle(x, p, SupObjective::Step, grid_step)?,
        );
        push(
            MeasureKind::Sign,
            measures::sign_ce(x, p)?.value,
            grid_sup_oracle(x, p, SupObjective::Sign, grid_step)?,
        );
        push(
            MeasureKind::Vcal,
            measures::vcal(x, p)?.value,
            grid_sup_oracle(x, p, SupObjective::Vcal, grid_step)?,
        );
        push(
            MeasureKind::StepSub,
            measures::step_ce_sub_exact(x, p)?.value,
            subset_enumeration_oracle(x, p, InnerMeasure::Step)?,
        );
        push(
            MeasureKind::Ssce,
            measures::ssce(x, p, &mut measures::SubsetSampler::exhaustive())?.value,
            subset_enumeration_oracle(x, p, InnerMeasure::Smce)?,
        );
        push(
            MeasureKind::Smce,
            measures::smce(x, p)?.value,
            smce_grid_oracle(x, p, f_grid_step)?,
        );
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_oracle_matches_known_values() {
        let grid = 1e-3;
        let v = grid_sup_oracle(&[0, 1], &[0.0, 0.75], SupObjective::Step, grid).unwrap();
        assert!((v - 0.25).abs() <= 1e-9);
        let v = grid_sup_oracle(&[1, 0], &[0.4, 0.6], SupObjective::Vcal, grid).unwrap();
        // piecewise-linear objective: grid maximizer within one step of 0.6
        assert!((v - 1.2).abs() <= 2.0 * 2.0 * grid + 1e-9, "{v}");
        let v = grid_sup_oracle(&[0, 1], &[0.0, 0.75], SupObjective::Sign, grid).unwrap();
        assert!((v - 0.25).abs() <= 1e-9);
    }

    #[test]
    fn grid_oracle_validates_step() {
        assert!(grid_sup_oracle(&[1], &[0.5], SupObjective::Step, 0.01).is_err());
        assert!(grid_sup_oracle(&[1], &[0.5], SupObjective::Step, 0.0).is_err());
    }

    #[test]
    fn subset_oracle_single_point() {
        let v = subset_enumeration_oracle(&[1], &[0.3], InnerMeasure::Step).unwrap();
        assert!((v - 0.35).abs() <= 1e-12);
        let v = subset_enumeration_oracle(&[1], &[0.5], InnerMeasure::Smce).unwrap();
        assert!((v - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn subset_oracle_cap() {
        let x = vec![0u8; 17];
        let p = vec![0.5; 17];
        assert!(matches!(
            subset_enumeration_oracle(&x, &p, InnerMeasure::Step),
            Err(crate::Error::Capability(_))
        ));
    }

    #[test]
    fn smce_grid_oracle_on_grid_instance_is_exact() {
        // levels 0.25 and 0.5 are multiples of 1/512, so the scan over the
        // 1/512 grid hits the true optimum
        let x = [1, 0];
        let p = [0.25, 0.5];
        let exact = measures::smce(&x, &p).unwrap().value;
        let scanned = smce_grid_oracle(&x, &p, 1.0 / 512.0).unwrap();
        assert!((exact - scanned).abs() <= 1e-12, "{exact} vs {scanned}");
    }

    #[test]
    fn smce_grid_oracle_level_cap() {
        let p: Vec<f64> = (0..7).map(|i| i as f64 / 7.0).collect();
        let x = vec![1u8; 7];
        assert!(matches!(
            smce_grid_oracle(&x, &p, 1.0 / 512.0),
            Err(crate::Error::Capability(_))
        ));
    }

    #[test]
    fn battery_runs_and_reports() {
        let reports = random_instance_battery(20, 8, 1e-3, 1.0 / 512.0, 3).unwrap();
        assert_eq!(reports.len(), 20 * 6);
        for r in &reports {
            assert!(r.abs_diff.is_finite());
        }
    }

    #[test]
    fn battery_rejects_large_t() {
        assert!(matches!(
            random_instance_battery(1, 17, 1e-3, 1.0 / 512.0, 0),
            Err(crate::Error::Capability(_))
        ));
    }
}
