//! Calibration measures on a finished transcript.
//!
//! Every measure takes the outcome sequence `x ∈ {0,1}^T` and the prediction
//! sequence `p ∈ [0,1]^T`. Measures defined through a supremum over a
//! threshold α are evaluated exactly: each objective is piecewise constant or
//! piecewise linear in α with breakpoints only at the distinct prediction
//! values, so the sup reduces to finitely many candidates. Where a definition
//! uses strict inequalities (`vcal`, `sign_ce`) the candidates are one-sided
//! limits at the breakpoints, and the returned value is a true supremum that
//! may be attained only in the limit.
//!
//! Prediction levels are grouped by exact floating equality; anything that
//! reuses a level must emit it bit-identically (the natures and forecasters in
//! this crate do).

use crate::util::{compensated_sum, Neumaier};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Which measure a [`MeasureValue`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MeasureKind {
    /// Threshold-sweep error: sup over α of |Σ (x−p)·1{p ≤ α}|.
    Step,
    /// Subset average of `Step` over uniformly random timestep subsets.
    StepSub,
    /// Two-sided interval error (alternative form with strict comparisons).
    Vcal,
    /// Subset average of `Vcal`.
    VcalSub,
    /// Certified enclosure [vcal, 2·vcal] of the scoring-rule regret form.
    Ucal,
    /// Signed-threshold error: sup over α of |Σ (x−p)·sgn(α−p)|.
    Sign,
    /// Per-level absolute residual sum (classic binned calibration error).
    Ece,
    /// Lipschitz-smoothed error: sup over 1-Lipschitz f of Σ f(p)(x−p).
    Smce,
    /// Subset average of `Smce`.
    Ssce,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Step => "step",
            MeasureKind::StepSub => "step_sub",
            MeasureKind::Vcal => "vcal",
            MeasureKind::VcalSub => "vcal_sub",
            MeasureKind::Ucal => "ucal",
            MeasureKind::Sign => "sign",
            MeasureKind::Ece => "ece",
            MeasureKind::Smce => "smce",
            MeasureKind::Ssce => "ssce",
        }
    }
}

/// How a [`MeasureValue`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exactness {
    /// Closed-form/exhaustive evaluation; no sampling error.
    Exact,
    /// Monte Carlo average over `m` subset draws with the given standard error.
    MonteCarlo { stderr: f64, m: usize },
    /// Certified interval; `value` equals the lower endpoint.
    Interval { lo: f64, hi: f64 },
}

/// A computed measure: nonnegative value plus provenance of its accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureValue {
    pub kind: MeasureKind,
    pub value: f64,
    pub exactness: Exactness,
}

impl MeasureValue {
    fn exact(kind: MeasureKind, value: f64) -> MeasureValue {
        MeasureValue {
            kind,
            value,
            exactness: Exactness::Exact,
        }
    }
}

/// Validate an (x, p) pair: equal lengths, x ∈ {0,1}, p ∈ [0,1] (NaN rejected).
pub(crate) fn validate_pair(x: &[u8], p: &[f64]) -> Result<()> {
    if x.len() != p.len() {
        return Err(Error::arg(format!(
            "length mismatch: {} outcomes vs {} predictions",
            x.len(),
            p.len()
        )));
    }
    if let Some(pos) = x.iter().position(|&b| b > 1) {
        return Err(Error::arg(format!(
            "outcome at index {pos} is {}, expected 0 or 1",
            x[pos]
        )));
    }
    if let Some(pos) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::arg(format!(
            "prediction at index {pos} is {}, expected a value in [0, 1]",
            p[pos]
        )));
    }
    Ok(())
}

/// Timesteps reordered by ascending prediction level, with residuals aligned
/// and boundaries of the distinct-level groups precomputed. All sup-type
/// measures walk this structure.
struct Levels {
    /// original index of each sorted timestep
    order: Vec<u32>,
    /// prediction per sorted timestep
    ps: Vec<f64>,
    /// x − p per sorted timestep
    resid: Vec<f64>,
    /// outcome per sorted timestep
    xs: Vec<f64>,
    /// offsets delimiting groups of equal predictions: groups[g]..groups[g+1]
    groups: Vec<u32>,
}

impl Levels {
    fn new(x: &[u8], p: &[f64]) -> Levels {
        let t = p.len();
        let mut order: Vec<u32> = (0..t as u32).collect();
        // stable sort keeps time order within a level, fixing the float
        // summation order deterministically
        order.sort_by(|&a, &b| p[a as usize].partial_cmp(&p[b as usize]).unwrap());
        let mut ps = Vec::with_capacity(t);
        let mut resid = Vec::with_capacity(t);
        let mut xs = Vec::with_capacity(t);
        let mut groups = vec![0u32];
        for (i, &o) in order.iter().enumerate() {
            let pv = p[o as usize];
            if i > 0 && pv != ps[i - 1] {
                groups.push(i as u32);
            }
            ps.push(pv);
            resid.push(x[o as usize] as f64 - pv);
            xs.push(x[o as usize] as f64);
        }
        groups.push(t as u32);
        Levels {
            order,
            ps,
            resid,
            xs,
            groups,
        }
    }

    fn len(&self) -> usize {
        self.ps.len()
    }

    fn group_count(&self) -> usize {
        self.groups.len() - 1
    }

    fn group(&self, g: usize) -> std::ops::Range<usize> {
        self.groups[g] as usize..self.groups[g + 1] as usize
    }

    fn level(&self, g: usize) -> f64 {
        self.ps[self.groups[g] as usize]
    }
}

/// sup over α of |Σ (x−p)·1{p ≤ α}| on the full index set: max |grouped
/// prefix sum|, with 0 (α below the lowest level) always a candidate.
fn step_sup(lv: &Levels) -> f64 {
    let mut best = 0.0f64;
    let mut run = 0.0f64;
    for g in 0..lv.group_count() {
        for i in lv.group(g) {
            run += lv.resid[i];
        }
        best = best.max(run.abs());
    }
    best
}

/// Same sup restricted to the timesteps selected by `included` (indexed by
/// original position). Group boundaries stay those of the full set; empty
/// groups just repeat the previous candidate.
fn step_sup_masked(lv: &Levels, included: &[bool]) -> f64 {
    let mut best = 0.0f64;
    let mut run = 0.0f64;
    for g in 0..lv.group_count() {
        for i in lv.group(g) {
            if included[lv.order[i] as usize] {
                run += lv.resid[i];
            }
        }
        best = best.max(run.abs());
    }
    best
}

/// Threshold-sweep calibration error.
pub fn step_ce(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let lv = Levels::new(x, p);
    Ok(MeasureValue::exact(MeasureKind::Step, step_sup(&lv)))
}

/// Draws timestep subsets for the subset-averaged measures: either every
/// subset (exhaustive) or `m` uniform samples from a seeded generator.
///
/// A sampler owns its generator state, so it is not shareable across threads;
/// give each worker its own.
pub enum SubsetSampler {
    Exhaustive,
    MonteCarlo { m: usize, rng: ChaCha8Rng },
}

impl SubsetSampler {
    pub fn exhaustive() -> SubsetSampler {
        SubsetSampler::Exhaustive
    }

    pub fn monte_carlo(m: usize, seed: u64) -> Result<SubsetSampler> {
        if m == 0 {
            return Err(Error::arg("subset sample count m must be ≥ 1"));
        }
        Ok(SubsetSampler::MonteCarlo {
            m,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

const STEP_SUB_EXACT_MAX_T: usize = 20;
const SSCE_EXACT_MAX_T: usize = 16;

/// Exact subset-averaged threshold-sweep error: mean of the restricted sup
/// over all 2^T subsets. Capped at T ≤ 20.
pub fn step_ce_sub_exact(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let t = x.len();
    if t > STEP_SUB_EXACT_MAX_T {
        return Err(Error::cap(format!(
            "exact subset averaging enumerates 2^T subsets and is capped at T = \
             {STEP_SUB_EXACT_MAX_T} (got T = {t}); use step_ce_sub with a Monte Carlo sampler"
        )));
    }
    let lv = Levels::new(x, p);
    let mut included = vec![false; t];
    let mut acc = Neumaier::default();
    for mask in 0u64..(1u64 << t) {
        for (i, inc) in included.iter_mut().enumerate() {
            *inc = mask & (1 << i) != 0;
        }
        acc.add(step_sup_masked(&lv, &included));
    }
    let mean = acc.total() / (1u64 << t) as f64;
    Ok(MeasureValue::exact(MeasureKind::StepSub, mean))
}

fn mc_mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt())
}

/// Subset-averaged threshold-sweep error. With an exhaustive sampler this is
/// the exact expectation (T ≤ 20); with a Monte Carlo sampler it is the
/// sample mean over `m` uniform subsets plus its standard error.
pub fn step_ce_sub(x: &[u8], p: &[f64], sampler: &mut SubsetSampler) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    match sampler {
        SubsetSampler::Exhaustive => {
            let mv = step_ce_sub_exact(x, p)?;
            Ok(MeasureValue::exact(MeasureKind::StepSub, mv.value))
        }
        SubsetSampler::MonteCarlo { m, rng } => {
            let lv = Levels::new(x, p);
            let mut included = vec![false; x.len()];
            let mut values = Vec::with_capacity(*m);
            for _ in 0..*m {
                for inc in included.iter_mut() {
                    *inc = rng.random::<bool>();
                }
                values.push(step_sup_masked(&lv, &included));
            }
            let (mean, stderr) = mc_mean_stderr(&values);
            Ok(MeasureValue {
                kind: MeasureKind::StepSub,
                value: mean,
                exactness: Exactness::MonteCarlo { stderr, m: *m },
            })
        }
    }
}

/// Two-sided interval calibration error via its strict-comparison form:
/// 2·sup_α max{X₋(α) − α·N₋(α), α·N₊(α) − X₊(α)} with N₋/X₋ counting p < α
/// and N₊/X₊ counting p > α.
///
/// Between consecutive breakpoints (the distinct levels plus 0 and 1) the
/// counts are constant and the objective linear in α, so the sup is the max of
/// one-sided limits at interval endpoints.
pub fn vcal(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let lv = Levels::new(x, p);
    Ok(MeasureValue::exact(MeasureKind::Vcal, vcal_sup(&lv)))
}

fn vcal_sup(lv: &Levels) -> f64 {
    let t = lv.len();
    if t == 0 {
        return 0.0;
    }
    let m = lv.group_count();
    // per distinct level: cumulative count and outcome mass at-or-below
    let mut cum_n = Vec::with_capacity(m);
    let mut cum_x = Vec::with_capacity(m);
    let mut n_acc = 0usize;
    let mut x_acc = 0.0f64;
    for g in 0..m {
        for i in lv.group(g) {
            x_acc += lv.xs[i];
        }
        n_acc += lv.group(g).len();
        cum_n.push(n_acc);
        cum_x.push(x_acc);
    }
    let total_x = x_acc;

    // breakpoints 0, q_1, …, q_m, 1 without duplicates
    let mut bps = Vec::with_capacity(m + 2);
    bps.push(0.0);
    for g in 0..m {
        let q = lv.level(g);
        if q != *bps.last().unwrap() {
            bps.push(q);
        }
    }
    if *bps.last().unwrap() != 1.0 {
        bps.push(1.0);
    }

    let mut best = 0.0f64; // the sup is ≥ 0 (both terms vanish as α → 0⁺ side)
    let mut below = 0usize; // number of distinct levels ≤ current left endpoint
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        while below < m && lv.level(below) <= a {
            below += 1;
        }
        let (nm, xm) = if below > 0 {
            (cum_n[below - 1] as f64, cum_x[below - 1])
        } else {
            (0.0, 0.0)
        };
        let np = (t - if below > 0 { cum_n[below - 1] } else { 0 }) as f64;
        let xp = total_x - xm;
        for alpha in [a, b] {
            best = best.max(xm - alpha * nm).max(alpha * np - xp);
        }
    }
    2.0 * best
}

/// Certified enclosure of the proper-scoring-rule regret form: the interval
/// [vcal, 2·vcal]. The reported `value` is the lower endpoint.
pub fn ucal_bounds(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    let v = vcal(x, p)?.value;
    Ok(MeasureValue {
        kind: MeasureKind::Ucal,
        value: v,
        exactness: Exactness::Interval { lo: v, hi: 2.0 * v },
    })
}

/// Signed-threshold calibration error: sup over α of |Σ (x−p)·sgn(α − p)|,
/// with sgn contributing 0 at α = p exactly.
///
/// The objective is piecewise constant on the open intervals between distinct
/// levels and takes a separate value at each level, so the candidates are the
/// interval values plus the at-level values.
pub fn sign_ce(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let lv = Levels::new(x, p);
    Ok(MeasureValue::exact(MeasureKind::Sign, sign_sup(&lv)))
}

fn sign_sup(lv: &Levels) -> f64 {
    let t = lv.len();
    if t == 0 {
        return 0.0;
    }
    let m = lv.group_count();
    let mut group_sum = Vec::with_capacity(m);
    for g in 0..m {
        group_sum.push(lv.group(g).map(|i| lv.resid[i]).sum::<f64>());
    }
    let total: f64 = group_sum.iter().sum();

    let mut best = 0.0f64;
    // α below the lowest level (only if that region is nonempty)
    if lv.level(0) > 0.0 {
        best = best.max(total.abs());
    }
    let mut prefix = 0.0f64; // Σ of group sums strictly below the current level
    for g in 0..m {
        // exactly at q_g: below levels flip sign, q_g contributes 0
        best = best.max((2.0 * prefix + group_sum[g] - total).abs());
        prefix += group_sum[g];
        // on the open interval above q_g (exists unless q_g = 1)
        if lv.level(g) < 1.0 {
            best = best.max((2.0 * prefix - total).abs());
        }
    }
    best
}

/// Per-level absolute residual sum: Σ over distinct levels α of
/// |Σ (x−p)·1{p = α}|. Levels are distinct by exact numeric equality.
pub fn ece(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let lv = Levels::new(x, p);
    let mut acc = Neumaier::default();
    for g in 0..lv.group_count() {
        acc.add(lv.group(g).map(|i| lv.resid[i]).sum::<f64>().abs());
    }
    Ok(MeasureValue::exact(MeasureKind::Ece, acc.total()))
}

/// Concave piecewise-linear function stored as vertices (position, value)
/// with strictly increasing positions. Supports the three operations the
/// smoothed-error dynamic program needs.
struct Cpl {
    pts: Vec<(f64, f64)>,
}

impl Cpl {
    /// f ↦ w·f on [−1, 1].
    fn linear(w: f64) -> Cpl {
        Cpl {
            pts: vec![(-1.0, -w), (1.0, w)],
        }
    }

    fn max_value(&self) -> f64 {
        self.pts.iter().map(|&(_, y)| y).fold(f64::MIN, f64::max)
    }

    /// Replace V by f ↦ max over |u − f| ≤ d of V(u): the rising part shifts
    /// left by d, the falling part right by d, with a plateau at the max in
    /// between. Extends the domain by d on both sides.
    fn relax(&mut self, d: f64) {
        if d <= 0.0 {
            return;
        }
        let ymax = self.max_value();
        let i_lo = self.pts.iter().position(|&(_, y)| y == ymax).unwrap();
        let i_hi = self.pts.iter().rposition(|&(_, y)| y == ymax).unwrap();
        let mut pts = Vec::with_capacity(self.pts.len() + 1);
        pts.extend(self.pts[..=i_lo].iter().map(|&(px, y)| (px - d, y)));
        pts.extend(self.pts[i_hi..].iter().map(|&(px, y)| (px + d, y)));
        self.pts = pts;
    }

    fn add_linear(&mut self, w: f64) {
        for (px, y) in self.pts.iter_mut() {
            *y += w * *px;
        }
    }

    fn eval(&self, f: f64) -> f64 {
        let pts = &self.pts;
        if f <= pts[0].0 {
            return pts[0].1;
        }
        if f >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let hi = pts.partition_point(|&(px, _)| px < f);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        y0 + (y1 - y0) * (f - x0) / (x1 - x0)
    }

    /// Restrict the domain to [−1, 1]. Callers only clip after a relax, so the
    /// current domain always covers [−1, 1].
    fn clip_unit(&mut self) {
        let lo = self.eval(-1.0);
        let hi = self.eval(1.0);
        let mut pts = Vec::with_capacity(self.pts.len());
        pts.push((-1.0, lo));
        pts.extend(
            self.pts
                .iter()
                .copied()
                .filter(|&(px, _)| px > -1.0 && px < 1.0),
        );
        pts.push((1.0, hi));
        self.pts = pts;
    }
}

/// Core of [`smce`] on pre-validated slices; shared with the subset-averaged
/// variant and the brute-force references.
pub(crate) fn smce_value(x: &[u8], p: &[f64]) -> f64 {
    let lv = Levels::new(x, p);
    if lv.len() == 0 {
        return 0.0;
    }
    // weight of level q_j is Σ_{p_t = q_j} (x_t − q_j), i.e. the group
    // residual sum
    let m = lv.group_count();
    let mut v = Cpl::linear(lv.group(0).map(|i| lv.resid[i]).sum::<f64>());
    for g in 1..m {
        let w: f64 = lv.group(g).map(|i| lv.resid[i]).sum();
        v.relax(lv.level(g) - lv.level(g - 1));
        v.add_linear(w);
        v.clip_unit();
    }
    // f ≡ 0 is always feasible, so the true optimum is ≥ 0; the max is taken
    // over vertices of a concave function, which is exact
    v.max_value().max(0.0)
}

/// Smoothed calibration error: sup over 1-Lipschitz f: [0,1] → [−1,1] of
/// Σ f(p_t)(x_t − p_t).
///
/// Grouping by distinct levels q_1 < … < q_m reduces this to maximizing
/// Σ w_j·f_j subject to f_j ∈ [−1,1] and |f_{j+1} − f_j| ≤ q_{j+1} − q_j,
/// solved exactly by a forward dynamic program over concave piecewise-linear
/// value functions: relax by the level gap, add the next linear term, clip to
/// [−1,1].
pub fn smce(x: &[u8], p: &[f64]) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    Ok(MeasureValue::exact(MeasureKind::Smce, smce_value(x, p)))
}

/// Subset-averaged smoothed calibration error. The exhaustive sampler
/// enumerates all 2^T subsets (T ≤ 16); the Monte Carlo sampler averages `m`
/// uniform draws and reports a standard error.
pub fn ssce(x: &[u8], p: &[f64], sampler: &mut SubsetSampler) -> Result<MeasureValue> {
    validate_pair(x, p)?;
    let t = x.len();
    let mut sub_x: Vec<u8> = Vec::with_capacity(t);
    let mut sub_p: Vec<f64> = Vec::with_capacity(t);
    match sampler {
        SubsetSampler::Exhaustive => {
            if t > SSCE_EXACT_MAX_T {
                return Err(Error::cap(format!(
                    "exhaustive subset averaging enumerates 2^T subsets and is capped at T = \
                     {SSCE_EXACT_MAX_T} (got T = {t}); use a Monte Carlo sampler"
                )));
            }
            let mut acc = Neumaier::default();
            for mask in 0u64..(1u64 << t) {
                sub_x.clear();
                sub_p.clear();
                for i in 0..t {
                    if mask & (1 << i) != 0 {
                        sub_x.push(x[i]);
                        sub_p.push(p[i]);
                    }
                }
                acc.add(smce_value(&sub_x, &sub_p));
            }
            let mean = acc.total() / (1u64 << t) as f64;
            Ok(MeasureValue::exact(MeasureKind::Ssce, mean))
        }
        SubsetSampler::MonteCarlo { m, rng } => {
            let mut values = Vec::with_capacity(*m);
            for _ in 0..*m {
                sub_x.clear();
                sub_p.clear();
                for i in 0..t {
                    if rng.random::<bool>() {
                        sub_x.push(x[i]);
                        sub_p.push(p[i]);
                    }
                }
                values.push(smce_value(&sub_x, &sub_p));
            }
            let (mean, stderr) = mc_mean_stderr(&values);
            Ok(MeasureValue {
                kind: MeasureKind::Ssce,
                value: mean,
                exactness: Exactness::MonteCarlo { stderr, m: *m },
            })
        }
    }
}

/// Penalty-floor scale: γ(v) = v for v ≤ 1, √v above.
pub fn gamma(v: f64) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::arg(format!("gamma requires v ≥ 0, got {v}")));
    }
    Ok(if v <= 1.0 { v } else { v.sqrt() })
}
