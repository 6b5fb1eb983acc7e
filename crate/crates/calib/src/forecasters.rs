//! Forecasting strategies driven step by step by the harness.
//!
//! A forecaster is asked for a prediction before each outcome (it may consume
//! randomness and, for the truthful baseline, sees the nature's conditional
//! probability) and observes the realized outcome together with its own
//! prediction afterwards.
//!
//! Besides the truthful and constant baselines there are three strategic
//! players:
//!
//! * `hedging_fifths` hedges against the two-block nature (p* = 0.2 then 0.8)
//!   by predicting 2/5 and 3/5: pulling both blocks toward ½ leaves every
//!   threshold interval with a one-sided outcome surplus of the harmless
//!   sign, so the interval calibration error is exactly zero unless a
//!   large-deviation event occurs.
//! * `patching` exploits the epoch construction: stay at ½ through the search
//!   phase, then patch the running outcome surplus with predictions near 0
//!   and 1 so the threshold-sweep error telescopes.
//! * `hedge_step` is the regret-minimizing forecaster over 2k threshold
//!   experts; its randomized prediction zeroes out the expected imbalance at
//!   the chosen grid level, giving O(√(T log k)) threshold-sweep error.

use crate::environments::NatureSpec;
use crate::util::Neumaier;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    /// predict the nature's conditional probability
    Truthful,
    /// predict a fixed level
    Constant,
    /// predict 2/5 for the first half of the horizon, 3/5 after
    HedgingFifths,
    /// two-phase patching strategy against the epoch construction
    Patching,
    /// randomized weighted-experts forecaster on the grid {i/(k−1)}
    HedgeStep,
}

/// Serializable description of a forecaster. Kind-specific fields are
/// validated by [`ForecasterSpec::build`], which also pulls horizon and
/// smoothness information from the nature it will play against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecasterSpec {
    pub kind: ForecasterKind,
    /// prediction of the `constant` forecaster
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// grid size of `hedge_step`; defaults to the horizon
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// learning-rate override for `hedge_step`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl ForecasterSpec {
    pub fn truthful() -> ForecasterSpec {
        ForecasterSpec {
            kind: ForecasterKind::Truthful,
            level: None,
            k: None,
            eta: None,
        }
    }

    pub fn constant(level: f64) -> ForecasterSpec {
        ForecasterSpec {
            kind: ForecasterKind::Constant,
            level: Some(level),
            k: None,
            eta: None,
        }
    }

    pub fn hedging_fifths() -> ForecasterSpec {
        ForecasterSpec {
            kind: ForecasterKind::HedgingFifths,
            level: None,
            k: None,
            eta: None,
        }
    }

    pub fn patching() -> ForecasterSpec {
        ForecasterSpec {
            kind: ForecasterKind::Patching,
            level: None,
            k: None,
            eta: None,
        }
    }

    pub fn hedge_step(k: Option<usize>, eta: Option<f64>) -> ForecasterSpec {
        ForecasterSpec {
            kind: ForecasterKind::HedgeStep,
            level: None,
            k,
            eta,
        }
    }

    /// Validate against the nature this forecaster will face and produce a
    /// fresh state.
    pub fn build(&self, nature: &NatureSpec) -> Result<ForecasterState> {
        match self.kind {
            ForecasterKind::Truthful => Ok(ForecasterState::Truthful),
            ForecasterKind::Constant => {
                let level = self
                    .level
                    .ok_or_else(|| Error::arg("constant forecaster requires a level"))?;
                if !(0.0..=1.0).contains(&level) {
                    return Err(Error::arg(format!(
                        "constant level must lie in [0, 1], got {level}"
                    )));
                }
                Ok(ForecasterState::Constant { level })
            }
            ForecasterKind::HedgingFifths => {
                if nature.t % 2 != 0 {
                    return Err(Error::arg(format!(
                        "the hedging forecaster needs an even horizon, got T = {}",
                        nature.t
                    )));
                }
                Ok(ForecasterState::HedgingFifths { horizon: nature.t })
            }
            ForecasterKind::Patching => {
                let c = nature.smoothness().ok_or_else(|| {
                    Error::arg(
                        "the patching forecaster needs a nature with a smoothness parameter c",
                    )
                })?;
                if !(c > 0.0 && c < 1.0) {
                    return Err(Error::arg(format!(
                        "smoothness must lie in (0, 1), got {c}"
                    )));
                }
                if nature.t == 0 || nature.t % 10 != 0 {
                    return Err(Error::arg(format!(
                        "the patching forecaster needs a horizon divisible by 10, got T = {}",
                        nature.t
                    )));
                }
                Ok(ForecasterState::Patching(PatchingState {
                    c,
                    horizon: nature.t,
                    bias: 0.0,
                    seen: 0,
                    delta_negative: None,
                    switched: false,
                }))
            }
            ForecasterKind::HedgeStep => {
                let k = self.k.unwrap_or(nature.t);
                Ok(ForecasterState::HedgeStep(HedgeState::new(
                    k, nature.t, self.eta,
                )?))
            }
        }
    }
}

/// A running forecaster. `predict` is called with the 1-based step index and
/// the nature's conditional probability (used only by the truthful kind);
/// `observe` feeds back the realized outcome and the prediction that was
/// actually played.
pub enum ForecasterState {
    Truthful,
    Constant { level: f64 },
    HedgingFifths { horizon: usize },
    Patching(PatchingState),
    HedgeStep(HedgeState),
}

impl ForecasterState {
    pub fn predict<R: Rng + ?Sized>(&mut self, t: usize, pstar: f64, rng: &mut R) -> Result<f64> {
        match self {
            ForecasterState::Truthful => Ok(pstar),
            ForecasterState::Constant { level } => Ok(*level),
            ForecasterState::HedgingFifths { horizon } => {
                Ok(if t <= *horizon / 2 { 0.4 } else { 0.6 })
            }
            ForecasterState::Patching(p) => p.predict(t),
            ForecasterState::HedgeStep(h) => Ok(h.predict(rng)),
        }
    }

    pub fn observe(&mut self, x: u8, p: f64) -> Result<()> {
        match self {
            ForecasterState::Patching(st) => st.observe(x, p),
            ForecasterState::HedgeStep(h) => h.update(x, p),
            _ => Ok(()),
        }
    }
}

/// Two-phase patching strategy against the epoch construction.
///
/// Phase one (first fifth of the horizon) predicts ½ and tracks the running
/// surplus Δ = Σ (x_t − ½) over the ½-predicted steps. The sign of Δ at the
/// end of the phase decides which of the two remaining blocks absorbs it: the
/// strategy keeps predicting ½ inside that block until the surplus first
/// crosses zero, then jumps permanently to the extreme prediction matching
/// the block (c/2 near the low block, 1 − c/2 near the high block). Because
/// the surplus is frozen the moment the jump happens, the first crossing is
/// also the point where the absorbed surplus is maximal.
pub struct PatchingState {
    c: f64,
    horizon: usize,
    /// running surplus over ½-predicted steps
    bias: f64,
    /// outcomes observed so far
    seen: usize,
    /// sign of the surplus at the end of phase one (negative ⇒ absorb in the
    /// high block)
    delta_negative: Option<bool>,
    /// whether the absorbing block has jumped to its extreme prediction
    switched: bool,
}

impl PatchingState {
    fn predict(&mut self, t: usize) -> Result<f64> {
        let fifth = self.horizon / 5;
        if t == 0 || t > self.horizon {
            return Err(Error::state(format!(
                "step {t} outside the horizon 1..={}",
                self.horizon
            )));
        }
        if t <= fifth {
            return Ok(0.5);
        }
        let negative = self
            .delta_negative
            .ok_or_else(|| Error::state("phase one has not completed; outcomes are missing"))?;
        let middle = t <= 3 * self.horizon / 5;
        if negative {
            if middle {
                Ok(self.c / 2.0)
            } else if !self.switched && self.bias < 0.0 {
                Ok(0.5)
            } else {
                self.switched = true;
                Ok(1.0 - self.c / 2.0)
            }
        } else if middle {
            if !self.switched && self.bias >= 0.0 {
                Ok(0.5)
            } else {
                self.switched = true;
                Ok(self.c / 2.0)
            }
        } else {
            Ok(1.0 - self.c / 2.0)
        }
    }

    fn observe(&mut self, x: u8, p: f64) -> Result<()> {
        if x > 1 {
            return Err(Error::arg(format!("outcome must be 0 or 1, got {x}")));
        }
        if p == 0.5 {
            self.bias += x as f64 - 0.5;
        }
        self.seen += 1;
        if self.seen == self.horizon / 5 {
            self.delta_negative = Some(self.bias < 0.0);
        }
        Ok(())
    }
}

/// Tolerance below which a suffix imbalance counts as zero when choosing the
/// prediction branch.
const IMBALANCE_TOL: f64 = 1e-12;

/// Randomized weighted-experts forecaster over the grid {0, 1/(k−1), …, 1}.
///
/// It maintains multiplicative weights over 2k experts (σ, i) with σ ∈ {±1}
/// and i ∈ 1..=k, where expert (σ, i) bets that outcomes exceed predictions
/// (σ = +1) or fall short (σ = −1) whenever the prediction is at most
/// (i−1)/(k−1). The per-step cost of expert (σ, i) after playing p and seeing
/// x is (1 − σ·1{p ≤ (i−1)/(k−1)}·(x − p))/2 ∈ [0, 1].
///
/// Prediction looks at the suffix imbalances C_j = Σ_{i ≥ j} (w⁺_i − w⁻_i):
/// all nonnegative means the weighted experts want outcomes above any level —
/// predict 1; all nonpositive — predict 0; otherwise C changes sign between
/// two adjacent grid levels and the forecaster randomizes between them so the
/// expected imbalance at the played level is exactly zero.
pub struct HedgeState {
    k: usize,
    eta: f64,
    /// weight of expert (+1, idx+1) at vector index idx
    w_plus: Vec<f64>,
    /// weight of expert (−1, idx+1)
    w_minus: Vec<f64>,
    steps: usize,
    /// cumulative expected cost under the pre-update weights
    cum_cost: f64,
}

impl HedgeState {
    /// `k` grid levels (≥ 2); η defaults to √(8·ln(2k)/T) for horizon T.
    pub fn new(k: usize, horizon: usize, eta_override: Option<f64>) -> Result<HedgeState> {
        if k < 2 {
            return Err(Error::arg(format!("the grid needs k ≥ 2 levels, got {k}")));
        }
        let eta = match eta_override {
            Some(e) => e,
            None => {
                if horizon == 0 {
                    return Err(Error::arg(
                        "a positive horizon is needed to set the default learning rate",
                    ));
                }
                (8.0 * (2.0 * k as f64).ln() / horizon as f64).sqrt()
            }
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg(format!(
                "learning rate must be positive and finite, got {eta}"
            )));
        }
        let w = 1.0 / (2 * k) as f64;
        Ok(HedgeState {
            k,
            eta,
            w_plus: vec![w; k],
            w_minus: vec![w; k],
            steps: 0,
            cum_cost: 0.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    pub fn cumulative_cost(&self) -> f64 {
        self.cum_cost
    }

    /// C_j = Σ_{i ≥ j} (w⁺_i − w⁻_i) for j = 1..=k (returned 0-indexed).
    pub fn suffix_imbalance(&self) -> Vec<f64> {
        let mut c = vec![0.0f64; self.k];
        let mut acc = Neumaier::default();
        for idx in (0..self.k).rev() {
            acc.add(self.w_plus[idx] - self.w_minus[idx]);
            c[idx] = acc.total();
        }
        c
    }

    /// Draw the next prediction. Its support has at most two (adjacent grid)
    /// points, and in the randomized case the expected suffix imbalance at
    /// the played level is zero by the choice of mixing probability.
    pub fn predict<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let c = self.suffix_imbalance();
        if c.iter().all(|v| *v >= -IMBALANCE_TOL) {
            return 1.0;
        }
        if c.iter().all(|v| *v <= IMBALANCE_TOL) {
            return 0.0;
        }
        // mixed signs: some adjacent pair brackets a sign change; take the first
        let j = (0..self.k - 1)
            .find(|&j| c[j] * c[j + 1] <= 0.0)
            .expect("mixed-sign imbalances bracket a sign change");
        let (lo, hi) = (c[j], c[j + 1]);
        let q = if lo.abs() <= IMBALANCE_TOL && hi.abs() <= IMBALANCE_TOL {
            1.0
        } else {
            (hi / (hi - lo)).clamp(0.0, 1.0)
        };
        let grid = (self.k - 1) as f64;
        if rng.random::<f64>() < q {
            j as f64 / grid
        } else {
            (j + 1) as f64 / grid
        }
    }

    /// Multiplicative update after playing `p` (which must be a grid level
    /// i/(k−1) bit-exactly) and observing `x`.
    pub fn update(&mut self, x: u8, p: f64) -> Result<()> {
        if x > 1 {
            return Err(Error::arg(format!("outcome must be 0 or 1, got {x}")));
        }
        let grid = (self.k - 1) as f64;
        let rounded = (p * grid).round();
        let i0 = rounded as usize;
        if !(0.0..=grid).contains(&rounded) || i0 as f64 / grid != p {
            return Err(Error::arg(format!(
                "prediction {p} is not a grid level i/{} with i in 0..={}",
                self.k - 1,
                self.k - 1
            )));
        }
        let r = x as f64 - p;
        // experts with threshold index ≥ i0 are active (their indicator fires);
        // the rest pay the constant cost ½
        let up_plus = (-self.eta * (1.0 - r) / 2.0).exp();
        let up_minus = (-self.eta * (1.0 + r) / 2.0).exp();
        let up_idle = (-self.eta * 0.5).exp();

        let mut cost = Neumaier::default();
        for idx in 0..self.k {
            if idx >= i0 {
                cost.add(self.w_plus[idx] * (1.0 - r) / 2.0);
                cost.add(self.w_minus[idx] * (1.0 + r) / 2.0);
                self.w_plus[idx] *= up_plus;
                self.w_minus[idx] *= up_minus;
            } else {
                cost.add((self.w_plus[idx] + self.w_minus[idx]) * 0.5);
                self.w_plus[idx] *= up_idle;
                self.w_minus[idx] *= up_idle;
            }
        }
        self.cum_cost += cost.total();

        let mut total = Neumaier::default();
        for idx in 0..self.k {
            total.add(self.w_plus[idx]);
            total.add(self.w_minus[idx]);
        }
        let norm = total.total();
        for idx in 0..self.k {
            self.w_plus[idx] /= norm;
            self.w_minus[idx] /= norm;
        }
        self.steps += 1;
        Ok(())
    }

    #[cfg(test)]
    fn with_weights(eta: f64, w_plus: Vec<f64>, w_minus: Vec<f64>) -> HedgeState {
        assert_eq!(w_plus.len(), w_minus.len());
        HedgeState {
            k: w_plus.len(),
            eta,
            w_plus,
            w_minus,
            steps: 0,
            cum_cost: 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nature(t: usize) -> NatureSpec {
        NatureSpec::constant_half(t)
    }

    #[test]
    fn truthful_passes_the_conditional_through() {
        let mut f = ForecasterSpec::truthful().build(&nature(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(f.predict(1, 0.37, &mut rng).unwrap(), 0.37);
        f.observe(1, 0.37).unwrap();
    }

    #[test]
    fn constant_validates_its_level() {
        assert!(ForecasterSpec::constant(1.5).build(&nature(2)).is_err());
        let mut f = ForecasterSpec::constant(0.5).build(&nature(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(f.predict(1, 0.9, &mut rng).unwrap(), 0.5);
    }

    #[test]
    fn hedging_blocks() {
        let mut f = ForecasterSpec::hedging_fifths().build(&nature(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let seq: Vec<f64> = (1..=4)
            .map(|t| f.predict(t, 0.5, &mut rng).unwrap())
            .collect();
        assert_eq!(seq, vec![0.4, 0.4, 0.6, 0.6]);
        assert!(ForecasterSpec::hedging_fifths().build(&nature(5)).is_err());
    }

    #[test]
    fn patching_needs_smoothness_and_divisibility() {
        assert!(ForecasterSpec::patching().build(&nature(10)).is_err());
        let epoch = NatureSpec::epoch_binary_search(0.0625, 10);
        assert!(ForecasterSpec::patching().build(&epoch).is_ok());
        let odd = NatureSpec::epoch_binary_search(0.0625, 5);
        assert!(ForecasterSpec::patching().build(&odd).is_err());
    }

    fn drive_patching(outcomes: &[u8], c: f64) -> Vec<f64> {
        let t = outcomes.len();
        let nature = NatureSpec::epoch_binary_search(c, t);
        let mut f = ForecasterSpec::patching().build(&nature).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut preds = Vec::new();
        for (i, &x) in outcomes.iter().enumerate() {
            let p = f.predict(i + 1, 0.5, &mut rng).unwrap();
            f.observe(x, p).unwrap();
            preds.push(p);
        }
        preds
    }

    #[test]
    fn patching_absorbs_a_positive_surplus_in_the_low_block() {
        // phase one surplus +2 ⇒ low block predicts ½ until the surplus
        // crosses below zero, then jumps to c/2; the tail is 1 − c/2
        let c = 0.0625;
        let mut outcomes = vec![1, 1, 1, 1]; // bias +2
        outcomes.extend([0, 0, 0, 0, 0, 0, 0, 0]); // middle block
        outcomes.extend([1, 1, 1, 1, 1, 1, 1, 1]); // tail block
        let preds = drive_patching(&outcomes, c);
        assert_eq!(&preds[..4], &[0.5; 4]);
        // bias 2 → 1.5 → 1 → 0.5 → 0 → −0.5: five more halves, then c/2
        assert_eq!(&preds[4..9], &[0.5; 5]);
        assert_eq!(&preds[9..12], &[c / 2.0; 3]);
        assert_eq!(&preds[12..], &[1.0 - c / 2.0; 8]);
    }

    #[test]
    fn patching_absorbs_a_negative_surplus_in_the_high_block() {
        let c = 0.0625;
        let mut outcomes = vec![0, 0, 0, 0]; // bias −2
        outcomes.extend([1, 1, 1, 1, 1, 1, 1, 1]); // middle block
        outcomes.extend([1, 1, 1, 1, 0, 0, 0, 0]); // tail block
        let preds = drive_patching(&outcomes, c);
        assert_eq!(&preds[..4], &[0.5; 4]);
        assert_eq!(&preds[4..12], &[c / 2.0; 8]);
        // bias −2 → −1.5 → −1 → −0.5 → 0 on four tail ones, then 1 − c/2
        assert_eq!(&preds[12..16], &[0.5; 4]);
        assert_eq!(&preds[16..], &[1.0 - c / 2.0; 4]);
    }

    #[test]
    fn hedge_uniform_start_predicts_one() {
        // all suffix imbalances are exactly zero at the uniform start
        let mut h = HedgeState::new(4, 100, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(h.predict(&mut rng), 1.0);
    }

    #[test]
    fn hedge_needs_two_levels_and_a_horizon() {
        assert!(HedgeState::new(1, 100, None).is_err());
        assert!(HedgeState::new(2, 0, None).is_err());
        assert!(HedgeState::new(2, 0, Some(0.1)).is_ok());
        assert!(HedgeState::new(2, 100, Some(-1.0)).is_err());
    }

    #[test]
    fn hedge_mixes_at_the_sign_change() {
        // C = (0.2, −0.3) ⇒ level 0 with probability 0.6, level 1 otherwise
        let n = 200_000;
        let mut zeros = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..n {
            let mut h = HedgeState::with_weights(0.1, vec![0.5, 0.0], vec![0.0, 0.3]);
            let p = h.predict(&mut rng);
            assert!(p == 0.0 || p == 1.0);
            if p == 0.0 {
                zeros += 1;
            }
        }
        let freq = zeros as f64 / n as f64;
        // three standard deviations of a Bernoulli(0.6) average
        assert!(
            (freq - 0.6).abs() <= 3.0 * (0.6f64 * 0.4 / n as f64).sqrt(),
            "{freq}"
        );
    }

    #[test]
    fn hedge_expected_imbalance_at_the_played_level_vanishes() {
        let c_lo = 0.2f64;
        let c_hi = -0.3f64;
        let q = c_hi / (c_hi - c_lo);
        assert!((q * c_lo + (1.0 - q) * c_hi).abs() < 1e-15);
    }

    #[test]
    fn hedge_update_tilts_by_the_learning_rate() {
        // x = 1 at p = 0 activates every expert: the up-weights gain e^η
        // relative to the down-weights
        let eta = 0.3;
        let mut h = HedgeState::new(2, 100, Some(eta)).unwrap();
        h.update(1, 0.0).unwrap();
        for idx in 0..2 {
            let ratio = h.w_plus[idx] / h.w_minus[idx];
            assert!((ratio - eta.exp()).abs() < 1e-12, "{ratio}");
        }
        let total: f64 = h.w_plus.iter().chain(&h.w_minus).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hedge_perfect_round_leaves_weights_unchanged() {
        // x = p = 1: every active expert pays the same cost, so weights are
        // untouched after renormalization
        let mut h = HedgeState::new(2, 100, Some(0.5)).unwrap();
        h.update(1, 1.0).unwrap();
        for idx in 0..2 {
            assert!((h.w_plus[idx] - 0.25).abs() < 1e-15);
            assert!((h.w_minus[idx] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn hedge_rejects_off_grid_predictions() {
        let mut h = HedgeState::new(2, 100, None).unwrap();
        assert!(matches!(h.update(1, 0.37), Err(Error::Argument(_))));
        assert!(matches!(h.update(2, 0.0), Err(Error::Argument(_))));
        assert!(h.update(1, 1.0).is_ok());
    }

    #[test]
    fn hedge_grid_membership_is_robust_for_odd_denominators() {
        // levels j/(k−1) emitted by predict must round-trip the membership
        // check even when the division is inexact
        for k in [2usize, 3, 7, 49, 101] {
            let mut h = HedgeState::new(k, 100, None).unwrap();
            for j in 0..k {
                let p = j as f64 / (k - 1) as f64;
                h.update(0, p).unwrap();
            }
        }
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = ForecasterSpec::hedge_step(Some(16), None);
        let s = serde_json::to_string(&spec).unwrap();
        let back: ForecasterSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        assert!(s.contains("\"hedge_step\""));
    }
}
