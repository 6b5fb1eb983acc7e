//! Outcome-generating processes ("natures").
//!
//! A nature emits a conditional probability p*_t before each step and is told
//! the realized outcome x_t afterwards; adaptive natures use the feedback to
//! steer later probabilities. [`NatureSpec`] is the serializable description,
//! [`NatureState`] the running instance produced by [`NatureSpec::build`].
//!
//! The adversarial constructions target specific failure modes of
//! non-truthful forecasters:
//!
//! * `binary_search` walks the conditional probability toward a threshold α*
//!   that ends up strictly separating every emitted probability from the same
//!   side the outcome fell on — truthful forecasts then accumulate one-sided
//!   interval error, while a constant-½ forecaster stays cheap.
//! * `hedging_fifths` / `smoothed_hedging` alternate low and high phases
//!   (point masses at 0.2/0.8, or uniform windows around them) that a
//!   threshold-hedging forecaster can exploit.
//! * `epoch_binary_search` runs the binary search on a coarse grid with
//!   smoothed per-epoch probabilities, then spends the last four fifths of
//!   the horizon near 0 and 1.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NatureKind {
    /// independent outcomes with a fixed probability vector
    Product,
    /// first half p* = 0.2, second half p* = 0.8
    HedgingFifths,
    /// p* = ½ every step
    ConstantHalf,
    /// adaptive halving walk with step ε/2, ε/4, …
    BinarySearch,
    /// hedging phases smoothed to uniform windows of half-width c
    SmoothedHedging,
    /// grid binary search over k epochs with U[w ± c/2] draws
    EpochBinarySearch,
}

/// Serializable description of a nature. `T` is the horizon; the remaining
/// fields are kind-specific and validated by [`NatureSpec::build`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NatureSpec {
    pub kind: NatureKind,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pstar: Option<Vec<f64>>,
}

impl NatureSpec {
    pub fn product(pstar: Vec<f64>) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::Product,
            t: pstar.len(),
            epsilon: None,
            c: None,
            pstar: Some(pstar),
        }
    }

    pub fn hedging_fifths(t: usize) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::HedgingFifths,
            t,
            epsilon: None,
            c: None,
            pstar: None,
        }
    }

    pub fn constant_half(t: usize) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::ConstantHalf,
            t,
            epsilon: None,
            c: None,
            pstar: None,
        }
    }

    pub fn binary_search(epsilon: f64, t: usize) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::BinarySearch,
            t,
            epsilon: Some(epsilon),
            c: None,
            pstar: None,
        }
    }

    pub fn smoothed_hedging(c: f64, t: usize) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::SmoothedHedging,
            t,
            epsilon: None,
            c: Some(c),
            pstar: None,
        }
    }

    pub fn epoch_binary_search(c: f64, t: usize) -> NatureSpec {
        NatureSpec {
            kind: NatureKind::EpochBinarySearch,
            t,
            epsilon: None,
            c: Some(c),
            pstar: None,
        }
    }

    /// Smoothness parameter of the construction, where the kind has one.
    pub fn smoothness(&self) -> Option<f64> {
        self.c
    }

    /// Validate the parameters and produce a fresh runnable state.
    pub fn build(&self) -> Result<NatureState> {
        let rule = match self.kind {
            NatureKind::Product => {
                let pstar = self
                    .pstar
                    .clone()
                    .ok_or_else(|| Error::arg("product nature requires a pstar vector"))?;
                if pstar.len() != self.t {
                    return Err(Error::arg(format!(
                        "T = {} does not match the pstar vector length {}",
                        self.t,
                        pstar.len()
                    )));
                }
                if let Some(pos) = pstar.iter().position(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::arg(format!(
                        "pstar[{pos}] = {} is outside [0, 1]",
                        pstar[pos]
                    )));
                }
                Rule::Product { pstar }
            }
            NatureKind::HedgingFifths => {
                if self.t % 2 != 0 {
                    return Err(Error::arg(format!(
                        "the hedging nature needs an even horizon, got T = {}",
                        self.t
                    )));
                }
                Rule::Hedging
            }
            NatureKind::ConstantHalf => Rule::Constant { p: 0.5 },
            NatureKind::BinarySearch => {
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::arg("binary-search nature requires epsilon"))?;
                if !(eps > 0.0 && eps < 0.25) {
                    return Err(Error::arg(format!(
                        "epsilon must lie in (0, 1/4), got {eps}"
                    )));
                }
                Rule::BinarySearch {
                    current: 0.5,
                    delta: eps / 2.0,
                }
            }
            NatureKind::SmoothedHedging => {
                let c = self
                    .c
                    .ok_or_else(|| Error::arg("smoothed hedging nature requires c"))?;
                if !(c > 0.0 && c < 0.2) {
                    return Err(Error::arg(format!("c must lie in (0, 1/5), got {c}")));
                }
                if self.t % 2 != 0 {
                    return Err(Error::arg(format!(
                        "the smoothed hedging nature needs an even horizon, got T = {}",
                        self.t
                    )));
                }
                Rule::SmoothedHedging { c }
            }
            NatureKind::EpochBinarySearch => {
                let c = self
                    .c
                    .ok_or_else(|| Error::arg("epoch binary-search nature requires c"))?;
                if !(c > 0.0 && c <= 1.0 / 16.0) {
                    return Err(Error::arg(format!("c must lie in (0, 1/16], got {c}")));
                }
                let k = (1.0 / (8.0 * c)).log2().floor() as usize;
                debug_assert!(k >= 1);
                if self.t == 0 || self.t % (5 * k) != 0 {
                    return Err(Error::arg(format!(
                        "with c = {c} the construction uses k = {k} epochs, so T must be a \
                         positive multiple of 5k = {} (got T = {})",
                        5 * k,
                        self.t
                    )));
                }
                Rule::Epoch {
                    c,
                    k,
                    epoch_len: self.t / (5 * k),
                    w: 0.5,
                    epoch_ones: 0,
                    alpha_star: None,
                }
            }
        };
        Ok(NatureState {
            horizon: self.t,
            steps: 0,
            pending: false,
            rule,
        })
    }
}

#[derive(Debug)]
enum Rule {
    Product {
        pstar: Vec<f64>,
    },
    Constant {
        p: f64,
    },
    Hedging,
    BinarySearch {
        current: f64,
        delta: f64,
    },
    SmoothedHedging {
        c: f64,
    },
    Epoch {
        c: f64,
        k: usize,
        epoch_len: usize,
        /// center of the current epoch's probability window
        w: f64,
        /// outcomes observed so far in the current epoch (first fifth only)
        epoch_ones: u64,
        /// final window center w_{k+1}, fixed once epoch k completes
        alpha_star: Option<f64>,
    },
}

/// A running nature. Drive it with alternating [`next_pstar`] /
/// [`observe`](NatureState::observe) calls, one pair per step.
///
/// [`next_pstar`]: NatureState::next_pstar
#[derive(Debug)]
pub struct NatureState {
    horizon: usize,
    steps: usize,
    pending: bool,
    rule: Rule,
}

impl NatureState {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Steps fully completed (probability drawn and outcome observed).
    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Conditional probability for the next step. Consumes randomness only
    /// for the smoothed kinds.
    pub fn next_pstar<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        if self.pending {
            return Err(Error::state(
                "next_pstar called twice without an intervening observe",
            ));
        }
        if self.steps >= self.horizon {
            return Err(Error::state(format!(
                "the horizon of {} steps is exhausted",
                self.horizon
            )));
        }
        let s = self.steps; // 0-based index of the step being drawn
        let p = match &mut self.rule {
            Rule::Product { pstar } => pstar[s],
            Rule::Constant { p } => *p,
            Rule::Hedging => {
                if s < self.horizon / 2 {
                    0.2
                } else {
                    0.8
                }
            }
            Rule::BinarySearch { current, .. } => *current,
            Rule::SmoothedHedging { c } => {
                let center = if s < self.horizon / 2 { 0.2 } else { 0.8 };
                center - *c + 2.0 * *c * rng.random::<f64>()
            }
            Rule::Epoch {
                c, epoch_len, w, ..
            } => {
                if s < self.horizon / 5 {
                    let _ = s / *epoch_len; // epoch index; w already tracks it
                    *w - *c / 2.0 + *c * rng.random::<f64>()
                } else if s < 3 * self.horizon / 5 {
                    *c * rng.random::<f64>()
                } else {
                    1.0 - *c + *c * rng.random::<f64>()
                }
            }
        };
        self.pending = true;
        Ok(p)
    }

    /// Feed back the realized outcome for the step whose probability was just
    /// drawn.
    pub fn observe(&mut self, x: u8) -> Result<()> {
        if x > 1 {
            return Err(Error::arg(format!("outcome must be 0 or 1, got {x}")));
        }
        if !self.pending {
            return Err(Error::state("observe called without a pending next_pstar"));
        }
        let s = self.steps; // 0-based index of the step being completed
        match &mut self.rule {
            Rule::BinarySearch { current, delta } => {
                // move toward the side the outcome fell on, halving the step;
                // the final midpoint strictly separates all emitted levels
                if x == 1 {
                    *current += *delta;
                } else {
                    *current -= *delta;
                }
                *delta *= 0.5;
            }
            Rule::Epoch {
                k,
                epoch_len,
                w,
                epoch_ones,
                alpha_star,
                ..
            } => {
                if s < self.horizon / 5 {
                    *epoch_ones += x as u64;
                    if (s + 1) % *epoch_len == 0 {
                        // epoch i ∈ 1..=k just completed: recenter by 2^{-(i+3)}
                        // toward the side the empirical mean indicates
                        let i = (s + 1) / *epoch_len;
                        let mu = *epoch_ones as f64 / *epoch_len as f64;
                        let shift = 0.5f64.powi(i as i32 + 3);
                        *w += if mu >= *w { shift } else { -shift };
                        *epoch_ones = 0;
                        if i == *k {
                            *alpha_star = Some(*w);
                        }
                    }
                }
            }
            _ => {}
        }
        self.pending = false;
        self.steps += 1;
        Ok(())
    }

    /// The adversarial threshold, where the construction defines one: the
    /// current midpoint for `binary_search` (final once the run completes),
    /// and the post-search window center for `epoch_binary_search` (available
    /// after the first fifth of the horizon). `None` for the other kinds.
    pub fn alpha_star(&self) -> Option<f64> {
        match &self.rule {
            Rule::BinarySearch { current, .. } => Some(*current),
            Rule::Epoch { alpha_star, .. } => *alpha_star,
            _ => None,
        }
    }
}

/// Draw an outcome: 1 with probability `pstar`. Exact at the endpoints — the
/// underlying uniform draw lies in [0, 1), so p* = 0 never fires and p* = 1
/// always does.
pub fn sample_outcome<R: Rng + ?Sized>(pstar: f64, rng: &mut R) -> Result<u8> {
    if !(0.0..=1.0).contains(&pstar) {
        return Err(Error::arg(format!(
            "outcome probability must lie in [0, 1], got {pstar}"
        )));
    }
    Ok((rng.random::<f64>() < pstar) as u8)
}
