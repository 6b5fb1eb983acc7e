//! Calibration measures for sequential binary prediction.
//!
//! The crate computes exact suprema for a family of calibration errors on a
//! transcript of outcomes `x ∈ {0,1}^T` and predictions `p ∈ [0,1]^T`:
//! threshold-sweep error ([`measures::step_ce`]) and its subset-averaged
//! variants, the two-sided interval error [`measures::vcal`] (plus certified
//! bounds for its scoring-rule form), the sign-weighted error
//! [`measures::sign_ce`], plain binned error [`measures::ece`], and the
//! Lipschitz-smoothed error [`measures::smce`] with its subset average.
//!
//! Around the measures sit:
//!
//! * [`environments`] — outcome-generating processes ("natures"), including
//!   adaptive constructions that separate truthful from strategic forecasting;
//! * [`forecasters`] — truthful, constant, hedging, patching and a randomized
//!   no-regret forecaster on a discrete prediction grid;
//! * [`oracle`] — independent brute-force references used to validate the
//!   exact evaluators;
//! * [`harness`] — seeded, replicated experiments with deterministic parallel
//!   aggregation, plus CSV input/output.
//!
//! The `calib` binary exposes the same functionality on the command line
//! (`measure`, `simulate`, `experiment`, `oracle` subcommands).
//!
//! Runnable walkthroughs live in `examples/`: `measures_tour`,
//! `simulate_episode`, `binary_search_gap`, `hedging_gaps`,
//! `epoch_construction`, `hedge_forecaster`, `product_truthfulness` and
//! `oracle_check`.

pub mod environments;
pub mod forecasters;
pub mod harness;
pub mod measures;
pub mod oracle;
mod util;

pub use util::{fmt_f64, mix_seed};

/// Crate-wide error type.
///
/// `Argument` covers rejected inputs and malformed configuration, `Capability`
/// marks requests outside implemented limits (e.g. exhaustive subset
/// enumeration beyond its horizon cap), and `State` marks protocol misuse of
/// stateful objects (e.g. stepping a nature past its horizon).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("capability exceeded: {0}")]
    Capability(String),
    #[error("invalid state: {0}")]
    State(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Error {
        Error::Argument(msg.into())
    }

    pub(crate) fn cap(msg: impl Into<String>) -> Error {
        Error::Capability(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Error {
        Error::State(msg.into())
    }
}
