//! Episode runner and Monte Carlo experiment harness.
//!
//! [`run_episode`] plays one nature/forecaster pair to the end of its horizon;
//! [`estimate_error`] averages a measure over many independent episodes;
//! [`truthfulness_gap`] and [`scaling_fit`] wrap that into the named
//! experiments (truthful-vs-strategic pairs and log-log rate fits).
//!
//! Determinism contract: every report is a pure function of the specs, the
//! measure, the replicate count and the master seed. Per-replicate seeds are
//! derived with [`mix_seed`], replicate results are collected in replicate
//! order, and aggregation uses compensated summation, so the output is
//! bit-identical regardless of thread count (set `CALIB_THREADS` to cap the
//! worker pool).

use crate::environments::{sample_outcome, NatureSpec};
use crate::forecasters::ForecasterSpec;
use crate::measures::{self, MeasureKind, SubsetSampler};
use crate::util::{fmt_f64, mix_seed, Neumaier};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::sync::OnceLock;

/// One finished episode: outcomes, the nature's conditional probabilities,
/// the forecaster's predictions, and the realized variance Σ p*(1−p*).
#[derive(Clone, Debug)]
pub struct Transcript {
    pub x: Vec<u8>,
    pub pstar: Vec<f64>,
    pub p: Vec<f64>,
    pub var_t: f64,
}

/// Stream tag separating the measure-internal subset sampler from the episode
/// randomness derived from the same replicate seed.
const MEASURE_STREAM: u64 = 0x5eed_0001;
/// Stream tags separating the truthful and strategic arms of a gap experiment.
const TRUTHFUL_STREAM: u64 = 0x5eed_0002;
const STRATEGIC_STREAM: u64 = 0x5eed_0003;

/// Play one episode. Per step: the nature draws p*_t, the forecaster (shown
/// p*_t) emits p_t, the outcome is sampled from Bern(p*_t), and both sides
/// observe it — all from a single ChaCha8 stream, so the transcript is a pure
/// function of (specs, seed).
pub fn run_episode(
    nature: &NatureSpec,
    forecaster: &ForecasterSpec,
    seed: u64,
) -> Result<Transcript> {
    let mut nat = nature.build()?;
    let mut fc = forecaster.build(nature)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = nat.horizon();
    let mut x = Vec::with_capacity(horizon);
    let mut pstar = Vec::with_capacity(horizon);
    let mut p = Vec::with_capacity(horizon);
    let mut var = Neumaier::default();
    for t in 1..=horizon {
        let ps = nat.next_pstar(&mut rng)?;
        let pred = fc.predict(t, ps, &mut rng)?;
        let outcome = sample_outcome(ps, &mut rng)?;
        nat.observe(outcome)?;
        fc.observe(outcome, pred)?;
        x.push(outcome);
        pstar.push(ps);
        p.push(pred);
        var.add(ps * (1.0 - ps));
    }
    Ok(Transcript {
        x,
        pstar,
        p,
        var_t: var.total(),
    })
}

/// Which measure the harness evaluates on each transcript, including the
/// Monte Carlo subset budget where one is needed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureSpec {
    Step,
    StepSub { m: usize },
    StepSubExact,
    Vcal,
    VcalSub { m: usize },
    Sign,
    Ece,
    Smce,
    Ssce { m: usize },
    SsceExact,
}

impl MeasureSpec {
    /// Parse a measure name as used in configs and CSV output; `m` is the
    /// subset budget applied to the Monte Carlo variants.
    pub fn parse(name: &str, m: usize) -> Result<MeasureSpec> {
        Ok(match name {
            "step" => MeasureSpec::Step,
            "step_sub" => MeasureSpec::StepSub { m },
            "step_sub_exact" => MeasureSpec::StepSubExact,
            "vcal" => MeasureSpec::Vcal,
            "vcal_sub" => MeasureSpec::VcalSub { m },
            "sign" => MeasureSpec::Sign,
            "ece" => MeasureSpec::Ece,
            "smce" => MeasureSpec::Smce,
            "ssce" => MeasureSpec::Ssce { m },
            "ssce_exact" => MeasureSpec::SsceExact,
            other => {
                return Err(Error::arg(format!(
                    "unknown measure '{other}' (expected one of step, step_sub, step_sub_exact, \
                     vcal, vcal_sub, sign, ece, smce, ssce, ssce_exact)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MeasureSpec::Step => "step",
            MeasureSpec::StepSub { .. } => "step_sub",
            MeasureSpec::StepSubExact => "step_sub_exact",
            MeasureSpec::Vcal => "vcal",
            MeasureSpec::VcalSub { .. } => "vcal_sub",
            MeasureSpec::Sign => "sign",
            MeasureSpec::Ece => "ece",
            MeasureSpec::Smce => "smce",
            MeasureSpec::Ssce { .. } => "ssce",
            MeasureSpec::SsceExact => "ssce_exact",
        }
    }

    pub fn kind(&self) -> MeasureKind {
        match self {
            MeasureSpec::Step => MeasureKind::Step,
            MeasureSpec::StepSub { .. } | MeasureSpec::StepSubExact => MeasureKind::StepSub,
            MeasureSpec::Vcal => MeasureKind::Vcal,
            MeasureSpec::VcalSub { .. } => MeasureKind::VcalSub,
            MeasureSpec::Sign => MeasureKind::Sign,
            MeasureSpec::Ece => MeasureKind::Ece,
            MeasureSpec::Smce => MeasureKind::Smce,
            MeasureSpec::Ssce { .. } | MeasureSpec::SsceExact => MeasureKind::Ssce,
        }
    }

    /// Evaluate on a transcript; `seed` feeds the subset sampler of the Monte
    /// Carlo variants and is ignored by the exact ones.
    pub fn evaluate(&self, tr: &Transcript, seed: u64) -> Result<f64> {
        let (x, p) = (&tr.x[..], &tr.p[..]);
        Ok(match self {
            MeasureSpec::Step => measures::step_ce(x, p)?.value,
            MeasureSpec::StepSub { m } => {
                let mut sampler = SubsetSampler::monte_carlo(*m, seed)?;
                measures::step_ce_sub(x, p, &mut sampler)?.value
            }
            MeasureSpec::StepSubExact => measures::step_ce_sub_exact(x, p)?.value,
            MeasureSpec::Vcal => measures::vcal(x, p)?.value,
            MeasureSpec::VcalSub { m } => vcal_sub_monte_carlo(x, p, *m, seed)?.0,
            MeasureSpec::Sign => measures::sign_ce(x, p)?.value,
            MeasureSpec::Ece => measures::ece(x, p)?.value,
            MeasureSpec::Smce => measures::smce(x, p)?.value,
            MeasureSpec::Ssce { m } => {
                let mut sampler = SubsetSampler::monte_carlo(*m, seed)?;
                measures::ssce(x, p, &mut sampler)?.value
            }
            MeasureSpec::SsceExact => measures::ssce(x, p, &mut SubsetSampler::exhaustive())?.value,
        })
    }
}

/// Average of the interval calibration error over `m` uniformly random
/// timestep subsets; returns (mean, standard error).
pub fn vcal_sub_monte_carlo(x: &[u8], p: &[f64], m: usize, seed: u64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::arg("subset sample count m must be ≥ 1"));
    }
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sub_x: Vec<u8> = Vec::with_capacity(x.len());
    let mut sub_p: Vec<f64> = Vec::with_capacity(x.len());
    let mut values = Vec::with_capacity(m);
    for _ in 0..m {
        sub_x.clear();
        sub_p.clear();
        for i in 0..x.len() {
            if rng.random::<bool>() {
                sub_x.push(x[i]);
                sub_p.push(p[i]);
            }
        }
        values.push(measures::vcal(&sub_x, &sub_p)?.value);
    }
    let mut acc = Neumaier::default();
    for &v in &values {
        acc.add(v);
    }
    let mean = acc.total() / m as f64;
    let stderr = if m >= 2 {
        let mut ss = Neumaier::default();
        for &v in &values {
            ss.add((v - mean) * (v - mean));
        }
        (ss.total() / (m - 1) as f64).sqrt() / (m as f64).sqrt()
    } else {
        0.0
    };
    Ok((mean, stderr))
}

/// Summary statistics of one measure over `n` replicate episodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureReport {
    pub measure: MeasureKind,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// sd/√n
    pub stderr: f64,
    /// 95% normal-approximation interval: mean ± 1.96·stderr
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// master seed the replicate seeds were derived from
    pub seed: u64,
}

/// Build a report from raw replicate values (compensated, order-fixed
/// aggregation).
pub fn report_from_values(measure: MeasureKind, values: &[f64], seed: u64) -> MeasureReport {
    let n = values.len();
    let mut acc = Neumaier::default();
    for &v in values {
        acc.add(v);
    }
    let mean = acc.total() / n as f64;
    let mut ss = Neumaier::default();
    for &v in values {
        ss.add((v - mean) * (v - mean));
    }
    let sd = if n >= 2 {
        (ss.total() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let stderr = sd / (n as f64).sqrt();
    MeasureReport {
        measure,
        n,
        mean,
        sd,
        stderr,
        ci_lo: mean - 1.96 * stderr,
        ci_hi: mean + 1.96 * stderr,
        seed,
    }
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("CALIB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder.build().expect("worker pool construction")
    })
}

/// Raw per-replicate measure values, in replicate order. Replicate `i` runs on
/// seed `mix_seed(master_seed, i)`; its subset sampler (if the measure has
/// one) runs on a further derived stream.
pub fn replicate_values(
    nature: &NatureSpec,
    forecaster: &ForecasterSpec,
    measure: MeasureSpec,
    n_reps: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    // validate specs once up front so errors don't depend on scheduling
    nature.build()?;
    forecaster.build(nature)?;
    pool().install(|| {
        (0..n_reps)
            .into_par_iter()
            .map(|i| {
                let rep_seed = mix_seed(master_seed, i as u64);
                let tr = run_episode(nature, forecaster, rep_seed)?;
                measure.evaluate(&tr, mix_seed(rep_seed, MEASURE_STREAM))
            })
            .collect::<Result<Vec<f64>>>()
    })
}

/// Monte Carlo estimate of the expected measure over `n_reps` independent
/// episodes.
pub fn estimate_error(
    nature: &NatureSpec,
    forecaster: &ForecasterSpec,
    measure: MeasureSpec,
    n_reps: usize,
    master_seed: u64,
) -> Result<MeasureReport> {
    if n_reps < 2 {
        return Err(Error::arg(format!(
            "n_reps must be ≥ 2 so a standard error is defined, got {n_reps}"
        )));
    }
    let values = replicate_values(nature, forecaster, measure, n_reps, master_seed)?;
    Ok(report_from_values(measure.kind(), &values, master_seed))
}

/// Named truthful-vs-strategic experiment families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapExperiment {
    /// adaptive halving nature; strategic player predicts ½ constantly
    BinarySearch,
    /// two-block product nature; strategic player hedges at 2/5 and 3/5
    Hedging,
    /// smoothed two-block nature; same strategic player
    SmoothedHedging,
    /// epoch construction; strategic player patches
    Epoch,
}

impl GapExperiment {
    pub fn parse(name: &str) -> Result<GapExperiment> {
        Ok(match name {
            "binary_search" => GapExperiment::BinarySearch,
            "hedging" => GapExperiment::Hedging,
            "smoothed_hedging" => GapExperiment::SmoothedHedging,
            "epoch" => GapExperiment::Epoch,
            other => {
                return Err(Error::arg(format!(
                    "unknown experiment '{other}' (expected binary_search, hedging, \
                     smoothed_hedging, epoch, or thm_alg_scaling)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            GapExperiment::BinarySearch => "binary_search",
            GapExperiment::Hedging => "hedging",
            GapExperiment::SmoothedHedging => "smoothed_hedging",
            GapExperiment::Epoch => "epoch",
        }
    }
}

/// Optional knobs of [`truthfulness_gap`]; `Default` leaves every choice to
/// the experiment's own convention.
#[derive(Clone, Copy, Debug, Default)]
pub struct GapParams {
    /// binary-search step scale; defaults to 1/(4√T)
    pub epsilon: Option<f64>,
    /// smoothness for the smoothed/epoch experiments (smoothed defaults to
    /// 0.1; epoch requires it)
    pub c: Option<f64>,
    /// measure override; each experiment has a canonical default
    pub measure: Option<MeasureSpec>,
}

/// Both arms of a truthfulness-gap experiment, run on the same nature with
/// the same replicate count and measure.
#[derive(Clone, Copy, Debug)]
pub struct GapReport {
    pub experiment: &'static str,
    pub t: usize,
    pub truthful: MeasureReport,
    pub strategic: MeasureReport,
    /// truthful mean / strategic mean (infinite when the strategic mean is 0)
    pub ratio: f64,
    /// truthful mean − strategic mean
    pub diff: f64,
}

/// Run the truthful and the experiment's strategic forecaster against the
/// experiment's nature and report both errors.
pub fn truthfulness_gap(
    experiment: GapExperiment,
    t: usize,
    params: GapParams,
    n_reps: usize,
    seed: u64,
) -> Result<GapReport> {
    let (nature, strategic, default_measure) = match experiment {
        GapExperiment::BinarySearch => {
            let eps = params.epsilon.unwrap_or(0.25 / (t as f64).sqrt());
            (
                NatureSpec::binary_search(eps, t),
                ForecasterSpec::constant(0.5),
                MeasureSpec::Vcal,
            )
        }
        GapExperiment::Hedging => (
            NatureSpec::hedging_fifths(t),
            ForecasterSpec::hedging_fifths(),
            MeasureSpec::Vcal,
        ),
        GapExperiment::SmoothedHedging => (
            NatureSpec::smoothed_hedging(params.c.unwrap_or(0.1), t),
            ForecasterSpec::hedging_fifths(),
            MeasureSpec::Vcal,
        ),
        GapExperiment::Epoch => {
            let c = params.c.ok_or_else(|| {
                Error::arg("the epoch experiment requires the smoothness parameter c")
            })?;
            (
                NatureSpec::epoch_binary_search(c, t),
                ForecasterSpec::patching(),
                MeasureSpec::Step,
            )
        }
    };
    let measure = params.measure.unwrap_or(default_measure);
    let truthful = estimate_error(
        &nature,
        &ForecasterSpec::truthful(),
        measure,
        n_reps,
        mix_seed(seed, TRUTHFUL_STREAM),
    )?;
    let strategic = estimate_error(
        &nature,
        &strategic,
        measure,
        n_reps,
        mix_seed(seed, STRATEGIC_STREAM),
    )?;
    Ok(GapReport {
        experiment: experiment.name(),
        t,
        truthful,
        strategic,
        ratio: truthful.mean / strategic.mean,
        diff: truthful.mean - strategic.mean,
    })
}

/// One grid point of a scaling fit.
#[derive(Clone, Copy, Debug)]
pub struct ScalingPoint {
    pub t: usize,
    pub report: MeasureReport,
    /// mean ≤ 0: excluded from the log-log fit instead of failing it
    pub censored: bool,
}

/// Log-log rate fit over a horizon grid.
#[derive(Clone, Debug)]
pub struct ScalingReport {
    pub points: Vec<ScalingPoint>,
    /// least-squares slope of ln(mean) vs ln(T) over non-censored points
    /// (NaN when fewer than two survive)
    pub slope: f64,
    /// root-mean-square fit residual in log space
    pub residual: f64,
}

/// Estimate the measure on each horizon in `t_grid` (natures and forecasters
/// are instantiated per horizon through the two closures) and fit a power law.
pub fn scaling_fit(
    t_grid: &[usize],
    nature_for: impl Fn(usize) -> NatureSpec,
    forecaster_for: impl Fn(usize) -> ForecasterSpec,
    measure: MeasureSpec,
    n_reps: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if t_grid.len() < 3 {
        return Err(Error::arg(format!(
            "a scaling fit needs at least 3 horizons, got {}",
            t_grid.len()
        )));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("the horizon grid must be strictly increasing"));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let report = estimate_error(
            &nature_for(t),
            &forecaster_for(t),
            measure,
            n_reps,
            mix_seed(seed, t as u64),
        )?;
        points.push(ScalingPoint {
            t,
            report,
            censored: !(report.mean > 0.0),
        });
    }
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|pt| !pt.censored)
        .map(|pt| ((pt.t as f64).ln(), pt.report.mean.ln()))
        .collect();
    let (slope, residual) = fit_line(&usable);
    Ok(ScalingReport {
        points,
        slope,
        residual,
    })
}

/// Least-squares slope and RMS residual of y against x.
fn fit_line(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    if xy.len() < 2 {
        return (f64::NAN, 0.0);
    }
    let mx = xy.iter().map(|&(x, _)| x).sum::<f64>() / n;
    let my = xy.iter().map(|&(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xy.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xy
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    (slope, (ss / n).sqrt())
}

/// Empirical penalty floor: the mean of γ(Var_T) over the given transcripts.
/// Truthful errors are ratio-tested against this scale.
pub fn opt_floor(transcripts: &[Transcript]) -> Result<f64> {
    if transcripts.is_empty() {
        return Err(Error::arg("opt_floor needs at least one transcript"));
    }
    let mut acc = Neumaier::default();
    for tr in transcripts {
        acc.add(measures::gamma(tr.var_t)?);
    }
    Ok(acc.total() / transcripts.len() as f64)
}

// ---------------------------------------------------------------------------
// CSV formats
//
// Transcripts: header `t,x,p_star,p`, one row per step, floats with 17
// significant digits so values round-trip bit-exactly. Results: header
// `experiment,measure,T,n,mean,sd,stderr,ci_lo,ci_hi,seed`.
// ---------------------------------------------------------------------------

pub fn write_transcript_csv<W: Write>(mut w: W, tr: &Transcript) -> std::io::Result<()> {
    writeln!(w, "t,x,p_star,p")?;
    for i in 0..tr.x.len() {
        writeln!(
            w,
            "{},{},{},{}",
            i + 1,
            tr.x[i],
            fmt_f64(tr.pstar[i]),
            fmt_f64(tr.p[i])
        )?;
    }
    Ok(())
}

/// Parse a transcript CSV. The `p_star` column is optional on input (a bare
/// `t,x,p` file is accepted); an empty file parses as an empty transcript.
pub fn read_transcript_csv<R: BufRead>(r: R) -> Result<(Vec<u8>, Vec<f64>, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(r);
    let headers = rdr
        .headers()
        .map_err(|e| Error::arg(format!("unreadable CSV header: {e}")))?
        .clone();
    let cols: Vec<&str> = headers.iter().map(str::trim).collect();
    let with_pstar = match cols.as_slice() {
        [] => false, // empty file: no rows follow
        ["t", "x", "p_star", "p"] => true,
        ["t", "x", "p"] => false,
        other => {
            return Err(Error::arg(format!(
                "unexpected transcript header {other:?}; expected t,x,p_star,p"
            )))
        }
    };
    let mut x = Vec::new();
    let mut p = Vec::new();
    let mut pstar = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::arg(format!("malformed CSV: {e}")))?;
        let line = rec.position().map(|pos| pos.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str> {
            rec.get(idx)
                .ok_or_else(|| Error::arg(format!("line {line}: missing column {idx}")))
        };
        let xi: u8 = field(1)?
            .trim()
            .parse()
            .map_err(|e| Error::arg(format!("line {line}: bad outcome: {e}")))?;
        let pi: f64 = field(if with_pstar { 3 } else { 2 })?
            .trim()
            .parse()
            .map_err(|e| Error::arg(format!("line {line}: bad prediction: {e}")))?;
        if with_pstar {
            let ps: f64 = field(2)?
                .trim()
                .parse()
                .map_err(|e| Error::arg(format!("line {line}: bad p_star: {e}")))?;
            pstar.push(ps);
        }
        x.push(xi);
        p.push(pi);
    }
    Ok((x, p, if with_pstar { Some(pstar) } else { None }))
}

/// One row of a results CSV.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub experiment: String,
    pub measure: String,
    pub t: usize,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
}

impl ResultRow {
    pub fn from_report(experiment: &str, measure: &str, t: usize, r: &MeasureReport) -> ResultRow {
        ResultRow {
            experiment: experiment.to_string(),
            measure: measure.to_string(),
            t,
            n: r.n,
            mean: r.mean,
            sd: r.sd,
            stderr: r.stderr,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            seed: r.seed,
        }
    }
}

pub fn write_results_csv<W: Write>(mut w: W, rows: &[ResultRow]) -> std::io::Result<()> {
    writeln!(w, "experiment,measure,T,n,mean,sd,stderr,ci_lo,ci_hi,seed")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.measure,
            r.t,
            r.n,
            fmt_f64(r.mean),
            fmt_f64(r.sd),
            fmt_f64(r.stderr),
            fmt_f64(r.ci_lo),
            fmt_f64(r.ci_hi),
            r.seed
        )?;
    }
    Ok(())
}
