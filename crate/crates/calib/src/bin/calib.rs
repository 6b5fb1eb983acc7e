//! Command-line driver: compute measures on transcript files, simulate
//! episodes, run the named experiments, and cross-check the measures against
//! the brute-force references. All outputs are CSV; identical invocations
//! produce identical bytes.
//!
//! Exit codes: 0 success, 2 configuration/input error, 3 capability limit
//! (an exact algorithm was asked for an instance beyond its enumeration cap).

use calib::environments::NatureSpec;
use calib::forecasters::ForecasterSpec;
use calib::harness::{
    estimate_error, read_transcript_csv, run_episode, scaling_fit, truthfulness_gap,
    write_results_csv, write_transcript_csv, GapExperiment, GapParams, MeasureSpec, ResultRow,
};
use calib::measures::{self, Exactness, SubsetSampler};
use calib::oracle::random_instance_battery;
use calib::{fmt_f64, Error};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "calib",
    version,
    about = "Calibration measures, simulated natures and truthfulness-gap experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute calibration measures on a transcript CSV (header t,x,p_star,p)
    Measure {
        /// transcript file
        transcript: PathBuf,
        /// comma-separated measure names (step, step_sub, step_sub_exact,
        /// vcal, vcal_sub, ucal, sign, ece, smce, ssce, ssce_exact)
        #[arg(long, value_delimiter = ',', default_value = "step,vcal,sign,ece,smce")]
        measures: Vec<String>,
        /// write the CSV here instead of standard output
        #[arg(long)]
        out: Option<PathBuf>,
        /// seed for the Monte Carlo subset samplers
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// subset draws per Monte Carlo measure
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Run one episode from a JSON config and emit its transcript CSV
    Simulate {
        /// JSON config {"nature": {...}, "forecaster": {...}, "seed": n}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a named experiment from a JSON config and emit a results CSV
    Experiment {
        /// JSON config {"experiment": name, "T": int|[int], "reps": n,
        /// "seed": n, "measure": name, "params": {...}}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// overrides the config replicate count
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Cross-check optimized measures against brute-force references
    Oracle {
        /// JSON config {"instances": n, "t_max": n, "grid_step": h,
        /// "f_grid_step": h, "seed": n}
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// overrides the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
}

struct Failure {
    code: i32,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match e {
            Error::Capability(_) => 3,
            _ => 2,
        };
        Failure {
            code,
            msg: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        // A consumer closing the pipe early (`calib ... | head`) is not an
        // input error; exit quietly so pipelines under `pipefail` stay green.
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Failure {
                code: 0,
                msg: String::new(),
            };
        }
        Failure {
            code: 2,
            msg: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Failure {
        Failure {
            code: 2,
            msg: format!("invalid config: {e}"),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(f) = run(cli) {
        if !f.msg.is_empty() {
            eprintln!("error: {}", f.msg);
        }
        std::process::exit(f.code);
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Measure {
            transcript,
            measures,
            out,
            seed,
            reps,
        } => cmd_measure(&transcript, &measures, out.as_deref(), seed, reps),
        Cmd::Simulate { config, out, seed } => cmd_simulate(&config, out.as_deref(), seed),
        Cmd::Experiment {
            config,
            out,
            seed,
            reps,
        } => cmd_experiment(&config, out.as_deref(), seed, reps),
        Cmd::Oracle { config, out, seed } => cmd_oracle(&config, out.as_deref(), seed),
    }
}

fn open_output(out: Option<&std::path::Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn open_input(path: &std::path::Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure {
        code: 2,
        msg: format!("{}: {e}", path.display()),
    })
}

const MEASURE_NAMES: [&str; 11] = [
    "step",
    "step_sub",
    "step_sub_exact",
    "vcal",
    "vcal_sub",
    "ucal",
    "sign",
    "ece",
    "smce",
    "ssce",
    "ssce_exact",
];

fn unknown_measure(name: &str) -> Failure {
    Error::Argument(format!(
        "unknown measure '{name}' (expected one of {})",
        MEASURE_NAMES.join(", ")
    ))
    .into()
}

fn cmd_measure(
    transcript: &std::path::Path,
    names: &[String],
    out: Option<&std::path::Path>,
    seed: u64,
    reps: usize,
) -> Result<(), Failure> {
    // reject bad names before any rows stream out, so --out never leaves a
    // partial file next to a nonzero exit
    if let Some(bad) = names.iter().find(|n| !MEASURE_NAMES.contains(&n.as_str())) {
        return Err(unknown_measure(bad));
    }
    let (x, p, _pstar) = read_transcript_csv(open_input(transcript)?)?;
    let mut w = open_output(out)?;
    writeln!(w, "measure,value,exactness,stderr,lo,hi")?;
    for (i, name) in names.iter().enumerate() {
        // separate sampler stream per measure so the row set, not its order,
        // determines each value
        let mv = one_measure(name, &x, &p, calib::mix_seed(seed, i as u64), reps)?;
        let (exactness, stderr, lo, hi) = match mv.exactness {
            Exactness::Exact => ("exact", String::new(), String::new(), String::new()),
            Exactness::MonteCarlo { stderr, .. } => {
                ("monte_carlo", fmt_f64(stderr), String::new(), String::new())
            }
            Exactness::Interval { lo, hi } => ("interval", String::new(), fmt_f64(lo), fmt_f64(hi)),
        };
        writeln!(
            w,
            "{name},{},{exactness},{stderr},{lo},{hi}",
            fmt_f64(mv.value)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn one_measure(
    name: &str,
    x: &[u8],
    p: &[f64],
    seed: u64,
    reps: usize,
) -> Result<measures::MeasureValue, Failure> {
    Ok(match name {
        "ucal" => measures::ucal_bounds(x, p)?,
        "step" => measures::step_ce(x, p)?,
        "step_sub" => {
            let mut s = SubsetSampler::monte_carlo(reps, seed)?;
            measures::step_ce_sub(x, p, &mut s)?
        }
        "step_sub_exact" => measures::step_ce_sub_exact(x, p)?,
        "vcal" => measures::vcal(x, p)?,
        "sign" => measures::sign_ce(x, p)?,
        "ece" => measures::ece(x, p)?,
        "smce" => measures::smce(x, p)?,
        "ssce" => {
            let mut s = SubsetSampler::monte_carlo(reps, seed)?;
            measures::ssce(x, p, &mut s)?
        }
        "ssce_exact" => measures::ssce(x, p, &mut SubsetSampler::exhaustive())?,
        "vcal_sub" => {
            let (value, stderr) = calib::harness::vcal_sub_monte_carlo(x, p, reps, seed)?;
            measures::MeasureValue {
                kind: calib::measures::MeasureKind::VcalSub,
                value,
                exactness: Exactness::MonteCarlo { stderr, m: reps },
            }
        }
        other => return Err(unknown_measure(other)),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    nature: NatureSpec,
    forecaster: ForecasterSpec,
    #[serde(default)]
    seed: u64,
}

fn cmd_simulate(
    config: &std::path::Path,
    out: Option<&std::path::Path>,
    seed_override: Option<u64>,
) -> Result<(), Failure> {
    let cfg: SimulateConfig = serde_json::from_reader(open_input(config)?)?;
    let seed = seed_override.unwrap_or(cfg.seed);
    let tr = run_episode(&cfg.nature, &cfg.forecaster, seed)?;
    let mut w = open_output(out)?;
    write_transcript_csv(&mut w, &tr)?;
    w.flush()?;
    Ok(())
}

/// Accepts either a single horizon or a grid.
#[derive(Deserialize)]
#[serde(untagged)]
enum HorizonField {
    One(usize),
    Many(Vec<usize>),
}

impl HorizonField {
    fn list(&self) -> Vec<usize> {
        match self {
            HorizonField::One(t) => vec![*t],
            HorizonField::Many(ts) => ts.clone(),
        }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ExperimentParams {
    epsilon: Option<f64>,
    c: Option<f64>,
    /// subset draws for the Monte Carlo measures (default 1000)
    m: Option<usize>,
    /// grid size for the hedge forecaster (default: the horizon)
    k: Option<usize>,
    /// nature for the scaling experiment: binary_search (default) or
    /// constant_half
    nature: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentConfig {
    experiment: String,
    #[serde(rename = "T")]
    t: HorizonField,
    #[serde(default = "default_reps")]
    reps: usize,
    #[serde(default)]
    seed: u64,
    measure: Option<String>,
    #[serde(default)]
    params: ExperimentParams,
}

fn default_reps() -> usize {
    200
}

fn cmd_experiment(
    config: &std::path::Path,
    out: Option<&std::path::Path>,
    seed_override: Option<u64>,
    reps_override: Option<usize>,
) -> Result<(), Failure> {
    let cfg: ExperimentConfig = serde_json::from_reader(open_input(config)?)?;
    let seed = seed_override.unwrap_or(cfg.seed);
    let reps = reps_override.unwrap_or(cfg.reps);
    let m = cfg.params.m.unwrap_or(1000);
    let measure = cfg
        .measure
        .as_deref()
        .map(|name| MeasureSpec::parse(name, m))
        .transpose()?;

    let rows = if cfg.experiment == "thm_alg_scaling" {
        scaling_rows(&cfg, measure, reps, seed)?
    } else {
        let experiment = GapExperiment::parse(&cfg.experiment)?;
        let params = GapParams {
            epsilon: cfg.params.epsilon,
            c: cfg.params.c,
            measure,
        };
        let mut rows = Vec::new();
        for t in cfg.t.list() {
            let gap = truthfulness_gap(experiment, t, params, reps, seed)?;
            let name = measure.map(|ms| ms.name()).unwrap_or_else(|| {
                // canonical measure names per experiment
                match experiment {
                    GapExperiment::Epoch => "step",
                    _ => "vcal",
                }
            });
            rows.push(ResultRow::from_report(
                &format!("{}/truthful", gap.experiment),
                name,
                t,
                &gap.truthful,
            ));
            rows.push(ResultRow::from_report(
                &format!("{}/strategic", gap.experiment),
                name,
                t,
                &gap.strategic,
            ));
        }
        rows
    };

    let mut w = open_output(out)?;
    write_results_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

/// Rows for the hedge-forecaster scaling experiment: one per horizon, plus a
/// `/fit` summary row (mean = slope, sd = RMS residual) when the grid
/// supports a fit.
fn scaling_rows(
    cfg: &ExperimentConfig,
    measure: Option<MeasureSpec>,
    reps: usize,
    seed: u64,
) -> Result<Vec<ResultRow>, Failure> {
    let measure = measure.unwrap_or(MeasureSpec::Step);
    let k = cfg.params.k;
    let epsilon = cfg.params.epsilon;
    let nature_name = cfg.params.nature.as_deref().unwrap_or("binary_search");
    let nature_for = move |t: usize| -> Result<NatureSpec, Error> {
        Ok(match nature_name {
            "binary_search" => {
                NatureSpec::binary_search(epsilon.unwrap_or(0.25 / (t as f64).sqrt()), t)
            }
            "constant_half" => NatureSpec::constant_half(t),
            other => {
                return Err(Error::Argument(format!(
                    "unknown scaling nature '{other}' (expected binary_search or constant_half)"
                )))
            }
        })
    };
    nature_for(2)?; // surface a bad nature name before running anything
    let forecaster_for = move |_t: usize| ForecasterSpec::hedge_step(k, None);

    let ts = cfg.t.list();
    let mut rows = Vec::new();
    if ts.len() >= 3 {
        let report = scaling_fit(
            &ts,
            |t| nature_for(t).expect("nature name validated above"),
            forecaster_for,
            measure,
            reps,
            seed,
        )?;
        for pt in &report.points {
            rows.push(ResultRow::from_report(
                "thm_alg_scaling",
                measure.name(),
                pt.t,
                &pt.report,
            ));
        }
        let mut fit = ResultRow::from_report(
            "thm_alg_scaling/fit",
            measure.name(),
            0,
            &report.points[0].report,
        );
        fit.n = report.points.iter().filter(|p| !p.censored).count();
        fit.mean = report.slope;
        fit.sd = report.residual;
        fit.stderr = 0.0;
        fit.ci_lo = 0.0;
        fit.ci_hi = 0.0;
        rows.push(fit);
    } else {
        for t in ts {
            let report = estimate_error(
                &nature_for(t)?,
                &forecaster_for(t),
                measure,
                reps,
                calib::mix_seed(seed, t as u64),
            )?;
            rows.push(ResultRow::from_report(
                "thm_alg_scaling",
                measure.name(),
                t,
                &report,
            ));
        }
    }
    Ok(rows)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleConfig {
    #[serde(default = "default_instances")]
    instances: usize,
    #[serde(default = "default_t_max")]
    t_max: usize,
    #[serde(default = "default_grid_step")]
    grid_step: f64,
    #[serde(default = "default_f_grid_step")]
    f_grid_step: f64,
    #[serde(default)]
    seed: u64,
}

fn default_instances() -> usize {
    100
}

fn default_t_max() -> usize {
    12
}

fn default_grid_step() -> f64 {
    1e-3
}

fn default_f_grid_step() -> f64 {
    1.0 / 512.0
}

fn cmd_oracle(
    config: &std::path::Path,
    out: Option<&std::path::Path>,
    seed_override: Option<u64>,
) -> Result<(), Failure> {
    let cfg: OracleConfig = serde_json::from_reader(open_input(config)?)?;
    let seed = seed_override.unwrap_or(cfg.seed);
    let reports = random_instance_battery(
        cfg.instances,
        cfg.t_max,
        cfg.grid_step,
        cfg.f_grid_step,
        seed,
    )?;
    let mut w = open_output(out)?;
    writeln!(w, "measure,instance,T,levels,optimized,oracle,abs_diff")?;
    for r in &reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.measure.name(),
            r.instance.replace(',', ";"),
            r.t,
            r.levels,
            fmt_f64(r.optimized),
            fmt_f64(r.oracle),
            fmt_f64(r.abs_diff)
        )?;
    }
    w.flush()?;
    Ok(())
}
