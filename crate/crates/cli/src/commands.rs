use std::fs;
use std::path::Path;

use serde::Deserialize;

use fgen_core::bounds::{evaluate_report, BoundOutcome, BoundSelection, BoundSettings, FailureKind};
use fgen_core::distributions::{JointLossMaskDistribution, Quantizer};
use fgen_core::divergences::{divergence as divergence_value, f_information, DivergenceKind};
use fgen_core::statistics::EmptyStratumPolicy;
use fgen_core::supersample::{estimate_f_information, SupersampleLossTensor};
use fgen_core::verify::run_all;
use fgen_core::{DiscreteDistribution, Error};
use fgen_experiment::{run_experiment, write_outputs, ExperimentConfig, ExperimentError};

use crate::{BoundArgs, DivergenceArgs, ExperimentArgs, FinfoArgs, VerifyArgs, EXIT_FAILURE, EXIT_VALIDATION};

/// `println!` that ignores a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

pub struct CliError {
    pub code: u8,
    pub message: String,
}

type CmdResult = Result<u8, CliError>;

fn validation(message: impl Into<String>) -> CliError {
    CliError { code: EXIT_VALIDATION, message: message.into() }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::MissingStatistic(_) | Error::NotApplicable(_) => EXIT_FAILURE,
        _ => EXIT_VALIDATION,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let mut message = e.to_string();
        if matches!(e, Error::EmptyStratum { .. }) {
            message.push_str(" (use --skip-empty-cells to drop such cells)");
        }
        CliError { code: exit_code(&e), message }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::Diverged { .. } | ExperimentError::Training { .. } => EXIT_FAILURE,
            ExperimentError::Core(c) => exit_code(c),
            _ => EXIT_VALIDATION,
        };
        CliError { code, message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| validation(format!("{}: {e}", path.display())))
}

pub fn verify(args: &VerifyArgs) -> CmdResult {
    let reports = run_all(args.seed, args.trials as usize);
    let ok = reports.iter().all(|r| r.passed());
    if args.json {
        let map: serde_json::Map<String, serde_json::Value> =
            reports.iter().map(|r| (r.name.to_string(), serde_json::to_value(r).expect("plain report"))).collect();
        say!("{}", serde_json::to_string_pretty(&map).expect("plain report"));
    } else {
        say!("{:<18} {:>8} {:>10} {:>9} {:>14}  status", "suite", "trials", "checks", "failures", "max_violation");
        for r in &reports {
            say!(
                "{:<18} {:>8} {:>10} {:>9} {:>14.3e}  {}",
                r.name,
                r.trials,
                r.checks,
                r.failures,
                r.max_violation,
                if r.passed() { "pass" } else { "FAIL" }
            );
            if let Some(f) = &r.first_failure {
                say!("  first failure: {f}");
            }
        }
    }
    Ok(if ok { 0 } else { EXIT_FAILURE })
}

fn read_distribution(path: &Path) -> Result<DiscreteDistribution, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| validation(format!("{}: {e}", path.display())))
}

pub fn divergence(args: &DivergenceArgs) -> CmdResult {
    let p = read_distribution(&args.p)?;
    let q = read_distribution(&args.q)?;
    let kinds = match args.kind {
        Some(k) => vec![k],
        None => DivergenceKind::FIXED.to_vec(),
    };
    let values: Vec<(String, f64)> = kinds.iter().map(|&k| (k.to_string(), divergence_value(&p, &q, k))).collect();
    if args.json {
        let map: serde_json::Map<String, serde_json::Value> =
            values.iter().map(|(k, v)| (k.clone(), json_number(*v))).collect();
        say!("{}", serde_json::Value::Object(map));
    } else {
        for (k, v) in &values {
            say!("{k} {v}");
        }
    }
    Ok(0)
}

/// Non-finite values become the strings used in report files.
fn json_number(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or_else(
        || {
            serde_json::Value::String(
                if v.is_nan() {
                    "nan"
                } else if v > 0.0 {
                    "inf"
                } else {
                    "-inf"
                }
                .into(),
            )
        },
        serde_json::Value::Number,
    )
}

fn failure_kind(k: FailureKind) -> &'static str {
    match k {
        FailureKind::Precondition => "precondition",
        FailureKind::MissingStatistic => "missing_statistic",
        FailureKind::Numerical => "numerical",
    }
}

#[derive(Deserialize)]
struct JointFile {
    support: Vec<f64>,
    p0: Vec<f64>,
    p1: Vec<f64>,
}

pub fn finfo(args: &FinfoArgs) -> CmdResult {
    args.kind.validate()?;
    if let Some(path) = &args.joint {
        let raw: JointFile =
            serde_json::from_str(&read(path)?).map_err(|e| validation(format!("{}: {e}", path.display())))?;
        let joint = JointLossMaskDistribution::new(raw.support, raw.p0, raw.p1)?;
        say!("{}", f_information(&joint, args.kind));
        return Ok(0);
    }
    let path = args.input.as_ref().expect("clap enforces one source");
    let tensor = SupersampleLossTensor::from_json_str(&read(path)?)?;
    let quantizer = match args.bins {
        Some(b) => {
            let dl = tensor.delta_and_g().dl;
            let lo = dl.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = dl.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Quantizer::uniform_bins(b, lo, hi)?
        }
        None => tensor.default_quantizer()?,
    };
    let est = estimate_f_information(&tensor, args.kind, args.mode.into(), &quantizer)?;
    say!("{}", serde_json::to_string_pretty(&est).expect("plain estimate"));
    Ok(0)
}

pub fn bound(args: &BoundArgs) -> CmdResult {
    let tensor = SupersampleLossTensor::from_json_str(&read(&args.input)?)?;
    let mut settings = BoundSettings {
        c_grid: args.c_grid.clone(),
        empty_stratum: if args.skip_empty_cells { EmptyStratumPolicy::Skip } else { EmptyStratumPolicy::Error },
        ..BoundSettings::default()
    };
    if let Some(q) = &args.q_grid {
        settings.q_grid = q.clone();
    }
    if let Some(a) = &args.alpha_grid {
        settings.alpha_grid = a.clone();
    }
    settings.validate()?;
    let (report, _) = evaluate_report(&tensor, &settings, &args.bounds)?;
    if let Some(out) = &args.out {
        write(out, &(report.to_json_string() + "\n"))?;
    }
    say!("gen_error {} ± {}", report.gen_error.mean, report.gen_error.std_err);
    let named = matches!(args.bounds, BoundSelection::Named(_));
    let mut failed = false;
    for (name, outcome) in &report.results {
        match outcome {
            BoundOutcome::Ok(r) => say!("{name} {}", r.value),
            BoundOutcome::Failed(f) => {
                say!("{name} failed ({}): {}", failure_kind(f.kind), f.error);
                failed |= named || f.kind != FailureKind::Precondition;
            }
        }
    }
    for note in &report.notes {
        log::info!("{note}");
    }
    Ok(if failed { EXIT_FAILURE } else { 0 })
}

pub fn experiment(args: &ExperimentArgs) -> CmdResult {
    let config = ExperimentConfig {
        dim: args.dim,
        classes: args.classes,
        class_sep: args.class_sep,
        n_grid: args.n_grid.clone(),
        k1: args.k1,
        k2: args.k2,
        lr: args.lr,
        epochs: args.epochs,
        early_stop_train_error: args.early_stop,
        seed: args.seed,
    };
    config.validate()?;
    let run = run_experiment(&config)?;
    write_outputs(&run, &args.out, args.svg)?;
    say!("{}", fgen_experiment::run::csv_header().join(","));
    for r in &run.rows {
        let mut cells = vec![r.n.to_string(), r.gen_err.to_string(), r.gen_err_stderr.to_string()];
        cells.extend(r.bounds.iter().map(f64::to_string));
        say!("{}", cells.join(","));
    }
    Ok(0)
}
