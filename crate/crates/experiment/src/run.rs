//! Per-`n` bound reports, the results table and run diagnostics.

use std::fs;
use std::path::Path;

use fgen_core::bounds::{evaluate_report, BoundName, BoundReport, BoundSelection, BoundSettings};
use fgen_core::statistics::EmptyStratumPolicy;
use fgen_core::supersample::SupersampleLossTensor;

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::protocol::run_protocol;
use crate::svg::line_chart;

/// Bound columns of the results table, in output order. The disintegrated
/// oracle comes first; the pooled oracle follows for comparison.
pub const BOUND_COLUMNS: [BoundName; 7] = [
    BoundName::DisMiOracle,
    BoundName::CmiOracle,
    BoundName::ShOracle,
    BoundName::ShVar,
    BoundName::ShWorst,
    BoundName::JsOracle,
    BoundName::BaselineLdcmi,
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub n: usize,
    pub gen_err: f64,
    pub gen_err_stderr: f64,
    /// Aligned with `BOUND_COLUMNS`.
    pub bounds: Vec<f64>,
}

impl ExperimentRow {
    pub fn bound(&self, name: BoundName) -> Option<f64> {
        BOUND_COLUMNS.iter().position(|&b| b == name).map(|k| self.bounds[k])
    }
}

/// Soft checks. Violations are logged, never fatal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Fraction of rows with `sh_oracle ≤ dis_mi_oracle`.
    pub sh_below_cmi: f64,
    /// `gen_err` non-increasing in `n` up to twice the combined std error.
    pub gen_err_monotone: bool,
    pub sh_oracle_monotone: bool,
    /// `(n, bound)` pairs falling below `gen_err − 3·std_err`.
    pub validity_violations: Vec<(usize, BoundName)>,
    pub messages: Vec<String>,
}

pub struct SamplePoint {
    pub n: usize,
    pub tensor: SupersampleLossTensor,
    pub report: BoundReport,
}

pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub points: Vec<SamplePoint>,
    pub rows: Vec<ExperimentRow>,
    pub diagnostics: Diagnostics,
}

pub fn bound_settings() -> BoundSettings {
    BoundSettings { empty_stratum: EmptyStratumPolicy::Skip, ..BoundSettings::default() }
}

pub fn evaluate_point(tensor: &SupersampleLossTensor) -> Result<(BoundReport, ExperimentRow)> {
    let (report, _) = evaluate_report(tensor, &bound_settings(), &BoundSelection::Named(BOUND_COLUMNS.to_vec()))?;
    let bounds = BOUND_COLUMNS
        .iter()
        .map(|&b| {
            report.value(b).ok_or_else(|| {
                ExperimentError::Core(fgen_core::Error::Numerical(format!(
                    "{b} could not be evaluated at n = {}",
                    tensor.n()
                )))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let row = ExperimentRow {
        n: tensor.n(),
        gen_err: report.gen_error.mean,
        gen_err_stderr: report.gen_error.std_err,
        bounds,
    };
    Ok((report, row))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &n in &config.n_grid {
        let tensor = run_protocol(config, n)?;
        let (report, row) = evaluate_point(&tensor)?;
        log::info!("n = {n}: gen_err = {:.4} ± {:.4}", row.gen_err, row.gen_err_stderr);
        points.push(SamplePoint { n, tensor, report });
        rows.push(row);
    }
    let diagnostics = diagnose(&rows);
    for m in &diagnostics.messages {
        log::warn!("{m}");
    }
    Ok(ExperimentRun { config: config.clone(), points, rows, diagnostics })
}

fn non_increasing(rows: &[ExperimentRow], value: impl Fn(&ExperimentRow) -> f64) -> bool {
    rows.windows(2).all(|w| {
        let tol = 2.0 * (w[0].gen_err_stderr.powi(2) + w[1].gen_err_stderr.powi(2)).sqrt();
        value(&w[1]) <= value(&w[0]) + tol
    })
}

pub fn diagnose(rows: &[ExperimentRow]) -> Diagnostics {
    let mut d = Diagnostics::default();
    let sh = |r: &ExperimentRow| r.bound(BoundName::ShOracle).unwrap_or(f64::NAN);
    let below = rows.iter().filter(|r| sh(r) <= r.bound(BoundName::DisMiOracle).unwrap_or(f64::NAN)).count();
    d.sh_below_cmi = if rows.is_empty() { 1.0 } else { below as f64 / rows.len() as f64 };
    if d.sh_below_cmi < 0.9 {
        d.messages.push(format!("sh_oracle ≤ dis_mi_oracle on only {:.0}% of rows", 100.0 * d.sh_below_cmi));
    }
    d.gen_err_monotone = non_increasing(rows, |r| r.gen_err);
    if !d.gen_err_monotone {
        d.messages.push("gen_err increases with n beyond 2 std errors".into());
    }
    d.sh_oracle_monotone = non_increasing(rows, sh);
    if !d.sh_oracle_monotone {
        d.messages.push("sh_oracle increases with n beyond 2 std errors".into());
    }
    for r in rows {
        for (b, v) in BOUND_COLUMNS.iter().zip(&r.bounds) {
            if *v < r.gen_err - 3.0 * r.gen_err_stderr {
                d.validity_violations.push((r.n, *b));
                d.messages.push(format!("n = {}: {b} = {v} below gen_err {} - 3·{}", r.n, r.gen_err, r.gen_err_stderr));
            }
        }
    }
    d
}

pub fn csv_header() -> Vec<String> {
    let mut h: Vec<String> = ["n", "gen_err", "gen_err_stderr"].iter().map(|s| s.to_string()).collect();
    h.extend(BOUND_COLUMNS.iter().map(|b| b.as_str().to_string()));
    h
}

pub fn write_csv(rows: &[ExperimentRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(csv_header())?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), r.gen_err.to_string(), r.gen_err_stderr.to_string()];
        rec.extend(r.bounds.iter().map(f64::to_string));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `config.json`, `tensor_n{n}.json`, `report_n{n}.json`,
/// `results.csv` and, when asked, `results.svg` into `dir`.
pub fn write_outputs(run: &ExperimentRun, dir: &Path, svg: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(&run.config)? + "\n")?;
    for p in &run.points {
        p.tensor.write_json(dir.join(format!("tensor_n{}.json", p.n)))?;
        fs::write(dir.join(format!("report_n{}.json", p.n)), p.report.to_json_string() + "\n")?;
    }
    write_csv(&run.rows, &dir.join("results.csv"))?;
    if svg {
        let xs: Vec<f64> = run.rows.iter().map(|r| r.n as f64).collect();
        let mut series = vec![("gen_err".to_string(), run.rows.iter().map(|r| r.gen_err).collect::<Vec<_>>())];
        for (k, b) in BOUND_COLUMNS.iter().enumerate() {
            series.push((b.as_str().to_string(), run.rows.iter().map(|r| r.bounds[k]).collect()));
        }
        fs::write(dir.join("results.svg"), line_chart(&xs, &series))?;
    }
    Ok(())
}
