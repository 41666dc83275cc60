//! Generalization bounds evaluated from supersample statistics, and the
//! per-joint inequalities their proofs rest on.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::{JointLossMaskDistribution, Quantizer};
use crate::divergences::{f_information, DivergenceKind};
use crate::error::{Error, Result};
use crate::statistics::{
    compute_statistics, CellStatistics, EmptyStratumPolicy, StatisticsConfig, SupersampleStatistics,
};
use crate::supersample::{GenError, LossKind, Mode, SupersampleLossTensor};

pub const INVARIANT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_Q_GRID: [f64; 4] = [1.0, 1.5, 2.0, 4.0];
pub const DEFAULT_ALPHA_GRID: [f64; 4] = [1.0, 1.25, 1.5, 2.0];
pub const PROOF_C_GRID: [f64; 3] = [0.25, 0.5, 1.0];

/// `{0, 0.1, …, 1.0}`.
pub fn default_c_grid() -> Vec<f64> {
    (0..=10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum BoundName {
    CmiOracle,
    CmiFastrate,
    CmiVar,
    CmiTv,
    CmiRealizable4i,
    CmiRealizableLog2,
    DisMiOracle,
    DisChi2Oracle,
    ShOracle,
    ShVar,
    ShWorst,
    JsOracle,
    UnboundedMi,
    UnboundedMarkov,
    BaselineLdcmi,
}

impl BoundName {
    pub const ALL: [BoundName; 15] = [
        BoundName::CmiOracle,
        BoundName::CmiFastrate,
        BoundName::CmiVar,
        BoundName::CmiTv,
        BoundName::CmiRealizable4i,
        BoundName::CmiRealizableLog2,
        BoundName::DisMiOracle,
        BoundName::DisChi2Oracle,
        BoundName::ShOracle,
        BoundName::ShVar,
        BoundName::ShWorst,
        BoundName::JsOracle,
        BoundName::UnboundedMi,
        BoundName::UnboundedMarkov,
        BoundName::BaselineLdcmi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BoundName::CmiOracle => "cmi_oracle",
            BoundName::CmiFastrate => "cmi_fastrate",
            BoundName::CmiVar => "cmi_var",
            BoundName::CmiTv => "cmi_tv",
            BoundName::CmiRealizable4i => "cmi_realizable_4i",
            BoundName::CmiRealizableLog2 => "cmi_realizable_log2",
            BoundName::DisMiOracle => "dis_mi_oracle",
            BoundName::DisChi2Oracle => "dis_chi2_oracle",
            BoundName::ShOracle => "sh_oracle",
            BoundName::ShVar => "sh_var",
            BoundName::ShWorst => "sh_worst",
            BoundName::JsOracle => "js_oracle",
            BoundName::UnboundedMi => "unbounded_mi",
            BoundName::UnboundedMarkov => "unbounded_markov",
            BoundName::BaselineLdcmi => "baseline_ldcmi",
        }
    }

    fn mode(self) -> Mode {
        match self {
            BoundName::CmiOracle
            | BoundName::CmiFastrate
            | BoundName::CmiVar
            | BoundName::CmiTv
            | BoundName::CmiRealizable4i
            | BoundName::CmiRealizableLog2
            | BoundName::UnboundedMi
            | BoundName::UnboundedMarkov => Mode::Pooled,
            _ => Mode::Disintegrated,
        }
    }

    fn kinds(self, alpha_grid: &[f64]) -> Vec<DivergenceKind> {
        match self {
            BoundName::DisChi2Oracle => vec![DivergenceKind::Chi2],
            BoundName::ShOracle | BoundName::ShVar | BoundName::ShWorst => vec![DivergenceKind::SquaredHellinger],
            BoundName::JsOracle => vec![DivergenceKind::JensenShannon],
            BoundName::UnboundedMi | BoundName::UnboundedMarkov => std::iter::once(DivergenceKind::Kl)
                .chain(alpha_grid.iter().map(|&a| DivergenceKind::PhiAlpha(a)))
                .collect(),
            _ => vec![DivergenceKind::Kl],
        }
    }

    fn is_unbounded(self) -> bool {
        matches!(self, BoundName::UnboundedMi | BoundName::UnboundedMarkov)
    }
}

impl fmt::Display for BoundName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundName::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| Error::InvalidKind(format!("unknown bound `{s}`")))
    }
}

impl From<BoundName> for String {
    fn from(b: BoundName) -> String {
        b.as_str().to_string()
    }
}

impl TryFrom<String> for BoundName {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundSelection {
    /// Every bound whose preconditions hold; the rest are noted as skipped.
    All,
    Named(Vec<BoundName>),
}

impl BoundSelection {
    pub fn names(&self) -> Vec<BoundName> {
        match self {
            BoundSelection::All => BoundName::ALL.to_vec(),
            BoundSelection::Named(v) => v.clone(),
        }
    }
}

impl FromStr for BoundSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "all" {
            return Ok(BoundSelection::All);
        }
        let names = s.split(',').map(|p| p.trim().parse()).collect::<Result<Vec<BoundName>>>()?;
        if names.is_empty() {
            return Err(Error::InvalidKind("empty bound selection".into()));
        }
        Ok(BoundSelection::Named(names))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSettings {
    /// `None` uses the default grid joined with the observed `max |ΔL|`.
    pub c_grid: Option<Vec<f64>>,
    pub q_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub quantizer: Option<Quantizer>,
    pub empty_stratum: EmptyStratumPolicy,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            c_grid: None,
            q_grid: DEFAULT_Q_GRID.to_vec(),
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            quantizer: None,
            empty_stratum: EmptyStratumPolicy::Error,
        }
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    v
}

/// `β` with `1/α + 1/β = 1`.
pub fn conjugate_exponent(alpha: f64) -> f64 {
    if alpha == 1.0 {
        f64::INFINITY
    } else {
        alpha / (alpha - 1.0)
    }
}

impl BoundSettings {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = &self.c_grid {
            if c.is_empty() {
                return Err(Error::Precondition("c_grid is empty".into()));
            }
            if let Some(bad) = c.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                return Err(Error::Precondition(format!("c_grid entry {bad} must be finite and >= 0")));
            }
        }
        if self.q_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::Precondition("q_grid and alpha_grid must be non-empty".into()));
        }
        if let Some(bad) = self.q_grid.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
            return Err(Error::Precondition(format!("q_grid entry {bad} must be finite and >= 1")));
        }
        if let Some(bad) = self.alpha_grid.iter().find(|a| !(a.is_finite() && **a >= 1.0)) {
            return Err(Error::Precondition(format!("alpha_grid entry {bad} must be finite and >= 1")));
        }
        if let Some(q) = &self.quantizer {
            q.validate()?;
        }
        Ok(())
    }

    pub fn resolved_c_grid(&self, tensor: &SupersampleLossTensor) -> Vec<f64> {
        match &self.c_grid {
            Some(c) => sorted_unique(c.clone()),
            None => {
                let max = tensor.delta_and_g().dl.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                sorted_unique(default_c_grid().into_iter().chain([max]).collect())
            }
        }
    }

    /// Statistics needed by the given bounds.
    pub fn statistics_config(&self, tensor: &SupersampleLossTensor, names: &[BoundName]) -> Result<StatisticsConfig> {
        self.validate()?;
        let mut modes: Vec<Mode> = names.iter().map(|b| b.mode()).collect();
        modes.sort();
        modes.dedup();
        let mut kinds: Vec<DivergenceKind> = Vec::new();
        for name in names {
            for k in name.kinds(&self.alpha_grid) {
                if !kinds.contains(&k) {
                    kinds.push(k);
                }
            }
        }
        let unbounded = names.iter().any(|b| b.is_unbounded());
        let mut p_list = vec![1.0];
        if unbounded {
            for &a in &self.alpha_grid {
                let beta = conjugate_exponent(a);
                if beta.is_finite() {
                    p_list.extend(self.q_grid.iter().map(|q| q * beta));
                }
            }
        }
        Ok(StatisticsConfig {
            c_grid: if unbounded { self.resolved_c_grid(tensor) } else { Vec::new() },
            p_list: sorted_unique(p_list),
            quantizer: self.quantizer,
            kinds,
            modes,
            empty_stratum: self.empty_stratum,
        })
    }
}

/// The `(C, q, α)` minimizing one row of an unbounded bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChosenParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub c: Option<f64>,
    pub q: f64,
    pub alpha: f64,
    #[serde(with = "crate::serde_ext::ext_f64")]
    pub beta: f64,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub zeta2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub name: BoundName,
    pub value: f64,
    pub per_row: Vec<f64>,
    #[serde(default)]
    pub chosen_params: Option<Vec<ChosenParams>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl BoundResult {
    fn from_rows(name: BoundName, per_row: Vec<f64>) -> Self {
        let value = per_row.iter().sum::<f64>() / per_row.len() as f64;
        BoundResult { name, value, per_row, chosen_params: None, notes: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The bound does not apply to this tensor.
    Precondition,
    MissingStatistic,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFailure {
    pub error: String,
    pub kind: FailureKind,
}

impl From<&Error> for BoundFailure {
    fn from(e: &Error) -> Self {
        let kind = match e {
            Error::Precondition(_) | Error::NotApplicable(_) => FailureKind::Precondition,
            Error::MissingStatistic(_) => FailureKind::MissingStatistic,
            _ => FailureKind::Numerical,
        };
        BoundFailure { error: e.to_string(), kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundOutcome {
    Ok(BoundResult),
    Failed(BoundFailure),
}

impl BoundOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            BoundOutcome::Ok(r) => Some(r.value),
            BoundOutcome::Failed(_) => None,
        }
    }
}

fn info(cell: &CellStatistics, kind: DivergenceKind) -> Result<f64> {
    Ok(cell.info(kind)?.max(0.0))
}

fn require_bounded(stats: &SupersampleStatistics) -> Result<()> {
    match stats.declared_dl_bound {
        Some(b) if b <= 1.0 => Ok(()),
        Some(b) => Err(Error::NotApplicable(format!("loss differences may reach {b} > 1; use the unbounded family"))),
        None => Err(Error::NotApplicable(
            "general loss without a loss_range of width <= 1; use the unbounded family".into(),
        )),
    }
}

/// Averages a per-draw term over the draws of each row.
fn disintegrated_rows(
    stats: &SupersampleStatistics,
    term: impl Fn(&CellStatistics) -> Result<f64>,
) -> Result<Vec<f64>> {
    (0..stats.n)
        .map(|i| {
            let cells = stats.draws_of_row(i)?;
            let total = cells.iter().map(|c| term(c)).sum::<Result<f64>>()?;
            Ok(total / cells.len() as f64)
        })
        .collect()
}

fn pooled_rows(stats: &SupersampleStatistics, term: impl Fn(&CellStatistics) -> Result<f64>) -> Result<Vec<f64>> {
    stats.pooled()?.iter().map(term).collect()
}

pub fn bound_mi_family(stats: &SupersampleStatistics, name: BoundName) -> Result<BoundResult> {
    require_bounded(stats)?;
    let kl = DivergenceKind::Kl;
    let rows = match name {
        BoundName::CmiOracle => pooled_rows(stats, |c| Ok((2.0 * (c.e_dl2 + c.e_g.abs()) * info(c, kl)?).sqrt()))?,
        BoundName::CmiFastrate => pooled_rows(stats, |c| {
            let i = info(c, kl)?;
            Ok(2.0 * i + (2.0 * c.e_dl2 * i).sqrt())
        })?,
        BoundName::CmiVar => pooled_rows(stats, |c| {
            let i = info(c, kl)?;
            Ok(2.0 * i + 2.0 * (2.0 * c.var_lplus * i).sqrt())
        })?,
        BoundName::CmiTv => pooled_rows(stats, |c| {
            let i = info(c, kl)?;
            Ok((2.0 * c.e_dl2 * i).sqrt() + (2.0 * c.tv_term * i).sqrt())
        })?,
        BoundName::DisMiOracle => {
            disintegrated_rows(stats, |c| Ok((2.0 * (c.e_dl2 + c.e_g.abs()) * info(c, kl)?).sqrt()))?
        }
        BoundName::DisChi2Oracle => {
            disintegrated_rows(stats, |c| Ok((2.0 * (c.e_dl2 + c.e_g.abs()) * info(c, DivergenceKind::Chi2)?).sqrt()))?
        }
        BoundName::BaselineLdcmi => disintegrated_rows(stats, |c| Ok((2.0 * info(c, kl)?).sqrt()))?,
        other => return Err(Error::InvalidKind(format!("{other} is not in the mutual-information family"))),
    };
    Ok(BoundResult::from_rows(name, rows))
}

pub fn bound_realizable(stats: &SupersampleStatistics, name: BoundName) -> Result<BoundResult> {
    require_bounded(stats)?;
    if stats.min_g < 0.0 {
        return Err(Error::NotApplicable(format!(
            "observed a negative gap G = {}; the realizable bounds need training loss <= test loss",
            stats.min_g
        )));
    }
    let scale = match name {
        BoundName::CmiRealizable4i => 4.0,
        BoundName::CmiRealizableLog2 => 1.0 / std::f64::consts::LN_2,
        other => return Err(Error::InvalidKind(format!("{other} is not a realizable bound"))),
    };
    let rows = pooled_rows(stats, |c| Ok(scale * info(c, DivergenceKind::Kl)?))?;
    let mut r = BoundResult::from_rows(name, rows);
    r.notes.push("verified G >= 0 on every sample".into());
    Ok(r)
}

pub fn bound_sh_js(stats: &SupersampleStatistics, name: BoundName) -> Result<BoundResult> {
    require_bounded(stats)?;
    let sh = DivergenceKind::SquaredHellinger;
    let rows = match name {
        BoundName::ShOracle => {
            disintegrated_rows(stats, |c| Ok(((4.0 * c.e_dl2 + 2.0 * c.e_g.abs()) * info(c, sh)?).sqrt()))?
        }
        BoundName::ShVar => {
            disintegrated_rows(stats, |c| Ok(((4.0 * c.e_dl2 + 2.0 * c.tv_term) * info(c, sh)?).sqrt()))?
        }
        BoundName::ShWorst => disintegrated_rows(stats, |c| Ok(((4.0 + 2.0 * c.tv_term) * info(c, sh)?).sqrt()))?,
        BoundName::JsOracle => disintegrated_rows(stats, |c| {
            Ok(2.0 * ((4.0 * c.e_dl2 + c.e_g.abs()) * info(c, DivergenceKind::JensenShannon)?).sqrt())
        })?,
        other => return Err(Error::InvalidKind(format!("{other} is not a Hellinger or Jensen-Shannon bound"))),
    };
    Ok(BoundResult::from_rows(name, rows))
}

/// One row of the truncated bound at `(C, q, α)`.
pub fn unbounded_mi_term(cell: &CellStatistics, c: f64, q: f64, alpha: f64) -> Result<(f64, ChosenParams)> {
    let beta = conjugate_exponent(alpha);
    let exponent = if beta.is_finite() { (q - 1.0) / (q * beta) } else { 0.0 };
    let zeta1 = (2.0 * (cell.truncated_dl2(c)? + c * cell.truncated_g(c)?.abs())).sqrt();
    let zeta2 = cell.tail(c)?.powf(exponent) * cell.lp_norm(q * beta)?;
    let term = zeta1 * info(cell, DivergenceKind::Kl)?.sqrt()
        + zeta2 * info(cell, DivergenceKind::PhiAlpha(alpha))?.powf(1.0 / alpha);
    let params = ChosenParams { c: Some(c), q, alpha, beta, gamma: exponent, zeta1: Some(zeta1), zeta2: Some(zeta2) };
    Ok((term, params))
}

/// One row of the Markov-tail form at `(q, α)`.
pub fn unbounded_markov_term(cell: &CellStatistics, q: f64, alpha: f64) -> Result<(f64, ChosenParams)> {
    let beta = conjugate_exponent(alpha);
    let gamma = if beta.is_finite() { (q - 1.0) / (q * beta) } else { 0.0 };
    let tail = cell.lp_norm(q * beta)? * info(cell, DivergenceKind::PhiAlpha(alpha))?.powf(1.0 / alpha);
    let term = if gamma == 0.0 {
        tail
    } else {
        let lead = gamma.powf(1.0 / (gamma + 1.0)) + gamma.powf(-gamma / (gamma + 1.0));
        let kl = (2.0 * info(cell, DivergenceKind::Kl)?).sqrt();
        lead * kl.powf(gamma / (gamma + 1.0)) * (cell.lp_norm(1.0)?.powf(gamma) * tail).powf(1.0 / (gamma + 1.0))
    };
    let params = ChosenParams { c: None, q, alpha, beta, gamma, zeta1: None, zeta2: None };
    Ok((term, params))
}

pub fn bound_unbounded(
    stats: &SupersampleStatistics,
    name: BoundName,
    q_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<BoundResult> {
    let c_grid = &stats.config.c_grid;
    if q_grid.is_empty() || alpha_grid.is_empty() || (name == BoundName::UnboundedMi && c_grid.is_empty()) {
        return Err(Error::Precondition(format!("{name} needs non-empty search grids")));
    }
    let cells = stats.pooled()?;
    let mut per_row = Vec::with_capacity(cells.len());
    let mut chosen = Vec::with_capacity(cells.len());
    for (i, cell) in cells.iter().enumerate() {
        let mut best: Option<(f64, ChosenParams)> = None;
        for &q in q_grid {
            for &alpha in alpha_grid {
                let candidates = match name {
                    BoundName::UnboundedMi => {
                        c_grid.iter().map(|&c| unbounded_mi_term(cell, c, q, alpha)).collect::<Result<Vec<_>>>()?
                    }
                    BoundName::UnboundedMarkov => vec![unbounded_markov_term(cell, q, alpha)?],
                    other => return Err(Error::InvalidKind(format!("{other} is not an unbounded-loss bound"))),
                };
                for (term, params) in candidates {
                    if term.is_finite() && best.is_none_or(|(b, _)| term < b) {
                        best = Some((term, params));
                    }
                }
            }
        }
        let (term, params) =
            best.ok_or_else(|| Error::Numerical(format!("every {name} candidate is infinite at row {i}")))?;
        per_row.push(term);
        chosen.push(params);
    }
    let mut r = BoundResult::from_rows(name, per_row);
    r.chosen_params = Some(chosen);
    Ok(r)
}

pub fn evaluate_bound(stats: &SupersampleStatistics, name: BoundName, settings: &BoundSettings) -> Result<BoundResult> {
    match name {
        BoundName::CmiRealizable4i | BoundName::CmiRealizableLog2 => bound_realizable(stats, name),
        BoundName::ShOracle | BoundName::ShVar | BoundName::ShWorst | BoundName::JsOracle => bound_sh_js(stats, name),
        BoundName::UnboundedMi | BoundName::UnboundedMarkov => {
            bound_unbounded(stats, name, &settings.q_grid, &settings.alpha_grid)
        }
        _ => bound_mi_family(stats, name),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub gen_error: GenError,
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub loss_kind: LossKind,
    pub quantizer: Quantizer,
    pub c_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    pub empty_stratum: EmptyStratumPolicy,
    pub results: BTreeMap<BoundName, BoundOutcome>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn value(&self, name: BoundName) -> Option<f64> {
        self.results.get(&name).and_then(BoundOutcome::value)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Statistics plus every selected bound. Bound-level failures are recorded
/// in the report; only statistics failures abort.
pub fn evaluate_report(
    tensor: &SupersampleLossTensor,
    settings: &BoundSettings,
    selection: &BoundSelection,
) -> Result<(BoundReport, SupersampleStatistics)> {
    let names = selection.names();
    let config = settings.statistics_config(tensor, &names)?;
    let stats = compute_statistics(tensor, &config)?;
    let mut results = BTreeMap::new();
    let mut notes = stats.notes.clone();
    for name in names {
        let outcome = match evaluate_bound(&stats, name, settings) {
            Ok(r) => BoundOutcome::Ok(r),
            Err(e) => {
                let failure = BoundFailure::from(&e);
                if *selection == BoundSelection::All && failure.kind == FailureKind::Precondition {
                    notes.push(format!("skipped {name}: {}", failure.error));
                }
                BoundOutcome::Failed(failure)
            }
        };
        results.insert(name, outcome);
    }
    let report = BoundReport {
        gen_error: stats.gen_error,
        n: stats.n,
        k1: stats.k1,
        k2: stats.k2,
        loss_kind: stats.loss_kind,
        quantizer: stats.quantizer,
        c_grid: config.c_grid.clone(),
        q_grid: settings.q_grid.clone(),
        alpha_grid: settings.alpha_grid.clone(),
        empty_stratum: settings.empty_stratum,
        results,
        notes,
    };
    Ok((report, stats))
}

/// Per-joint inequalities from the bound proofs, evaluated exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofInvariants {
    /// `E[G]² ≤ 2(|E[G]| + E[G²])·I_KL`
    pub kl_key: bool,
    /// `|E[G]| ≤ √((2|E[G]| + 4E[G²])·I_H²)`
    pub sh_key: bool,
    /// `|E[G]| ≤ √((4|E[G]| + 16E[G²])·I_JS)`
    pub js_key: bool,
    /// `|E[G·1]| ≤ √(2(C|E[G·1]| + E[G²·1])·I_KL)` with `1 = 1{|ΔL| ≤ C}`.
    pub truncated_kl: Vec<(f64, bool)>,
    /// `E[G] ≤ I_KL / ln 2` and `E[G] ≤ 4·I_KL`, checked when `G ≥ 0`.
    pub realizable: Option<(bool, bool)>,
}

impl ProofInvariants {
    pub fn all_pass(&self) -> bool {
        self.kl_key
            && self.sh_key
            && self.js_key
            && self.truncated_kl.iter().all(|&(_, ok)| ok)
            && self.realizable.is_none_or(|(a, b)| a && b)
    }
}

pub fn per_joint_proof_invariants(joint: &JointLossMaskDistribution) -> ProofInvariants {
    per_joint_proof_invariants_with(joint, &PROOF_C_GRID)
}

pub fn per_joint_proof_invariants_with(joint: &JointLossMaskDistribution, c_grid: &[f64]) -> ProofInvariants {
    let tol = INVARIANT_TOLERANCE;
    let eg = joint.mean_g();
    let eg2 = joint.mean_g2();
    let kl = f_information(joint, DivergenceKind::Kl).max(0.0);
    let sh = f_information(joint, DivergenceKind::SquaredHellinger).max(0.0);
    let js = f_information(joint, DivergenceKind::JensenShannon).max(0.0);
    let truncated_kl = c_grid
        .iter()
        .map(|&c| {
            let (mut tg, mut tg2) = (0.0, 0.0);
            for (m, g) in joint.cells().filter(|&(_, g)| g.abs() <= c) {
                tg += m * g;
                tg2 += m * g * g;
            }
            (c, tg.abs() <= (2.0 * (c * tg.abs() + tg2) * kl).sqrt() + tol)
        })
        .collect();
    let realizable = (joint.min_g() >= 0.0).then(|| (eg <= kl / std::f64::consts::LN_2 + tol, eg <= 4.0 * kl + tol));
    ProofInvariants {
        kl_key: eg * eg <= 2.0 * (eg.abs() + eg2) * kl + tol,
        sh_key: eg.abs() <= ((2.0 * eg.abs() + 4.0 * eg2) * sh).sqrt() + tol,
        js_key: eg.abs() <= ((4.0 * eg.abs() + 16.0 * eg2) * js).sqrt() + tol,
        truncated_kl,
        realizable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::StatisticsConfig;

    fn deterministic_tensor() -> SupersampleLossTensor {
        let masks: Vec<u8> = (0..8).map(|j| (j % 2) as u8).collect();
        let losses = masks.iter().map(|&u| if u == 0 { [0.0, 1.0] } else { [1.0, 0.0] }).collect();
        SupersampleLossTensor::new(1, 8, 1, losses, masks, LossKind::ZeroOne, None).unwrap()
    }

    #[test]
    fn deterministic_channel_values() {
        let (report, _) =
            evaluate_report(&deterministic_tensor(), &BoundSettings::default(), &BoundSelection::All).unwrap();
        let sh = report.value(BoundName::ShOracle).unwrap();
        assert!((sh - (6.0 * (2.0 - 2f64.sqrt())).sqrt()).abs() < 1e-12);
        assert!((sh - 1.8747583).abs() < 1e-7);
        let i_js = 1.5 * (4.0f64 / 3.0).ln();
        let js = report.value(BoundName::JsOracle).unwrap();
        assert!((js - 2.0 * (5.0 * i_js).sqrt()).abs() < 1e-12);
        assert!((js - 2.9377648).abs() < 1e-7);
        assert!((report.value(BoundName::CmiRealizableLog2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_deterministic_c0_q1_alpha2() {
        let t = deterministic_tensor();
        let settings = BoundSettings {
            c_grid: Some(vec![0.0]),
            q_grid: vec![1.0],
            alpha_grid: vec![2.0],
            ..BoundSettings::default()
        };
        let (report, _) = evaluate_report(&t, &settings, &BoundSelection::Named(vec![BoundName::UnboundedMi])).unwrap();
        assert!((report.value(BoundName::UnboundedMi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realizable_rejects_negative_gap() {
        let losses = vec![[0.0, 1.0], [0.0, 1.0]];
        let t = SupersampleLossTensor::new(1, 2, 1, losses, vec![0, 1], LossKind::ZeroOne, None).unwrap();
        let (report, _) = evaluate_report(&t, &BoundSettings::default(), &BoundSelection::All).unwrap();
        match &report.results[&BoundName::CmiRealizable4i] {
            BoundOutcome::Failed(f) => assert_eq!(f.kind, FailureKind::Precondition),
            other => panic!("{other:?}"),
        }
        assert!(report.notes.iter().any(|n| n.starts_with("skipped cmi_realizable_4i")));
    }

    #[test]
    fn unit_family_rejects_wide_losses() {
        let t = SupersampleLossTensor::new(1, 2, 1, vec![[0.0, 3.0], [1.0, 0.0]], vec![0, 1], LossKind::General, None)
            .unwrap();
        let config = StatisticsConfig::default();
        let stats = compute_statistics(&t, &config).unwrap();
        assert!(matches!(bound_mi_family(&stats, BoundName::CmiOracle), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn proof_invariant_examples() {
        let det = JointLossMaskDistribution::new(vec![-1.0, 1.0], vec![0.0, 0.5], vec![0.5, 0.0]).unwrap();
        assert!(per_joint_proof_invariants(&det).all_pass());
        let indep = JointLossMaskDistribution::new(vec![0.0, 1.0], vec![0.25, 0.25], vec![0.25, 0.25]).unwrap();
        assert!(per_joint_proof_invariants(&indep).all_pass());
    }

    #[test]
    fn report_round_trips() {
        let (report, _) =
            evaluate_report(&deterministic_tensor(), &BoundSettings::default(), &BoundSelection::All).unwrap();
        let back: BoundReport = serde_json::from_str(&report.to_json_string()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn selection_parsing() {
        assert_eq!("all".parse::<BoundSelection>().unwrap(), BoundSelection::All);
        assert_eq!(
            "cmi_oracle, sh_var".parse::<BoundSelection>().unwrap(),
            BoundSelection::Named(vec![BoundName::CmiOracle, BoundName::ShVar])
        );
        assert!("cmi_oracle,nope".parse::<BoundSelection>().is_err());
    }
}
