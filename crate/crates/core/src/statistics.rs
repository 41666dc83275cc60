//! Plug-in moments and f-information estimates per row (pooled) and per
//! `(draw, row)` cell (disintegrated).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{JointLossMaskDistribution, Quantizer};
use crate::divergences::{f_information, DivergenceKind};
use crate::error::{Error, Result};
use crate::supersample::{cell_joint, DeltaG, GenError, LossKind, Mode, SupersampleLossTensor};

/// Keys in the parameter maps are matched up to this distance.
pub const KEY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyStratumPolicy {
    /// Fail on the first disintegrated cell with an empty mask stratum.
    #[default]
    Error,
    /// Leave such cells out and average over the remaining draws.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsConfig {
    pub c_grid: Vec<f64>,
    /// Finite exponents `p ≥ 1` for `‖ΔL‖_p`; the sup norm is always kept.
    pub p_list: Vec<f64>,
    /// `None` picks the tensor's default quantizer.
    pub quantizer: Option<Quantizer>,
    pub kinds: Vec<DivergenceKind>,
    pub modes: Vec<Mode>,
    #[serde(default)]
    pub empty_stratum: EmptyStratumPolicy,
}

impl Default for StatisticsConfig {
    fn default() -> Self {
        StatisticsConfig {
            c_grid: Vec::new(),
            p_list: vec![1.0, 2.0],
            quantizer: None,
            kinds: vec![
                DivergenceKind::Kl,
                DivergenceKind::Chi2,
                DivergenceKind::SquaredHellinger,
                DivergenceKind::JensenShannon,
                DivergenceKind::TotalVariation,
            ],
            modes: vec![Mode::Pooled, Mode::Disintegrated],
            empty_stratum: EmptyStratumPolicy::Error,
        }
    }
}

impl StatisticsConfig {
    fn validate(&self) -> Result<()> {
        if let Some(&c) = self.c_grid.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::Precondition(format!("truncation level {c} must be finite and >= 0")));
        }
        if let Some(&p) = self.p_list.iter().find(|p| !(p.is_finite() && **p >= 1.0)) {
            return Err(Error::Precondition(format!("norm exponent {p} must be finite and >= 1")));
        }
        for kind in &self.kinds {
            kind.validate()?;
        }
        if let Some(q) = &self.quantizer {
            q.validate()?;
        }
        Ok(())
    }
}

/// Value stored under a real-valued key.
pub fn lookup(map: &[(f64, f64)], key: f64) -> Option<f64> {
    map.iter().find(|(k, _)| (k - key).abs() <= KEY_TOLERANCE).map(|&(_, v)| v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStatistics {
    pub samples: usize,
    /// `E[G]`
    pub e_g: f64,
    /// `E[ΔL²]`
    pub e_dl2: f64,
    /// Variance of the training-column loss.
    pub var_lplus: f64,
    /// `E_U Σ_v |P(v | U) - P(v)|` on the quantized joint.
    pub tv_term: f64,
    pub max_abs_dl: f64,
    pub min_g: f64,
    pub lp_norms: Vec<(f64, f64)>,
    /// `P(|ΔL| > C)`
    pub tail_prob: Vec<(f64, f64)>,
    /// `E[ΔL²·1{|ΔL| ≤ C}]`
    pub trunc_dl2: Vec<(f64, f64)>,
    /// `E[G·1{|ΔL| ≤ C}]`
    pub trunc_g: Vec<(f64, f64)>,
    pub finfo: Vec<(DivergenceKind, f64)>,
}

impl CellStatistics {
    pub fn info(&self, kind: DivergenceKind) -> Result<f64> {
        self.finfo
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|&(_, v)| v)
            .ok_or_else(|| Error::MissingStatistic(format!("{kind} information")))
    }

    /// `‖ΔL‖_p`, with `p = ∞` served by the largest observed `|ΔL|`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p == f64::INFINITY {
            return Ok(self.max_abs_dl);
        }
        lookup(&self.lp_norms, p).ok_or_else(|| Error::MissingStatistic(format!("L{p} norm")))
    }

    fn at(map: &[(f64, f64)], c: f64, what: &str) -> Result<f64> {
        lookup(map, c).ok_or_else(|| Error::MissingStatistic(format!("{what} at C = {c}")))
    }

    pub fn tail(&self, c: f64) -> Result<f64> {
        Self::at(&self.tail_prob, c, "tail probability")
    }

    pub fn truncated_dl2(&self, c: f64) -> Result<f64> {
        Self::at(&self.trunc_dl2, c, "truncated second moment")
    }

    pub fn truncated_g(&self, c: f64) -> Result<f64> {
        Self::at(&self.trunc_g, c, "truncated mean gap")
    }
}

/// `E_U Σ_v |P(v | U) - P(v)|`, twice the mask-averaged total variation.
pub fn tv_term(joint: &JointLossMaskDistribution) -> f64 {
    let marginal = joint.dl_marginal_probs();
    let pu = joint.u_marginal();
    (0..2)
        .filter_map(|u| {
            joint.conditional(u).map(|c| pu[u] * c.iter().zip(&marginal).map(|(a, b)| (a - b).abs()).sum::<f64>())
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupersampleStatistics {
    pub k1: usize,
    pub k2: usize,
    pub n: usize,
    pub loss_kind: LossKind,
    pub declared_dl_bound: Option<f64>,
    pub quantizer: Quantizer,
    pub config: StatisticsConfig,
    pub gen_error: GenError,
    /// Smallest `G` over every recorded sample.
    pub min_g: f64,
    /// Largest `|ΔL|` over every recorded sample.
    pub max_abs_dl: f64,
    /// One entry per row.
    pub pooled: Option<Vec<CellStatistics>>,
    /// Entry `draw·n + row`; `None` for cells skipped on an empty stratum.
    pub disintegrated: Option<Vec<Option<CellStatistics>>>,
    pub notes: Vec<String>,
}

impl SupersampleStatistics {
    pub fn pooled(&self) -> Result<&[CellStatistics]> {
        self.pooled.as_deref().ok_or_else(|| Error::MissingStatistic("pooled statistics".into()))
    }

    /// Cells of one row across draws, skipping empty ones.
    pub fn draws_of_row(&self, row: usize) -> Result<Vec<&CellStatistics>> {
        let cells =
            self.disintegrated.as_deref().ok_or_else(|| Error::MissingStatistic("disintegrated statistics".into()))?;
        let out: Vec<&CellStatistics> = (0..self.k1).filter_map(|d| cells[d * self.n + row].as_ref()).collect();
        if out.is_empty() {
            return Err(Error::MissingStatistic(format!("every draw of row {row} has an empty mask stratum")));
        }
        Ok(out)
    }
}

pub fn compute_statistics(tensor: &SupersampleLossTensor, config: &StatisticsConfig) -> Result<SupersampleStatistics> {
    config.validate()?;
    let quantizer = match config.quantizer {
        Some(q) => q,
        None => tensor.default_quantizer()?,
    };
    let dg = tensor.delta_and_g();
    let n = tensor.n();
    let mut notes = Vec::new();

    let pooled = if config.modes.contains(&Mode::Pooled) {
        let cells = (0..n)
            .into_par_iter()
            .map(|i| cell_statistics(tensor, &dg, Mode::Pooled, 0, i, &quantizer, config))
            .collect::<Result<Vec<_>>>()?;
        Some(cells)
    } else {
        None
    };

    let disintegrated = if config.modes.contains(&Mode::Disintegrated) {
        let cells: Vec<Result<CellStatistics>> = (0..tensor.k1() * n)
            .into_par_iter()
            .map(|j| cell_statistics(tensor, &dg, Mode::Disintegrated, j / n, j % n, &quantizer, config))
            .collect();
        let mut out = Vec::with_capacity(cells.len());
        let mut skipped = 0;
        for cell in cells {
            match (cell, config.empty_stratum) {
                (Ok(c), _) => out.push(Some(c)),
                (Err(Error::EmptyStratum { .. }), EmptyStratumPolicy::Skip) => {
                    skipped += 1;
                    out.push(None);
                }
                (Err(e), _) => return Err(e),
            }
        }
        if skipped > 0 {
            notes.push(format!("{skipped} of {} disintegrated cells skipped for an empty mask stratum", out.len()));
        }
        Some(out)
    } else {
        None
    };

    Ok(SupersampleStatistics {
        k1: tensor.k1(),
        k2: tensor.k2(),
        n,
        loss_kind: tensor.loss_kind(),
        declared_dl_bound: tensor.declared_dl_bound(),
        quantizer,
        config: config.clone(),
        gen_error: tensor.empirical_gen_error(),
        min_g: dg.g.iter().copied().fold(f64::INFINITY, f64::min),
        max_abs_dl: dg.dl.iter().fold(0.0, |a, v| a.max(v.abs())),
        pooled,
        disintegrated,
        notes,
    })
}

fn cell_statistics(
    tensor: &SupersampleLossTensor,
    dg: &DeltaG,
    mode: Mode,
    draw: usize,
    row: usize,
    quantizer: &Quantizer,
    config: &StatisticsConfig,
) -> Result<CellStatistics> {
    let joint = cell_joint(tensor, dg, mode, draw, row, quantizer)?;
    let idx = dg.cell_indices(mode, draw, row);
    let k = idx.len() as f64;
    let mean = |f: &dyn Fn(usize) -> f64| idx.iter().map(|&j| f(j)).sum::<f64>() / k;

    let train_loss = |j: usize| {
        let (d, m, i) = (j / (dg.n * dg.k2), (j / dg.n) % dg.k2, j % dg.n);
        let pair = tensor.losses(d, m, i);
        pair[usize::from(tensor.mask(d, m, i))]
    };
    // Shifted by the first sample so constant losses give exactly zero.
    let shift = train_loss(idx[0]);
    let lplus_mean = mean(&|j| train_loss(j) - shift);
    let var_lplus = mean(&|j| (train_loss(j) - shift - lplus_mean).powi(2));

    let lp_norms = config.p_list.iter().map(|&p| (p, mean(&|j| dg.dl[j].abs().powf(p)).powf(1.0 / p))).collect();
    let tail_prob = config.c_grid.iter().map(|&c| (c, mean(&|j| f64::from(u8::from(dg.dl[j].abs() > c))))).collect();
    let inside = |c: f64, j: usize| dg.dl[j].abs() <= c;
    let trunc_dl2 =
        config.c_grid.iter().map(|&c| (c, mean(&|j| if inside(c, j) { dg.dl[j] * dg.dl[j] } else { 0.0 }))).collect();
    let trunc_g = config.c_grid.iter().map(|&c| (c, mean(&|j| if inside(c, j) { dg.g[j] } else { 0.0 }))).collect();
    let finfo = config.kinds.iter().map(|&kind| (kind, f_information(&joint, kind))).collect();

    Ok(CellStatistics {
        samples: idx.len(),
        e_g: mean(&|j| dg.g[j]),
        e_dl2: mean(&|j| dg.dl[j] * dg.dl[j]),
        var_lplus,
        tv_term: tv_term(&joint),
        max_abs_dl: idx.iter().fold(0.0, |a, &j| a.max(dg.dl[j].abs())),
        min_g: idx.iter().fold(f64::INFINITY, |a, &j| a.min(dg.g[j])),
        lp_norms,
        tail_prob,
        trunc_dl2,
        trunc_g,
        finfo,
    })
}
