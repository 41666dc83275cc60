//! Supersample loss tensors: recorded losses of a trained model on both
//! columns of each supersample row, under many supersample and mask draws.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::distributions::{JointLossMaskDistribution, Quantizer, ZERO_ONE_TOLERANCE};
use crate::divergences::{f_information, DivergenceKind};
use crate::error::{Error, Result};

pub const TENSOR_VERSION: u64 = 1;

/// Below this many samples in a mask stratum the plug-in estimate is noisy.
pub const SMALL_STRATUM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    BoundedUnit,
    General,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::BoundedUnit => "bounded_unit",
            LossKind::General => "general",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero_one" => Ok(LossKind::ZeroOne),
            "bounded_unit" => Ok(LossKind::BoundedUnit),
            "general" => Ok(LossKind::General),
            _ => Err(Error::schema("loss_kind", format!("unknown loss kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One joint per row from all `k1·k2` samples.
    Pooled,
    /// One joint per `(draw, row)` cell from the `k2` mask samples.
    Disintegrated,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Pooled => "pooled",
            Mode::Disintegrated => "disintegrated",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Mode::Pooled),
            "disintegrated" => Ok(Mode::Disintegrated),
            _ => Err(Error::InvalidKind(format!("unknown mode `{s}`"))),
        }
    }
}

/// Losses `[k1][k2][n][2]` and masks `[k1][k2][n]`, stored flat in
/// draw-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct SupersampleLossTensor {
    k1: usize,
    k2: usize,
    n: usize,
    losses: Vec<[f64; 2]>,
    masks: Vec<u8>,
    loss_kind: LossKind,
    loss_range: Option<[f64; 2]>,
}

impl SupersampleLossTensor {
    pub fn new(
        k1: usize,
        k2: usize,
        n: usize,
        losses: Vec<[f64; 2]>,
        masks: Vec<u8>,
        loss_kind: LossKind,
        loss_range: Option<[f64; 2]>,
    ) -> Result<Self> {
        for (field, v) in [("k1", k1), ("k2", k2), ("n", n)] {
            if v == 0 {
                return Err(Error::schema(field, "must be a positive integer"));
            }
        }
        let len = k1 * k2 * n;
        if losses.len() != len {
            return Err(Error::schema("losses", format!("expected {len} rows, found {}", losses.len())));
        }
        if masks.len() != len {
            return Err(Error::schema("masks", format!("expected {len} entries, found {}", masks.len())));
        }
        let t = SupersampleLossTensor { k1, k2, n, losses, masks, loss_kind, loss_range };
        t.validate()?;
        Ok(t)
    }

    fn path(&self, flat: usize) -> String {
        let i = flat % self.n;
        let m = (flat / self.n) % self.k2;
        let d = flat / (self.n * self.k2);
        format!("[{d}][{m}][{i}]")
    }

    fn validate(&self) -> Result<()> {
        if let Some([lo, hi]) = self.loss_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::schema("loss_range", "must be finite with lo < hi"));
            }
        }
        for (flat, pair) in self.losses.iter().enumerate() {
            for (c, &v) in pair.iter().enumerate() {
                let field = || format!("losses{}[{c}]", self.path(flat));
                if !v.is_finite() {
                    return Err(Error::schema(field(), format!("non-finite loss {v}")));
                }
                if v < 0.0 {
                    return Err(Error::schema(field(), format!("negative loss {v}")));
                }
                match self.loss_kind {
                    LossKind::ZeroOne if v.abs() > ZERO_ONE_TOLERANCE && (v - 1.0).abs() > ZERO_ONE_TOLERANCE => {
                        return Err(Error::schema(field(), format!("zero_one loss {v} not in {{0, 1}}")));
                    }
                    LossKind::BoundedUnit if v > 1.0 => {
                        return Err(Error::schema(field(), format!("bounded_unit loss {v} exceeds 1")));
                    }
                    _ => {}
                }
                if let Some([lo, hi]) = self.loss_range {
                    if v < lo || v > hi {
                        return Err(Error::schema(field(), format!("loss {v} outside loss_range [{lo}, {hi}]")));
                    }
                }
            }
        }
        if let Some(flat) = self.masks.iter().position(|&m| m > 1) {
            return Err(Error::schema(
                format!("masks{}", self.path(flat)),
                format!("mask value {} not in {{0, 1}}", self.masks[flat]),
            ));
        }
        Ok(())
    }

    pub fn k1(&self) -> usize {
        self.k1
    }

    pub fn k2(&self) -> usize {
        self.k2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn loss_kind(&self) -> LossKind {
        self.loss_kind
    }

    pub fn loss_range(&self) -> Option<[f64; 2]> {
        self.loss_range
    }

    fn index(&self, draw: usize, mask: usize, row: usize) -> usize {
        (draw * self.k2 + mask) * self.n + row
    }

    pub fn losses(&self, draw: usize, mask: usize, row: usize) -> [f64; 2] {
        self.losses[self.index(draw, mask, row)]
    }

    pub fn mask(&self, draw: usize, mask: usize, row: usize) -> u8 {
        self.masks[self.index(draw, mask, row)]
    }

    /// A bound on `|ΔL|` implied by the declared loss kind or range.
    pub fn declared_dl_bound(&self) -> Option<f64> {
        match (self.loss_kind, self.loss_range) {
            (LossKind::ZeroOne | LossKind::BoundedUnit, _) => Some(1.0),
            (LossKind::General, Some([lo, hi])) => Some(hi - lo),
            (LossKind::General, None) => None,
        }
    }

    /// `ΔL = L₁ - L₀` and `G = (-1)^U ΔL` for every entry.
    pub fn delta_and_g(&self) -> DeltaG {
        let mut dl = Vec::with_capacity(self.losses.len());
        let mut g = Vec::with_capacity(self.losses.len());
        for (pair, &u) in self.losses.iter().zip(&self.masks) {
            let d = pair[1] - pair[0];
            dl.push(d);
            g.push(if u == 0 { d } else { -d });
        }
        DeltaG { k1: self.k1, k2: self.k2, n: self.n, dl, g }
    }

    /// Mean of the per-replicate averages `(1/n) Σ G_i` and its standard
    /// error over the `k1·k2` replicates.
    pub fn empirical_gen_error(&self) -> GenError {
        let dg = self.delta_and_g();
        let reps: Vec<f64> = dg.g.chunks(self.n).map(|r| r.iter().sum::<f64>() / self.n as f64).collect();
        GenError::from_replicates(&reps)
    }

    /// Exact zero-one quantization when every `ΔL` lies in `{-1, 0, 1}`,
    /// otherwise uniform bins over `[-b, b]` for the declared bound `b`, or
    /// over the observed range.
    pub fn default_quantizer(&self) -> Result<Quantizer> {
        let dl = self.delta_and_g().dl;
        let zero_one = dl.iter().all(|&v| [-1.0, 0.0, 1.0].iter().any(|t| (v - t).abs() <= ZERO_ONE_TOLERANCE));
        if zero_one {
            return Ok(Quantizer::ExactZeroOne);
        }
        match self.declared_dl_bound() {
            Some(b) => Quantizer::uniform_bins(crate::distributions::DEFAULT_BIN_COUNT, -b, b),
            None => Quantizer::for_observed(&dl),
        }
    }

    pub fn to_json_value(&self) -> Value {
        let mut losses = Vec::with_capacity(self.k1);
        let mut masks = Vec::with_capacity(self.k1);
        for d in 0..self.k1 {
            let mut ld = Vec::with_capacity(self.k2);
            let mut md = Vec::with_capacity(self.k2);
            for m in 0..self.k2 {
                let start = self.index(d, m, 0);
                let slice = start..start + self.n;
                ld.push(self.losses[slice.clone()].iter().map(|p| vec![p[0], p[1]]).collect::<Vec<_>>());
                md.push(self.masks[slice].to_vec());
            }
            losses.push(ld);
            masks.push(md);
        }
        let mut obj = serde_json::Map::new();
        obj.insert("version".into(), TENSOR_VERSION.into());
        obj.insert("n".into(), self.n.into());
        obj.insert("k1".into(), self.k1.into());
        obj.insert("k2".into(), self.k2.into());
        obj.insert("loss_kind".into(), self.loss_kind.to_string().into());
        if let Some(r) = self.loss_range {
            obj.insert("loss_range".into(), serde_json::json!(r));
        }
        obj.insert("losses".into(), serde_json::json!(losses));
        obj.insert("masks".into(), serde_json::json!(masks));
        Value::Object(obj)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("tensor serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::schema("<document>", format!("invalid JSON: {e}")))?;
        Self::from_json_value(&value)
    }

    pub fn from_json_value(value: &Value) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| Error::schema("<document>", "expected an object"))?;
        let field = |name: &str| obj.get(name).ok_or_else(|| Error::schema(name, "missing field"));
        let uint = |name: &str| -> Result<usize> {
            field(name)?
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::schema(name, "expected a non-negative integer"))
        };
        let version = uint("version")?;
        if version as u64 != TENSOR_VERSION {
            return Err(Error::schema("version", format!("unsupported version {version}")));
        }
        let n = uint("n")?;
        let k1 = uint("k1")?;
        let k2 = uint("k2")?;
        let loss_kind: LossKind =
            field("loss_kind")?.as_str().ok_or_else(|| Error::schema("loss_kind", "expected a string"))?.parse()?;
        let loss_range = match obj.get("loss_range") {
            None | Some(Value::Null) => None,
            Some(v) => {
                let arr = v
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::schema("loss_range", "expected [lo, hi]"))?;
                let lo = arr[0].as_f64().ok_or_else(|| Error::schema("loss_range[0]", "expected a number"))?;
                let hi = arr[1].as_f64().ok_or_else(|| Error::schema("loss_range[1]", "expected a number"))?;
                Some([lo, hi])
            }
        };
        let mut losses = Vec::with_capacity(k1 * k2 * n);
        let mut masks = Vec::with_capacity(k1 * k2 * n);
        let lv = nested(field("losses")?, "losses", &[k1, k2, n])?;
        for (path, cell) in lv {
            let pair = cell
                .as_array()
                .filter(|a| a.len() == 2)
                .ok_or_else(|| Error::schema(path.clone(), "expected a pair [L0, L1]"))?;
            let mut out = [0.0; 2];
            for c in 0..2 {
                out[c] = pair[c].as_f64().ok_or_else(|| Error::schema(format!("{path}[{c}]"), "expected a number"))?;
            }
            losses.push(out);
        }
        let mv = nested(field("masks")?, "masks", &[k1, k2, n])?;
        for (path, cell) in mv {
            let m = cell
                .as_u64()
                .filter(|&m| m <= 1)
                .ok_or_else(|| Error::schema(path, format!("mask value {cell} not in {{0, 1}}")))?;
            masks.push(m as u8);
        }
        Self::new(k1, k2, n, losses, masks, loss_kind, loss_range)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::schema("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json_string())
    }
}

/// Walks a nested JSON array with the given shape, yielding leaves in
/// row-major order together with their index path.
fn nested<'a>(value: &'a Value, name: &str, shape: &[usize]) -> Result<Vec<(String, &'a Value)>> {
    let mut out = Vec::new();
    walk(value, name.to_string(), shape, &mut out)?;
    Ok(out)
}

fn walk<'a>(value: &'a Value, path: String, shape: &[usize], out: &mut Vec<(String, &'a Value)>) -> Result<()> {
    let Some((&len, rest)) = shape.split_first() else {
        out.push((path, value));
        return Ok(());
    };
    let arr = value.as_array().ok_or_else(|| Error::schema(path.clone(), "expected an array"))?;
    if arr.len() != len {
        return Err(Error::schema(path, format!("expected length {len}, found {}", arr.len())));
    }
    for (i, v) in arr.iter().enumerate() {
        walk(v, format!("{path}[{i}]"), rest, out)?;
    }
    Ok(())
}

/// `ΔL` and `G`, flat in the tensor's draw-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaG {
    pub k1: usize,
    pub k2: usize,
    pub n: usize,
    pub dl: Vec<f64>,
    pub g: Vec<f64>,
}

impl DeltaG {
    pub fn index(&self, draw: usize, mask: usize, row: usize) -> usize {
        (draw * self.k2 + mask) * self.n + row
    }

    /// Flat indices of the samples feeding one estimation cell.
    pub fn cell_indices(&self, mode: Mode, draw: usize, row: usize) -> Vec<usize> {
        match mode {
            Mode::Pooled => (0..self.k1)
                .flat_map(|d| (0..self.k2).map(move |m| (d, m)))
                .map(|(d, m)| self.index(d, m, row))
                .collect(),
            Mode::Disintegrated => (0..self.k2).map(|m| self.index(draw, m, row)).collect(),
        }
    }

    /// Number of cells per row: 1 pooled, `k1` disintegrated.
    pub fn draws(&self, mode: Mode) -> usize {
        match mode {
            Mode::Pooled => 1,
            Mode::Disintegrated => self.k1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenError {
    pub mean: f64,
    pub std_err: f64,
}

impl GenError {
    pub fn from_replicates(reps: &[f64]) -> Self {
        let k = reps.len() as f64;
        let mean = reps.iter().sum::<f64>() / k;
        let std_err = if reps.len() < 2 {
            0.0
        } else {
            let var = reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0);
            var.sqrt() / k.sqrt()
        };
        GenError { mean, std_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FInformationEstimate {
    pub kind: DivergenceKind,
    pub mode: Mode,
    /// Rows for pooled mode; `draw·n + row` for disintegrated mode.
    pub values: Vec<f64>,
    pub sample_counts: Vec<usize>,
    pub quantizer: Quantizer,
    /// Cells whose smaller mask stratum has fewer than [`SMALL_STRATUM`] samples.
    pub small_strata: usize,
}

/// Splits the samples of one cell by mask value.
pub fn stratify(tensor: &SupersampleLossTensor, dg: &DeltaG, indices: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut s0 = Vec::new();
    let mut s1 = Vec::new();
    for &j in indices {
        if tensor.masks[j] == 0 {
            s0.push(dg.dl[j]);
        } else {
            s1.push(dg.dl[j]);
        }
    }
    (s0, s1)
}

/// The plug-in joint of one cell. Pooled cells with a missing stratum fall
/// back to the empirical mask marginal; disintegrated cells are strict.
pub fn cell_joint(
    tensor: &SupersampleLossTensor,
    dg: &DeltaG,
    mode: Mode,
    draw: usize,
    row: usize,
    quantizer: &Quantizer,
) -> Result<JointLossMaskDistribution> {
    let (s0, s1) = stratify(tensor, dg, &dg.cell_indices(mode, draw, row));
    match mode {
        Mode::Pooled => JointLossMaskDistribution::from_samples_allowing_empty_stratum(&s0, &s1, quantizer),
        Mode::Disintegrated => {
            if s0.is_empty() || s1.is_empty() {
                return Err(Error::EmptyStratum { draw, row, stratum: if s0.is_empty() { 0 } else { 1 } });
            }
            JointLossMaskDistribution::from_stratified_samples(&s0, &s1, quantizer, true)
        }
    }
}

pub fn estimate_f_information(
    tensor: &SupersampleLossTensor,
    kind: DivergenceKind,
    mode: Mode,
    quantizer: &Quantizer,
) -> Result<FInformationEstimate> {
    kind.validate()?;
    quantizer.validate()?;
    let dg = tensor.delta_and_g();
    let draws = dg.draws(mode);
    let mut values = Vec::with_capacity(draws * tensor.n);
    let mut sample_counts = Vec::with_capacity(draws * tensor.n);
    let mut small_strata = 0;
    for d in 0..draws {
        for i in 0..tensor.n {
            let idx = dg.cell_indices(mode, d, i);
            let zeros = idx.iter().filter(|&&j| tensor.masks[j] == 0).count();
            if zeros.min(idx.len() - zeros) < SMALL_STRATUM {
                small_strata += 1;
            }
            let joint = cell_joint(tensor, &dg, mode, d, i, quantizer)?;
            values.push(f_information(&joint, kind));
            sample_counts.push(idx.len());
        }
    }
    if small_strata > 0 {
        log::warn!("{small_strata} {mode} cells have fewer than {SMALL_STRATUM} samples in a mask stratum");
    }
    Ok(FInformationEstimate { kind, mode, values, sample_counts, quantizer: *quantizer, small_strata })
}
