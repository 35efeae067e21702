//! Cross-run analyses over [`RunRecord`]s: Pareto frontiers, tandem compute
//! views, scheme comparison, best-dimension tables and train/test gaps.
//!
//! Repeated seeds are always averaged first: every curve point is the mean
//! loss of the ok records sharing a model configuration and data size.

mod compare;
mod tandem;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use compare::{
    compare_curves, scheme_comparison, scheme_curve, ComparisonCell, MatrixEntry, SchemeComparison, SchemeCurve,
    Verdict, DEFAULT_MARGIN,
};
pub use tandem::{tandem_views, TandemLine, TandemObservation, TandemViews};

use crate::dlrm::Scheme;
use crate::runs::{Axis, LossField, RunRecord};
use crate::scalefit::{detect_knee, fit_power_law, CurvePoint, PowerLawFit};
use crate::{Error, Result};

/// Non-dominated points under (minimize x, minimize y), sorted by x
/// ascending with y strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFrontier {
    pub points: Vec<CurvePoint>,
}

/// Frontier of a plain point set. Exact duplicates collapse to one point.
pub fn frontier_of(points: &[CurvePoint]) -> ParetoFrontier {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut out: Vec<CurvePoint> = Vec::new();
    for p in sorted {
        if out.last().is_none_or(|last| p.y < last.y) {
            out.push(p);
        }
    }
    ParetoFrontier { points: out }
}

/// Frontier of the seed-averaged ok records on `axis` against `field`.
pub fn pareto_frontier(records: &[RunRecord], axis: Axis, field: LossField) -> Result<ParetoFrontier> {
    let ok: Vec<&RunRecord> = ok_records(records, field).collect();
    if ok.is_empty() {
        return Err(Error::Input("no ok records".into()));
    }
    Ok(frontier_of(&mean_points(ok.iter().copied(), axis, field)))
}

pub(crate) fn ok_records(records: &[RunRecord], field: LossField) -> impl Iterator<Item = &RunRecord> {
    records.iter().filter(move |r| r.is_ok() && r.y(field).is_some())
}

/// Identifies one trained model shape, independent of data size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct ModelKey {
    scheme: Scheme,
    factor: u64,
    vsf: u64,
}

impl ModelKey {
    pub fn of(r: &RunRecord) -> Self {
        ModelKey { scheme: r.scheme, factor: r.factor.to_bits(), vsf: r.vsf.to_bits() }
    }

    fn factor(&self) -> f64 {
        f64::from_bits(self.factor)
    }
}

/// Mean of `ys` independent of their order.
pub(crate) fn mean(ys: &mut [f64]) -> f64 {
    ys.sort_by(f64::total_cmp);
    ys.iter().sum::<f64>() / ys.len() as f64
}

/// Averages over seeds: one point per (model, data size), placed at the
/// model's resource value on `axis`. Sorted by (x, y).
pub(crate) fn mean_points<'a>(
    records: impl Iterator<Item = &'a RunRecord>,
    axis: Axis,
    field: LossField,
) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<(ModelKey, u64), (f64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let (true, Some(y)) = (r.is_ok(), r.y(field)) {
            groups.entry((ModelKey::of(r), r.data_size)).or_insert_with(|| (r.x(axis), Vec::new())).1.push(y);
        }
    }
    let mut out: Vec<CurvePoint> = groups.into_values().map(|(x, mut ys)| CurvePoint { x, y: mean(&mut ys) }).collect();
    out.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    out
}

/// Like [`mean_points`] but merges every record with the same x, so a curve
/// has one point per resource value.
pub(crate) fn mean_curve<'a>(
    records: impl Iterator<Item = &'a RunRecord>,
    axis: Axis,
    field: LossField,
) -> Vec<CurvePoint> {
    let mut groups: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let (true, Some(y)) = (r.is_ok(), r.y(field)) {
            groups.entry(r.x(axis).to_bits()).or_default().push(y);
        }
    }
    let mut out: Vec<CurvePoint> =
        groups.into_iter().map(|(x, mut ys)| CurvePoint { x: f64::from_bits(x), y: mean(&mut ys) }).collect();
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    out
}

/// The records of the single model trained on the most distinct data sizes
/// (ties go to the larger factor): the data-scaling curve of a record set.
pub fn data_curve_records(records: &[RunRecord]) -> Vec<&RunRecord> {
    pick_data_model(records.iter().filter(|r| r.is_ok()))
}

pub(crate) fn pick_data_model<'a>(records: impl Iterator<Item = &'a RunRecord> + Clone) -> Vec<&'a RunRecord> {
    let mut sizes: BTreeMap<ModelKey, Vec<u64>> = BTreeMap::new();
    for r in records.clone() {
        sizes.entry(ModelKey::of(r)).or_default().push(r.data_size);
    }
    let best = sizes
        .into_iter()
        .map(|(k, mut d)| {
            d.sort_unstable();
            d.dedup();
            (k, d.len())
        })
        .max_by(|(ka, na), (kb, nb)| na.cmp(nb).then(ka.factor().total_cmp(&kb.factor())).then(kb.cmp(ka)));
    match best {
        Some((key, _)) => records.filter(|r| ModelKey::of(r) == key).collect(),
        None => Vec::new(),
    }
}

/// Seed-averaged loss against data size for the data-scaling model of
/// `records` (see [`data_curve_records`]).
pub fn data_scaling_curve(records: &[RunRecord], field: LossField) -> Vec<CurvePoint> {
    mean_curve(data_curve_records(records).into_iter(), Axis::Data, field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTestGap {
    pub fit_train: PowerLawFit,
    pub fit_test: PowerLawFit,
    /// `β_train − β_test`.
    pub beta_gap: f64,
}

/// Fits train and test loss against data size on the same grid.
pub fn train_test_gap(records: &[RunRecord]) -> Result<TrainTestGap> {
    let chosen = data_curve_records(records);
    let both: Vec<&RunRecord> = chosen.into_iter().filter(|r| r.ne_train.is_some() && r.ne_test.is_some()).collect();
    let train = mean_curve(both.iter().copied(), Axis::Data, LossField::NeTrain);
    let test = mean_curve(both.iter().copied(), Axis::Data, LossField::NeTest);
    if train.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "train/test gap needs at least 4 data sizes with both losses, got {}",
            train.len()
        )));
    }
    let fit_train = fit_power_law(&train)?;
    let fit_test = fit_power_law(&test)?;
    Ok(TrainTestGap { fit_train, fit_test, beta_gap: fit_train.beta - fit_test.beta })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestDimRow {
    pub vsf: f64,
    /// `(dim, seed-averaged loss)` sorted by dim.
    pub losses: Vec<(u32, f64)>,
    pub best_dim: u32,
    /// Kneedle knee of loss against dim; `None` with fewer than 4 dims or
    /// when the curve never decreases.
    pub knee_dim: Option<u32>,
}

/// For each vertical scaling factor of a horizontal × vertical cross grid,
/// the loss-minimizing dimension (ties to the smaller dim) and the knee.
pub fn best_dim_table(records: &[RunRecord], field: LossField) -> Result<Vec<BestDimRow>> {
    let mut by_vsf: BTreeMap<u64, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    for r in ok_records(records, field).filter(|r| r.scheme == Scheme::Horizontal) {
        let dim = r.factor as u32;
        by_vsf.entry(r.vsf.to_bits()).or_default().entry(dim).or_default().push(r.y(field).unwrap_or_default());
    }
    let mut rows: Vec<BestDimRow> = Vec::with_capacity(by_vsf.len());
    for (vsf_bits, dims) in by_vsf {
        let vsf = f64::from_bits(vsf_bits);
        if dims.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "best-dim table needs at least 3 dims for vsf {vsf}, got {}",
                dims.len()
            )));
        }
        let losses: Vec<(u32, f64)> = dims.into_iter().map(|(d, mut ys)| (d, mean(&mut ys))).collect();
        let mut best = losses[0];
        for &(d, y) in &losses[1..] {
            if y < best.1 {
                best = (d, y);
            }
        }
        let points: Vec<CurvePoint> = losses.iter().map(|&(d, y)| CurvePoint { x: d as f64, y }).collect();
        let knee_dim = if points.len() >= 4 {
            match detect_knee(&points) {
                Ok(x) => Some(x as u32),
                Err(Error::NoKnee) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        rows.push(BestDimRow { vsf, losses, best_dim: best.0, knee_dim });
    }
    rows.sort_by(|a, b| a.vsf.total_cmp(&b.vsf));
    Ok(rows)
}
