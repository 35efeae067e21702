use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{frontier_of, mean, ModelKey, ParetoFrontier};
use crate::math;
use crate::runs::{LossField, RunRecord};
use crate::scalefit::CurvePoint;
use crate::{Error, Result};

/// One line of a tandem view, on the compute axis. `key` is the model size
/// `P_total` for lines over data, or the data size for lines over models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemLine {
    pub key: u64,
    pub points: Vec<CurvePoint>,
}

/// A smaller and a larger model compared at (nearly) the same compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemObservation {
    pub p_small: u64,
    pub p_large: u64,
    pub d_small_model: u64,
    pub d_large_model: u64,
    pub c_small_model: f64,
    pub c_large_model: f64,
    pub y_small_model: f64,
    pub y_large_model: f64,
    /// The smaller model, trained on more data, has lower or equal loss.
    pub larger_data_better: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TandemViews {
    /// One line per model size, varying data.
    pub compute_data_view: Vec<TandemLine>,
    /// One line per data size, varying model.
    pub compute_param_view: Vec<TandemLine>,
    pub frontier: ParetoFrontier,
    pub observations: Vec<TandemObservation>,
    pub larger_data_better: usize,
    pub larger_model_better: usize,
}

/// Compute budgets within this factor of each other count as equal.
const BUDGET_RATIO: f64 = core::f64::consts::SQRT_2;

struct Run {
    p: u64,
    d: u64,
    c: f64,
    y: f64,
}

fn lines(runs: &[Run], key: impl Fn(&Run) -> u64) -> Vec<TandemLine> {
    let mut groups: BTreeMap<u64, Vec<CurvePoint>> = BTreeMap::new();
    for r in runs {
        groups.entry(key(r)).or_default().push(CurvePoint { x: r.c, y: r.y });
    }
    groups
        .into_iter()
        .map(|(key, mut points)| {
            points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
            TandemLine { key, points }
        })
        .collect()
}

fn flatten(view: &[TandemLine]) -> Vec<CurvePoint> {
    view.iter().flat_map(|l| l.points.iter().copied()).collect()
}

/// Groups seed-averaged runs by model size and by data size on the compute
/// axis and checks that both groupings share one frontier.
pub fn tandem_views(records: &[RunRecord], field: LossField) -> Result<TandemViews> {
    let mut groups: BTreeMap<(ModelKey, u64), (u64, f64, Vec<f64>)> = BTreeMap::new();
    for r in super::ok_records(records, field) {
        groups
            .entry((ModelKey::of(r), r.data_size))
            .or_insert_with(|| (r.p_total, r.compute as f64, Vec::new()))
            .2
            .push(r.y(field).unwrap_or_default());
    }
    let runs: Vec<Run> = groups.into_iter().map(|((_, d), (p, c, mut ys))| Run { p, d, c, y: mean(&mut ys) }).collect();

    let mut ps: Vec<u64> = runs.iter().map(|r| r.p).collect();
    let mut ds: Vec<u64> = runs.iter().map(|r| r.d).collect();
    ps.sort_unstable();
    ps.dedup();
    ds.sort_unstable();
    ds.dedup();
    if ps.len() < 2 || ds.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "tandem views need at least 2 model sizes and 2 data sizes, got {} and {}",
            ps.len(),
            ds.len()
        )));
    }

    let compute_data_view = lines(&runs, |r| r.p);
    let compute_param_view = lines(&runs, |r| r.d);
    let frontier = frontier_of(&flatten(&compute_data_view));
    if frontier_of(&flatten(&compute_param_view)) != frontier {
        return Err(Error::Numerical("tandem groupings produced different frontiers".into()));
    }

    let mut observations = Vec::new();
    for pair in ps.windows(2) {
        let small: Vec<&Run> = runs.iter().filter(|r| r.p == pair[0]).collect();
        for large in runs.iter().filter(|r| r.p == pair[1]) {
            let nearest = small
                .iter()
                .map(|s| (math::ln(s.c / large.c).abs(), *s))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(b.1.d.cmp(&a.1.d)));
            if let Some((dist, s)) = nearest {
                if dist <= math::ln(BUDGET_RATIO) * (1.0 + 1e-12) {
                    observations.push(TandemObservation {
                        p_small: s.p,
                        p_large: large.p,
                        d_small_model: s.d,
                        d_large_model: large.d,
                        c_small_model: s.c,
                        c_large_model: large.c,
                        y_small_model: s.y,
                        y_large_model: large.y,
                        larger_data_better: s.y <= large.y,
                    });
                }
            }
        }
    }
    let larger_data_better = observations.iter().filter(|o| o.larger_data_better).count();
    let larger_model_better = observations.len() - larger_data_better;
    Ok(TandemViews {
        compute_data_view,
        compute_param_view,
        frontier,
        observations,
        larger_data_better,
        larger_model_better,
    })
}
