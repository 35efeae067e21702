use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{frontier_of, mean_curve, mean_points, pick_data_model};
use crate::dlrm::Scheme;
use crate::runs::{Axis, LossField, RunRecord};
use crate::scalefit::{fit_power_law, phase_of, CurvePoint, Phase, PowerLawFit};

/// Absolute difference in β below which two schemes count as similar.
pub const DEFAULT_MARGIN: f64 = 0.02;

/// Points of one scheme's scaling curve on one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCurve {
    pub scheme: Scheme,
    pub axis: Axis,
    pub points: Vec<CurvePoint>,
}

/// Extracts the curve of `scheme` on `axis` from a mixed record set.
///
/// Only records at the unscaled row count (`vsf = 1`) take part.
/// - `D`: the scheme's model trained on the most data sizes.
/// - `P`: every model at the largest data size.
/// - `C`: the Pareto frontier of all (model, data size) points.
pub fn scheme_curve(records: &[RunRecord], scheme: Scheme, axis: Axis, field: LossField) -> SchemeCurve {
    let own: Vec<&RunRecord> =
        records.iter().filter(|r| r.is_ok() && r.scheme == scheme && r.vsf == 1.0 && r.y(field).is_some()).collect();
    let points = match axis {
        Axis::Data => mean_curve(pick_data_model(own.iter().copied()).into_iter(), axis, field),
        Axis::Params => {
            let d_max = own.iter().map(|r| r.data_size).max().unwrap_or(0);
            mean_curve(own.iter().copied().filter(|r| r.data_size == d_max), axis, field)
        }
        Axis::Compute => frontier_of(&mean_points(own.iter().copied(), axis, field)).points,
    };
    SchemeCurve { scheme, axis, points }
}

/// Outcome of comparing the row scheme against the column scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Better,
    Worse,
    Similar,
    Unavailable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Better => "better",
            Verdict::Worse => "worse",
            Verdict::Similar => "similar",
            Verdict::Unavailable => "unavailable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub scheme: Scheme,
    pub axis: Axis,
    pub points: Vec<CurvePoint>,
    pub fit: Option<PowerLawFit>,
    /// Phase at the largest observed x.
    pub phase: Option<Phase>,
    /// Why the fit is missing.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub axis: Axis,
    pub row: Scheme,
    pub col: Scheme,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeComparison {
    pub margin: f64,
    pub cells: Vec<ComparisonCell>,
    /// Per axis, the schemes with a fit ordered by β descending.
    pub ordering: Vec<(Axis, Vec<Scheme>)>,
    pub matrix: Vec<MatrixEntry>,
}

impl SchemeComparison {
    pub fn cell(&self, scheme: Scheme, axis: Axis) -> Option<&ComparisonCell> {
        self.cells.iter().find(|c| c.scheme == scheme && c.axis == axis)
    }

    pub fn verdict(&self, axis: Axis, row: Scheme, col: Scheme) -> Option<Verdict> {
        self.matrix.iter().find(|e| e.axis == axis && e.row == row && e.col == col).map(|e| e.verdict)
    }
}

/// Fits every curve and compares exponents per axis. A steeper curve
/// (larger β) is better; differences under `margin` are similar.
pub fn compare_curves(curves: &[SchemeCurve], margin: f64, threshold: f64) -> SchemeComparison {
    let cells: Vec<ComparisonCell> = curves
        .iter()
        .map(|c| {
            let (fit, error) = match fit_power_law(&c.points) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let phase = fit.map(|f| phase_of(&f, f.x_max, threshold));
            ComparisonCell { scheme: c.scheme, axis: c.axis, points: c.points.clone(), fit, phase, error }
        })
        .collect();

    let mut ordering = Vec::new();
    let mut matrix = Vec::new();
    for axis in Axis::ALL {
        let row: Vec<&ComparisonCell> = cells.iter().filter(|c| c.axis == axis).collect();
        if row.is_empty() {
            continue;
        }
        let mut fitted: Vec<(Scheme, f64)> = row.iter().filter_map(|c| c.fit.map(|f| (c.scheme, f.beta))).collect();
        fitted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ordering.push((axis, fitted.into_iter().map(|(s, _)| s).collect()));
        for a in &row {
            for b in &row {
                if a.scheme == b.scheme {
                    continue;
                }
                let verdict = match (a.fit, b.fit) {
                    (Some(fa), Some(fb)) => {
                        let diff = fa.beta - fb.beta;
                        if diff.abs() < margin {
                            Verdict::Similar
                        } else if diff > 0.0 {
                            Verdict::Better
                        } else {
                            Verdict::Worse
                        }
                    }
                    _ => Verdict::Unavailable,
                };
                matrix.push(MatrixEntry { axis, row: a.scheme, col: b.scheme, verdict });
            }
        }
    }
    SchemeComparison { margin, cells, ordering, matrix }
}

/// Curves for every scheme present in `records` on every axis, compared.
pub fn scheme_comparison(records: &[RunRecord], field: LossField, margin: f64, threshold: f64) -> SchemeComparison {
    let mut curves = Vec::new();
    for scheme in Scheme::ALL {
        if !records.iter().any(|r| r.is_ok() && r.scheme == scheme && r.vsf == 1.0) {
            continue;
        }
        for axis in Axis::ALL {
            curves.push(scheme_curve(records, scheme, axis, field));
        }
    }
    compare_curves(&curves, margin, threshold)
}
