//! Runs every analysis over a record set and writes the report bundle.
//!
//! CSV files use LF line endings and 9 significant digits. Output depends
//! only on the records (not their order), so re-emission is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use recscale_core::analysis::{
    best_dim_table, data_scaling_curve, pareto_frontier, scheme_comparison, tandem_views, train_test_gap, BestDimRow,
    SchemeComparison, TandemViews, TrainTestGap,
};
use recscale_core::dlrm::Scheme;
use recscale_core::runs::{Axis, LossField, RunRecord};
use recscale_core::scalefit::{CurvePoint, Phase, PowerLawFit};
use recscale_core::Error;
use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub y: LossField,
    pub margin: f64,
    pub phase_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeFrontier {
    pub scheme: Scheme,
    pub axis: Axis,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapAnalysis {
    pub gap: TrainTestGap,
    pub train: Vec<CurvePoint>,
    pub test: Vec<CurvePoint>,
}

/// Results of the full analysis suite. `Default` is the empty analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct Analyses {
    pub comparison: SchemeComparison,
    pub frontiers: Vec<SchemeFrontier>,
    pub tandem: Vec<(Scheme, TandemViews)>,
    pub best_dim: Vec<BestDimRow>,
    pub gap: Option<GapAnalysis>,
}

impl Default for Analyses {
    fn default() -> Self {
        Analyses {
            comparison: SchemeComparison { margin: 0.0, cells: Vec::new(), ordering: Vec::new(), matrix: Vec::new() },
            frontiers: Vec::new(),
            tandem: Vec::new(),
            best_dim: Vec::new(),
            gap: None,
        }
    }
}

fn sorted(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut out = records.to_vec();
    out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    out
}

fn optional<T>(what: &str, r: recscale_core::Result<T>) -> recscale_core::Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e @ (Error::InsufficientData(_) | Error::NoKnee)) => {
            log::warn!("{what} skipped: {e}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Runs every analysis. Fails only when there is no ok record at all.
pub fn analyze(records: &[RunRecord], opts: &ReportOptions) -> Result<Analyses> {
    let records = sorted(records);
    if !records.iter().any(|r| r.is_ok() && r.y(opts.y).is_some()) {
        return Err(Error::Input("no ok records".into()).into());
    }
    let comparison = scheme_comparison(&records, opts.y, opts.margin, opts.phase_threshold);

    let mut frontiers = Vec::new();
    let mut tandem = Vec::new();
    for scheme in Scheme::ALL {
        let own: Vec<RunRecord> = records.iter().filter(|r| r.scheme == scheme && r.vsf == 1.0).cloned().collect();
        if !own.iter().any(|r| r.is_ok()) {
            continue;
        }
        for axis in Axis::ALL {
            let f = pareto_frontier(&own, axis, opts.y)?;
            frontiers.push(SchemeFrontier { scheme, axis, points: f.points });
        }
        if let Some(v) = optional(&format!("tandem views for {scheme}"), tandem_views(&own, opts.y))? {
            tandem.push((scheme, v));
        }
    }

    let best_dim = if records.iter().any(|r| r.is_ok() && r.scheme == Scheme::Horizontal) {
        optional("best-dim table", best_dim_table(&records, opts.y))?.unwrap_or_default()
    } else {
        Vec::new()
    };

    let data_records: Vec<RunRecord> = if records.iter().any(|r| r.is_ok() && r.scheme == Scheme::None) {
        records.iter().filter(|r| r.scheme == Scheme::None).cloned().collect()
    } else {
        records.iter().filter(|r| r.vsf == 1.0).cloned().collect()
    };
    let gap = optional("train/test gap", train_test_gap(&data_records))?.map(|gap| GapAnalysis {
        gap,
        train: data_scaling_curve(&data_records, LossField::NeTrain),
        test: data_scaling_curve(&data_records, LossField::NeTest),
    });

    Ok(Analyses { comparison, frontiers, tandem, best_dim, gap })
}

/// Formats with 9 significant digits; integral values print as integers.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap_or((&sci, "0"));
    let exp: i32 = exp.parse().unwrap_or(0);
    if (-5..15).contains(&exp) {
        trim_zeros(&format!("{:.*}", (8 - exp) as usize, v)).to_owned()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

fn phase_str(p: Option<Phase>) -> String {
    p.map(|p| p.as_str().to_owned()).unwrap_or_default()
}

struct Csv {
    path: PathBuf,
    out: csv::Writer<Vec<u8>>,
}

impl Csv {
    fn new(path: PathBuf, header: &[&str]) -> Result<Self> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        out.write_record(header).map_err(|e| csv_err(&path, e))?;
        Ok(Csv { path, out })
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        let fields: Vec<String> = fields.into_iter().collect();
        self.out.write_record(&fields).map_err(|e| csv_err(&self.path, e))
    }

    fn finish(self, files: &mut Vec<PathBuf>) -> Result<()> {
        let bytes = self.out.into_inner().map_err(|e| LabError::io(&self.path, e.into_error()))?;
        fs::write(&self.path, bytes).map_err(|e| LabError::io(&self.path, e))?;
        files.push(self.path);
        Ok(())
    }
}

fn csv_err(path: &Path, e: csv::Error) -> LabError {
    LabError::io(path, std::io::Error::other(e))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    scheme: &'a str,
    axis: &'a str,
    alpha: Option<f64>,
    beta: Option<f64>,
    gamma: Option<f64>,
    r_squared: Option<f64>,
    phase: Option<&'a str>,
}

fn curve_rows(csv: &mut Csv, points: &[CurvePoint], fit: Option<&PowerLawFit>) -> Result<()> {
    for p in points {
        csv.row([fmt_num(p.x), fmt_num(p.y), opt_num(fit.map(|f| f.predict(p.x)))])?;
    }
    Ok(())
}

/// Writes the bundle into `out_dir` and returns the files written.
pub fn emit_report(a: &Analyses, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(|e| LabError::io(&curves_dir, e))?;
    let mut files = Vec::new();
    let file = |name: &str| out_dir.join(name);

    // Summary table and per-curve files.
    let mut summary =
        Csv::new(file("summary.csv"), &["scheme", "axis", "alpha", "beta", "gamma", "r_squared", "phase"])?;
    let mut json_rows = Vec::new();
    for cell in &a.comparison.cells {
        let fit = cell.fit.as_ref();
        summary.row([
            cell.scheme.to_string(),
            cell.axis.as_str().to_owned(),
            opt_num(fit.map(|f| f.alpha)),
            opt_num(fit.map(|f| f.beta)),
            opt_num(fit.map(|f| f.gamma)),
            opt_num(fit.map(|f| f.r_squared)),
            phase_str(cell.phase),
        ])?;
        json_rows.push(SummaryRow {
            scheme: cell.scheme.as_str(),
            axis: cell.axis.as_str(),
            alpha: fit.map(|f| f.alpha),
            beta: fit.map(|f| f.beta),
            gamma: fit.map(|f| f.gamma),
            r_squared: fit.map(|f| f.r_squared),
            phase: cell.phase.map(Phase::as_str),
        });
        let name = format!("{}_{}.csv", cell.scheme, cell.axis.as_str());
        let mut curve = Csv::new(curves_dir.join(name), &["x", "y", "fitted_y"])?;
        curve_rows(&mut curve, &cell.points, fit)?;
        curve.finish(&mut files)?;
    }
    summary.finish(&mut files)?;
    let json_path = file("summary.json");
    let mut json = serde_json::to_string_pretty(&json_rows).map_err(|e| LabError::io(&json_path, e.into()))?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| LabError::io(&json_path, e))?;
    files.push(json_path);

    // Scheme comparison.
    let mut matrix = Csv::new(file("comparison.csv"), &["axis", "row", "col", "verdict"])?;
    for e in &a.comparison.matrix {
        matrix.row([
            e.axis.as_str().to_owned(),
            e.row.to_string(),
            e.col.to_string(),
            e.verdict.as_str().to_owned(),
        ])?;
    }
    matrix.finish(&mut files)?;
    let mut ordering = Csv::new(file("ordering.csv"), &["axis", "rank", "scheme", "beta"])?;
    for (axis, schemes) in &a.comparison.ordering {
        for (rank, s) in schemes.iter().enumerate() {
            let beta = a.comparison.cell(*s, *axis).and_then(|c| c.fit).map(|f| f.beta);
            ordering.row([axis.as_str().to_owned(), (rank + 1).to_string(), s.to_string(), opt_num(beta)])?;
        }
    }
    ordering.finish(&mut files)?;

    // Frontiers.
    let mut frontiers = Csv::new(file("frontiers.csv"), &["scheme", "axis", "x", "y"])?;
    for f in &a.frontiers {
        for p in &f.points {
            frontiers.row([f.scheme.to_string(), f.axis.as_str().to_owned(), fmt_num(p.x), fmt_num(p.y)])?;
        }
    }
    frontiers.finish(&mut files)?;

    // Tandem views.
    let mut views = Csv::new(file("tandem_views.csv"), &["scheme", "view", "key", "C", "y"])?;
    let mut tfront = Csv::new(file("tandem_frontier.csv"), &["scheme", "C", "y"])?;
    let mut obs = Csv::new(
        file("tandem_observations.csv"),
        &[
            "scheme",
            "p_small",
            "p_large",
            "d_small_model",
            "d_large_model",
            "c_small_model",
            "c_large_model",
            "y_small_model",
            "y_large_model",
            "larger_data_better",
        ],
    )?;
    let mut counts = Csv::new(file("tandem_counts.csv"), &["scheme", "larger_data_better", "larger_model_better"])?;
    for (scheme, v) in &a.tandem {
        for (view, lines) in [("data", &v.compute_data_view), ("param", &v.compute_param_view)] {
            for line in lines {
                for p in &line.points {
                    views.row([
                        scheme.to_string(),
                        view.to_owned(),
                        line.key.to_string(),
                        fmt_num(p.x),
                        fmt_num(p.y),
                    ])?;
                }
            }
        }
        for p in &v.frontier.points {
            tfront.row([scheme.to_string(), fmt_num(p.x), fmt_num(p.y)])?;
        }
        for o in &v.observations {
            obs.row([
                scheme.to_string(),
                o.p_small.to_string(),
                o.p_large.to_string(),
                o.d_small_model.to_string(),
                o.d_large_model.to_string(),
                fmt_num(o.c_small_model),
                fmt_num(o.c_large_model),
                fmt_num(o.y_small_model),
                fmt_num(o.y_large_model),
                o.larger_data_better.to_string(),
            ])?;
        }
        counts.row([scheme.to_string(), v.larger_data_better.to_string(), v.larger_model_better.to_string()])?;
    }
    views.finish(&mut files)?;
    tfront.finish(&mut files)?;
    obs.finish(&mut files)?;
    counts.finish(&mut files)?;

    // Best embedding dimension per vertical scaling factor.
    let mut best = Csv::new(file("best_dim.csv"), &["vsf", "best_dim", "knee_dim"])?;
    let mut losses = Csv::new(file("best_dim_losses.csv"), &["vsf", "dim", "y"])?;
    for row in &a.best_dim {
        best.row([
            fmt_num(row.vsf),
            row.best_dim.to_string(),
            row.knee_dim.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
        for &(dim, y) in &row.losses {
            losses.row([fmt_num(row.vsf), dim.to_string(), fmt_num(y)])?;
        }
    }
    best.finish(&mut files)?;
    losses.finish(&mut files)?;

    // Train/test exponent gap.
    let mut gap = Csv::new(
        file("train_test_gap.csv"),
        &[
            "alpha_train",
            "beta_train",
            "gamma_train",
            "r2_train",
            "alpha_test",
            "beta_test",
            "gamma_test",
            "r2_test",
            "beta_gap",
        ],
    )?;
    let mut gap_curve =
        Csv::new(curves_dir.join("train_test_D.csv"), &["x", "ne_train", "ne_test", "fitted_train", "fitted_test"])?;
    if let Some(g) = &a.gap {
        let (tr, te) = (&g.gap.fit_train, &g.gap.fit_test);
        gap.row(
            [tr.alpha, tr.beta, tr.gamma, tr.r_squared, te.alpha, te.beta, te.gamma, te.r_squared, g.gap.beta_gap]
                .map(fmt_num),
        )?;
        for (p, q) in g.train.iter().zip(&g.test) {
            gap_curve.row([
                fmt_num(p.x),
                fmt_num(p.y),
                fmt_num(q.y),
                fmt_num(tr.predict(p.x)),
                fmt_num(te.predict(q.x)),
            ])?;
        }
    }
    gap.finish(&mut files)?;
    gap_curve.finish(&mut files)?;

    Ok(files)
}
