use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use recscale_core::analysis::pareto_frontier;
use recscale_core::dlrm::Scheme;
use recscale_core::runs::{Axis, LossField, RunRecord};
use recscale_core::scalefit::{fit_power_law, phase_of, CurvePoint, DEFAULT_PHASE_THRESHOLD};
use recscale_core::synthgen::{build_teacher, Split};
use recscale_core::Error;

use recscale_lab::config::{resolve_parallelism, resolve_store, ExperimentConfig};
use recscale_lab::error::{LabError, Result};
use recscale_lab::report::{analyze, emit_report, fmt_num, ReportOptions};
use recscale_lab::store::{load_records, Filter};
use recscale_lab::sweep::{execute, SweepContext};

#[derive(Parser)]
#[command(name = "recscale", version, about = "Scaling-law experiments on synthetic CTR data")]
struct Cli {
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and list every problem found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic dataset in the binary export format.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the grids of a config and append records to the store.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Grid name or scaling scheme to run (repeatable); all grids when omitted.
        /// A grid whose name matches is preferred over grids using that scheme.
        #[arg(long = "scheme")]
        schemes: Vec<String>,
        #[arg(long)]
        parallelism: Option<usize>,
        /// Continue into a non-empty store, skipping runs it already holds.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        store: Option<PathBuf>,
    },
    /// Fit a power law to one curve.
    Fit {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fit the `x,y` columns of a CSV file instead of a store.
        #[arg(long, conflicts_with_all = ["store", "scheme", "raw"])]
        csv: Option<PathBuf>,
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, default_value = "D")]
        axis: String,
        #[arg(long)]
        y: Option<String>,
        /// Fit every ok record instead of the Pareto frontier.
        #[arg(long)]
        raw: bool,
        /// Write the fitted points as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the full analysis bundle for a store.
    Report {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let loaded = ExperimentConfig::load(path)?;
    for key in &loaded.unknown_keys {
        log::warn!("{}: unknown key `{key}` ignored", path.display());
    }
    Ok(loaded.config)
}

fn load_valid_config(path: &Path) -> Result<ExperimentConfig> {
    let config = load_config(path)?;
    config.validate()?;
    Ok(config)
}

fn validate(config: &Path) -> Result<()> {
    let config = load_valid_config(config)?;
    let runs: usize = config.grid_names().iter().map(|g| config.grid(g).map(|g| g.specs.len())).sum::<Result<_>>()?;
    println!("ok: {} grids, {runs} runs", config.sweep.grids.len());
    Ok(())
}

fn gen(config: &Path, split: SplitArg, seed: u64, n: usize, out: &Path) -> Result<()> {
    let config = load_valid_config(config)?;
    let teacher = build_teacher(&config.schema, &config.teacher)?;
    let split = match split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let samples: Vec<_> = teacher.stream(seed, split).take(n).collect();
    let file = fs::File::create(out).map_err(|e| LabError::io(out, e))?;
    let mut w = BufWriter::new(file);
    recscale_lab::export::write_dataset(&mut w, &config.schema, &samples)
        .and_then(|_| w.flush())
        .map_err(|e| LabError::io(out, e))?;
    println!("wrote {n} samples to {}", out.display());
    Ok(())
}

fn select_grids(config: &ExperimentConfig, wanted: &[String]) -> Result<Vec<String>> {
    if config.sweep.grids.is_empty() {
        return Err(LabError::Usage("the config defines no grids under sweep.grids".into()));
    }
    if wanted.is_empty() {
        return Ok(config.grid_names());
    }
    let mut names = Vec::new();
    for w in wanted {
        let hits: Vec<String> = if config.sweep.grids.contains_key(w) {
            vec![w.clone()]
        } else {
            let scheme: Scheme = w.parse()?;
            config.sweep.grids.iter().filter(|(_, g)| g.scheme == scheme).map(|(n, _)| n.clone()).collect()
        };
        if hits.is_empty() {
            return Err(LabError::Usage(format!("no grid named or using scheme `{w}`")));
        }
        for h in hits {
            if !names.contains(&h) {
                names.push(h);
            }
        }
    }
    Ok(names)
}

fn sweep(
    config_path: &Path,
    schemes: &[String],
    parallelism: Option<usize>,
    resume: bool,
    store: Option<&Path>,
) -> Result<()> {
    let config = load_valid_config(config_path)?;
    let store = resolve_store(store, Some(&config))?;
    let parallelism = resolve_parallelism(parallelism, &config)?;
    let names = select_grids(&config, schemes)?;
    let mut specs = Vec::new();
    for name in &names {
        specs.extend(config.grid(name)?.specs);
    }
    if !resume && store.exists() && !load_records(&store, &Filter::default())?.is_empty() {
        return Err(LabError::Usage(format!(
            "{} already holds records; pass --resume to continue it or choose another store",
            store.display()
        )));
    }

    let base = config.base_model();
    let teacher = build_teacher(&config.schema, &config.teacher)?;
    let ctx = SweepContext {
        base: &base,
        teacher: &teacher,
        optimizer: &config.optimizer,
        train: &config.train,
        record_wall_time: config.sweep.record_wall_time,
    };
    let outcome = execute(&specs, &ctx, parallelism, &store)?;
    let failed = outcome.failed();
    println!(
        "{} runs: {} executed, {} already stored, {failed} failed -> {}",
        specs.len(),
        outcome.executed,
        outcome.skipped,
        store.display()
    );
    if failed > 0 {
        return Err(LabError::RunsFailed { failed, total: specs.len() });
    }
    Ok(())
}

fn read_csv_points(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| LabError::io(path, std::io::Error::other(e)))?;
    let headers = reader.headers().map_err(|e| LabError::io(path, std::io::Error::other(e)))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| LabError::Usage(format!("{}: no `{name}` column", path.display())))
    };
    let (xi, yi) = (col("x")?, col("y")?);
    let mut points = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| LabError::io(path, std::io::Error::other(e)))?;
        let num = |j: usize| {
            row.get(j).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| LabError::Store {
                path: path.to_owned(),
                line: i + 2,
                message: "x and y must be numbers".into(),
            })
        };
        points.push(CurvePoint { x: num(xi)?, y: num(yi)? });
    }
    Ok(points)
}

struct FitArgs<'a> {
    store: Option<&'a Path>,
    config: Option<&'a Path>,
    csv: Option<&'a Path>,
    scheme: Option<&'a str>,
    axis: &'a str,
    y: Option<&'a str>,
    raw: bool,
    out: Option<&'a Path>,
}

fn fit(args: FitArgs<'_>) -> Result<()> {
    let config = args.config.map(load_config).transpose()?;
    let axis = Axis::parse(args.axis)?;
    let field = match args.y {
        Some(s) => LossField::parse(s)?,
        None => config.as_ref().map_or(LossField::NeTest, |c| c.fit.y),
    };
    let threshold = config.as_ref().map_or(DEFAULT_PHASE_THRESHOLD, |c| c.fit.phase_threshold);
    let scheme = args.scheme.map(str::parse::<Scheme>).transpose()?;

    let (label, points) = match args.csv {
        Some(path) => ("csv".to_owned(), read_csv_points(path)?),
        None => {
            let store = resolve_store(args.store, config.as_ref())?;
            let filter = Filter { scheme, ..Filter::default() };
            let records: Vec<RunRecord> = load_records(&store, &filter)?.into_iter().filter(|r| r.is_ok()).collect();
            if records.is_empty() {
                return Err(Error::Input("no ok records".into()).into());
            }
            let points = if args.raw {
                let mut p: Vec<CurvePoint> =
                    records.iter().filter_map(|r| r.y(field).map(|y| CurvePoint { x: r.x(axis), y })).collect();
                p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
                p
            } else {
                pareto_frontier(&records, axis, field)?.points
            };
            (scheme.map_or("all".to_owned(), |s| s.to_string()), points)
        }
    };

    let fit = fit_power_law(&points)?;
    if !fit.converged {
        log::warn!("fit did not converge; reporting the best iterate");
    }
    let phase = phase_of(&fit, fit.x_max, threshold);
    println!(
        "scheme={label} axis={} alpha={} beta={} gamma={} r2={}",
        axis.as_str(),
        fmt_num(fit.alpha),
        fmt_num(fit.beta),
        fmt_num(fit.gamma),
        fmt_num(fit.r_squared)
    );
    println!("phase={} n_points={} converged={}", phase.as_str(), fit.n_points, fit.converged);

    if let Some(out) = args.out {
        let mut text = String::from("x,y,fitted_y\n");
        for p in &points {
            text.push_str(&format!("{},{},{}\n", fmt_num(p.x), fmt_num(p.y), fmt_num(fit.predict(p.x))));
        }
        fs::write(out, text).map_err(|e| LabError::io(out, e))?;
    }
    Ok(())
}

fn report(store: Option<&Path>, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let config = config.map(load_config).transpose()?;
    let store = resolve_store(store, config.as_ref())?;
    let out = match (out, &config) {
        (Some(o), _) => o.to_owned(),
        (None, Some(c)) => c.paths.report_dir.clone(),
        (None, None) => return Err(LabError::Usage("pass --out or --config".into())),
    };
    let opts = match &config {
        Some(c) => ReportOptions { y: c.fit.y, margin: c.fit.margin, phase_threshold: c.fit.phase_threshold },
        None => ReportOptions {
            y: LossField::NeTest,
            margin: recscale_core::analysis::DEFAULT_MARGIN,
            phase_threshold: DEFAULT_PHASE_THRESHOLD,
        },
    };
    let records = load_records(&store, &Filter::default())?;
    let analyses = analyze(&records, &opts)?;
    let files = emit_report(&analyses, &out)?;
    println!("wrote {} files to {}", files.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Gen { config, split, seed, n, out } => gen(&config, split, seed, n, &out),
        Command::Sweep { config, schemes, parallelism, resume, store } => {
            sweep(&config, &schemes, parallelism, resume, store.as_deref())
        }
        Command::Fit { store, config, csv, scheme, axis, y, raw, out } => fit(FitArgs {
            store: store.as_deref(),
            config: config.as_deref(),
            csv: csv.as_deref(),
            scheme: scheme.as_deref(),
            axis: &axis,
            y: y.as_deref(),
            raw,
            out: out.as_deref(),
        }),
        Command::Report { store, config, out } => report(store.as_deref(), config.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
