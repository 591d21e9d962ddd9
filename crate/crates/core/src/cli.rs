//! The `radonmap` command line: one subcommand per workflow stage.
//!
//! Every subcommand resolves its configuration (file, then flags), validates
//! it before touching data, writes `config.resolved.toml` into the output
//! directory and, on failure, prints one JSON error line to stderr and leaves
//! an `INCOMPLETE` marker next to whatever was written.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{self, report};
use crate::ingest::{self, read_stock, read_survey, FeatureLayout, RasterStack};
use crate::mc::{self, McSettings, PipelineInputs};
use crate::population::{floor_population, Scenario};
use crate::predict::{DwellingModel, DwellingQuery};
use crate::qrf::{self, Forest, TrainingSet};
use crate::service::{self, PredictRequest, ServeInputs};

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";
pub const FOREST_FILE: &str = "forest.qrf";

#[derive(Debug, Parser)]
#[command(name = "radonmap", version, about = "Probabilistic indoor radon estimation and aggregation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Global seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores; overrides the config.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

/// Input overrides shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub survey: Option<PathBuf>,
    #[arg(long)]
    pub stock: Option<PathBuf>,
    #[arg(long)]
    pub raster_dir: Option<PathBuf>,
    #[arg(long)]
    pub forest: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ForestArgs {
    #[arg(long)]
    pub ntree: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub block_size: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct McArgs {
    #[arg(long)]
    pub chunk_size: Option<usize>,
    #[arg(long)]
    pub factor: Option<f64>,
    #[arg(long)]
    pub min_population: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic survey, building stock and raster bundle.
    Synth {
        #[arg(long)]
        survey_size: Option<usize>,
        #[arg(long)]
        buildings: Option<usize>,
    },
    /// Fit a forest on the survey and write it to `forest.qrf`.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        /// Also write permutation importance.
        #[arg(long)]
        importance: bool,
        /// Also write partial dependence curves.
        #[arg(long)]
        partial_dependence: bool,
    },
    /// Forward feature selection by spatially cross-validated RMSE.
    SelectFeatures {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Cross-validated RMSE over an `mtry` grid.
    Tune {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        eval: EvalArgs,
        /// Comma-separated grid, e.g. `2,4,6`.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<usize>,
    },
    /// Spatial block cross-validation with the full metric suite.
    Evaluate {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        forest: ForestArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Per-floor quantiles and fitted distributions for the stock, or
    /// predictions for a JSON-lines request file.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// One prediction request per line; writes `predictions.jsonl`.
        #[arg(long)]
        requests: Option<PathBuf>,
    },
    /// Monte Carlo sampling and aggregation, with shard files.
    Sample {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mc: McArgs,
        #[arg(long)]
        scenario: Option<Scenario>,
        /// Keep statistics only.
        #[arg(long)]
        no_shards: bool,
    },
    /// Recompute statistics from shard files.
    Aggregate {
        #[arg(long)]
        shards: Option<PathBuf>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Descriptive statistics and representativeness tables.
    Diagnose {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Base, s1 and s2 basement occupancy runs with a delta report.
    Scenario {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Serve predictions and aggregate statistics over HTTP.
    Serve {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        stats_dir: Option<PathBuf>,
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl Cli {
    /// Config file (or defaults) with every command-line override applied.
    pub fn resolve_config(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => Config::load(path)?,
            None => Config::default(),
        };
        set(&mut c.seed, self.seed);
        set(&mut c.workers, self.workers);
        let data = match &self.command {
            Command::Train { data, .. }
            | Command::SelectFeatures { data, .. }
            | Command::Tune { data, .. }
            | Command::Evaluate { data, .. }
            | Command::Predict { data, .. }
            | Command::Sample { data, .. }
            | Command::Diagnose { data }
            | Command::Scenario { data, .. }
            | Command::Serve { data, .. } => Some(data),
            Command::Synth { .. } | Command::Aggregate { .. } => None,
        };
        if let Some(d) = data {
            set_opt(&mut c.data.survey, d.survey.clone());
            set_opt(&mut c.data.stock, d.stock.clone());
            set_opt(&mut c.data.forest, d.forest.clone());
            if d.raster_dir.is_some() {
                c.data.raster_dir = d.raster_dir.clone();
                c.data.rasters.clear();
            }
        }
        match &self.command {
            Command::Synth { survey_size, buildings } => {
                set(&mut c.synth.survey, *survey_size);
                set(&mut c.synth.buildings, *buildings);
            }
            Command::Train { forest, .. } => apply_forest(&mut c, forest),
            Command::SelectFeatures { forest, eval, .. } | Command::Evaluate { forest, eval, .. } => {
                apply_forest(&mut c, forest);
                apply_eval(&mut c, eval);
            }
            Command::Tune { forest, eval, grid, .. } => {
                apply_forest(&mut c, forest);
                apply_eval(&mut c, eval);
                if !grid.is_empty() {
                    c.eval.mtry_grid = grid.clone();
                }
            }
            Command::Sample { mc, scenario, no_shards, .. } => {
                apply_mc(&mut c.mc, mc);
                set(&mut c.mc.scenario, *scenario);
                c.mc.write_shards = !no_shards;
            }
            Command::Aggregate { shards, mc } => {
                apply_mc(&mut c.mc, mc);
                set_opt(&mut c.data.shard_dir, shards.clone());
            }
            Command::Scenario { mc, .. } => apply_mc(&mut c.mc, mc),
            Command::Serve { stats_dir, host, port, .. } => {
                set_opt(&mut c.data.stats_dir, stats_dir.clone());
                set(&mut c.service.host, host.clone());
                set(&mut c.service.port, *port);
            }
            Command::Predict { .. } | Command::Diagnose { .. } => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn apply_forest(c: &mut Config, f: &ForestArgs) {
    set(&mut c.forest.ntree, f.ntree);
    set(&mut c.forest.mtry, f.mtry);
}

fn apply_eval(c: &mut Config, e: &EvalArgs) {
    set(&mut c.eval.folds, e.folds);
    set(&mut c.eval.block_size_m, e.block_size);
    set(&mut c.eval.repeats, e.repeats);
}

fn apply_mc(m: &mut McSettings, a: &McArgs) {
    set(&mut m.chunk_size, a.chunk_size);
    set(&mut m.factor, a.factor);
    set(&mut m.min_population, a.min_population);
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Machine-readable error line.
pub fn error_line(e: &Error) -> String {
    json!({ "error": { "code": e.code(), "message": e.to_string() } }).to_string()
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let line = error_line(&e);
            eprintln!("{line}");
            if cli.out.is_dir() {
                let _ = fs::write(cli.out.join(INCOMPLETE_MARKER), format!("{line}\n"));
            }
            1
        }
    }
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    let out = &cli.out;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let marker = out.join(INCOMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    config.echo(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    pool.install(|| dispatch(cli, &config, out))
}

fn dispatch(cli: &Cli, c: &Config, out: &Path) -> Result<()> {
    match &cli.command {
        Command::Synth { .. } => synth(c, out),
        Command::Train { importance, partial_dependence, .. } => train(c, out, *importance, *partial_dependence),
        Command::SelectFeatures { .. } => select_features(c, out),
        Command::Tune { .. } => tune(c, out),
        Command::Evaluate { .. } => evaluate(c, out),
        Command::Predict { requests, .. } => match requests {
            Some(path) => predict_requests(c, path, out),
            None => predict_stock(c, out),
        },
        Command::Sample { .. } => {
            let report = mc::run_pipeline(&pipeline_inputs(c)?, &c.mc, &c.dist, c.seed, c.workers, out)?;
            log::info!("{} samples, {} stats rows", report.processed.samples, report.stats_rows);
            Ok(())
        }
        Command::Aggregate { .. } => {
            let shards = c
                .data
                .shard_dir
                .clone()
                .ok_or_else(|| Error::InvalidParameter("no shard directory: pass --shards".into()))?;
            mc::aggregate_shards(&shards, &c.mc, out).map(|_| ())
        }
        Command::Diagnose { .. } => diagnose(c, out),
        Command::Scenario { .. } => {
            mc::run_scenarios(&pipeline_inputs(c)?, &c.mc, &c.dist, c.seed, c.workers, out).map(|_| ())
        }
        Command::Serve { .. } => serve(c),
    }
}

fn pipeline_inputs(c: &Config) -> Result<PipelineInputs> {
    Ok(PipelineInputs {
        forest: c.data.forest()?.clone(),
        stock: c.data.stock()?.clone(),
        rasters: c.data.raster_files()?,
    })
}

fn synth(c: &Config, out: &Path) -> Result<()> {
    let data = ingest::generate_synthetic(&c.synth.truth, c.synth.sizes(), c.seed)?;
    data.write_bundle(out)?;
    // a ready-to-use config pointing at the bundle
    let mut run = c.clone();
    run.data = crate::config::DataConfig {
        survey: Some("survey.csv".into()),
        stock: Some("stock.csv".into()),
        raster_dir: Some("rasters".into()),
        forest: Some(FOREST_FILE.into()),
        stats_dir: Some("stats".into()),
        ..Default::default()
    };
    let path = out.join("radonmap.toml");
    fs::write(&path, run.to_toml()?).map_err(|e| Error::io(&path, e))
}

/// Survey joined with the configured predictors.
pub fn training_set(c: &Config) -> Result<(TrainingSet, usize)> {
    let layout = c.forest.layout()?;
    let rasters = RasterStack::read_files(&c.data.raster_files()?)?;
    let mut survey = read_survey(c.data.survey()?)?;
    let before = survey.len();
    if c.forest.full_year_only {
        survey.retain(|r| r.is_valid_year());
    }
    let dropped = before - survey.len();
    let train = ingest::join_predictors(&survey, &rasters, &layout)?;
    Ok((train, dropped))
}

fn write_lines(path: &Path, lines: &[(&str, String)]) -> Result<()> {
    let owned: Vec<(String, String)> = lines.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    report::write_key_values(&owned, path)
}

fn train(c: &Config, out: &Path, importance: bool, pdp: bool) -> Result<()> {
    let (train, dropped) = training_set(c)?;
    let params = c.forest.params();
    let forest = Forest::fit(&train, &params, c.seed)?;
    qrf::io::save(&forest, &out.join(FOREST_FILE))?;
    write_lines(
        &out.join("train_report.txt"),
        &[
            ("rows", train.len().to_string()),
            ("dropped_not_full_year", dropped.to_string()),
            ("predictors", train.schema().names().join(",")),
            ("ntree", params.ntree.to_string()),
            ("mtry", params.mtry.to_string()),
            ("min_node_size", params.min_node_size.to_string()),
            ("min_leaf_size", params.min_leaf_size.to_string()),
            ("seed", c.seed.to_string()),
            ("header", qrf::io::header_line()),
        ],
    )?;
    if importance {
        let ranked = qrf::permutation_importance(&forest, &train, 1, c.seed)?;
        let mut w = csv::Writer::from_writer(create_file(&out.join("importance.csv"))?);
        w.write_record(["rank", "predictor", "importance_bq_m3"])?;
        for (i, imp) in ranked.iter().enumerate() {
            w.write_record([(i + 1).to_string(), imp.name.clone(), imp.importance.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    if pdp {
        let mut w = csv::Writer::from_writer(create_file(&out.join("partial_dependence.csv"))?);
        w.write_record(["predictor", "value", "mean_bq_m3"])?;
        for (j, p) in train.schema().predictors().iter().enumerate() {
            let grid = qrf::default_grid(&train, j)?;
            for (v, m) in qrf::partial_dependence(&forest, &train, j, &grid)? {
                let value = match p.levels() {
                    Some(levels) => levels[v as usize].clone(),
                    None => v.to_string(),
                };
                w.write_record([p.name.clone(), value, m.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(out, e))?;
    }
    Ok(())
}

fn folds_for(c: &Config, train: &TrainingSet) -> Result<Vec<eval::FoldAssignment>> {
    eval::repeated_folds(train.locations(), c.eval.block_size_m, c.eval.folds, c.eval.repeats, c.seed)
}

fn select_features(c: &Config, out: &Path) -> Result<()> {
    let (train, _) = training_set(c)?;
    let folds = folds_for(c, &train)?;
    let candidates: Vec<usize> = if c.eval.candidates.is_empty() {
        (0..train.schema().len()).collect()
    } else {
        c.eval
            .candidates
            .iter()
            .map(|n| {
                train
                    .schema()
                    .index_of(n)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown candidate predictor `{n}`")))
            })
            .collect::<Result<_>>()?
    };
    let trace = out.join("ffs_trace.tsv");
    if trace.exists() {
        fs::remove_file(&trace).map_err(|e| Error::io(&trace, e))?;
    }
    let mut log = report::FfsLog::open(&trace)?;
    let result = eval::forward_feature_selection_with(&train, &candidates, &folds, &c.forest.params(), c.seed, |s| {
        log.append(s)
    })?;
    write_lines(
        &out.join("ffs_result.txt"),
        &[("selected", result.names.join(",")), ("rmse", result.rmse.to_string())],
    )
}

fn tune(c: &Config, out: &Path) -> Result<()> {
    let (train, _) = training_set(c)?;
    let folds = folds_for(c, &train)?;
    let grid: Vec<usize> = if c.eval.mtry_grid.is_empty() {
        (1..=train.schema().len()).collect()
    } else {
        c.eval.mtry_grid.clone()
    };
    let result = eval::tune_mtry(&train, &folds, &grid, &c.forest.params(), c.seed)?;
    report::write_tune_table(&result, &out.join("tune.csv"))?;
    write_lines(&out.join("tune_result.txt"), &[("best_mtry", result.best.to_string())])
}

fn evaluate(c: &Config, out: &Path) -> Result<()> {
    let (train, _) = training_set(c)?;
    let folds = folds_for(c, &train)?;
    let settings = eval::CvSettings { levels: c.dist.levels.clone(), bands: c.eval.bands.clone() };
    for (r, assignment) in folds.iter().enumerate() {
        let result = eval::cross_validate(&train, assignment, &c.forest.params(), &settings, assignment.seed())?;
        let suffix = if r == 0 { String::new() } else { format!("_repeat_{r}") };
        report::write_key_values(&report::metric_lines(&result.pooled), &out.join(format!("metrics{suffix}.txt")))?;
        report::write_metric_table(&result, &out.join(format!("metrics_by_fold{suffix}.csv")))?;
        report::write_predictions(&result, &out.join(format!("predictions{suffix}.csv")))?;
    }
    Ok(())
}

fn load_model(c: &Config) -> Result<DwellingModel> {
    DwellingModel::load(c.data.forest()?, &c.data.raster_files()?, c.dist.clone())
}

/// One JSON object per request line: the prediction, or `{"error": ...}`.
fn predict_requests(c: &Config, path: &Path, out: &Path) -> Result<()> {
    let model = load_model(c)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(path, e))?;
    let results: Vec<String> = lines
        .par_iter()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let outcome = serde_json::from_str::<PredictRequest>(line)
                .map_err(Error::from)
                .and_then(|r| service::predict_request(&model, &r));
            match outcome {
                Ok(p) => serde_json::to_string(&p).map_err(Error::from),
                Err(e) => Ok(json!({ "error": { "code": e.code(), "message": e.to_string() } }).to_string()),
            }
        })
        .collect::<Result<_>>()?;
    let target = out.join("predictions.jsonl");
    let mut w = create_file(&target)?;
    for r in results {
        writeln!(w, "{r}").map_err(|e| Error::io(&target, e))?;
    }
    w.flush().map_err(|e| Error::io(&target, e))
}

/// Per-floor quantiles and fitted parameters for every residential building.
fn predict_stock(c: &Config, out: &Path) -> Result<()> {
    let model = load_model(c)?;
    let (buildings, ..) = mc::prepare_stock(read_stock(c.data.stock()?)?, c.mc.imputation_chunk_size);
    let occupancy = c.mc.scenario.occupancy();
    let rows: Vec<Vec<Vec<String>>> = buildings
        .par_iter()
        .map(|b| {
            if let Err(e) = model.check_coverage(b.x, b.y) {
                log::warn!("building {} skipped: {e}", b.id);
                return Ok(Vec::new());
            }
            let offset = model.offset_at(b.x, b.y)?;
            let mut rows = Vec::new();
            for (floor, expected) in floor_population(b, &occupancy)?.entries {
                let q = DwellingQuery {
                    x: b.x,
                    y: b.y,
                    floor,
                    age_class: b.age_class,
                    building_type: b.building_type,
                    households: b.households,
                };
                let (quantiles, fit) = match model.fit(&q, offset) {
                    Ok(r) => r,
                    Err(e @ Error::Degenerate(_)) => {
                        log::warn!("building {} floor {floor} skipped: {e}", b.id);
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                let mut row = vec![b.id.clone(), b.ags.to_string(), floor.to_string(), expected.to_string()];
                row.extend(quantiles.iter().map(|v| v.to_string()));
                row.extend([fit.dist.meanlog, fit.dist.sdlog, fit.dist.offset].map(|v| v.to_string()));
                row.push(fit.dropped.to_string());
                rows.push(row);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(create_file(&out.join("floor_predictions.csv"))?);
    let mut header = vec!["building_id".to_string(), "ags".into(), "floor".into(), "expected_inhabitants".into()];
    header.extend(c.dist.levels.iter().map(|p| format!("q_{p:.2}")));
    header.extend(["meanlog", "sdlog", "offset", "dropped"].map(String::from));
    w.write_record(&header)?;
    for row in rows.into_iter().flatten() {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(out, e))
}

fn diagnose(c: &Config, out: &Path) -> Result<()> {
    let survey = read_survey(c.data.survey()?)?;
    let stock = read_stock(c.data.stock()?)?;
    let rasters = RasterStack::read_files(&c.data.raster_files()?)?;
    let values: Vec<f64> = survey.iter().map(|r| r.radon_bq_m3).collect();
    let d = ingest::descriptive_stats(&values, &c.mc.thresholds, &ingest::diagnostics::DEFAULT_PERCENTILES)?;
    let mut lines = vec![
        ("n", d.n.to_string()),
        ("am", d.am.to_string()),
        ("sd", d.sd.to_string()),
        ("gm", d.gm.to_string()),
        ("gsd", d.gsd.to_string()),
        ("non_positive", d.non_positive.to_string()),
    ];
    let labels: Vec<(String, String)> = d
        .percentiles
        .iter()
        .map(|(p, v)| (mc::output::percentile_column(*p), v.to_string()))
        .chain(d.exceedance.iter().map(|(t, f)| (mc::output::exceedance_column(*t), f.to_string())))
        .collect();
    lines.extend(labels.iter().map(|(k, v)| (k.as_str(), v.clone())));
    write_lines(&out.join("descriptive.txt"), &lines)?;

    let shares = ingest::representativeness_floor(&survey, &stock)?;
    let mut w = csv::Writer::from_writer(create_file(&out.join("floor_shares.csv"))?);
    w.write_record(["floor", "sample_share", "population_share"])?;
    let floors: std::collections::BTreeSet<i32> =
        shares.sample.iter().chain(&shares.population).map(|e| e.0).collect();
    let find = |v: &[(i32, f64)], f: i32| v.iter().find(|e| e.0 == f).map_or(0.0, |e| e.1);
    for f in floors {
        w.write_record([f.to_string(), find(&shares.sample, f).to_string(), find(&shares.population, f).to_string()])?;
    }
    w.flush().map_err(|e| Error::io(out, e))?;

    let points: Vec<[f64; 2]> = survey.iter().map(|r| [r.x, r.y]).collect();
    let mut w = csv::Writer::from_writer(create_file(&out.join("raster_curves.csv"))?);
    w.write_record(["layer", "percentile", "sample", "population"])?;
    let percentiles: Vec<f64> = (1..=19).map(|i| f64::from(i) * 0.05).collect();
    for (name, grid) in rasters.layers() {
        let curves = ingest::representativeness_raster(&points, &stock, grid, &percentiles)?;
        for ((p, s), q) in curves.percentiles.iter().zip(&curves.sample).zip(&curves.population) {
            w.write_record([name.clone(), format!("{p:.2}"), s.to_string(), q.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io(out, e))
}

fn serve(c: &Config) -> Result<()> {
    let inputs = ServeInputs {
        forest: c.data.forest()?.clone(),
        rasters: c.data.raster_files()?,
        stats_dir: c.data.stats_dir.clone(),
        prediction: c.dist.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    runtime.block_on(service::serve(inputs, &c.service, |addr| {
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
    }))
}

/// Layout of a forest file, for callers that need predictor names.
pub fn forest_layout(path: &Path) -> Result<FeatureLayout> {
    let (_, forest) = qrf::io::load(path)?;
    FeatureLayout::from_schema(forest.schema())
}
