//! Stock to statistics: validation, imputation, chunked parallel sampling,
//! merging and hierarchical output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accumulator::{AggregateAccumulator, HistogramSpec, SummarySpec, DEFAULT_PERCENTILES, DEFAULT_THRESHOLDS};
use super::hierarchy::{aggregate_levels, LevelAccumulators};
use super::output::{accumulate_shard, partition, stats_file_name, write_fits, write_shard, write_stats, write_suppressed};
use super::sampling::{process_chunk, sample_size, ChunkDiagnostics, SamplingConfig};
use crate::ags::{Ags, Level};
use crate::error::{Error, Result};
use crate::eval::report::write_key_values;
use crate::ingest::read_stock;
use crate::population::{impute_building_type, impute_floor_count, BuildingRecord, ImputationSummary, Scenario};
use crate::predict::{DwellingModel, PredictionSettings};

pub const RUN_REPORT: &str = "run_report.txt";
pub const SUPPRESSED_FILE: &str = "suppressed.csv";
pub const SHARD_DIR: &str = "shards";

/// Monte Carlo and aggregation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub factor: f64,
    pub chunk_size: usize,
    /// Floor counts are imputed over consecutive blocks of this many
    /// buildings in file order, independently of `chunk_size`.
    pub imputation_chunk_size: usize,
    pub thresholds: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub histogram_bins: usize,
    pub histogram_min: f64,
    pub histogram_max: f64,
    pub scenario: Scenario,
    /// Units with fewer estimated inhabitants are suppressed.
    pub min_population: f64,
    pub write_shards: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        let h = HistogramSpec::default();
        McSettings {
            factor: 10.0,
            chunk_size: 5000,
            imputation_chunk_size: 5000,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            histogram_bins: h.bins,
            histogram_min: h.lo,
            histogram_max: h.hi,
            scenario: Scenario::Base,
            min_population: 100.0,
            write_shards: false,
        }
    }
}

impl McSettings {
    pub fn summary(&self) -> SummarySpec {
        SummarySpec {
            thresholds: self.thresholds.clone(),
            percentiles: self.percentiles.clone(),
            histogram: HistogramSpec { bins: self.histogram_bins, lo: self.histogram_min, hi: self.histogram_max },
        }
    }

    pub fn min_samples(&self) -> Result<u64> {
        if !(self.min_population >= 0.0) {
            return Err(Error::InvalidParameter(format!("min_population {} must be >= 0", self.min_population)));
        }
        sample_size(self.min_population, self.factor)
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunk_size == 0 || self.imputation_chunk_size == 0 {
            return Err(Error::InvalidParameter("chunk sizes must be >= 1".into()));
        }
        self.summary().validate()?;
        self.min_samples()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineInputs {
    pub forest: PathBuf,
    pub stock: PathBuf,
    pub rasters: Vec<PathBuf>,
}

/// Counts and settings of one run, written as `run_report.txt`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub scenario: String,
    pub forest_header: String,
    pub buildings_read: usize,
    pub excluded_non_residential: usize,
    pub imputed_types: usize,
    pub imputed_floors: ImputationSummary,
    pub chunks: usize,
    pub chunk_size: usize,
    pub workers: usize,
    pub processed: ChunkDiagnostics,
    pub municipalities: usize,
    pub stats_rows: usize,
    pub suppressed_rows: usize,
    pub national_n: u64,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn lines(&self) -> Vec<(String, String)> {
        let mut v: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("scenario", self.scenario.clone()),
            ("forest_header", self.forest_header.clone()),
            ("buildings_read", self.buildings_read.to_string()),
            ("excluded_non_residential", self.excluded_non_residential.to_string()),
            ("imputed_types", self.imputed_types.to_string()),
            ("imputed_floors_full_model", self.imputed_floors.full_model.to_string()),
            ("imputed_floors_households_model", self.imputed_floors.households_model.to_string()),
            ("imputed_floors_fallback", self.imputed_floors.fallback.to_string()),
            ("chunks", self.chunks.to_string()),
            ("chunk_size", self.chunk_size.to_string()),
            ("workers", self.workers.to_string()),
            ("buildings_processed", self.processed.buildings.to_string()),
            ("skipped_buildings_coverage", self.processed.skipped_buildings.to_string()),
            ("skipped_floors_fit", self.processed.skipped_floors.to_string()),
            ("samples", self.processed.samples.to_string()),
            ("municipalities", self.municipalities.to_string()),
            ("stats_rows", self.stats_rows.to_string()),
            ("suppressed_rows", self.suppressed_rows.to_string()),
            ("national_n", self.national_n.to_string()),
            ("wall_time_s", format!("{:.3}", self.wall_time_s)),
        ];
        v.drain(..).map(|(k, s)| (k.to_string(), s)).collect()
    }
}

/// Residential rows only, with types imputed from households and floor
/// counts imputed per block. Returns the prepared rows and the counts.
pub fn prepare_stock(
    stock: Vec<BuildingRecord>,
    imputation_chunk_size: usize,
) -> (Vec<BuildingRecord>, usize, usize, ImputationSummary) {
    let total = stock.len();
    let mut rows: Vec<BuildingRecord> = stock.into_iter().filter(BuildingRecord::is_residential).collect();
    let excluded = total - rows.len();
    let mut imputed_types = 0;
    for b in rows.iter_mut().filter(|b| b.building_type.is_none()) {
        b.building_type = Some(impute_building_type(b.households));
        imputed_types += 1;
    }
    let mut summary = ImputationSummary::default();
    for chunk in rows.chunks_mut(imputation_chunk_size.max(1)) {
        let s = impute_floor_count(chunk);
        summary.full_model += s.full_model;
        summary.households_model += s.households_model;
        summary.fallback += s.fallback;
    }
    (rows, excluded, imputed_types, summary)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Result of sampling a prepared stock in memory.
#[derive(Clone, Debug)]
pub struct SampledStock {
    pub municipalities: BTreeMap<Ags, AggregateAccumulator>,
    pub diagnostics: ChunkDiagnostics,
    pub chunks: usize,
}

/// Samples prepared buildings chunk by chunk on `workers` threads (0 = all
/// cores). With `shard_dir` set, each chunk writes its own shard and fit file.
pub fn sample_stock(
    buildings: &[BuildingRecord],
    model: &DwellingModel,
    config: &SamplingConfig,
    chunk_size: usize,
    workers: usize,
    shard_dir: Option<&Path>,
) -> Result<SampledStock> {
    if chunk_size == 0 {
        return Err(Error::InvalidParameter("chunk_size must be >= 1".into()));
    }
    if let Some(dir) = shard_dir {
        create_dir(dir)?;
    }
    let config = SamplingConfig { keep_samples: shard_dir.is_some(), ..config.clone() };
    let chunks: Vec<&[BuildingRecord]> = buildings.chunks(chunk_size).collect();
    let outputs: Vec<(BTreeMap<Ags, AggregateAccumulator>, ChunkDiagnostics)> = pool(workers)?.install(|| {
        chunks
            .par_iter()
            .enumerate()
            .map(|(id, chunk)| {
                let out = process_chunk(id, chunk, model, &config)?;
                if let Some(dir) = shard_dir {
                    write_shard(&out.shard, create_file(&dir.join(format!("shard_{id:05}.csv")))?)?;
                    write_fits(&out.fits, create_file(&dir.join(format!("fits_{id:05}.csv")))?)?;
                }
                Ok((out.accumulators, out.diagnostics))
            })
            .collect::<Result<_>>()
    })?;
    let mut municipalities: BTreeMap<Ags, AggregateAccumulator> = BTreeMap::new();
    let mut diagnostics = ChunkDiagnostics::default();
    for (accs, diag) in outputs {
        diagnostics.add(&diag);
        for (ags, acc) in accs {
            match municipalities.get_mut(&ags) {
                Some(existing) => existing.merge(&acc)?,
                None => {
                    municipalities.insert(ags, acc);
                }
            }
        }
    }
    Ok(SampledStock { municipalities, diagnostics, chunks: chunks.len() })
}

/// Finalizes every level and writes `stats_<level>.csv` plus
/// `suppressed.csv`. Returns (stats rows, suppressed rows).
pub fn write_level_outputs(levels: &LevelAccumulators, settings: &McSettings, out_dir: &Path) -> Result<(usize, usize)> {
    let spec = settings.summary();
    let outcomes = levels.finalize(settings.factor, &spec.percentiles, settings.min_samples()?);
    let (stats, suppressed) = partition(outcomes);
    for level in Level::ALL {
        let rows: Vec<_> = stats.iter().filter(|s| s.level == level).cloned().collect();
        write_stats(&rows, &spec, create_file(&out_dir.join(stats_file_name(level)))?)?;
    }
    write_suppressed(&suppressed, create_file(&out_dir.join(SUPPRESSED_FILE))?)?;
    Ok((stats.len(), suppressed.len()))
}

/// Full run: every input is read and checked before any sampling starts.
pub fn run_pipeline(
    inputs: &PipelineInputs,
    settings: &McSettings,
    prediction: &PredictionSettings,
    seed: u64,
    workers: usize,
    out_dir: &Path,
) -> Result<RunReport> {
    let started = Instant::now();
    settings.validate()?;
    let model = DwellingModel::load(&inputs.forest, &inputs.rasters, prediction.clone())?;
    let stock = read_stock(&inputs.stock)?;
    create_dir(out_dir)?;
    let buildings_read = stock.len();
    let (buildings, excluded, imputed_types, imputed_floors) = prepare_stock(stock, settings.imputation_chunk_size);
    let config = SamplingConfig {
        factor: settings.factor,
        occupancy: settings.scenario.occupancy(),
        summary: settings.summary(),
        seed,
        keep_samples: false,
    };
    let shard_dir = settings.write_shards.then(|| out_dir.join(SHARD_DIR));
    let sampled = sample_stock(&buildings, &model, &config, settings.chunk_size, workers, shard_dir.as_deref())?;
    let levels = aggregate_levels(&sampled.municipalities, &config.summary)?;
    let (stats_rows, suppressed_rows) = write_level_outputs(&levels, settings, out_dir)?;
    let report = RunReport {
        seed,
        scenario: settings.scenario.name().to_string(),
        forest_header: model.header().to_string(),
        buildings_read,
        excluded_non_residential: excluded,
        imputed_types,
        imputed_floors,
        chunks: sampled.chunks,
        chunk_size: settings.chunk_size,
        workers: if workers == 0 { rayon::current_num_threads() } else { workers },
        processed: sampled.diagnostics,
        municipalities: sampled.municipalities.len(),
        stats_rows,
        suppressed_rows,
        national_n: levels.get(Level::National)[""].n(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_key_values(&report.lines(), &out_dir.join(RUN_REPORT))?;
    Ok(report)
}

/// Recomputes statistics from shard files alone.
pub fn aggregate_shards(shard_dir: &Path, settings: &McSettings, out_dir: &Path) -> Result<LevelAccumulators> {
    settings.validate()?;
    let spec = settings.summary();
    let mut paths: Vec<PathBuf> = fs::read_dir(shard_dir)
        .map_err(|e| Error::io(shard_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("shard_") && n.ends_with(".csv"))
        })
        .collect();
    paths.sort();
    let mut municipalities = BTreeMap::new();
    for p in &paths {
        accumulate_shard(p, &spec, &mut municipalities)?;
    }
    let levels = aggregate_levels(&municipalities, &spec)?;
    create_dir(out_dir)?;
    write_level_outputs(&levels, settings, out_dir)?;
    Ok(levels)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: Scenario,
    pub houses: f64,
    pub apartments: f64,
    pub national_am: f64,
    pub delta_am: f64,
    pub delta_pct: f64,
}

/// Runs base, s1 and s2 into `<out>/<scenario>/` and writes
/// `scenario_report.csv` with national AM deltas relative to base.
pub fn run_scenarios(
    inputs: &PipelineInputs,
    settings: &McSettings,
    prediction: &PredictionSettings,
    seed: u64,
    workers: usize,
    out_dir: &Path,
) -> Result<Vec<ScenarioRow>> {
    let mut ams = Vec::new();
    for sc in Scenario::ALL {
        let s = McSettings { scenario: sc, ..settings.clone() };
        let dir = out_dir.join(sc.name());
        run_pipeline(inputs, &s, prediction, seed, workers, &dir)?;
        let national = super::output::read_stats(&dir.join(stats_file_name(Level::National)))?;
        let am = national.first().map_or(f64::NAN, |r| r.am);
        ams.push((sc, am));
    }
    let base = ams[0].1;
    let rows: Vec<ScenarioRow> = ams
        .into_iter()
        .map(|(sc, am)| {
            let occ = sc.occupancy();
            ScenarioRow {
                scenario: sc,
                houses: occ.houses,
                apartments: occ.apartments,
                national_am: am,
                delta_am: am - base,
                delta_pct: 100.0 * (am - base) / base,
            }
        })
        .collect();
    let path = out_dir.join("scenario_report.csv");
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    w.write_record(["scenario", "f_houses", "f_apartments", "national_am", "delta_am", "delta_pct"])?;
    for r in &rows {
        w.write_record([
            r.scenario.name().to_string(),
            r.houses.to_string(),
            r.apartments.to_string(),
            r.national_am.to_string(),
            r.delta_am.to_string(),
            r.delta_pct.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}
