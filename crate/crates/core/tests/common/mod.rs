#![allow(dead_code)]

use std::path::{Path, PathBuf};

use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, FeatureLayout, GroundTruthSpec, SyntheticData, SyntheticSizes};
use radonmap::mc::{self, SamplingConfig, SummarySpec};
use radonmap::population::{BuildingRecord, Scenario};
use radonmap::predict::{DwellingModel, PredictionSettings};
use radonmap::qrf::{self, Forest, ForestParams, TrainingSet};
use tempfile::TempDir;

/// Synthetic bundle on disk plus a small forest trained on its survey.
pub struct Fixture {
    pub dir: TempDir,
    pub data: SyntheticData,
    pub train: TrainingSet,
    pub forest_path: PathBuf,
    pub raster_dir: PathBuf,
    pub model: DwellingModel,
    /// Residential stock with types and floors imputed.
    pub buildings: Vec<BuildingRecord>,
}

impl Fixture {
    pub fn new(survey: usize, buildings: usize, ntree: usize, seed: u64) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey, buildings }, seed).unwrap();
        data.write_bundle(dir.path()).unwrap();
        let layout = FeatureLayout::full(ENVIRONMENTAL_LAYERS).unwrap();
        let train = join_predictors(&data.survey, &data.rasters, &layout).unwrap();
        let params = ForestParams { ntree, ..ForestParams::default() };
        let forest = Forest::fit(&train, &params, seed).unwrap();
        let forest_path = dir.path().join("forest.qrf");
        qrf::io::save(&forest, &forest_path).unwrap();
        let raster_dir = dir.path().join("rasters");
        let model = DwellingModel::load(&forest_path, &raster_files(&raster_dir), PredictionSettings::default()).unwrap();
        let (buildings, ..) = mc::prepare_stock(data.stock.clone(), 5000);
        Fixture { dir, data, train, forest_path, raster_dir, model, buildings }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

pub fn raster_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "asc"))
        .collect();
    files.sort();
    files
}

pub fn sampling_config(scenario: Scenario, seed: u64) -> SamplingConfig {
    SamplingConfig {
        factor: 10.0,
        occupancy: scenario.occupancy(),
        summary: SummarySpec::default(),
        seed,
        keep_samples: false,
    }
}
