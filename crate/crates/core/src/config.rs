//! Run configuration: one TOML file with a global seed and one section per
//! stage. Relative paths are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_BANDS;
use crate::ingest::synth::ENVIRONMENTAL_LAYERS;
use crate::ingest::{BuildingPredictor, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use crate::mc::McSettings;
use crate::predict::PredictionSettings;
use crate::qrf::{ForestParams, SplitStrategy};
use crate::service::ServiceSettings;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub survey: Option<PathBuf>,
    pub stock: Option<PathBuf>,
    /// Every `*.asc` file in this directory is a layer named by its stem.
    pub raster_dir: Option<PathBuf>,
    /// Explicit raster files, added after those from `raster_dir`.
    pub rasters: Vec<PathBuf>,
    pub forest: Option<PathBuf>,
    /// Directory with `stats_<level>.csv` files for the service.
    pub stats_dir: Option<PathBuf>,
    pub shard_dir: Option<PathBuf>,
}

impl DataConfig {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.survey,
            &mut self.stock,
            &mut self.raster_dir,
            &mut self.forest,
            &mut self.stats_dir,
            &mut self.shard_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self.rasters.iter_mut().for_each(fix);
    }

    fn required<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a PathBuf> {
        field
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("data.{name} is not set")))
    }

    pub fn survey(&self) -> Result<&PathBuf> {
        self.required(&self.survey, "survey")
    }

    pub fn stock(&self) -> Result<&PathBuf> {
        self.required(&self.stock, "stock")
    }

    pub fn forest(&self) -> Result<&PathBuf> {
        self.required(&self.forest, "forest")
    }

    /// All raster files, directory entries sorted by name.
    pub fn raster_files(&self) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        if let Some(dir) = &self.raster_dir {
            let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| Error::io(dir, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "asc"))
                .collect();
            found.sort();
            files.extend(found);
        }
        files.extend(self.rasters.iter().cloned());
        if files.is_empty() {
            return Err(Error::InvalidParameter("no rasters: set data.raster_dir or data.rasters".into()));
        }
        Ok(files)
    }
}

/// Forest hyperparameters plus the predictor layout used for training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub ntree: usize,
    pub mtry: usize,
    pub min_node_size: usize,
    pub min_leaf_size: usize,
    pub subsample: f64,
    pub split: SplitStrategy,
    pub layers: Vec<String>,
    pub building: Vec<BuildingPredictor>,
    /// Train only on measurements covering roughly one year.
    pub full_year_only: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        let p = ForestParams::default();
        ForestConfig {
            ntree: p.ntree,
            mtry: p.mtry,
            min_node_size: p.min_node_size,
            min_leaf_size: p.min_leaf_size,
            subsample: p.subsample,
            split: p.split,
            layers: ENVIRONMENTAL_LAYERS.iter().map(|s| s.to_string()).collect(),
            building: BuildingPredictor::ALL.to_vec(),
            full_year_only: true,
        }
    }
}

impl ForestConfig {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            ntree: self.ntree,
            mtry: self.mtry,
            min_node_size: self.min_node_size,
            min_leaf_size: self.min_leaf_size,
            subsample: self.subsample,
            split: self.split,
        }
    }

    pub fn layout(&self) -> Result<FeatureLayout> {
        FeatureLayout::new(self.layers.clone(), self.building.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let layout = self.layout()?;
        self.params().validate(layout.width())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub block_size_m: f64,
    pub repeats: usize,
    pub bands: Vec<(f64, f64)>,
    /// Empty means `1..=number of predictors`.
    pub mtry_grid: Vec<usize>,
    /// Predictor names offered to forward selection; empty means all.
    pub candidates: Vec<String>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 10,
            block_size_m: 40_000.0,
            repeats: 1,
            bands: DEFAULT_BANDS.to_vec(),
            mtry_grid: Vec::new(),
            candidates: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("eval.folds {} must be >= 2", self.folds)));
        }
        if !(self.block_size_m > 0.0 && self.block_size_m.is_finite()) {
            return Err(Error::InvalidParameter("eval.block_size_m must be > 0".into()));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("eval.repeats must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub survey: usize,
    pub buildings: usize,
    pub truth: GroundTruthSpec,
}

impl SynthConfig {
    pub fn sizes(&self) -> SyntheticSizes {
        let d = SyntheticSizes::default();
        SyntheticSizes {
            survey: if self.survey == 0 { d.survey } else { self.survey },
            buildings: if self.buildings == 0 { d.buildings } else { self.buildings },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub data: DataConfig,
    pub forest: ForestConfig,
    pub eval: EvalConfig,
    pub dist: PredictionSettings,
    pub mc: McSettings,
    pub service: ServiceSettings,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            workers: 0,
            data: DataConfig::default(),
            forest: ForestConfig::default(),
            eval: EvalConfig::default(),
            dist: PredictionSettings::default(),
            mc: McSettings::default(),
            service: ServiceSettings::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text, path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.data.resolve(&base);
        Ok(config)
    }

    /// Checks every section whose values do not depend on input files.
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        self.eval.validate()?;
        self.dist.validate()?;
        self.mc.validate()?;
        self.synth.truth.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidInput(format!("config serialization: {e}")))
    }

    /// Writes the resolved configuration next to the outputs.
    pub fn echo(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(RESOLVED_CONFIG);
        std::fs::write(&path, self.to_toml()?).map_err(|e| Error::io(&path, e))
    }
}
