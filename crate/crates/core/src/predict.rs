//! Dwelling-scale prediction: predictors joined at a location, forest
//! quantiles, shifted-lognormal fit with the local outdoor offset and
//! threshold exceedances. Shared by the sampler, the CLI and the service so
//! all three produce the same numbers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{fit_shifted_lognormal, LognormalFit, ShiftedLognormal, DEFAULT_FIT_WEIGHTS};
use crate::error::{Error, Result};
use crate::ingest::{BuildingPredictor, DwellingAttributes, FeatureLayout, RasterStack};
use crate::mc::{Exceedance, DEFAULT_THRESHOLDS};
use crate::population::{AgeClass, BuildingType};
use crate::qrf::{validate_levels, FeatureVector, Forest, DEFAULT_LEVELS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionSettings {
    pub levels: Vec<f64>,
    pub fit_weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Raster layer holding the local outdoor radon, used as fit offset.
    pub offset_layer: String,
}

impl Default for PredictionSettings {
    fn default() -> Self {
        PredictionSettings {
            levels: DEFAULT_LEVELS.to_vec(),
            fit_weights: DEFAULT_FIT_WEIGHTS.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            offset_layer: crate::ingest::synth::OUTDOOR_RADON.to_string(),
        }
    }
}

impl PredictionSettings {
    pub fn validate(&self) -> Result<()> {
        validate_levels(&self.levels)?;
        if self.fit_weights.len() != self.levels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} fit weights for {} levels",
                self.fit_weights.len(),
                self.levels.len()
            )));
        }
        if self.fit_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidParameter("fit weights must be positive".into()));
        }
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter("thresholds must be strictly increasing".into()));
        }
        Ok(())
    }
}

/// Location plus dwelling attributes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellingQuery {
    pub x: f64,
    pub y: f64,
    pub floor: i32,
    pub age_class: AgeClass,
    pub building_type: Option<BuildingType>,
    pub households: u32,
}

impl DwellingQuery {
    pub fn attributes(&self) -> DwellingAttributes {
        DwellingAttributes {
            floor: self.floor,
            age_class: self.age_class,
            building_type: self.building_type,
            households: self.households,
        }
    }
}

/// A predictor value as the forest saw it. Categorical predictors also carry
/// their label; missing values are `null`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPredictor {
    pub name: String,
    pub value: Option<f64>,
    pub label: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub dropped_levels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellingPrediction {
    pub levels: Vec<f64>,
    pub quantiles: Vec<f64>,
    pub distribution: ShiftedLognormal,
    pub exceedance: Vec<Exceedance>,
    pub predictors: Vec<ResolvedPredictor>,
    pub diagnostics: FitDiagnostics,
}

/// Immutable artifacts needed to predict anywhere in the raster extent.
#[derive(Clone, Debug)]
pub struct DwellingModel {
    forest: Forest,
    header: String,
    layout: FeatureLayout,
    rasters: RasterStack,
    settings: PredictionSettings,
}

impl DwellingModel {
    pub fn new(forest: Forest, header: String, rasters: RasterStack, settings: PredictionSettings) -> Result<Self> {
        settings.validate()?;
        let layout = FeatureLayout::from_schema(forest.schema())?;
        layout.check_stack(&rasters)?;
        if rasters.get(&settings.offset_layer).is_none() {
            return Err(Error::InvalidInput(format!("offset layer `{}` not loaded", settings.offset_layer)));
        }
        Ok(DwellingModel { forest, header, layout, rasters, settings })
    }

    /// Loads a forest file and the raster files it needs.
    pub fn load(forest: &Path, rasters: &[impl AsRef<Path>], settings: PredictionSettings) -> Result<Self> {
        let (header, forest) = crate::qrf::io::load(forest)?;
        let rasters = RasterStack::read_files(rasters)?;
        Self::new(forest, header, rasters, settings)
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    /// Header line of the forest file this model was loaded from.
    pub fn header(&self) -> &str {
        &self.header
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn rasters(&self) -> &RasterStack {
        &self.rasters
    }

    pub fn settings(&self) -> &PredictionSettings {
        &self.settings
    }

    /// Outdoor radon offset at a location.
    pub fn offset_at(&self, x: f64, y: f64) -> Result<f64> {
        let layer = &self.settings.offset_layer;
        let v = self.rasters.get(layer).and_then(|g| g.lookup(x, y)).ok_or_else(|| Error::OutsideCoverage {
            x,
            y,
            layer: layer.clone(),
        })?;
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidInput(format!("offset {v} at ({x}, {y}) must be >= 0")));
        }
        Ok(v)
    }

    /// Fails when any raster the forest uses, or the offset layer, has no
    /// value at the location.
    pub fn check_coverage(&self, x: f64, y: f64) -> Result<()> {
        for (layer, v) in self.layout.layers().iter().zip(self.layout.raster_values(&self.rasters, x, y)?) {
            if v.is_none() {
                return Err(Error::OutsideCoverage { x, y, layer: layer.clone() });
            }
        }
        self.offset_at(x, y).map(|_| ())
    }

    pub fn features(&self, q: &DwellingQuery) -> Result<FeatureVector> {
        self.layout.vector(&self.rasters, q.x, q.y, &q.attributes())
    }

    /// Quantiles and fitted distribution; the building-level loop calls this
    /// once per floor after checking coverage once.
    pub fn fit(&self, q: &DwellingQuery, offset: f64) -> Result<(Vec<f64>, LognormalFit)> {
        let x = self.features(q)?;
        let prediction = self.forest.predict_quantiles(&x, &self.settings.levels)?;
        let fit = fit_shifted_lognormal(&self.settings.levels, &prediction.values, offset, &self.settings.fit_weights)?;
        Ok((prediction.values, fit))
    }

    pub fn predict(&self, q: &DwellingQuery) -> Result<DwellingPrediction> {
        self.check_coverage(q.x, q.y)?;
        let offset = self.offset_at(q.x, q.y)?;
        let features = self.features(q)?;
        let (quantiles, fit) = self.fit(q, offset)?;
        let exceedance = self
            .settings
            .thresholds
            .iter()
            .map(|&threshold| Exceedance { threshold, probability: fit.dist.exceedance(threshold) })
            .collect();
        Ok(DwellingPrediction {
            levels: self.settings.levels.clone(),
            quantiles,
            distribution: fit.dist,
            exceedance,
            predictors: self.resolve(&features),
            diagnostics: FitDiagnostics { dropped_levels: fit.dropped },
        })
    }

    fn resolve(&self, x: &FeatureVector) -> Vec<ResolvedPredictor> {
        self.forest
            .schema()
            .predictors()
            .iter()
            .zip(x.values())
            .map(|(p, &v)| {
                let value = (!v.is_nan()).then_some(v);
                let label = match p.name.parse::<BuildingPredictor>() {
                    Ok(BuildingPredictor::AgeClass) => value.map(|v| AgeClass::ALL[v as usize].code().to_string()),
                    Ok(BuildingPredictor::BuildingType) => {
                        value.map(|v| BuildingType::ALL[v as usize].code().to_string())
                    }
                    _ => None,
                };
                ResolvedPredictor { name: p.name.clone(), value, label }
            })
            .collect()
    }
}
