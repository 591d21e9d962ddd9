//! Input data: survey and stock tables, predictor rasters, the spatial join,
//! synthetic data and survey diagnostics.

pub mod diagnostics;
mod join;
pub mod raster;
pub mod records;
pub mod synth;

pub use diagnostics::{
    descriptive_stats, representativeness_floor, representativeness_raster, DescriptiveStats, FloorShares,
    RasterCurves,
};
pub use join::{join_predictors, BuildingPredictor, DwellingAttributes, FeatureLayout};
pub use raster::{RasterGrid, RasterStack};
pub use records::{read_stock, read_survey, write_stock, write_survey, SurveyRecord};
pub use synth::{generate_synthetic, GroundTruth, GroundTruthSpec, SyntheticData, SyntheticSizes, TruthParams};
