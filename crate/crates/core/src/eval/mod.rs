//! Spatial block cross-validation, feature selection, `mtry` tuning and the
//! metric suite.

mod cv;
mod folds;
mod metrics;
pub mod report;
mod selection;

pub use cv::{cross_validate, cv_rmse, repeated_folds, CvResult, CvSettings, HeldOutPrediction};
pub use folds::{block_of, make_spatial_folds, FoldAssignment};
pub use metrics::{pi_coverage, qcp, MetricReport, PiCoverage, DEFAULT_BANDS};
pub use selection::{forward_feature_selection, forward_feature_selection_with, tune_mtry, FfsResult, FfsStep, TuneResult};
