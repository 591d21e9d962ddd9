//! Spatial block cross-validation: quantile coverage, interval coverage,
//! RMSE and r² of held-out predictions.

use radonmap::eval::{cross_validate, make_spatial_folds, report, CvSettings};
use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use radonmap::qrf::ForestParams;

fn main() -> radonmap::Result<()> {
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 1500, buildings: 5000 }, 2)?;
    let train = join_predictors(&data.survey, &data.rasters, &FeatureLayout::full(ENVIRONMENTAL_LAYERS)?)?;
    let folds = make_spatial_folds(train.locations(), 40_000.0, 10, 2)?;
    println!("{} blocks of 40 km in 10 folds, sizes {:?}", folds.blocks(), folds.sizes());
    let params = ForestParams { ntree: 150, ..Default::default() };
    let cv = cross_validate(&train, &folds, &params, &CvSettings::default(), 2)?;
    for (k, v) in report::metric_lines(&cv.pooled) {
        println!("{k} = {v}");
    }
    Ok(())
}
