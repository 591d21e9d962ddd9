//! Forward feature selection and an mtry sweep, both scored by spatially
//! cross-validated RMSE.

use radonmap::eval::{forward_feature_selection_with, repeated_folds, tune_mtry};
use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use radonmap::qrf::ForestParams;

fn main() -> radonmap::Result<()> {
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 800, buildings: 3000 }, 3)?;
    let train = join_predictors(&data.survey, &data.rasters, &FeatureLayout::full(ENVIRONMENTAL_LAYERS)?)?;
    let folds = repeated_folds(train.locations(), 40_000.0, 5, 1, 3)?;
    let params = ForestParams { ntree: 60, ..Default::default() };

    let candidates: Vec<usize> = (0..train.schema().len()).collect();
    let result = forward_feature_selection_with(&train, &candidates, &folds, &params, 3, |s| {
        println!("step {} {:<60} rmse {:.2}{}", s.step, s.names.join("+"), s.rmse, if s.accepted { "  *" } else { "" });
        Ok(())
    })?;
    println!("selected: {} (rmse {:.2})", result.names.join(", "), result.rmse);

    let tune = tune_mtry(&train, &folds, &[2, 4, 6, 8], &params, 3)?;
    for (m, rmse) in &tune.table {
        println!("mtry {m}: rmse {rmse:.2}");
    }
    println!("best mtry {}", tune.best);
    Ok(())
}
