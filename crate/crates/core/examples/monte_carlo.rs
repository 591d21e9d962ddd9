//! Population-weighted Monte Carlo over a synthetic building stock, then
//! aggregation to municipality, district, state and national statistics.

use radonmap::ags::Level;
use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use radonmap::mc::{aggregate_levels, prepare_stock, sample_stock, Outcome, SamplingConfig, SummarySpec};
use radonmap::predict::{DwellingModel, PredictionSettings};
use radonmap::qrf::{self, Forest, ForestParams};

fn main() -> radonmap::Result<()> {
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 1000, buildings: 4000 }, 4)?;
    let train = join_predictors(&data.survey, &data.rasters, &FeatureLayout::full(ENVIRONMENTAL_LAYERS)?)?;
    let forest = Forest::fit(&train, &ForestParams { ntree: 100, ..Default::default() }, 4)?;
    let model = DwellingModel::new(forest, qrf::io::header_line(), data.rasters.clone(), PredictionSettings::default())?;

    let (buildings, excluded, imputed_types, floors) = prepare_stock(data.stock.clone(), 5000);
    println!("{} buildings ({excluded} excluded, {imputed_types} types and {} floor counts imputed)", buildings.len(), floors.full_model + floors.households_model + floors.fallback);

    let config = SamplingConfig { seed: 4, ..Default::default() };
    let sampled = sample_stock(&buildings, &model, &config, 1000, 0, None)?;
    println!("{} samples in {} chunks", sampled.diagnostics.samples, sampled.chunks);

    let spec = SummarySpec::default();
    let levels = aggregate_levels(&sampled.municipalities, &spec)?;
    for level in [Level::National, Level::State] {
        for outcome in levels.finalize(config.factor, &spec.percentiles, 1000) {
            if let Outcome::Stats(s) = outcome {
                if s.level == level {
                    println!(
                        "{:<9} {:<3} pop {:>7.0}  AM {:>5.1}  GM {:>5.1}  GSD {:.2}  P(>300) {:.2}%",
                        format!("{level:?}"),
                        s.key,
                        s.population,
                        s.am,
                        s.gm,
                        s.gsd,
                        100.0 * s.exceedance_at(300.0).unwrap_or(f64::NAN)
                    );
                }
            }
        }
    }
    Ok(())
}
