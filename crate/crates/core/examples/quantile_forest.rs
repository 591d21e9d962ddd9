//! Fit a quantile regression forest on a synthetic survey and print the
//! conditional quantiles for a basement and an upper floor at one location.

use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, DwellingAttributes, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use radonmap::population::{AgeClass, BuildingType};
use radonmap::qrf::{Forest, ForestParams, DEFAULT_LEVELS};

fn main() -> radonmap::Result<()> {
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 1500, buildings: 3000 }, 1)?;
    let layout = FeatureLayout::full(ENVIRONMENTAL_LAYERS)?;
    let train = join_predictors(&data.survey, &data.rasters, &layout)?;
    let forest = Forest::fit(&train, &ForestParams { ntree: 200, ..Default::default() }, 1)?;
    println!("{} trees on {} rows, predictors: {}", forest.trees().len(), train.len(), train.schema().names().join(", "));

    let b = &data.stock[0];
    for floor in [-1, 2] {
        let attrs = DwellingAttributes {
            floor,
            age_class: AgeClass::From1945To1980,
            building_type: Some(BuildingType::SingleTwoFamily),
            households: 2,
        };
        let x = layout.vector(&data.rasters, b.x, b.y, &attrs)?;
        let (mean, q) = forest.predict(&x, &DEFAULT_LEVELS)?;
        let shown: Vec<String> = q.levels.iter().zip(&q.values).map(|(p, v)| format!("q{p:.2}={v:.0}")).collect();
        println!("floor {floor:>2}: mean {mean:.1} Bq/m3  {}", shown.join(" "));
    }
    Ok(())
}
