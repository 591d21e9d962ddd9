//! Train a small model on synthetic data and serve it over HTTP until ctrl-c.
//!
//! curl -s localhost:8080/health
//! curl -s -XPOST localhost:8080/predict -H 'content-type: application/json' \
//!   -d '{"x":200000,"y":200000,"floor":0,"age_class":"1945_1980","living_units":2}'

use radonmap::ingest::synth::ENVIRONMENTAL_LAYERS;
use radonmap::ingest::{generate_synthetic, join_predictors, FeatureLayout, GroundTruthSpec, SyntheticSizes};
use radonmap::qrf::{self, Forest, ForestParams};
use radonmap::service::{serve, ServeInputs, ServiceSettings};

#[tokio::main]
async fn main() -> radonmap::Result<()> {
    let dir = std::env::temp_dir().join("radonmap-serve-example");
    let data = generate_synthetic(&GroundTruthSpec::default(), SyntheticSizes { survey: 1000, buildings: 2000 }, 5)?;
    data.write_bundle(&dir)?;
    let train = join_predictors(&data.survey, &data.rasters, &FeatureLayout::full(ENVIRONMENTAL_LAYERS)?)?;
    let forest = Forest::fit(&train, &ForestParams { ntree: 100, ..Default::default() }, 5)?;
    qrf::io::save(&forest, &dir.join("forest.qrf"))?;

    let rasters = ENVIRONMENTAL_LAYERS
        .iter()
        .chain(&["outdoor_radon"])
        .map(|l| dir.join("rasters").join(format!("{l}.asc")))
        .collect();
    let inputs = ServeInputs { forest: dir.join("forest.qrf"), rasters, stats_dir: None, prediction: Default::default() };
    serve(inputs, &ServiceSettings::default(), |addr| println!("listening on http://{addr}")).await
}
