mod common;

use std::fs;

use proptest::prelude::*;
use radonmap::ags::Level;
use radonmap::mc::{self, AggregateAccumulator, McSettings, Outcome, SummarySpec};

use common::Fixture;

fn finalize(acc: &AggregateAccumulator) -> String {
    format!("{:?}", acc.finalize("01", Level::State, 10.0, &mc::DEFAULT_PERCENTILES, 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Any split of the samples, merged in any order, finalizes identically.
    #[test]
    fn merge_is_order_free(
        values in proptest::collection::vec(0.5..5000.0f64, 1..400),
        cuts in proptest::collection::vec(0usize..400, 0..6),
        rotate in 0usize..6,
    ) {
        let spec = SummarySpec::default();
        let mut whole = AggregateAccumulator::new(&spec);
        values.iter().for_each(|&v| whole.push(v).unwrap());

        let mut bounds: Vec<usize> = cuts.iter().map(|c| c % (values.len() + 1)).collect();
        bounds.extend([0, values.len()]);
        bounds.sort_unstable();
        let mut parts: Vec<AggregateAccumulator> = bounds
            .windows(2)
            .map(|w| {
                let mut a = AggregateAccumulator::new(&spec);
                values[w[0]..w[1]].iter().for_each(|&v| a.push(v).unwrap());
                a
            })
            .collect();
        let k = rotate % parts.len();
        parts.rotate_left(k);
        let mut merged = AggregateAccumulator::new(&spec);
        for p in parts.iter().rev() {
            merged.merge(p).unwrap();
        }
        prop_assert_eq!(merged.n(), whole.n());
        prop_assert_eq!(finalize(&merged), finalize(&whole));
    }

    #[test]
    fn sample_size_covers_expectation(expected in 0.0..500.0f64, factor in 1.0..50.0f64) {
        let n = mc::sample_size(expected, factor).unwrap() as f64;
        prop_assert!(n + 1e-6 >= expected * factor);
        prop_assert!(n < expected * factor + 1.0);
    }
}

#[test]
fn outputs_independent_of_chunking_and_workers() {
    let f = Fixture::new(300, 900, 20, 8);
    let inputs = mc::PipelineInputs {
        forest: f.forest_path.clone(),
        stock: f.path().join("stock.csv"),
        rasters: common::raster_files(&f.raster_dir),
    };
    let mut reference: Option<Vec<String>> = None;
    for (chunk, workers) in [(200, 1), (200, 3), (5000, 1), (5000, 2)] {
        let out = f.path().join(format!("run_{chunk}_{workers}"));
        let settings = McSettings { chunk_size: chunk, write_shards: true, min_population: 20.0, ..McSettings::default() };
        let report = mc::run_pipeline(&inputs, &settings, &Default::default(), 11, workers, &out).unwrap();
        assert_eq!(report.chunks, 900usize.div_ceil(chunk));
        assert_eq!(report.national_n, report.processed.samples);
        let files: Vec<String> = ["stats_municipality.csv", "stats_district.csv", "stats_state.csv", "stats_national.csv", "suppressed.csv"]
            .iter()
            .map(|n| fs::read_to_string(out.join(n)).unwrap())
            .collect();
        match &reference {
            None => reference = Some(files),
            Some(r) => assert_eq!(r, &files, "chunk {chunk}, workers {workers}"),
        }

        // shards alone reproduce the statistics
        let again = out.join("from_shards");
        let levels = mc::aggregate_shards(&out.join(mc::SHARD_DIR), &settings, &again).unwrap();
        assert_eq!(levels.get(Level::National)[""].n(), report.national_n);
        assert_eq!(
            fs::read_to_string(again.join("stats_municipality.csv")).unwrap(),
            fs::read_to_string(out.join("stats_municipality.csv")).unwrap()
        );
    }
}

#[test]
fn suppression_threshold_applies_per_key() {
    let spec = SummarySpec::default();
    let mut acc = AggregateAccumulator::new(&spec);
    (0..999).for_each(|i| acc.push(50.0 + i as f64).unwrap());
    let min = McSettings::default().min_samples().unwrap();
    assert_eq!(min, 1000);
    assert!(matches!(acc.finalize("01001001", Level::Municipality, 10.0, &spec.percentiles, min), Outcome::Suppressed(_)));
    acc.push(1.0).unwrap();
    match acc.finalize("01001001", Level::Municipality, 10.0, &spec.percentiles, min) {
        Outcome::Stats(s) => assert_eq!(s.population, 100.0),
        Outcome::Suppressed(_) => panic!("1000 samples at factor 10 is 100 people"),
    }
}
