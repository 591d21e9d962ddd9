//! Per-floor Monte Carlo sampling of one chunk of buildings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::accumulator::{AggregateAccumulator, SummarySpec};
use crate::ags::Ags;
use crate::error::{Error, Result};
use crate::population::{floor_population, BuildingRecord, OccupancyModel};
use crate::predict::{DwellingModel, DwellingQuery};
use crate::rng;

/// Stream tag separating sampling draws from every other use of the seed.
const SAMPLING_TAG: u64 = 0x5A3D;

/// Samples drawn for a floor: `ceil(expected * factor)`, so every occupied
/// floor gets at least one. The tiny slack keeps exact products such as
/// `0.3 * 10` from rounding up past the integer.
pub fn sample_size(expected: f64, factor: f64) -> Result<u64> {
    if !(expected >= 0.0 && expected.is_finite()) {
        return Err(Error::InvalidInput(format!("expected inhabitants {expected} must be >= 0")));
    }
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::InvalidParameter(format!("sampling factor {factor} must be > 0")));
    }
    Ok((expected * factor - 1e-9).ceil().max(0.0) as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub factor: f64,
    pub occupancy: OccupancyModel,
    pub summary: SummarySpec,
    pub seed: u64,
    /// Keep the raw samples for shard files.
    pub keep_samples: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            factor: 10.0,
            occupancy: OccupancyModel::default(),
            summary: SummarySpec::default(),
            seed: 0,
            keep_samples: false,
        }
    }
}

/// Fitted distribution of one floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub building_id: String,
    pub floor: i32,
    pub meanlog: f64,
    pub sdlog: f64,
    pub offset: f64,
    pub dropped: usize,
}

/// Samples of one floor, in draw order.
#[derive(Clone, Debug, PartialEq)]
pub struct ShardBlock {
    pub ags: Ags,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkDiagnostics {
    pub buildings: usize,
    pub skipped_buildings: usize,
    pub skipped_floors: usize,
    pub samples: u64,
}

impl ChunkDiagnostics {
    pub fn add(&mut self, o: &ChunkDiagnostics) {
        self.buildings += o.buildings;
        self.skipped_buildings += o.skipped_buildings;
        self.skipped_floors += o.skipped_floors;
        self.samples += o.samples;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChunkOutput {
    pub chunk_id: usize,
    pub shard: Vec<ShardBlock>,
    pub accumulators: BTreeMap<Ags, AggregateAccumulator>,
    pub fits: Vec<FitRow>,
    pub diagnostics: ChunkDiagnostics,
}

impl ChunkOutput {
    pub fn shard_len(&self) -> usize {
        self.shard.iter().map(|b| b.values.len()).sum()
    }
}

/// Random stream of one floor of one building.
pub fn floor_stream(seed: u64, building_id: &str, floor: i32) -> rng::Stream {
    rng::stream(seed, &[SAMPLING_TAG, rng::hash_str(building_id), i64::from(floor) as u64])
}

/// Samples every floor of every building in the chunk. Draws depend only on
/// the seed, building id and floor, never on the chunk or the worker.
/// Buildings outside raster coverage and floors whose fit fails are skipped,
/// logged and counted. Buildings must be residential with floor count and
/// type already imputed.
pub fn process_chunk(
    chunk_id: usize,
    buildings: &[BuildingRecord],
    model: &DwellingModel,
    config: &SamplingConfig,
) -> Result<ChunkOutput> {
    let mut out = ChunkOutput {
        chunk_id,
        shard: Vec::new(),
        accumulators: BTreeMap::new(),
        fits: Vec::new(),
        diagnostics: ChunkDiagnostics { buildings: buildings.len(), ..Default::default() },
    };
    for b in buildings {
        if !b.is_residential() {
            return Err(Error::InvalidInput(format!("building {}: not residential", b.id)));
        }
        let occupancy = floor_population(b, &config.occupancy)?;
        if let Err(e) = model.check_coverage(b.x, b.y) {
            log::warn!("building {} skipped: {e}", b.id);
            out.diagnostics.skipped_buildings += 1;
            continue;
        }
        let offset = model.offset_at(b.x, b.y)?;
        for &(floor, expected) in &occupancy.entries {
            let n = sample_size(expected, config.factor)?;
            if n == 0 {
                continue;
            }
            let query = DwellingQuery {
                x: b.x,
                y: b.y,
                floor,
                age_class: b.age_class,
                building_type: b.building_type,
                households: b.households,
            };
            let fit = match model.fit(&query, offset) {
                Ok((_, fit)) => fit,
                Err(e @ Error::Degenerate(_)) => {
                    log::warn!("building {} floor {floor} skipped: {e}", b.id);
                    out.diagnostics.skipped_floors += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            out.fits.push(FitRow {
                building_id: b.id.clone(),
                floor,
                meanlog: fit.dist.meanlog,
                sdlog: fit.dist.sdlog,
                offset,
                dropped: fit.dropped,
            });
            let mut stream = floor_stream(config.seed, &b.id, floor);
            let values = fit.dist.sample(n as usize, &mut stream);
            let acc = out
                .accumulators
                .entry(b.ags.clone())
                .or_insert_with(|| AggregateAccumulator::new(&config.summary));
            for &v in &values {
                acc.push(v)?;
            }
            out.diagnostics.samples += n;
            if config.keep_samples {
                out.shard.push(ShardBlock { ags: b.ags.clone(), values });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{AgeClass, BuildingType};

    #[test]
    fn sample_sizes() {
        assert_eq!(sample_size(0.8696, 10.0).unwrap(), 9);
        assert_eq!(sample_size(0.2475, 10.0).unwrap(), 3);
        assert_eq!(sample_size(0.0, 10.0).unwrap(), 0);
        assert_eq!(sample_size(0.3, 10.0).unwrap(), 3);
        assert_eq!(sample_size(4.0, 10.0).unwrap(), 40);
        assert_eq!(sample_size(0.01, 10.0).unwrap(), 1);
        assert!(sample_size(-0.1, 10.0).is_err());
        assert!(sample_size(1.0, 0.0).is_err());
    }

    fn building(id: &str, x: f64, floors: u32, inhabitants: u32) -> BuildingRecord {
        BuildingRecord {
            id: id.into(),
            x,
            y: 200_000.0,
            ags: "01001001".parse().unwrap(),
            households: 1,
            inhabitants,
            floors: Some(floors),
            age_class: AgeClass::From1945To1980,
            building_type: Some(BuildingType::SingleTwoFamily),
        }
    }

    #[test]
    fn two_floor_house_draws_nine_nine_three() {
        let model = crate::predict::tests::small_model();
        let cfg = SamplingConfig { keep_samples: true, seed: 5, ..Default::default() };
        let out = process_chunk(0, &[building("b1", 120_000.0, 2, 2)], &model, &cfg).unwrap();
        let sizes: Vec<usize> = out.shard.iter().map(|b| b.values.len()).collect();
        assert_eq!(sizes, vec![3, 9, 9]);
        assert_eq!(out.shard_len(), 21);
        assert_eq!(out.diagnostics.samples, 21);
        assert_eq!(out.fits.iter().map(|f| f.floor).collect::<Vec<_>>(), vec![-1, 0, 1]);
        for (block, fit) in out.shard.iter().zip(&out.fits) {
            assert!(block.values.iter().all(|&v| v > fit.offset));
        }
        let again = process_chunk(7, &[building("b1", 120_000.0, 2, 2)], &model, &cfg).unwrap();
        assert_eq!(out.shard, again.shard);
        assert_eq!(out.accumulators, again.accumulators);
    }

    #[test]
    fn outside_coverage_is_skipped_and_empty_inhabitants_rejected() {
        let model = crate::predict::tests::small_model();
        let cfg = SamplingConfig::default();
        let out = process_chunk(0, &[building("far", -5e5, 1, 3), building("ok", 1e5, 1, 3)], &model, &cfg).unwrap();
        assert_eq!(out.diagnostics.skipped_buildings, 1);
        // 3 / 1.3 = 2.31 above ground, 0.69 in the basement
        assert_eq!(out.diagnostics.samples, 24 + 7);
        assert!(process_chunk(0, &[building("empty", 1e5, 1, 0)], &model, &cfg).is_err());
    }
}
