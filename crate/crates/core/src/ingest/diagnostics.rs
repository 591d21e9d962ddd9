//! Survey representativeness and descriptive statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::raster::RasterGrid;
use super::records::SurveyRecord;
use crate::error::{Error, Result};
use crate::population::BuildingRecord;
use crate::stats::{empirical_quantile, mean, sample_sd, weighted_quantiles};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [100.0, 300.0, 600.0, 1000.0];
pub const DEFAULT_PERCENTILES: [f64; 7] = [0.05, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99];

/// Share of rows per floor level, ascending by level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorShares {
    pub sample: Vec<(i32, f64)>,
    pub population: Vec<(i32, f64)>,
    /// Stock rows without a floor count, left out of the population table.
    pub skipped_buildings: usize,
}

/// Survey floor shares against the population living on each floor. The
/// population side spreads inhabitants evenly over above-ground floors and
/// has no basement.
pub fn representativeness_floor(sample: &[SurveyRecord], stock: &[BuildingRecord]) -> Result<FloorShares> {
    if sample.is_empty() || stock.is_empty() {
        return Err(Error::InvalidInput("representativeness needs survey and stock rows".into()));
    }
    let mut counts: BTreeMap<i32, f64> = BTreeMap::new();
    for r in sample {
        *counts.entry(r.floor).or_default() += 1.0;
    }
    let n = sample.len() as f64;
    let sample_shares = counts.into_iter().map(|(f, c)| (f, c / n)).collect();

    let mut people: BTreeMap<i32, f64> = BTreeMap::new();
    let mut skipped = 0;
    for b in stock {
        match b.floors {
            Some(floors) if floors >= 1 => {
                let per_floor = f64::from(b.inhabitants) / f64::from(floors);
                for level in 0..floors as i32 {
                    *people.entry(level).or_default() += per_floor;
                }
            }
            _ => skipped += 1,
        }
    }
    let total: f64 = people.values().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("stock has no inhabitants with known floor counts".into()));
    }
    Ok(FloorShares {
        sample: sample_shares,
        population: people.into_iter().map(|(f, c)| (f, c / total)).collect(),
        skipped_buildings: skipped,
    })
}

/// Percentile curves of a raster layer at survey locations and at the
/// inhabitants' locations. The curves coincide for a representative sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterCurves {
    pub percentiles: Vec<f64>,
    pub sample: Vec<f64>,
    pub population: Vec<f64>,
    pub sample_missing: usize,
    pub population_missing: usize,
}

pub fn representativeness_raster(
    sample_points: &[[f64; 2]],
    stock: &[BuildingRecord],
    layer: &RasterGrid,
    percentiles: &[f64],
) -> Result<RasterCurves> {
    crate::qrf::validate_levels(percentiles)?;
    let mut sample: Vec<f64> = sample_points.iter().filter_map(|p| layer.lookup(p[0], p[1])).collect();
    let sample_missing = sample_points.len() - sample.len();
    let weighted: Vec<(f64, f64)> = stock
        .iter()
        .filter(|b| b.inhabitants > 0)
        .filter_map(|b| layer.lookup(b.x, b.y).map(|v| (v, f64::from(b.inhabitants))))
        .collect();
    let population_missing = stock.iter().filter(|b| b.inhabitants > 0).count() - weighted.len();
    if sample.is_empty() || weighted.is_empty() {
        return Err(Error::InvalidInput("no raster values at the given locations".into()));
    }
    sample.sort_by(f64::total_cmp);
    let sample_curve = percentiles
        .iter()
        .map(|&p| empirical_quantile(&sample, p).expect("non-empty"))
        .collect();
    let population_curve = weighted_quantiles(&weighted, percentiles).expect("non-empty");
    Ok(RasterCurves {
        percentiles: percentiles.to_vec(),
        sample: sample_curve,
        population: population_curve,
        sample_missing,
        population_missing,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub am: f64,
    pub sd: f64,
    pub gm: f64,
    pub gsd: f64,
    /// Non-positive values left out of GM and GSD.
    pub non_positive: usize,
    pub percentiles: Vec<(f64, f64)>,
    /// Fraction of values strictly above each threshold.
    pub exceedance: Vec<(f64, f64)>,
}

pub fn descriptive_stats(values: &[f64], thresholds: &[f64], percentiles: &[f64]) -> Result<DescriptiveStats> {
    if values.is_empty() {
        return Err(Error::InvalidInput("descriptive statistics of an empty sample".into()));
    }
    crate::qrf::validate_levels(percentiles)?;
    // logs relative to the first positive value, so a constant sample has GM equal to it
    let reference = values.iter().copied().find(|&v| v > 0.0);
    let logs: Vec<f64> = match reference {
        Some(r) => values.iter().filter(|&&v| v > 0.0).map(|v| (v / r).ln()).collect(),
        None => Vec::new(),
    };
    let (gm, gsd) = match reference {
        Some(r) => (r * mean(&logs).exp(), sample_sd(&logs).exp()),
        None => (f64::NAN, f64::NAN),
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Ok(DescriptiveStats {
        n: values.len(),
        am: mean(values),
        sd: sample_sd(values),
        gm,
        gsd,
        non_positive: values.len() - logs.len(),
        percentiles: percentiles
            .iter()
            .map(|&p| (p, empirical_quantile(&sorted, p).expect("non-empty")))
            .collect(),
        exceedance: thresholds
            .iter()
            .map(|&t| (t, values.iter().filter(|&&v| v > t).count() as f64 / n))
            .collect(),
    })
}
