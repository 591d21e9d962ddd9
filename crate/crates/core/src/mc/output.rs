//! Stats, suppression, shard and fit files.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::accumulator::{AggregateAccumulator, AggregateStats, Exceedance, Outcome, PercentileValue, Suppressed, SummarySpec};
use super::sampling::{FitRow, ShardBlock};
use crate::ags::{Ags, Level};
use crate::error::{Error, Result};

pub const SHARD_HEADER: [&str; 2] = ["ags", "value_bq_m3"];
pub const FIT_HEADER: [&str; 6] = ["building_id", "floor", "meanlog", "sdlog", "offset", "dropped"];
pub const SUPPRESSED_HEADER: [&str; 4] = ["key", "level", "n", "reason"];

/// Short decimal label: 0.95 * 100 prints as `95`, not `95.00000000000001`.
fn label(x: f64) -> String {
    let r = (x * 1e6).round() / 1e6;
    format!("{r}")
}

pub fn percentile_column(p: f64) -> String {
    format!("p{}", label(p * 100.0))
}

pub fn exceedance_column(threshold: f64) -> String {
    format!("exc_{}", label(threshold))
}

pub fn stats_file_name(level: Level) -> String {
    format!("stats_{}.csv", level.name())
}

pub fn stats_header(percentiles: &[f64], thresholds: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["key", "level", "n", "population", "am", "sd", "gm", "gsd"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(percentiles.iter().map(|&p| percentile_column(p)));
    h.extend(thresholds.iter().map(|&t| exceedance_column(t)));
    h
}

pub fn write_stats<W: Write>(rows: &[AggregateStats], spec: &SummarySpec, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(stats_header(&spec.percentiles, &spec.thresholds))?;
    for s in rows {
        let mut rec = vec![
            s.key.clone(),
            s.level.name().to_string(),
            s.n.to_string(),
            s.population.to_string(),
            s.am.to_string(),
            s.sd.to_string(),
            s.gm.to_string(),
            s.gsd.to_string(),
        ];
        rec.extend(s.percentiles.iter().map(|p| p.value.to_string()));
        rec.extend(s.exceedance.iter().map(|e| e.probability.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush().map_err(|e| Error::io("<stats>", e))
}

fn parse_column(name: &str, prefix: &str, scale: f64, path: &Path) -> Result<f64> {
    name.strip_prefix(prefix)
        .and_then(|v| v.parse::<f64>().ok())
        .map(|v| v / scale)
        .ok_or_else(|| Error::parse(path, format!("unexpected stats column `{name}`")))
}

/// Reads a stats file; percentile and threshold columns are recovered from
/// the header.
pub fn read_stats_from<R: Read>(reader: R, path: &Path) -> Result<Vec<AggregateStats>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let fixed = ["key", "level", "n", "population", "am", "sd", "gm", "gsd"];
    if header.len() < fixed.len() || header[..fixed.len()] != fixed {
        return Err(Error::parse(path, format!("stats header must start with {}", fixed.join(","))));
    }
    let mut percentiles = Vec::new();
    let mut thresholds = Vec::new();
    for name in &header[fixed.len()..] {
        if name.starts_with("exc_") {
            thresholds.push(parse_column(name, "exc_", 1.0, path)?);
        } else if thresholds.is_empty() {
            percentiles.push(parse_column(name, "p", 100.0, path)?);
        } else {
            return Err(Error::parse(path, format!("percentile column `{name}` after exceedance columns")));
        }
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| Error::parse(path, format!("row {row}: bad number `{}`", &rec[j])))
        };
        let level: Level = serde_json::from_value(serde_json::Value::String(rec[1].to_string()))
            .map_err(|_| Error::parse(path, format!("row {row}: unknown level `{}`", &rec[1])))?;
        let n = rec[2].parse::<u64>().map_err(|_| Error::parse(path, format!("row {row}: bad n")))?;
        let base = fixed.len();
        out.push(AggregateStats {
            key: rec[0].to_string(),
            level,
            n,
            population: num(3)?,
            am: num(4)?,
            sd: num(5)?,
            gm: num(6)?,
            gsd: num(7)?,
            percentiles: percentiles
                .iter()
                .enumerate()
                .map(|(k, &p)| Ok(PercentileValue { p, value: num(base + k)? }))
                .collect::<Result<_>>()?,
            exceedance: thresholds
                .iter()
                .enumerate()
                .map(|(k, &threshold)| Ok(Exceedance { threshold, probability: num(base + percentiles.len() + k)? }))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

pub fn read_stats(path: &Path) -> Result<Vec<AggregateStats>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_stats_from(file, path)
}

pub fn write_suppressed<W: Write>(rows: &[Suppressed], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUPPRESSED_HEADER)?;
    for s in rows {
        wtr.write_record([s.key.as_str(), s.level.name(), &s.n.to_string(), &s.reason])?;
    }
    wtr.flush().map_err(|e| Error::io("<suppressed>", e))
}

pub fn read_suppressed(path: &Path) -> Result<Vec<Suppressed>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::parse(path, format!("row {}: malformed suppression row", i + 2));
        if rec.len() != SUPPRESSED_HEADER.len() {
            return Err(bad());
        }
        out.push(Suppressed {
            key: rec[0].to_string(),
            level: serde_json::from_value(serde_json::Value::String(rec[1].to_string())).map_err(|_| bad())?,
            n: rec[2].parse().map_err(|_| bad())?,
            reason: rec[3].to_string(),
        });
    }
    Ok(out)
}

/// Splits finalized outcomes into stats rows and suppression rows.
pub fn partition(outcomes: Vec<Outcome>) -> (Vec<AggregateStats>, Vec<Suppressed>) {
    let mut stats = Vec::new();
    let mut suppressed = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Stats(s) => stats.push(s),
            Outcome::Suppressed(s) => suppressed.push(s),
        }
    }
    (stats, suppressed)
}

pub fn write_shard<W: Write>(blocks: &[ShardBlock], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SHARD_HEADER)?;
    for b in blocks {
        for v in &b.values {
            wtr.write_record([b.ags.as_str(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<shard>", e))
}

/// Adds every value of a shard file to its municipality's accumulator.
pub fn accumulate_shard(
    path: &Path,
    spec: &SummarySpec,
    into: &mut BTreeMap<Ags, AggregateAccumulator>,
) -> Result<u64> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    if rdr.headers()?.iter().ne(SHARD_HEADER) {
        return Err(Error::parse(path, format!("expected header {}", SHARD_HEADER.join(","))));
    }
    let mut n = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let ctx = |m: String| Error::parse(path, format!("row {}: {m}", i + 2));
        let ags: Ags = rec.get(0).unwrap_or("").parse().map_err(|e: Error| ctx(e.to_string()))?;
        let v: f64 = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ctx("bad value".into()))?;
        into.entry(ags)
            .or_insert_with(|| AggregateAccumulator::new(spec))
            .push(v)
            .map_err(|e| ctx(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

pub fn write_fits<W: Write>(rows: &[FitRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FIT_HEADER)?;
    for r in rows {
        wtr.write_record([
            r.building_id.clone(),
            r.floor.to_string(),
            r.meanlog.to_string(),
            r.sdlog.to_string(),
            r.offset.to_string(),
            r.dropped.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<fits>", e))
}
