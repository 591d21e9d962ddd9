//! Prefix roll-up of municipality accumulators.

use std::collections::BTreeMap;

use super::accumulator::{AggregateAccumulator, Outcome, SummarySpec};
use crate::ags::{Ags, Level};
use crate::error::Result;

/// Accumulators per level, keyed by AGS prefix (empty for national).
#[derive(Clone, Debug, PartialEq)]
pub struct LevelAccumulators {
    pub levels: BTreeMap<Level, BTreeMap<String, AggregateAccumulator>>,
}

impl LevelAccumulators {
    pub fn get(&self, level: Level) -> &BTreeMap<String, AggregateAccumulator> {
        &self.levels[&level]
    }

    /// Finalized outcomes in level order, keys ascending within a level.
    pub fn finalize(&self, factor: f64, percentiles: &[f64], min_samples: u64) -> Vec<Outcome> {
        Level::ALL
            .iter()
            .flat_map(|level| {
                self.get(*level)
                    .iter()
                    .map(move |(key, acc)| acc.finalize(key, *level, factor, percentiles, min_samples))
            })
            .collect()
    }
}

/// Every municipality merges into exactly one group per level. The national
/// level always has an entry, empty when there are no municipalities.
pub fn aggregate_levels(
    municipalities: &BTreeMap<Ags, AggregateAccumulator>,
    spec: &SummarySpec,
) -> Result<LevelAccumulators> {
    let mut levels = BTreeMap::new();
    for level in Level::ALL {
        let mut groups: BTreeMap<String, AggregateAccumulator> = BTreeMap::new();
        if level == Level::National {
            groups.insert(String::new(), AggregateAccumulator::new(spec));
        }
        for (ags, acc) in municipalities {
            groups
                .entry(ags.prefix(level).to_string())
                .or_insert_with(|| AggregateAccumulator::new(spec))
                .merge(acc)?;
        }
        levels.insert(level, groups);
    }
    Ok(LevelAccumulators { levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::accumulator::DEFAULT_PERCENTILES;

    fn acc(values: impl IntoIterator<Item = f64>) -> AggregateAccumulator {
        let mut a = AggregateAccumulator::new(&SummarySpec::default());
        values.into_iter().for_each(|v| a.push(v).unwrap());
        a
    }

    #[test]
    fn single_municipality_identical_at_all_levels() {
        let mut m = BTreeMap::new();
        m.insert("05315000".parse::<Ags>().unwrap(), acc((1..=50).map(f64::from)));
        let lv = aggregate_levels(&m, &SummarySpec::default()).unwrap();
        let out = lv.finalize(10.0, &DEFAULT_PERCENTILES, 1);
        assert_eq!(out.len(), 4);
        let stats: Vec<_> = out
            .into_iter()
            .map(|o| match o {
                Outcome::Stats(s) => s,
                Outcome::Suppressed(s) => panic!("{s:?}"),
            })
            .collect();
        assert_eq!(stats.iter().map(|s| s.key.as_str()).collect::<Vec<_>>(), ["05315000", "05315", "05", ""]);
        for s in &stats[1..] {
            assert_eq!((s.am, s.sd, s.gm, s.gsd, &s.percentiles, &s.exceedance), (stats[0].am, stats[0].sd, stats[0].gm, stats[0].gsd, &stats[0].percentiles, &stats[0].exceedance));
        }
    }

    #[test]
    fn district_is_merge_of_its_municipalities() {
        let a = acc([10.0, 200.0, 350.0]);
        let b = acc([40.0, 700.0]);
        let c = acc([1200.0]);
        let mut m = BTreeMap::new();
        m.insert("01001001".parse::<Ags>().unwrap(), a.clone());
        m.insert("01001002".parse::<Ags>().unwrap(), b.clone());
        m.insert("01002001".parse::<Ags>().unwrap(), c.clone());
        let lv = aggregate_levels(&m, &SummarySpec::default()).unwrap();
        let mut ab = a.clone();
        ab.merge(&b).unwrap();
        assert_eq!(lv.get(Level::District)["01001"], ab);
        assert_eq!(lv.get(Level::District)["01002"], c);
        assert_eq!(lv.get(Level::State)["01"].n(), 6);
        assert_eq!(lv.get(Level::National)[""].n(), 6);
    }

    #[test]
    fn empty_input_has_empty_national() {
        let lv = aggregate_levels(&BTreeMap::new(), &SummarySpec::default()).unwrap();
        assert!(lv.get(Level::Municipality).is_empty());
        assert_eq!(lv.get(Level::National)[""].n(), 0);
    }
}
