//! Mergeable per-unit summary of Monte Carlo samples and its finalization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::exact_sum::ExactSum;
use crate::ags::Level;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [100.0, 300.0, 600.0, 1000.0];
pub const DEFAULT_PERCENTILES: [f64; 4] = [0.50, 0.90, 0.95, 0.99];
pub const SUPPRESSED_REASON: &str = "below_population_threshold";

/// Log-spaced bins over `[lo, hi)`; values below `lo` and at or above `hi`
/// go to an underflow and an overflow bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { bins: 2048, lo: 0.1, hi: 1e6 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.bins > 1 << 20 {
            return Err(Error::InvalidParameter(format!("histogram bins {} outside 1..=2^20", self.bins)));
        }
        if !(self.lo > 0.0 && self.hi > self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("histogram range [{}, {}) invalid", self.lo, self.hi)));
        }
        Ok(())
    }

    /// Ratio between the edges of one bin.
    pub fn bin_ratio(&self) -> f64 {
        (self.hi / self.lo).powf(1.0 / self.bins as f64)
    }

    /// 0 is underflow, `bins + 1` overflow.
    pub fn index(&self, x: f64) -> usize {
        if x < self.lo {
            return 0;
        }
        if x >= self.hi {
            return self.bins + 1;
        }
        let t = (x / self.lo).ln() / (self.hi / self.lo).ln();
        1 + ((t * self.bins as f64) as usize).min(self.bins - 1)
    }

    /// Lower and upper edge of a bin.
    pub fn edges(&self, index: usize) -> (f64, f64) {
        if index == 0 {
            return (0.0, self.lo);
        }
        if index > self.bins {
            return (self.hi, f64::INFINITY);
        }
        let r = self.bin_ratio();
        (self.lo * r.powi(index as i32 - 1), self.lo * r.powi(index as i32))
    }

    /// Geometric midpoint of a bin; the range ends stand in for the open bins.
    pub fn midpoint(&self, index: usize) -> f64 {
        match index {
            0 => self.lo,
            i if i > self.bins => self.hi,
            i => {
                let (a, b) = self.edges(i);
                (a * b).sqrt()
            }
        }
    }
}

/// What an accumulator records besides the moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummarySpec {
    pub thresholds: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub histogram: HistogramSpec,
}

impl Default for SummarySpec {
    fn default() -> Self {
        SummarySpec {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            percentiles: DEFAULT_PERCENTILES.to_vec(),
            histogram: HistogramSpec::default(),
        }
    }
}

impl SummarySpec {
    pub fn validate(&self) -> Result<()> {
        self.histogram.validate()?;
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) || self.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("thresholds must be finite and strictly increasing".into()));
        }
        if !self.percentiles.windows(2).all(|w| w[0] < w[1])
            || self.percentiles.iter().any(|p| !(*p > 0.0 && *p < 1.0))
        {
            return Err(Error::InvalidParameter("percentiles must be strictly increasing in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateAccumulator {
    n: u64,
    sum: ExactSum,
    sum_sq: ExactSum,
    sum_ln: ExactSum,
    sum_ln_sq: ExactSum,
    thresholds: Vec<f64>,
    exceed: Vec<u64>,
    histogram: HistogramSpec,
    /// Sparse: most units touch only a few hundred bins.
    counts: BTreeMap<u32, u64>,
}

impl AggregateAccumulator {
    pub fn new(spec: &SummarySpec) -> Self {
        AggregateAccumulator {
            n: 0,
            sum: ExactSum::new(),
            sum_sq: ExactSum::new(),
            sum_ln: ExactSum::new(),
            sum_ln_sq: ExactSum::new(),
            thresholds: spec.thresholds.clone(),
            exceed: vec![0; spec.thresholds.len()],
            histogram: spec.histogram,
            counts: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, x: f64) -> Result<()> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::InvalidInput(format!("sample value {x} must be positive and finite")));
        }
        let l = x.ln();
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
        self.sum_ln.add(l);
        self.sum_ln_sq.add(l * l);
        for (t, c) in self.thresholds.iter().zip(self.exceed.iter_mut()) {
            if x > *t {
                *c += 1;
            }
        }
        *self.counts.entry(self.histogram.index(x) as u32).or_insert(0) += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &AggregateAccumulator) -> Result<()> {
        if self.thresholds != other.thresholds || self.histogram != other.histogram {
            return Err(Error::InvalidInput("cannot merge accumulators with different thresholds or bins".into()));
        }
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        self.sum_ln.merge(&other.sum_ln);
        self.sum_ln_sq.merge(&other.sum_ln_sq);
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
        for (&bin, &c) in &other.counts {
            *self.counts.entry(bin).or_insert(0) += c;
        }
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn exceed_counts(&self) -> &[u64] {
        &self.exceed
    }

    pub fn histogram(&self) -> &HistogramSpec {
        &self.histogram
    }

    /// Non-empty bins as `(bin index, count)`, ascending.
    pub fn bin_counts(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&b, &c)| (b as usize, c))
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn am(&self) -> f64 {
        self.sum.value() / self.n as f64
    }

    /// Histogram quantile: geometric midpoint of the first bin whose
    /// cumulative count reaches `ceil(p n)`.
    pub fn percentile(&self, p: f64) -> Option<f64> {
        if self.n == 0 {
            return None;
        }
        let rank = ((p * self.n as f64 - 1e-9).ceil() as u64).clamp(1, self.n);
        let mut cum = 0;
        for (&bin, &c) in &self.counts {
            cum += c;
            if cum >= rank {
                return Some(self.histogram.midpoint(bin as usize));
            }
        }
        None
    }

    /// Statistics for one key, or a suppression record when fewer than
    /// `min_samples` values were accumulated.
    pub fn finalize(
        &self,
        key: &str,
        level: Level,
        factor: f64,
        percentiles: &[f64],
        min_samples: u64,
    ) -> Outcome {
        if self.n < min_samples.max(1) {
            return Outcome::Suppressed(Suppressed {
                key: key.to_string(),
                level,
                n: self.n,
                reason: SUPPRESSED_REASON.to_string(),
            });
        }
        let n = self.n as f64;
        let spread = |s: &ExactSum, s2: &ExactSum| -> f64 {
            if self.n < 2 {
                return 0.0;
            }
            let (a, b) = (s.value(), s2.value());
            ((b - a * a / n) / (n - 1.0)).max(0.0).sqrt()
        };
        let log_sd = spread(&self.sum_ln, &self.sum_ln_sq);
        Outcome::Stats(AggregateStats {
            key: key.to_string(),
            level,
            n: self.n,
            population: n / factor,
            am: self.sum.value() / n,
            sd: spread(&self.sum, &self.sum_sq),
            gm: (self.sum_ln.value() / n).exp(),
            gsd: log_sd.exp(),
            percentiles: percentiles
                .iter()
                .map(|&p| PercentileValue { p, value: self.percentile(p).expect("n > 0") })
                .collect(),
            exceedance: self
                .thresholds
                .iter()
                .zip(&self.exceed)
                .map(|(&threshold, &c)| Exceedance { threshold, probability: c as f64 / n })
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileValue {
    pub p: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exceedance {
    pub threshold: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub key: String,
    pub level: Level,
    pub n: u64,
    pub population: f64,
    pub am: f64,
    pub sd: f64,
    pub gm: f64,
    pub gsd: f64,
    pub percentiles: Vec<PercentileValue>,
    pub exceedance: Vec<Exceedance>,
}

impl AggregateStats {
    pub fn percentile(&self, p: f64) -> Option<f64> {
        self.percentiles.iter().find(|v| (v.p - p).abs() < 1e-12).map(|v| v.value)
    }

    pub fn exceedance_at(&self, threshold: f64) -> Option<f64> {
        self.exceedance.iter().find(|e| e.threshold == threshold).map(|e| e.probability)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suppressed {
    pub key: String,
    pub level: Level,
    pub n: u64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Stats(AggregateStats),
    Suppressed(Suppressed),
}
