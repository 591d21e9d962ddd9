//! Three-parameter (shifted) lognormal: fitting to predicted quantiles with a
//! fixed offset, evaluation and sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::qrf::validate_levels;

/// Per-level fit weights for the default nine levels; the upper percentiles
/// count more.
pub const DEFAULT_FIT_WEIGHTS: [f64; 9] = [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 4.0, 4.0];

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Standard-normal quantile, polished by one Newton step on the CDF.
pub fn normal_quantile(p: f64) -> f64 {
    let n = standard_normal();
    let z = n.inverse_cdf(p);
    if !z.is_finite() {
        return z;
    }
    let density = n.pdf(z);
    if density > 0.0 {
        z - (n.cdf(z) - p) / density
    } else {
        z
    }
}

pub fn normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

fn normal_sf(z: f64) -> f64 {
    standard_normal().sf(z)
}

/// `offset + exp(N(meanlog, sdlog²))`; all mass lies strictly above `offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftedLognormal {
    pub meanlog: f64,
    pub sdlog: f64,
    pub offset: f64,
}

impl ShiftedLognormal {
    pub fn new(meanlog: f64, sdlog: f64, offset: f64) -> Result<Self> {
        if !meanlog.is_finite() {
            return Err(Error::InvalidParameter(format!("meanlog {meanlog} not finite")));
        }
        if !(sdlog > 0.0 && sdlog.is_finite()) {
            return Err(Error::InvalidParameter(format!("sdlog {sdlog} must be > 0")));
        }
        if !(offset >= 0.0 && offset.is_finite()) {
            return Err(Error::InvalidParameter(format!("offset {offset} must be >= 0")));
        }
        Ok(ShiftedLognormal { meanlog, sdlog, offset })
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.offset + (self.meanlog + self.sdlog * normal_quantile(p)).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.offset {
            return 0.0;
        }
        normal_cdf(((x - self.offset).ln() - self.meanlog) / self.sdlog)
    }

    /// P(X > threshold).
    pub fn exceedance(&self, threshold: f64) -> f64 {
        if threshold <= self.offset {
            return 1.0;
        }
        normal_sf(((threshold - self.offset).ln() - self.meanlog) / self.sdlog)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= self.offset {
            return 0.0;
        }
        let excess = x - self.offset;
        standard_normal().pdf((excess.ln() - self.meanlog) / self.sdlog) / (self.sdlog * excess)
    }

    pub fn mean(&self) -> f64 {
        self.offset + (self.meanlog + 0.5 * self.sdlog * self.sdlog).exp()
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.sdlog * self.sdlog;
        (s2.exp() - 1.0) * (2.0 * self.meanlog + s2).exp()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.offset + (self.meanlog + self.sdlog * z).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }
}

/// Fitted distribution plus the number of levels dropped because their
/// quantile did not exceed the offset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LognormalFit {
    pub dist: ShiftedLognormal,
    pub dropped: usize,
}

/// Weighted least squares of `ln(q − offset)` on the standard-normal quantile
/// of each level: the intercept is `meanlog`, the slope `sdlog`.
pub fn fit_shifted_lognormal(
    levels: &[f64],
    quantiles: &[f64],
    offset: f64,
    weights: &[f64],
) -> Result<LognormalFit> {
    validate_levels(levels)?;
    if quantiles.len() != levels.len() || weights.len() != levels.len() {
        return Err(Error::InvalidInput(format!(
            "{} levels, {} quantiles, {} weights",
            levels.len(),
            quantiles.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("fit weights must be positive".into()));
    }
    if !(offset >= 0.0 && offset.is_finite()) {
        return Err(Error::InvalidParameter(format!("offset {offset} must be >= 0")));
    }

    let points: Vec<(f64, f64, f64)> = levels
        .iter()
        .zip(quantiles)
        .zip(weights)
        .filter(|((_, q), _)| **q > offset)
        .map(|((p, q), w)| (normal_quantile(*p), (q - offset).ln(), *w))
        .collect();
    let dropped = levels.len() - points.len();
    if points.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} usable levels above offset, need 2",
            points.len()
        )));
    }
    if points.iter().all(|p| p.1 == points[0].1) {
        return Err(Error::Degenerate("sdlog <= 0 (constant quantiles)".into()));
    }

    let total: f64 = points.iter().map(|p| p.2).sum();
    let z_bar = points.iter().map(|p| p.2 * p.0).sum::<f64>() / total;
    let y_bar = points.iter().map(|p| p.2 * p.1).sum::<f64>() / total;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(z, y, w) in &points {
        sxx += w * (z - z_bar) * (z - z_bar);
        sxy += w * (z - z_bar) * (y - y_bar);
    }
    let sdlog = sxy / sxx;
    if !(sdlog > 0.0) {
        return Err(Error::Degenerate(format!("sdlog <= 0 (fitted {sdlog})")));
    }
    let meanlog = y_bar - sdlog * z_bar;
    Ok(LognormalFit {
        dist: ShiftedLognormal::new(meanlog, sdlog, offset)?,
        dropped,
    })
}
