use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{r_squared, rmse};

/// Nominal 80 % and 50 % bands.
pub const DEFAULT_BANDS: [(f64, f64); 2] = [(0.10, 0.90), (0.25, 0.75)];

/// Share of observations inside `[q(lower), q(upper)]`, below and above it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiCoverage {
    pub lower: f64,
    pub upper: f64,
    pub n_inside: usize,
    pub n_below: usize,
    pub n_above: usize,
    pub inside: f64,
    pub below: f64,
    pub above: f64,
}

impl PiCoverage {
    pub fn nominal(&self) -> f64 {
        self.upper - self.lower
    }
}

fn check_aligned(levels: &[f64], quantiles: &[Vec<f64>], observed: &[f64]) -> Result<()> {
    if observed.is_empty() {
        return Err(Error::InvalidInput("coverage of an empty prediction set".into()));
    }
    if quantiles.len() != observed.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} observations",
            quantiles.len(),
            observed.len()
        )));
    }
    if let Some(q) = quantiles.iter().find(|q| q.len() != levels.len()) {
        return Err(Error::InvalidInput(format!("{} quantiles for {} levels", q.len(), levels.len())));
    }
    Ok(())
}

/// Fraction of observations at or below the predicted quantile, per level.
pub fn qcp(levels: &[f64], quantiles: &[Vec<f64>], observed: &[f64]) -> Result<Vec<f64>> {
    check_aligned(levels, quantiles, observed)?;
    let n = observed.len() as f64;
    Ok((0..levels.len())
        .map(|j| quantiles.iter().zip(observed).filter(|(q, &y)| y <= q[j]).count() as f64 / n)
        .collect())
}

fn level_index(levels: &[f64], p: f64) -> Result<usize> {
    levels
        .iter()
        .position(|&l| l == p)
        .ok_or_else(|| Error::InvalidParameter(format!("level {p} not among predicted levels")))
}

pub fn pi_coverage(
    lower: f64,
    upper: f64,
    levels: &[f64],
    quantiles: &[Vec<f64>],
    observed: &[f64],
) -> Result<PiCoverage> {
    if lower >= upper {
        return Err(Error::InvalidParameter(format!("interval [{lower}, {upper}] is empty")));
    }
    check_aligned(levels, quantiles, observed)?;
    let (lo, hi) = (level_index(levels, lower)?, level_index(levels, upper)?);
    let (mut below, mut above) = (0, 0);
    for (q, &y) in quantiles.iter().zip(observed) {
        if y < q[lo] {
            below += 1;
        } else if y > q[hi] {
            above += 1;
        }
    }
    let n = observed.len();
    let inside = n - below - above;
    let frac = |c: usize| c as f64 / n as f64;
    Ok(PiCoverage {
        lower,
        upper,
        n_inside: inside,
        n_below: below,
        n_above: above,
        inside: frac(inside),
        below: frac(below),
        above: frac(above),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub rmse: f64,
    pub r2: f64,
    pub levels: Vec<f64>,
    pub qcp: Vec<f64>,
    pub intervals: Vec<PiCoverage>,
}

impl MetricReport {
    pub fn compute(
        levels: &[f64],
        bands: &[(f64, f64)],
        mean: &[f64],
        quantiles: &[Vec<f64>],
        observed: &[f64],
    ) -> Result<MetricReport> {
        if mean.len() != observed.len() {
            return Err(Error::InvalidInput("mean predictions not aligned with observations".into()));
        }
        Ok(MetricReport {
            n: observed.len(),
            rmse: rmse(mean, observed),
            r2: r_squared(mean, observed),
            levels: levels.to_vec(),
            qcp: qcp(levels, quantiles, observed)?,
            intervals: bands
                .iter()
                .map(|&(lo, hi)| pi_coverage(lo, hi, levels, quantiles, observed))
                .collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LEVELS: [f64; 3] = [0.1, 0.5, 0.9];

    #[test]
    fn wide_predictions_cover_everything() {
        let obs = [1.0, 5.0, 9.0];
        let q = vec![vec![9.0; 3]; 3];
        assert_eq!(qcp(&LEVELS, &q, &obs).unwrap(), vec![1.0; 3]);
        let wide = vec![vec![1.0, 5.0, 9.0]; 3];
        let pi = pi_coverage(0.1, 0.9, &LEVELS, &wide, &obs).unwrap();
        assert_eq!((pi.inside, pi.below, pi.above), (1.0, 0.0, 0.0));
    }

    #[test]
    fn coverage_counts_ties_as_inside() {
        let obs = [1.0, 2.0, 3.0, 4.0];
        let q = vec![vec![2.0, 2.5, 3.0]; 4];
        assert_eq!(qcp(&LEVELS, &q, &obs).unwrap(), vec![0.5, 0.5, 0.75]);
        let pi = pi_coverage(0.1, 0.9, &LEVELS, &q, &obs).unwrap();
        assert_eq!((pi.n_below, pi.n_inside, pi.n_above), (1, 2, 1));
    }

    #[test]
    fn errors() {
        assert!(qcp(&LEVELS, &[], &[]).is_err());
        assert!(pi_coverage(0.9, 0.1, &LEVELS, &[vec![1.0; 3]], &[1.0]).is_err());
        assert!(pi_coverage(0.2, 0.9, &LEVELS, &[vec![1.0; 3]], &[1.0]).is_err());
        assert!(qcp(&LEVELS, &[vec![1.0; 2]], &[1.0]).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let obs = [1.0, 2.0, 4.0];
        let r = MetricReport::compute(&LEVELS, &[(0.1, 0.9)], &obs, &vec![vec![0.0, 1.0, 5.0]; 3], &obs).unwrap();
        assert_eq!((r.rmse, r.r2), (0.0, 1.0));
    }

    proptest! {
        #[test]
        fn qcp_monotone_and_pi_partitions(
            rows in proptest::collection::vec((0.0..100.0f64, 0.0..50.0f64, 0.0..50.0f64, 0.0..100.0f64), 1..60)
        ) {
            let quantiles: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0, r.0 + r.1, r.0 + r.1 + r.2]).collect();
            let observed: Vec<f64> = rows.iter().map(|r| r.3).collect();
            let c = qcp(&LEVELS, &quantiles, &observed).unwrap();
            prop_assert!(c.windows(2).all(|w| w[0] <= w[1]));
            let pi = pi_coverage(0.1, 0.9, &LEVELS, &quantiles, &observed).unwrap();
            prop_assert_eq!(pi.n_inside + pi.n_below + pi.n_above, observed.len());
            prop_assert!((pi.inside + pi.below + pi.above - 1.0).abs() < 1e-15);
        }
    }
}
