use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldAssignment;
use super::metrics::{MetricReport, DEFAULT_BANDS};
use crate::error::{Error, Result};
use crate::qrf::{validate_levels, Forest, ForestParams, TrainingSet, DEFAULT_LEVELS};
use crate::rng;
use crate::stats::rmse;

/// What a cross-validation run predicts and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvSettings {
    pub levels: Vec<f64>,
    pub bands: Vec<(f64, f64)>,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings { levels: DEFAULT_LEVELS.to_vec(), bands: DEFAULT_BANDS.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutPrediction {
    pub row: usize,
    pub fold: usize,
    pub observed: f64,
    pub mean: f64,
    pub quantiles: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub pooled: MetricReport,
    pub per_fold: Vec<MetricReport>,
    /// In row order.
    pub predictions: Vec<HeldOutPrediction>,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    rng::derive_seed(seed, &[0xC5, fold as u64])
}

fn fit_complement(train: &TrainingSet, folds: &FoldAssignment, fold: usize, params: &ForestParams, seed: u64) -> Result<(Forest, Vec<usize>)> {
    let complement = train.subset(&folds.train_rows(fold));
    let y = complement.response();
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::Degenerate(format!("training complement of fold {fold} has zero response variance")));
    }
    let forest = Forest::fit(&complement, params, fold_seed(seed, fold))?;
    Ok((forest, folds.test_rows(fold)))
}

fn check_cover(train: &TrainingSet, folds: &FoldAssignment) -> Result<()> {
    if folds.len() != train.len() {
        return Err(Error::InvalidInput(format!(
            "fold assignment covers {} rows, training set has {}",
            folds.len(),
            train.len()
        )));
    }
    Ok(())
}

/// Fits one forest per fold on the remaining folds and predicts the held-out
/// rows. Folds run in parallel; fold `f` uses a seed derived from `(seed, f)`.
pub fn cross_validate(
    train: &TrainingSet,
    folds: &FoldAssignment,
    params: &ForestParams,
    settings: &CvSettings,
    seed: u64,
) -> Result<CvResult> {
    check_cover(train, folds)?;
    validate_levels(&settings.levels)?;
    let per_fold: Vec<Vec<HeldOutPrediction>> = (0..folds.k())
        .into_par_iter()
        .map(|fold| {
            let (forest, test) = fit_complement(train, folds, fold, params, seed)?;
            test.into_par_iter()
                .map(|row| {
                    let (mean, q) = forest.predict(train.row(row), &settings.levels)?;
                    Ok(HeldOutPrediction {
                        row,
                        fold,
                        observed: train.response()[row],
                        mean,
                        quantiles: q.values,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let report = |preds: &[&HeldOutPrediction]| {
        let mean: Vec<f64> = preds.iter().map(|p| p.mean).collect();
        let q: Vec<Vec<f64>> = preds.iter().map(|p| p.quantiles.clone()).collect();
        let y: Vec<f64> = preds.iter().map(|p| p.observed).collect();
        MetricReport::compute(&settings.levels, &settings.bands, &mean, &q, &y)
    };
    let fold_reports = per_fold
        .iter()
        .map(|preds| report(&preds.iter().collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let mut predictions: Vec<HeldOutPrediction> = per_fold.into_iter().flatten().collect();
    predictions.sort_by_key(|p| p.row);
    let pooled = report(&predictions.iter().collect::<Vec<_>>())?;
    Ok(CvResult { pooled, per_fold: fold_reports, predictions })
}

/// Pooled held-out RMSE of the mean prediction, averaged over repeated fold
/// assignments. Cheaper than [`cross_validate`]: no quantiles.
pub fn cv_rmse(train: &TrainingSet, folds: &[FoldAssignment], params: &ForestParams, seed: u64) -> Result<f64> {
    if folds.is_empty() {
        return Err(Error::InvalidParameter("no fold assignment given".into()));
    }
    let mut total = 0.0;
    for (repeat, assignment) in folds.iter().enumerate() {
        check_cover(train, assignment)?;
        let repeat_seed = rng::derive_seed(seed, &[repeat as u64]);
        let per_fold: Vec<Vec<(usize, f64)>> = (0..assignment.k())
            .into_par_iter()
            .map(|fold| {
                let (forest, test) = fit_complement(train, assignment, fold, params, repeat_seed)?;
                test.into_iter()
                    .map(|row| Ok((row, forest.predict_mean(train.row(row))?)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut preds: Vec<(usize, f64)> = per_fold.into_iter().flatten().collect();
        preds.sort_by_key(|p| p.0);
        let predicted: Vec<f64> = preds.iter().map(|p| p.1).collect();
        total += rmse(&predicted, train.response());
    }
    Ok(total / folds.len() as f64)
}

/// `repeats` fold assignments with seeds derived from `seed`; the first one
/// uses `seed` itself.
pub fn repeated_folds(
    locations: &[[f64; 2]],
    block_size: f64,
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FoldAssignment>> {
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be >= 1".into()));
    }
    (0..repeats)
        .map(|r| {
            let s = if r == 0 { seed } else { rng::derive_seed(seed, &[0xBEEF, r as u64]) };
            super::folds::make_spatial_folds(locations, block_size, k, s)
        })
        .collect()
}
