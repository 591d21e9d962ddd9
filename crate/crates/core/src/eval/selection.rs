use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::cv_rmse;
use super::folds::FoldAssignment;
use crate::error::{Error, Result};
use crate::qrf::{ForestParams, TrainingSet};

/// One evaluated predictor subset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FfsStep {
    pub step: usize,
    /// Column indices into the full training set, in evaluation order.
    pub subset: Vec<usize>,
    pub names: Vec<String>,
    pub rmse: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FfsResult {
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    pub rmse: f64,
    pub trace: Vec<FfsStep>,
}

fn subset_rmse(
    train: &TrainingSet,
    subset: &[usize],
    folds: &[FoldAssignment],
    params: &ForestParams,
    seed: u64,
) -> Result<f64> {
    let projected = train.project(subset)?;
    let params = params.with_mtry(params.mtry.min(subset.len()));
    cv_rmse(&projected, folds, &params, seed)
}

fn evaluate_all(
    train: &TrainingSet,
    subsets: &[Vec<usize>],
    folds: &[FoldAssignment],
    params: &ForestParams,
    seed: u64,
) -> Result<Vec<f64>> {
    subsets
        .par_iter()
        .map(|s| subset_rmse(train, s, folds, params, seed))
        .collect()
}

/// Index of the smallest value; the first one wins ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Forward feature selection starting from the best pair of candidates.
/// Every subset is scored by cross-validated RMSE with the same seed; the
/// predictor with the largest decrease is added until nothing improves.
/// `on_step` sees each evaluation as soon as its round completes.
pub fn forward_feature_selection_with(
    train: &TrainingSet,
    candidates: &[usize],
    folds: &[FoldAssignment],
    params: &ForestParams,
    seed: u64,
    mut on_step: impl FnMut(&FfsStep) -> Result<()>,
) -> Result<FfsResult> {
    if candidates.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "forward selection needs at least 2 candidates, got {}",
            candidates.len()
        )));
    }
    let width = train.schema().len();
    for (i, &c) in candidates.iter().enumerate() {
        if c >= width || candidates[..i].contains(&c) {
            return Err(Error::InvalidParameter(format!("invalid or repeated candidate column {c}")));
        }
    }
    let names = |s: &[usize]| -> Vec<String> {
        s.iter().map(|&c| train.schema().predictors()[c].name.clone()).collect()
    };
    let mut trace = Vec::new();
    let mut record = |step: usize, subsets: &[Vec<usize>], scores: &[f64], winner: Option<usize>| -> Result<()> {
        for (i, (s, &r)) in subsets.iter().zip(scores).enumerate() {
            let entry = FfsStep { step, subset: s.clone(), names: names(s), rmse: r, accepted: winner == Some(i) };
            on_step(&entry)?;
            trace.push(entry);
        }
        Ok(())
    };

    let mut pairs = Vec::new();
    for i in 0..candidates.len() {
        for j in i + 1..candidates.len() {
            pairs.push(vec![candidates[i], candidates[j]]);
        }
    }
    let scores = evaluate_all(train, &pairs, folds, params, seed)?;
    let best = argmin(&scores);
    record(0, &pairs, &scores, Some(best))?;
    let mut selected = pairs[best].clone();
    let mut current = scores[best];

    let mut step = 1;
    loop {
        let remaining: Vec<usize> = candidates.iter().copied().filter(|c| !selected.contains(c)).collect();
        if remaining.is_empty() {
            break;
        }
        let subsets: Vec<Vec<usize>> = remaining
            .iter()
            .map(|&c| {
                let mut s = selected.clone();
                s.push(c);
                s
            })
            .collect();
        let scores = evaluate_all(train, &subsets, folds, params, seed)?;
        let best = argmin(&scores);
        let improves = scores[best] < current;
        record(step, &subsets, &scores, improves.then_some(best))?;
        if !improves {
            break;
        }
        selected = subsets[best].clone();
        current = scores[best];
        step += 1;
    }
    Ok(FfsResult { names: names(&selected), selected, rmse: current, trace })
}

pub fn forward_feature_selection(
    train: &TrainingSet,
    candidates: &[usize],
    folds: &[FoldAssignment],
    params: &ForestParams,
    seed: u64,
) -> Result<FfsResult> {
    forward_feature_selection_with(train, candidates, folds, params, seed, |_| Ok(()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: usize,
    /// `(mtry, cross-validated RMSE)` in grid order.
    pub table: Vec<(usize, f64)>,
}

/// Cross-validated RMSE per `mtry`; the smallest RMSE wins, ties go to the
/// smaller `mtry`.
pub fn tune_mtry(
    train: &TrainingSet,
    folds: &[FoldAssignment],
    grid: &[usize],
    params: &ForestParams,
    seed: u64,
) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty mtry grid".into()));
    }
    let p = train.schema().len();
    if let Some(bad) = grid.iter().find(|&&m| m == 0 || m > p) {
        return Err(Error::InvalidParameter(format!("mtry {bad} outside 1..={p}")));
    }
    let table: Vec<(usize, f64)> = grid
        .par_iter()
        .map(|&m| Ok((m, cv_rmse(train, folds, &params.with_mtry(m), seed)?)))
        .collect::<Result<_>>()?;
    let best = table
        .iter()
        .fold(None::<(usize, f64)>, |acc, &(m, r)| match acc {
            Some((bm, br)) if br < r || (br == r && bm <= m) => Some((bm, br)),
            _ => Some((m, r)),
        })
        .expect("non-empty grid")
        .0;
    Ok(TuneResult { best, table })
}
