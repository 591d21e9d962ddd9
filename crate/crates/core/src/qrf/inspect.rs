//! Model interpretation: permutation importance and partial dependence.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forest::Forest;
use super::schema::TrainingSet;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub predictor: usize,
    pub name: String,
    /// Mean increase in RMSE (Bq/m³) after shuffling the predictor's column.
    pub importance: f64,
}

fn check_schema(forest: &Forest, eval: &TrainingSet) -> Result<()> {
    if forest.schema() != eval.schema() {
        return Err(Error::SchemaMismatch(
            "evaluation set schema differs from the forest's".into(),
        ));
    }
    Ok(())
}

fn mean_predictions(forest: &Forest, data: &TrainingSet) -> Result<Vec<f64>> {
    data.rows()
        .par_iter()
        .map(|x| forest.predict_mean(x))
        .collect()
}

/// Ranked by decreasing importance; ties keep declaration order.
pub fn permutation_importance(
    forest: &Forest,
    eval: &TrainingSet,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<Importance>> {
    check_schema(forest, eval)?;
    if eval.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
    }
    let baseline = stats::rmse(&mean_predictions(forest, eval)?, eval.response());

    let mut ranked = Vec::with_capacity(eval.schema().len());
    for (j, predictor) in eval.schema().predictors().iter().enumerate() {
        let mut increase = 0.0;
        for r in 0..repetitions {
            let mut column = eval.column(j);
            column.shuffle(&mut rng::stream(seed, &[j as u64, r as u64]));
            let shuffled = eval.with_column(j, &column);
            let rmse = stats::rmse(&mean_predictions(forest, &shuffled)?, eval.response());
            increase += rmse - baseline;
        }
        ranked.push(Importance {
            predictor: j,
            name: predictor.name.clone(),
            importance: increase / repetitions as f64,
        });
    }
    ranked.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(ranked)
}

/// Mean prediction over `eval` with `predictor` forced to each grid value.
/// Categorical grids hold level codes.
pub fn partial_dependence(
    forest: &Forest,
    eval: &TrainingSet,
    predictor: usize,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_schema(forest, eval)?;
    if predictor >= eval.schema().len() {
        return Err(Error::InvalidParameter(format!("unknown predictor index {predictor}")));
    }
    if eval.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    grid.iter()
        .map(|&v| {
            let forced = eval.with_column(predictor, &vec![v; eval.len()]);
            let preds = mean_predictions(forest, &forced)?;
            Ok((v, stats::mean(&preds)))
        })
        .collect()
}

/// Every declared level for a categorical predictor; otherwise the observed
/// minimum, deciles and maximum (deduplicated).
pub fn default_grid(eval: &TrainingSet, predictor: usize) -> Result<Vec<f64>> {
    let p = eval
        .schema()
        .get(predictor)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown predictor index {predictor}")))?;
    if let Some(levels) = p.levels() {
        return Ok((0..levels.len()).map(|l| l as f64).collect());
    }
    let mut values: Vec<f64> = eval.column(predictor).into_iter().filter(|v| !v.is_nan()).collect();
    if values.is_empty() {
        return Ok(Vec::new());
    }
    values.sort_by(f64::total_cmp);
    let mut grid: Vec<f64> = (0..=10)
        .map(|d| {
            if d == 0 {
                values[0]
            } else {
                stats::empirical_quantile(&values, d as f64 / 10.0).unwrap()
            }
        })
        .collect();
    grid.dedup();
    Ok(grid)
}
