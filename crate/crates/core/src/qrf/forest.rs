use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schema::{FeatureVector, Schema, TrainingSet};
use super::tree::{grow, GrowConfig, SplitStrategy, Tree};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::CDF_TOLERANCE;

/// Percentile levels predicted per dwelling floor.
pub const DEFAULT_LEVELS: [f64; 9] = [0.10, 0.25, 0.50, 0.75, 0.80, 0.85, 0.90, 0.95, 0.98];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub ntree: usize,
    pub mtry: usize,
    /// Nodes with fewer rows are not split.
    pub min_node_size: usize,
    /// Each child of a split must receive at least this many rows.
    pub min_leaf_size: usize,
    /// Per-tree subsample fraction, drawn without replacement.
    pub subsample: f64,
    pub split: SplitStrategy,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            ntree: 500,
            mtry: 4,
            min_node_size: 20,
            min_leaf_size: 7,
            subsample: 0.632,
            split: SplitStrategy::TwoStage,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_predictors: usize) -> Result<()> {
        if self.ntree == 0 {
            return Err(Error::InvalidParameter("ntree must be >= 1".into()));
        }
        if self.mtry == 0 || self.mtry > n_predictors {
            return Err(Error::InvalidParameter(format!(
                "mtry {} outside 1..={n_predictors}",
                self.mtry
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample fraction {} outside (0, 1]",
                self.subsample
            )));
        }
        if self.min_node_size == 0 || self.min_leaf_size == 0 {
            return Err(Error::InvalidParameter(
                "min_node_size and min_leaf_size must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_mtry(&self, mtry: usize) -> Self {
        ForestParams { mtry, ..self.clone() }
    }
}

/// Predicted conditional quantiles in Bq/m³ at increasing probability levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePrediction {
    pub levels: Vec<f64>,
    pub values: Vec<f64>,
}

impl QuantilePrediction {
    pub fn get(&self, level: f64) -> Option<f64> {
        self.levels
            .iter()
            .position(|&l| l == level)
            .map(|i| self.values[i])
    }
}

pub fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter("no probability levels".into()));
    }
    if levels.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidParameter("levels must lie in (0, 1)".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("levels must be strictly increasing".into()));
    }
    Ok(())
}

/// Quantile regression forest. Immutable after fitting; all prediction
/// methods take `&self` and are safe to call concurrently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    schema: Schema,
    params: ForestParams,
    seed: u64,
    trees: Vec<Tree>,
    response: Vec<f64>,
    /// Training rows sorted by response (ties by index).
    order: Vec<u32>,
}

impl Forest {
    /// Grows `params.ntree` trees, each on its own subsample and random stream
    /// keyed by `(seed, tree index)`; the result does not depend on the number
    /// of worker threads.
    pub fn fit(train: &TrainingSet, params: &ForestParams, seed: u64) -> Result<Forest> {
        if train.is_empty() {
            return Err(Error::InvalidInput("empty training set".into()));
        }
        params.validate(train.schema().len())?;
        let n = train.len();
        let take = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let cfg = GrowConfig {
            mtry: params.mtry,
            min_node_size: params.min_node_size,
            min_leaf_size: params.min_leaf_size,
            strategy: params.split,
        };
        let trees = (0..params.ntree)
            .into_par_iter()
            .map(|t| {
                let mut stream = rng::stream(seed, &[t as u64]);
                let mut rows: Vec<u32> = index::sample(&mut stream, n, take)
                    .into_iter()
                    .map(|i| i as u32)
                    .collect();
                rows.sort_unstable();
                grow(train, rows, &cfg, &mut stream)
            })
            .collect();
        Ok(Self::from_parts(
            train.schema().clone(),
            params.clone(),
            seed,
            trees,
            train.response().to_vec(),
        ))
    }

    /// Assembles a forest from already-built trees.
    pub fn from_parts(
        schema: Schema,
        params: ForestParams,
        seed: u64,
        trees: Vec<Tree>,
        response: Vec<f64>,
    ) -> Forest {
        let mut order: Vec<u32> = (0..response.len() as u32).collect();
        order.sort_by(|&a, &b| {
            response[a as usize]
                .total_cmp(&response[b as usize])
                .then(a.cmp(&b))
        });
        Forest {
            schema,
            params,
            seed,
            trees,
            response,
            order,
        }
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn n_train(&self) -> usize {
        self.response.len()
    }

    /// Whether any tree splits on `predictor`.
    pub fn uses_predictor(&self, predictor: usize) -> bool {
        self.trees
            .iter()
            .any(|t| t.split_predictors().any(|p| p == predictor))
    }

    /// Dense weight vector over training rows: each tree hands
    /// `mass / (ntree * leaf_size)` to every row of each leaf the query reaches.
    pub fn weights(&self, x: &FeatureVector) -> Result<Vec<f64>> {
        self.schema.check(x)?;
        let mut weights = vec![0.0; self.response.len()];
        let mut leaves = Vec::new();
        let per_tree = 1.0 / self.trees.len() as f64;
        for tree in &self.trees {
            tree.leaves(x, &mut leaves);
            for &(leaf, mass) in &leaves {
                let rows = tree.leaf_rows(leaf);
                let w = per_tree * mass / rows.len() as f64;
                for &r in rows {
                    weights[r as usize] += w;
                }
            }
        }
        Ok(weights)
    }

    /// Smallest training response whose weighted CDF reaches each level.
    pub fn predict_quantiles(&self, x: &FeatureVector, levels: &[f64]) -> Result<QuantilePrediction> {
        validate_levels(levels)?;
        let weights = self.weights(x)?;
        Ok(self.quantiles_from_weights(&weights, levels))
    }

    pub fn predict_mean(&self, x: &FeatureVector) -> Result<f64> {
        let weights = self.weights(x)?;
        Ok(self.mean_from_weights(&weights))
    }

    /// Mean and quantiles from one weight computation.
    pub fn predict(&self, x: &FeatureVector, levels: &[f64]) -> Result<(f64, QuantilePrediction)> {
        validate_levels(levels)?;
        let weights = self.weights(x)?;
        Ok((
            self.mean_from_weights(&weights),
            self.quantiles_from_weights(&weights, levels),
        ))
    }

    /// Accumulated as deviations from the smallest response so that a
    /// constant response comes back exactly.
    fn mean_from_weights(&self, weights: &[f64]) -> f64 {
        let base = self.order.first().map_or(0.0, |&r| self.response[r as usize]);
        let total: f64 = weights.iter().sum();
        let shift: f64 = weights
            .iter()
            .zip(&self.response)
            .map(|(w, y)| w * (y - base))
            .sum();
        base + shift / total
    }

    fn quantiles_from_weights(&self, weights: &[f64], levels: &[f64]) -> QuantilePrediction {
        let mut values = Vec::with_capacity(levels.len());
        let mut cum = 0.0;
        let mut last = f64::NAN;
        let mut next = 0;
        for &r in &self.order {
            let w = weights[r as usize];
            if w <= 0.0 {
                continue;
            }
            cum += w;
            last = self.response[r as usize];
            while next < levels.len() && cum >= levels[next] - CDF_TOLERANCE {
                values.push(last);
                next += 1;
            }
            if next == levels.len() {
                break;
            }
        }
        // Rounding can leave the total a hair below the top level.
        values.resize(levels.len(), last);
        QuantilePrediction {
            levels: levels.to_vec(),
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrf::schema::Predictor;
    use crate::qrf::tree::Node;

    fn one_col(values: &[f64], y: &[f64]) -> TrainingSet {
        let schema = Schema::new(vec![Predictor::numeric("x")]).unwrap();
        let rows = values.iter().map(|&v| FeatureVector::new(vec![v])).collect();
        TrainingSet::without_locations(schema, rows, y.to_vec()).unwrap()
    }

    fn single_leaf(y: &[f64]) -> Forest {
        let schema = Schema::new(vec![Predictor::numeric("x")]).unwrap();
        let rows: Vec<u32> = (0..y.len() as u32).collect();
        let tree = Tree::from_nodes(vec![Node::Leaf { rows: rows.clone() }], rows);
        Forest::from_parts(schema, ForestParams::default().with_mtry(1), 0, vec![tree], y.to_vec())
    }

    #[test]
    fn single_leaf_quantiles_and_mean() {
        let f = single_leaf(&[40.0, 10.0, 30.0, 20.0]);
        let x = FeatureVector::new(vec![0.0]);
        let q = f.predict_quantiles(&x, &[0.10, 0.50, 0.75]).unwrap();
        assert_eq!(q.values, vec![10.0, 20.0, 30.0]);
        assert_eq!(f.predict_mean(&x).unwrap(), 25.0);
    }

    #[test]
    fn constant_response_forest() {
        let t = one_col(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[42.0; 6]);
        let params = ForestParams {
            ntree: 10,
            mtry: 1,
            min_node_size: 1,
            min_leaf_size: 1,
            ..Default::default()
        };
        let f = Forest::fit(&t, &params, 1).unwrap();
        for x in [-5.0, 3.3, 100.0] {
            let x = FeatureVector::new(vec![x]);
            let q = f.predict_quantiles(&x, &DEFAULT_LEVELS).unwrap();
            assert!(q.values.iter().all(|&v| v == 42.0));
            assert_eq!(f.predict_mean(&x).unwrap(), 42.0);
        }
    }

    #[test]
    fn parameter_errors() {
        let t = one_col(&[1.0, 2.0], &[1.0, 2.0]);
        let bad_mtry = ForestParams { mtry: 2, ..Default::default() };
        assert!(matches!(Forest::fit(&t, &bad_mtry, 0), Err(Error::InvalidParameter(_))));
        for subsample in [0.0, 1.5, f64::NAN] {
            let p = ForestParams { mtry: 1, subsample, ..Default::default() };
            assert!(Forest::fit(&t, &p, 0).is_err());
        }
        let empty = one_col(&[], &[]);
        let p = ForestParams { mtry: 1, ..Default::default() };
        assert!(matches!(Forest::fit(&empty, &p, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bad_levels_rejected() {
        let f = single_leaf(&[1.0, 2.0]);
        let x = FeatureVector::new(vec![0.0]);
        assert!(f.predict_quantiles(&x, &[0.5, 0.5]).is_err());
        assert!(f.predict_quantiles(&x, &[0.0]).is_err());
        assert!(f.predict_quantiles(&x, &[1.0]).is_err());
        assert!(f.predict_quantiles(&FeatureVector::new(vec![]), &[0.5]).is_err());
    }

    #[test]
    fn deterministic_across_thread_pools() {
        let xs: Vec<f64> = (0..200).map(|i| (i * 37 % 101) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.7).sin().abs() * 100.0 + x).collect();
        let t = one_col(&xs, &ys);
        let params = ForestParams { ntree: 40, mtry: 1, ..Default::default() };
        let fit_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| Forest::fit(&t, &params, 99).unwrap())
        };
        assert_eq!(fit_with(1), fit_with(4));
    }
}
