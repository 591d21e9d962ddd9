//! Single regression tree whose leaves keep the indices of the training rows
//! that reached them.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schema::{FeatureVector, TrainingSet};

/// How the split predictor and split point are chosen at a node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    /// Predictor and split point chosen jointly by maximum SSE reduction.
    Cart,
    /// Predictor chosen by strongest absolute Spearman correlation with the
    /// response among the candidates, then the best SSE split point within it.
    #[default]
    TwoStage,
}

impl std::str::FromStr for SplitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cart" => Ok(SplitStrategy::Cart),
            "two-stage" | "two_stage" => Ok(SplitStrategy::TwoStage),
            other => Err(format!("unknown split strategy `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    Threshold { threshold: f64 },
    /// Level codes seen at the node, as bit masks. A level in neither mask was
    /// not present during training and is routed like a missing value.
    Levels { left: u64, right: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Route {
    Left,
    Right,
    Both,
}

impl SplitRule {
    pub(crate) fn route(&self, value: f64) -> Route {
        if value.is_nan() {
            return Route::Both;
        }
        match *self {
            SplitRule::Threshold { threshold } => {
                if value <= threshold {
                    Route::Left
                } else {
                    Route::Right
                }
            }
            SplitRule::Levels { left, right } => {
                let bit = 1u64 << (value as u32);
                if left & bit != 0 {
                    Route::Left
                } else if right & bit != 0 {
                    Route::Right
                } else {
                    Route::Both
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        predictor: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
        /// Training rows sent to each child; weights the two-way descent of
        /// queries with a missing value.
        left_count: usize,
        right_count: usize,
    },
    Leaf {
        rows: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    subsample: Vec<u32>,
}

impl Tree {
    /// Assembles a tree from explicit nodes (root at index 0). Used by tests
    /// and the serializer; the structure is not re-validated beyond bounds.
    pub fn from_nodes(nodes: Vec<Node>, subsample: Vec<u32>) -> Self {
        Tree { nodes, subsample }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Sorted training-row indices this tree was grown on.
    pub fn subsample(&self) -> &[u32] {
        &self.subsample
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Predictors used by any split in this tree.
    pub fn split_predictors(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { predictor, .. } => Some(*predictor),
            Node::Leaf { .. } => None,
        })
    }

    /// Leaves reached by `x` with the fraction of the query's mass each one
    /// receives. Without missing values this is a single leaf with mass 1.
    pub fn leaves(&self, x: &FeatureVector, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let mut stack = vec![(0usize, 1.0f64)];
        while let Some((id, mass)) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { .. } => out.push((id, mass)),
                Node::Split {
                    predictor,
                    rule,
                    left,
                    right,
                    left_count,
                    right_count,
                } => match rule.route(x.values()[*predictor]) {
                    Route::Left => stack.push((*left, mass)),
                    Route::Right => stack.push((*right, mass)),
                    Route::Both => {
                        let total = (*left_count + *right_count) as f64;
                        let to_left = mass * (*left_count as f64) / total;
                        stack.push((*right, mass - to_left));
                        stack.push((*left, to_left));
                    }
                },
            }
        }
    }

    pub(crate) fn leaf_rows(&self, id: usize) -> &[u32] {
        match &self.nodes[id] {
            Node::Leaf { rows } => rows,
            Node::Split { .. } => &[],
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GrowConfig {
    pub mtry: usize,
    pub min_node_size: usize,
    pub min_leaf_size: usize,
    pub strategy: SplitStrategy,
}

struct Candidate {
    rule: SplitRule,
    gain: f64,
}

pub(crate) fn grow<R: Rng>(
    train: &TrainingSet,
    subsample: Vec<u32>,
    cfg: &GrowConfig,
    rng: &mut R,
) -> Tree {
    let width = train.schema().len();
    let mut nodes: Vec<Node> = vec![Node::Leaf { rows: Vec::new() }];
    let mut pending = vec![(0usize, subsample.clone())];

    while let Some((id, rows)) = pending.pop() {
        if rows.len() < cfg.min_node_size || constant_response(train, &rows) {
            nodes[id] = Node::Leaf { rows };
            continue;
        }
        let candidates = index::sample(rng, width, cfg.mtry.min(width)).into_vec();
        let Some((predictor, rule)) = choose_split(train, &rows, &candidates, cfg) else {
            nodes[id] = Node::Leaf { rows };
            continue;
        };

        let (mut left_rows, mut right_rows, mut missing) = (Vec::new(), Vec::new(), Vec::new());
        for &r in &rows {
            match rule.route(train.value(r as usize, predictor)) {
                Route::Left => left_rows.push(r),
                Route::Right => right_rows.push(r),
                Route::Both => missing.push(r),
            }
        }
        // Training rows without a value follow the majority.
        if left_rows.len() >= right_rows.len() {
            left_rows.extend(missing);
        } else {
            right_rows.extend(missing);
        }
        left_rows.sort_unstable();
        right_rows.sort_unstable();

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { rows: Vec::new() });
        nodes.push(Node::Leaf { rows: Vec::new() });
        nodes[id] = Node::Split {
            predictor,
            rule,
            left,
            right,
            left_count: left_rows.len(),
            right_count: right_rows.len(),
        };
        pending.push((right, right_rows));
        pending.push((left, left_rows));
    }

    Tree { nodes, subsample }
}

fn constant_response(train: &TrainingSet, rows: &[u32]) -> bool {
    let y = train.response();
    let first = y[rows[0] as usize];
    rows.iter().all(|&r| y[r as usize] == first)
}

fn choose_split(
    train: &TrainingSet,
    rows: &[u32],
    candidates: &[usize],
    cfg: &GrowConfig,
) -> Option<(usize, SplitRule)> {
    match cfg.strategy {
        SplitStrategy::Cart => {
            let mut best: Option<(usize, Candidate)> = None;
            for &p in candidates {
                if let Some(c) = best_split(train, rows, p, cfg.min_leaf_size) {
                    if best.as_ref().is_none_or(|(_, b)| c.gain > b.gain) {
                        best = Some((p, c));
                    }
                }
            }
            best.map(|(p, c)| (p, c.rule))
        }
        SplitStrategy::TwoStage => {
            let mut scored: Vec<(usize, f64)> = candidates
                .iter()
                .filter_map(|&p| association(train, rows, p).map(|a| (p, a)))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            scored.into_iter().find_map(|(p, _)| {
                best_split(train, rows, p, cfg.min_leaf_size).map(|c| (p, c.rule))
            })
        }
    }
}

/// Observed (value, response) pairs at a node, missing values dropped. For a
/// categorical predictor the value is replaced by the rank of its level's
/// node-local mean response, so both kinds share one ordinal search.
fn ordinal_pairs(train: &TrainingSet, rows: &[u32], predictor: usize) -> (Vec<(f64, f64)>, Option<Vec<usize>>) {
    let y = train.response();
    let categorical = train.schema().predictors()[predictor].levels().map(|l| l.len());
    match categorical {
        None => {
            let pairs = rows
                .iter()
                .map(|&r| (train.value(r as usize, predictor), y[r as usize]))
                .filter(|(x, _)| !x.is_nan())
                .collect();
            (pairs, None)
        }
        Some(n_levels) => {
            let mut sum = vec![0.0; n_levels];
            let mut count = vec![0usize; n_levels];
            for &r in rows {
                let v = train.value(r as usize, predictor);
                if !v.is_nan() {
                    sum[v as usize] += y[r as usize];
                    count[v as usize] += 1;
                }
            }
            let mut present: Vec<usize> = (0..n_levels).filter(|&l| count[l] > 0).collect();
            present.sort_by(|&a, &b| {
                (sum[a] / count[a] as f64)
                    .total_cmp(&(sum[b] / count[b] as f64))
                    .then(a.cmp(&b))
            });
            let mut rank = vec![usize::MAX; n_levels];
            for (i, &l) in present.iter().enumerate() {
                rank[l] = i;
            }
            let pairs = rows
                .iter()
                .filter_map(|&r| {
                    let v = train.value(r as usize, predictor);
                    (!v.is_nan()).then(|| (rank[v as usize] as f64, y[r as usize]))
                })
                .collect();
            (pairs, Some(present))
        }
    }
}

fn best_split(train: &TrainingSet, rows: &[u32], predictor: usize, min_leaf: usize) -> Option<Candidate> {
    let (mut pairs, level_order) = ordinal_pairs(train, rows, predictor);
    let n = pairs.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mean = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;

    // With centered responses the total sum is ~0, so the SSE reduction is
    // sl²/nl + sr²/nr.
    let total: f64 = pairs.iter().map(|p| p.1 - mean).sum();
    let mut left_sum = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for i in 1..n {
        left_sum += pairs[i - 1].1 - mean;
        if i < min_leaf || n - i < min_leaf || pairs[i - 1].0 == pairs[i].0 {
            continue;
        }
        let right_sum = total - left_sum;
        let gain = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64
            - total * total / n as f64;
        if best.is_none_or(|(_, g)| gain > g) {
            best = Some((i, gain));
        }
    }
    let (cut, gain) = best?;
    if !(gain > 0.0) {
        return None;
    }

    let (lo, hi) = (pairs[cut - 1].0, pairs[cut].0);
    let rule = match level_order {
        None => {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            SplitRule::Threshold { threshold }
        }
        Some(order) => {
            let split_rank = lo as usize;
            let (mut left, mut right) = (0u64, 0u64);
            for (rank, &level) in order.iter().enumerate() {
                if rank <= split_rank {
                    left |= 1 << level;
                } else {
                    right |= 1 << level;
                }
            }
            SplitRule::Levels { left, right }
        }
    };
    Some(Candidate { rule, gain })
}

/// |Spearman correlation| between predictor (ordinalised as in
/// [`ordinal_pairs`]) and response; `None` when either side is constant.
fn association(train: &TrainingSet, rows: &[u32], predictor: usize) -> Option<f64> {
    let (pairs, _) = ordinal_pairs(train, rows, predictor);
    if pairs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rx = average_ranks(&xs);
    let ry = average_ranks(&ys);
    pearson(&rx, &ry).map(f64::abs)
}

pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qrf::schema::{Predictor, Schema};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(strategy: SplitStrategy) -> GrowConfig {
        GrowConfig {
            mtry: 2,
            min_node_size: 2,
            min_leaf_size: 1,
            strategy,
        }
    }

    fn step_data() -> TrainingSet {
        let schema = Schema::new(vec![
            Predictor::numeric("x"),
            Predictor::categorical("c", ["a", "b", "c"]),
        ])
        .unwrap();
        let rows = (0..8)
            .map(|i| FeatureVector::new(vec![i as f64, (i % 3) as f64]))
            .collect();
        let y = (0..8).map(|i| if i < 4 { 10.0 } else { 50.0 }).collect();
        TrainingSet::without_locations(schema, rows, y).unwrap()
    }

    #[test]
    fn leaves_partition_the_subsample() {
        for strategy in [SplitStrategy::Cart, SplitStrategy::TwoStage] {
            let t = step_data();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let tree = grow(&t, (0..8).collect(), &cfg(strategy), &mut rng);
            let mut all: Vec<u32> = tree
                .nodes()
                .iter()
                .filter_map(|n| match n {
                    Node::Leaf { rows } => {
                        assert!(!rows.is_empty());
                        Some(rows.clone())
                    }
                    _ => None,
                })
                .flatten()
                .collect();
            all.sort_unstable();
            assert_eq!(all, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn step_is_found_at_midpoint() {
        let t = step_data();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = grow(&t, (0..8).collect(), &cfg(SplitStrategy::Cart), &mut rng);
        match &tree.nodes()[0] {
            Node::Split { predictor: 0, rule: SplitRule::Threshold { threshold }, .. } => {
                assert_eq!(*threshold, 3.5)
            }
            other => panic!("unexpected root {other:?}"),
        }
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn categorical_split_orders_levels_by_mean() {
        let schema = Schema::new(vec![Predictor::categorical("c", ["a", "b", "c"])]).unwrap();
        // level means: a=30, b=5, c=31 -> order b, a, c; best cut isolates b.
        let codes = [0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let y = vec![29.0, 31.0, 4.0, 6.0, 30.0, 32.0];
        let rows = codes.iter().map(|&c| FeatureVector::new(vec![c])).collect();
        let t = TrainingSet::without_locations(schema, rows, y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = GrowConfig { mtry: 1, ..cfg(SplitStrategy::Cart) };
        let tree = grow(&t, (0..6).collect(), &c, &mut rng);
        match &tree.nodes()[0] {
            Node::Split { rule: SplitRule::Levels { left, right }, .. } => {
                assert_eq!(*left, 0b010);
                assert_eq!(*right, 0b101);
            }
            other => panic!("unexpected root {other:?}"),
        }
    }

    #[test]
    fn missing_query_splits_mass_by_training_counts() {
        let t = step_data();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tree = grow(&t, (0..8).collect(), &cfg(SplitStrategy::Cart), &mut rng);
        let mut out = Vec::new();
        tree.leaves(&FeatureVector::new(vec![f64::NAN, 0.0]), &mut out);
        let total: f64 = out.iter().map(|l| l.1).sum();
        assert_eq!(out.len(), 2);
        assert!((total - 1.0).abs() < 1e-15);
        assert!((out[0].1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn min_node_size_stops_growth() {
        let t = step_data();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = GrowConfig { min_node_size: 9, ..cfg(SplitStrategy::Cart) };
        let tree = grow(&t, (0..8).collect(), &c, &mut rng);
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
