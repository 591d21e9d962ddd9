use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Fold index per row; rows in the same square block share a fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    folds: Vec<usize>,
    k: usize,
    block_size_bits: u64,
    seed: u64,
    blocks: usize,
}

impl FoldAssignment {
    /// Explicit assignment, e.g. for leave-one-group-out schemes.
    pub fn from_folds(folds: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParameter(format!("k = {k}, need at least 2 folds")));
        }
        if let Some(bad) = folds.iter().find(|&&f| f >= k) {
            return Err(Error::InvalidInput(format!("fold index {bad} >= k = {k}")));
        }
        Ok(FoldAssignment { folds, k, block_size_bits: 0, seed: 0, blocks: 0 })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.folds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.folds.is_empty()
    }

    pub fn fold_of(&self, row: usize) -> usize {
        self.folds[row]
    }

    pub fn folds(&self) -> &[usize] {
        &self.folds
    }

    pub fn block_size(&self) -> f64 {
        f64::from_bits(self.block_size_bits)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of non-empty blocks.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn test_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Block of a point in a grid of `block_size` squares anchored at `origin`.
pub fn block_of(origin: [f64; 2], block_size: f64, p: [f64; 2]) -> (i64, i64) {
    (
        ((p[0] - origin[0]) / block_size).floor() as i64,
        ((p[1] - origin[1]) / block_size).floor() as i64,
    )
}

/// Tiles the plane with squares anchored at the bounding-box minimum and
/// deals the non-empty blocks, in seeded random order, round-robin to the
/// `k` folds.
pub fn make_spatial_folds(locations: &[[f64; 2]], block_size: f64, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k = {k}, need at least 2 folds")));
    }
    if !(block_size > 0.0 && block_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("block size {block_size} must be > 0")));
    }
    if locations.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::InvalidInput("non-finite location".into()));
    }
    let origin = locations.iter().fold([f64::INFINITY; 2], |m, p| [m[0].min(p[0]), m[1].min(p[1])]);
    let row_blocks: Vec<(i64, i64)> = locations.iter().map(|&p| block_of(origin, block_size, p)).collect();
    let mut blocks: BTreeMap<(i64, i64), usize> = row_blocks.iter().map(|&b| (b, 0)).collect();
    if blocks.len() < k {
        return Err(Error::InsufficientBlocks { found: blocks.len(), folds: k });
    }
    let mut order: Vec<(i64, i64)> = blocks.keys().copied().collect();
    order.shuffle(&mut rng::stream(seed, &[0xF01D]));
    for (i, b) in order.iter().enumerate() {
        blocks.insert(*b, i % k);
    }
    Ok(FoldAssignment {
        folds: row_blocks.iter().map(|b| blocks[b]).collect(),
        k,
        block_size_bits: block_size.to_bits(),
        seed,
        blocks: order.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_block_is_not_enough() {
        let pts = vec![[0.0, 0.0], [10.0, 10.0], [39_999.0, 0.0]];
        let err = make_spatial_folds(&pts, 40_000.0, 10, 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientBlocks { found: 1, folds: 10 }));
    }

    #[test]
    fn distant_points_fall_in_different_blocks() {
        assert_ne!(
            block_of([0.0, 0.0], 40_000.0, [0.0, 0.0]),
            block_of([0.0, 0.0], 40_000.0, [50_000.0, 0.0])
        );
        let f = make_spatial_folds(&[[0.0, 0.0], [50_000.0, 0.0]], 40_000.0, 2, 3).unwrap();
        assert_eq!(f.blocks(), 2);
        assert_ne!(f.fold_of(0), f.fold_of(1));
    }

    #[test]
    fn grid_blocks_are_pure() {
        let pts: Vec<[f64; 2]> = (0..400).map(|i| [(i % 20) as f64 * 15_000.0, (i / 20) as f64 * 15_000.0]).collect();
        let f = make_spatial_folds(&pts, 40_000.0, 10, 42).unwrap();
        assert_eq!(f.sizes().iter().sum::<usize>(), 400);
        assert!(f.sizes().iter().all(|&s| s > 0));
        let mut seen: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        for (i, p) in pts.iter().enumerate() {
            let b = block_of([0.0, 0.0], 40_000.0, *p);
            assert_eq!(*seen.entry(b).or_insert(f.fold_of(i)), f.fold_of(i));
        }
        // 285 km / 40 km -> 8 blocks per axis
        assert_eq!(f.blocks(), 64);
        assert_eq!(make_spatial_folds(&pts, 40_000.0, 10, 42).unwrap(), f);
    }

    #[test]
    fn parameter_errors() {
        assert!(make_spatial_folds(&[[0.0, 0.0]], 1.0, 1, 0).is_err());
        assert!(make_spatial_folds(&[[0.0, 0.0]], 0.0, 2, 0).is_err());
        assert!(FoldAssignment::from_folds(vec![0, 2], 2).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(
            pts in proptest::collection::vec((0.0..100_000.0f64, 0.0..100_000.0f64), 30..200),
            seed in any::<u64>(),
        ) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            if let Ok(f) = make_spatial_folds(&pts, 10_000.0, 5, seed) {
                let mut all: Vec<usize> = (0..5).flat_map(|k| f.test_rows(k)).collect();
                all.sort();
                prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
                for k in 0..5 {
                    prop_assert_eq!(f.test_rows(k).len() + f.train_rows(k).len(), pts.len());
                }
            }
        }
    }
}
