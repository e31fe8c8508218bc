//! Partially hidden order: blocks of tied grades and within-block permutations.
//!
//! Documents sharing a grade form a block. The trainer lays a query out in
//! *positions*: blocks in descending grade order, each block's documents in
//! input order. A [`BlockPermutation`] reorders positions without crossing
//! block boundaries. For separable divergences, pairing the largest target
//! of a block with the largest score of that block is optimal, so the
//! permutation update is a per-block sort.

use std::ops::Range;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::ordercone::is_descending;

/// Tolerance for the descending-target precondition of [`block_sort`].
const ORDER_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    blocks: Vec<Vec<usize>>,
    grades: Vec<u32>,
    len: usize,
}

impl BlockPartition {
    /// Groups document indices by grade, highest grade first. Ties keep
    /// input order.
    pub fn from_grades(grades: &[u32]) -> Result<Self> {
        if grades.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut distinct: Vec<u32> = grades.to_vec();
        distinct.sort_unstable_by(|a, b| b.cmp(a));
        distinct.dedup();
        let blocks = distinct
            .iter()
            .map(|&g| (0..grades.len()).filter(|&i| grades[i] == g).collect())
            .collect();
        Ok(BlockPartition { blocks, grades: distinct, len: grades.len() })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Grade of each block, strictly decreasing.
    pub fn grades(&self) -> &[u32] {
        &self.grades
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of documents.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Document index at each position of the canonical layout.
    pub fn layout(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().collect()
    }

    /// Position range covered by each block.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = start..start + b.len();
                start += b.len();
                r
            })
            .collect()
    }
}

/// A permutation of positions that maps every block range onto itself.
///
/// `source(p)` is the position whose row lands at position `p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockPermutation {
    perm: Vec<usize>,
}

impl BlockPermutation {
    pub fn identity(d: usize) -> Self {
        BlockPermutation { perm: (0..d).collect() }
    }

    /// Validates that `perm` is a permutation that fixes each block.
    pub fn new(perm: Vec<usize>, blocks: &BlockPartition) -> Result<Self> {
        Error::check_len(blocks.len(), perm.len())?;
        for range in blocks.ranges() {
            let mut seen: Vec<usize> = perm[range.clone()].to_vec();
            seen.sort_unstable();
            if seen != range.collect::<Vec<_>>() {
                return Err(Error::InvalidConfig("permutation crosses a block boundary".into()));
            }
        }
        Ok(BlockPermutation { perm })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (p, &src) in self.perm.iter().enumerate() {
            inv[src] = p;
        }
        BlockPermutation { perm: inv }
    }

    /// Positions whose source differs between two permutations.
    pub fn changes_from(&self, other: &BlockPermutation) -> usize {
        self.perm.iter().zip(&other.perm).filter(|(a, b)| a != b).count()
    }

    /// `out[p] = values[source(p)]`.
    pub fn apply<T: Clone>(&self, values: &[T]) -> Result<Vec<T>> {
        Error::check_len(self.perm.len(), values.len())?;
        Ok(self.perm.iter().map(|&s| values[s].clone()).collect())
    }

    /// Reorders matrix rows the same way as [`BlockPermutation::apply`].
    pub fn apply_rows(&self, rows: &Array2<f64>) -> Result<Array2<f64>> {
        Error::check_len(self.perm.len(), rows.nrows())?;
        Ok(rows.select(Axis(0), &self.perm))
    }
}

/// Optimal within-block permutation for descending targets.
///
/// `scores` are indexed by layout position. Inside each block the positions
/// are filled with the block's rows in descending score order (stable on
/// ties), so the largest target meets the largest score.
pub fn block_sort(targets: &[f64], scores: &[f64], blocks: &BlockPartition) -> Result<BlockPermutation> {
    Error::check_len(blocks.len(), targets.len())?;
    Error::check_len(blocks.len(), scores.len())?;
    if !is_descending(targets, ORDER_TOL) {
        return Err(Error::ConeViolation("block_sort needs descending targets".into()));
    }
    let mut perm: Vec<usize> = (0..blocks.len()).collect();
    for range in blocks.ranges() {
        perm[range].sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    }
    Ok(BlockPermutation { perm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn blocks_group_by_descending_grade() {
        let p = BlockPartition::from_grades(&[2, 2, 0, 1]).unwrap();
        assert_eq!(p.blocks(), &[vec![0, 1], vec![3], vec![2]]);
        assert_eq!(p.grades(), &[2, 1, 0]);
        assert_eq!(p.layout(), vec![0, 1, 3, 2]);
        assert_eq!(p.ranges(), vec![0..2, 2..3, 3..4]);
        assert_eq!(BlockPartition::from_grades(&[1, 1, 1]).unwrap().num_blocks(), 1);
        let total = BlockPartition::from_grades(&[4, 3, 2, 1]).unwrap();
        assert!(total.sizes().iter().all(|&s| s == 1));
        assert!(BlockPartition::from_grades(&[]).is_err());
    }

    #[test]
    fn block_sort_swaps_misaligned_pair() {
        let blocks = BlockPartition::from_grades(&[1, 1]).unwrap();
        let perm = block_sort(&[0.6, 0.4], &[1.0, 5.0], &blocks).unwrap();
        assert_eq!(perm.as_slice(), &[1, 0]);
    }

    #[test]
    fn block_sort_identity_cases() {
        let blocks = BlockPartition::from_grades(&[2, 2, 1, 1, 1]).unwrap();
        let perm = block_sort(&[0.4, 0.3, 0.1, 0.1, 0.1], &[9.0, 8.0, 3.0, 2.0, 2.0], &blocks).unwrap();
        assert!(perm.is_identity());
        let singletons = BlockPartition::from_grades(&[3, 2, 1]).unwrap();
        assert!(block_sort(&[3.0, 2.0, 1.0], &[0.0, 5.0, 9.0], &singletons).unwrap().is_identity());
    }

    #[test]
    fn block_sort_never_crosses_blocks() {
        let blocks = BlockPartition::from_grades(&[1, 1, 0, 0, 0]).unwrap();
        let perm = block_sort(&[0.3, 0.3, 0.2, 0.1, 0.1], &[0.0, 1.0, 7.0, 9.0, 8.0], &blocks).unwrap();
        assert_eq!(perm.as_slice(), &[1, 0, 3, 4, 2]);
        assert!(BlockPermutation::new(perm.as_slice().to_vec(), &blocks).is_ok());
        assert!(BlockPermutation::new(vec![2, 1, 0, 3, 4], &blocks).is_err());
    }

    #[test]
    fn block_sort_rejects_ascending_targets() {
        let blocks = BlockPartition::from_grades(&[1, 1]).unwrap();
        assert!(block_sort(&[0.1, 0.9], &[1.0, 0.0], &blocks).is_err());
    }

    #[test]
    fn apply_examples() {
        let id = BlockPermutation::identity(3);
        assert_eq!(id.apply(&[1, 2, 3]).unwrap(), vec![1, 2, 3]);
        let blocks = BlockPartition::from_grades(&[0, 0, 0]).unwrap();
        let p = BlockPermutation::new(vec![2, 0, 1], &blocks).unwrap();
        let v = ["a", "b", "c"];
        assert_eq!(p.inverse().apply(&p.apply(&v).unwrap()).unwrap(), v.to_vec());
        let two = BlockPermutation::new(vec![1, 0], &BlockPartition::from_grades(&[1, 1]).unwrap()).unwrap();
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(two.apply_rows(&m).unwrap(), array![[3.0, 4.0], [1.0, 2.0]]);
        assert!(matches!(two.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn stable_on_score_ties() {
        let blocks = BlockPartition::from_grades(&[0, 0, 0, 0]).unwrap();
        let a = block_sort(&[0.25; 4], &[1.0, 2.0, 1.0, 2.0], &blocks).unwrap();
        let b = block_sort(&[0.25; 4], &[1.0, 2.0, 1.0, 2.0], &blocks).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_slice(), &[1, 3, 0, 2]);
    }
}
