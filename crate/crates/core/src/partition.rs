//! Set partitions in canonical label form.
//!
//! Labels are renumbered by order of first appearance, so two partitions are
//! equal as set partitions exactly when their label vectors are equal.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of examinee mixtures a question cluster of `cluster_size`
/// items may carry: `floor((cluster_size + 1) / 2)`.
#[inline]
pub fn kmax_bound(cluster_size: usize) -> usize {
    debug_assert!(cluster_size >= 1);
    (cluster_size + 1) / 2
}

/// Renumbers arbitrary labels by order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    labels: Vec<usize>,
    n_blocks: usize,
}

/// Partition of the question index set.
pub type ColumnPartition = Partition;

impl From<Vec<usize>> for Partition {
    fn from(labels: Vec<usize>) -> Self {
        Partition::from_labels(&labels)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.labels
    }
}

impl Partition {
    pub fn from_labels(labels: &[usize]) -> Self {
        let labels = canonical_labels(labels);
        let n_blocks = labels.iter().copied().max().map_or(0, |m| m + 1);
        Partition { labels, n_blocks }
    }

    pub fn one_block(n: usize) -> Self {
        Partition {
            labels: vec![0; n],
            n_blocks: usize::from(n > 0),
        }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            n_blocks: n,
        }
    }

    #[inline]
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_blocks];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Items of each block, blocks in canonical order, items ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l].push(i);
        }
        blocks
    }

    #[inline]
    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }

    /// Contingency counts `table[a][b]` = items in block `a` of `self` and
    /// block `b` of `other`.
    pub fn contingency(&self, other: &Partition) -> Result<Vec<Vec<usize>>> {
        if self.n_items() != other.n_items() {
            return Err(Error::LengthMismatch {
                left: self.n_items(),
                right: other.n_items(),
            });
        }
        let mut table = vec![vec![0usize; other.n_blocks]; self.n_blocks];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            table[a][b] += 1;
        }
        Ok(table)
    }
}

/// Examinee partition under one question cluster, bounded by the cluster size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowPartition {
    partition: Partition,
    cluster_size: usize,
}

impl RowPartition {
    pub fn new(partition: Partition, cluster_size: usize) -> Result<Self> {
        if cluster_size == 0 {
            return Err(Error::PartitionShapeMismatch("empty question cluster".into()));
        }
        let bound = kmax_bound(cluster_size);
        if partition.n_blocks() > bound || partition.n_blocks() == 0 {
            return Err(Error::PartitionShapeMismatch(format!(
                "{} examinee blocks on a cluster of {} questions (bound {})",
                partition.n_blocks(),
                cluster_size,
                bound
            )));
        }
        Ok(RowPartition {
            partition,
            cluster_size,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n_blocks(&self) -> usize {
        self.partition.n_blocks()
    }

    pub fn cluster_size(&self) -> usize {
        self.cluster_size
    }
}
