//! Mutable chain state: the question partition, one examinee partition per
//! question cluster, and cached Beta-Binomial sufficient statistics.
//!
//! Clusters and blocks live in slots so that removing one never relabels the
//! others. Canonical labels are produced on demand when a state is recorded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;
use crate::partition::{kmax_bound, Partition};
use crate::trace::StateRecord;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSuffStats {
    pub successes: usize,
    pub failures: usize,
    pub members: usize,
}

#[derive(Clone, Debug)]
pub struct ClusterState {
    /// Ascending column indices.
    pub(crate) columns: Vec<usize>,
    /// Block slot of each examinee.
    pub(crate) row_block: Vec<usize>,
    /// Slot-indexed statistics; `members == 0` marks a free slot.
    pub(crate) blocks: Vec<BlockSuffStats>,
    pub(crate) n_active: usize,
    /// Correct answers of each examinee over this cluster's columns.
    pub(crate) row_successes: Vec<usize>,
}

impl ClusterState {
    fn from_rows(x: &ResponseMatrix, columns: Vec<usize>, row_labels: &[usize]) -> Self {
        let n = x.n_examinees();
        let n_slots = row_labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks = vec![BlockSuffStats::default(); n_slots];
        let mut row_successes = vec![0; n];
        for i in 0..n {
            let row = x.row(i);
            let s: usize = columns.iter().map(|&j| row[j] as usize).sum();
            row_successes[i] = s;
            let b = &mut blocks[row_labels[i]];
            b.members += 1;
            b.successes += s;
            b.failures += columns.len() - s;
        }
        let n_active = blocks.iter().filter(|b| b.members > 0).count();
        ClusterState {
            columns,
            row_block: row_labels.to_vec(),
            blocks,
            n_active,
            row_successes,
        }
    }

    /// Fresh singleton cluster holding column `j` with every examinee in one block.
    pub(crate) fn singleton(x: &ResponseMatrix, j: usize) -> Self {
        Self::from_rows(x, vec![j], &vec![0; x.n_examinees()])
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.columns.len()
    }

    #[inline]
    pub fn n_blocks(&self) -> usize {
        self.n_active
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn row_successes(&self) -> &[usize] {
        &self.row_successes
    }

    /// Statistics of the occupied blocks, in slot order.
    pub fn active_blocks(&self) -> impl Iterator<Item = (usize, &BlockSuffStats)> {
        self.blocks.iter().enumerate().filter(|(_, b)| b.members > 0)
    }

    pub fn row_partition(&self) -> Partition {
        Partition::from_labels(&self.row_block)
    }

    /// Successes of column `j` within each block slot, written into `out`.
    pub(crate) fn column_block_successes(&self, x: &ResponseMatrix, j: usize, out: &mut Vec<usize>) {
        out.clear();
        out.resize(self.blocks.len(), 0);
        for (i, &b) in self.row_block.iter().enumerate() {
            out[b] += x.get(i, j) as usize;
        }
    }

    /// Adds column `j` given its per-slot success counts.
    pub(crate) fn insert_column(&mut self, x: &ResponseMatrix, j: usize, per_block: &[usize]) {
        let pos = self.columns.binary_search(&j).unwrap_err();
        self.columns.insert(pos, j);
        for (b, stats) in self.blocks.iter_mut().enumerate() {
            if stats.members > 0 {
                stats.successes += per_block[b];
                stats.failures += stats.members - per_block[b];
            }
        }
        for (i, s) in self.row_successes.iter_mut().enumerate() {
            *s += x.get(i, j) as usize;
        }
    }

    /// Removes column `j` given its per-slot success counts.
    pub(crate) fn remove_column(&mut self, x: &ResponseMatrix, j: usize, per_block: &[usize]) {
        let pos = self.columns.binary_search(&j).expect("column not in cluster");
        self.columns.remove(pos);
        for (b, stats) in self.blocks.iter_mut().enumerate() {
            if stats.members > 0 {
                stats.successes -= per_block[b];
                stats.failures -= stats.members - per_block[b];
            }
        }
        for (i, s) in self.row_successes.iter_mut().enumerate() {
            *s -= x.get(i, j) as usize;
        }
    }

    /// Takes examinee `i` out of its block. Returns the slot and whether the
    /// block emptied.
    #[inline]
    pub(crate) fn detach_row(&mut self, i: usize) -> (usize, bool) {
        let b = self.row_block[i];
        let s = self.row_successes[i];
        let f = self.columns.len() - s;
        let stats = &mut self.blocks[b];
        stats.members -= 1;
        stats.successes -= s;
        stats.failures -= f;
        let emptied = stats.members == 0;
        if emptied {
            self.n_active -= 1;
        }
        (b, emptied)
    }

    /// Puts examinee `i` into slot `b` (which may be free).
    #[inline]
    pub(crate) fn attach_row(&mut self, i: usize, b: usize) {
        let s = self.row_successes[i];
        let f = self.columns.len() - s;
        let stats = &mut self.blocks[b];
        if stats.members == 0 {
            self.n_active += 1;
        }
        stats.members += 1;
        stats.successes += s;
        stats.failures += f;
        self.row_block[i] = b;
    }

    /// First free block slot, growing the slot vector if needed.
    #[inline]
    pub(crate) fn free_block_slot(&mut self) -> usize {
        match self.blocks.iter().position(|b| b.members == 0) {
            Some(b) => b,
            None => {
                self.blocks.push(BlockSuffStats::default());
                self.blocks.len() - 1
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelState {
    /// Cluster slot of each column.
    pub(crate) col_cluster: Vec<usize>,
    pub(crate) clusters: Vec<Option<ClusterState>>,
    pub(crate) n_clusters: usize,
    pub(crate) log_joint: f64,
}

impl ModelState {
    /// Builds a state from a question partition and one examinee partition per
    /// question cluster (indexed by canonical cluster id).
    pub fn from_partitions(
        x: &ResponseMatrix,
        columns: &Partition,
        rows: &[Partition],
    ) -> Result<Self> {
        let d = x.n_questions();
        let n = x.n_examinees();
        if columns.n_items() != d {
            return Err(Error::PartitionShapeMismatch(format!(
                "question partition covers {} columns, data has {}",
                columns.n_items(),
                d
            )));
        }
        if rows.len() != columns.n_blocks() {
            return Err(Error::PartitionShapeMismatch(format!(
                "{} examinee partitions for {} question clusters",
                rows.len(),
                columns.n_blocks()
            )));
        }
        let members = columns.blocks();
        let mut clusters = Vec::with_capacity(members.len());
        for (c, (cols, rp)) in members.into_iter().zip(rows).enumerate() {
            if rp.n_items() != n {
                return Err(Error::PartitionShapeMismatch(format!(
                    "examinee partition of cluster {c} covers {} rows, data has {n}",
                    rp.n_items()
                )));
            }
            let bound = kmax_bound(cols.len());
            if rp.n_blocks() > bound {
                return Err(Error::PartitionShapeMismatch(format!(
                    "cluster {c} has {} questions and {} examinee blocks (bound {bound})",
                    cols.len(),
                    rp.n_blocks()
                )));
            }
            clusters.push(Some(ClusterState::from_rows(x, cols, rp.labels())));
        }
        Ok(ModelState {
            col_cluster: columns.labels().to_vec(),
            n_clusters: clusters.len(),
            clusters,
            log_joint: f64::NAN,
        })
    }

    /// Every column alone, every cluster with a single examinee block.
    pub fn all_singletons(x: &ResponseMatrix) -> Self {
        let d = x.n_questions();
        ModelState {
            col_cluster: (0..d).collect(),
            clusters: (0..d).map(|j| Some(ClusterState::singleton(x, j))).collect(),
            n_clusters: d,
            log_joint: f64::NAN,
        }
    }

    #[inline]
    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    #[inline]
    pub fn log_joint(&self) -> f64 {
        self.log_joint
    }

    pub(crate) fn set_log_joint(&mut self, v: f64) {
        self.log_joint = v;
    }

    pub fn cluster(&self, slot: usize) -> Option<&ClusterState> {
        self.clusters.get(slot).and_then(Option::as_ref)
    }

    pub(crate) fn cluster_mut(&mut self, slot: usize) -> &mut ClusterState {
        self.clusters[slot].as_mut().expect("empty cluster slot")
    }

    pub fn clusters(&self) -> impl Iterator<Item = (usize, &ClusterState)> {
        self.clusters
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.as_ref().map(|c| (s, c)))
    }

    /// Cluster slots ordered by first appearance along the columns.
    pub fn canonical_slots(&self) -> Vec<usize> {
        let mut seen = vec![false; self.clusters.len()];
        let mut order = Vec::with_capacity(self.n_clusters);
        for &s in &self.col_cluster {
            if !seen[s] {
                seen[s] = true;
                order.push(s);
            }
        }
        order
    }

    pub fn column_partition(&self) -> Partition {
        Partition::from_labels(&self.col_cluster)
    }

    /// Examinee partitions in canonical cluster order.
    pub fn row_partitions(&self) -> Vec<Partition> {
        self.canonical_slots()
            .into_iter()
            .map(|s| self.cluster(s).expect("live slot").row_partition())
            .collect()
    }

    /// True when every cluster respects its component bound.
    pub fn satisfies_bounds(&self) -> bool {
        self.clusters()
            .all(|(_, c)| c.n_active >= 1 && c.n_active <= kmax_bound(c.size()))
    }

    /// Compares every cached statistic with a recount from `x`.
    pub fn verify_suffstats(&self, x: &ResponseMatrix) -> bool {
        self.clusters().all(|(_, c)| {
            let fresh = ClusterState::from_rows(x, c.columns.clone(), &c.row_block);
            fresh.row_successes == c.row_successes
                && fresh.n_active == c.n_active
                && c.blocks.iter().enumerate().all(|(b, stats)| {
                    let expect = fresh.blocks.get(b).copied().unwrap_or_default();
                    if stats.members == 0 {
                        expect.members == 0
                    } else {
                        *stats == expect && stats.successes + stats.failures == stats.members * c.size()
                    }
                })
        }) && self
            .col_cluster
            .iter()
            .enumerate()
            .all(|(j, &s)| self.cluster(s).is_some_and(|c| c.columns.contains(&j)))
    }

    pub fn record(&self, iter: usize) -> StateRecord {
        StateRecord {
            iter,
            col_assign: self.column_partition().labels().to_vec(),
            row_assign: self
                .row_partitions()
                .into_iter()
                .map(Vec::from)
                .collect(),
            log_joint: self.log_joint,
        }
    }
}

/// Rebuilds every sufficient statistic from scratch. The cached log joint
/// score is carried over unchanged.
pub fn recompute_suffstats(x: &ResponseMatrix, state: &ModelState) -> Result<ModelState> {
    let mut fresh = ModelState::from_partitions(x, &state.column_partition(), &state.row_partitions())?;
    fresh.log_joint = state.log_joint;
    Ok(fresh)
}
