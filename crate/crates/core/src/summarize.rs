//! Posterior summaries of a recorded chain.
//!
//! The question partition is Dahl's least-squares estimate: the kept state
//! whose co-assignment indicator matrix is closest in squared error to the
//! posterior co-assignment frequencies. Examinee partitions are chosen the
//! same way among the kept states that share that question partition, with
//! the loss summed over all columns. Accuracies and weights are conditional
//! posterior means at the selected configuration.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AccuracyMatrix, ResponseMatrix};
use crate::model::Hyperparams;
use crate::partition::Partition;
use crate::trace::{ChainTrace, StateRecord};

/// Pairwise co-assignment frequencies over a set of partitions.
#[derive(Clone, Debug, PartialEq)]
pub struct CoclusteringMatrix {
    dim: usize,
    values: Vec<f64>,
}

impl CoclusteringMatrix {
    pub fn from_labels<'a>(dim: usize, labels: impl IntoIterator<Item = &'a [usize]>) -> Self {
        let mut values = vec![0.0; dim * dim];
        let mut count = 0usize;
        for l in labels {
            assert_eq!(l.len(), dim, "partition length differs from matrix dimension");
            count += 1;
            for i in 0..dim {
                for j in 0..dim {
                    if l[i] == l[j] {
                        values[i * dim + j] += 1.0;
                    }
                }
            }
        }
        if count > 0 {
            let m = count as f64;
            values.iter_mut().for_each(|v| *v /= m);
        }
        CoclusteringMatrix { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    /// `sum_{i,j} (1[l_i = l_j] - pi_ij)^2`.
    pub fn squared_loss(&self, labels: &[usize]) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let delta = if labels[i] == labels[j] { 1.0 } else { 0.0 };
                let r = delta - self.get(i, j);
                loss += r * r;
            }
        }
        loss
    }
}

/// Index of the smallest loss, earliest index on ties.
fn argmin(losses: &[f64]) -> usize {
    let mut best = 0;
    for (k, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = k;
        }
    }
    best
}

/// Dahl losses of every kept state's question partition.
pub fn column_losses(trace: &ChainTrace) -> Result<Vec<f64>> {
    let first = trace.records.first().ok_or(Error::EmptyTrace)?;
    let pi = CoclusteringMatrix::from_labels(
        first.col_assign.len(),
        trace.records.iter().map(|r| r.col_assign.as_slice()),
    );
    Ok(trace.records.iter().map(|r| pi.squared_loss(&r.col_assign)).collect())
}

/// Dahl's estimate of the question partition and the index of the kept
/// state it came from.
pub fn dahl_column_estimate(trace: &ChainTrace) -> Result<(Partition, usize)> {
    let losses = column_losses(trace)?;
    let best = argmin(&losses);
    Ok((trace.records[best].column_partition(), best))
}

/// Examinee partitions of the selected state, one per question cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct RowEstimate {
    /// Index into the trace records.
    pub state_index: usize,
    pub columns: Partition,
    pub clusters: Vec<Partition>,
}

impl RowEstimate {
    /// The examinee partition shared by every column of `d`'s cluster.
    pub fn for_column(&self, d: usize) -> &Partition {
        &self.clusters[self.columns.labels()[d]]
    }
}

/// `sum_{k,k'} N_{kk'}^2` for the contingency table of two labelings.
fn co_pairs(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().copied().max().map_or(0, |m| m + 1);
    let kb = b.iter().copied().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    table.iter().map(|&c| (c * c) as f64).sum()
}

/// Dahl losses of each labeling against the mean co-assignment of all of
/// them, via `sum (delta_a - pi)^2 = G_aa - 2/M sum_l G_al + 1/M^2 sum G`
/// with `G_al = sum_{i,j} delta_a(i,j) delta_l(i,j)`.
fn partition_losses(labelings: &[&[usize]]) -> Vec<f64> {
    let m = labelings.len();
    if m == 0 {
        return Vec::new();
    }
    let dim = labelings[0].len();
    if m > dim {
        let pi = CoclusteringMatrix::from_labels(dim, labelings.iter().copied());
        return labelings.iter().map(|l| pi.squared_loss(l)).collect();
    }
    let mut gram = vec![0.0; m * m];
    for a in 0..m {
        for l in a..m {
            let g = co_pairs(labelings[a], labelings[l]);
            gram[a * m + l] = g;
            gram[l * m + a] = g;
        }
    }
    let mf = m as f64;
    let total: f64 = gram.iter().sum::<f64>() / (mf * mf);
    (0..m)
        .map(|a| {
            let row: f64 = gram[a * m..(a + 1) * m].iter().sum();
            gram[a * m + a] - 2.0 * row / mf + total
        })
        .collect()
}

/// Dahl estimate of the examinee partitions among the kept states whose
/// question partition equals `columns`.
pub fn dahl_row_estimate(trace: &ChainTrace, columns: &Partition) -> Result<RowEstimate> {
    let matching: Vec<usize> = trace
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.col_assign == columns.labels())
        .map(|(k, _)| k)
        .collect();
    if matching.is_empty() {
        return Err(Error::NoMatchingState);
    }
    let sizes = columns.block_sizes();
    let mut total = vec![0.0; matching.len()];
    for (c, &size) in sizes.iter().enumerate() {
        let labelings: Vec<&[usize]> = matching
            .iter()
            .map(|&k| trace.records[k].row_assign[c].as_slice())
            .collect();
        for (t, loss) in total.iter_mut().zip(partition_losses(&labelings)) {
            *t += size as f64 * loss;
        }
    }
    let best = matching[argmin(&total)];
    let rec: &StateRecord = &trace.records[best];
    Ok(RowEstimate {
        state_index: best,
        columns: columns.clone(),
        clusters: rec.row_assign.iter().map(|r| Partition::from_labels(r)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub columns: Vec<usize>,
    pub size: usize,
    #[serde(rename = "K")]
    pub k: usize,
    /// Posterior mean accuracy of each examinee block, in block order.
    pub theta: Vec<f64>,
    /// Posterior mean mixture weight of each block.
    pub w: Vec<f64>,
    pub block_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitSummary {
    pub col_partition: Partition,
    /// Examinee partition per question cluster.
    pub row_partitions: Vec<Partition>,
    pub clusters: Vec<ClusterSummary>,
    /// Entry-wise accuracy `theta[i][j]`.
    pub accuracy: AccuracyMatrix,
}

/// On-disk form of [`FitSummary`]; the accuracy matrix lives in a CSV next to it.
#[derive(Serialize, Deserialize)]
struct SummaryFile {
    col_partition: Partition,
    row_partitions: Vec<Partition>,
    clusters: Vec<ClusterSummary>,
    accuracy_matrix_path: PathBuf,
}

pub const ACCURACY_FILE: &str = "accuracy.csv";

impl FitSummary {
    /// Examinee partition governing column `d`.
    pub fn row_partition_for_column(&self, d: usize) -> &Partition {
        &self.row_partitions[self.col_partition.labels()[d]]
    }

    /// Writes `summary_path` and the accuracy CSV alongside it.
    pub fn write(&self, summary_path: impl AsRef<Path>) -> Result<()> {
        let summary_path = summary_path.as_ref();
        let dir = summary_path.parent().unwrap_or(Path::new("."));
        let acc_name = summary_path
            .file_stem()
            .map(|s| format!("{}_{ACCURACY_FILE}", s.to_string_lossy()))
            .unwrap_or_else(|| ACCURACY_FILE.to_string());
        self.accuracy.write_csv(dir.join(&acc_name))?;
        let file = SummaryFile {
            col_partition: self.col_partition.clone(),
            row_partitions: self.row_partitions.clone(),
            clusters: self.clusters.clone(),
            accuracy_matrix_path: PathBuf::from(acc_name),
        };
        let f = File::create(summary_path).map_err(|e| Error::io(summary_path, e))?;
        serde_json::to_writer_pretty(f, &file)?;
        Ok(())
    }

    pub fn read(summary_path: impl AsRef<Path>) -> Result<Self> {
        let summary_path = summary_path.as_ref();
        let f = File::open(summary_path).map_err(|e| Error::io(summary_path, e))?;
        let file: SummaryFile = serde_json::from_reader(f)?;
        let acc_path = if file.accuracy_matrix_path.is_absolute() {
            file.accuracy_matrix_path
        } else {
            summary_path
                .parent()
                .unwrap_or(Path::new("."))
                .join(file.accuracy_matrix_path)
        };
        Ok(FitSummary {
            col_partition: file.col_partition,
            row_partitions: file.row_partitions,
            clusters: file.clusters,
            accuracy: AccuracyMatrix::read_csv(acc_path)?,
        })
    }
}

/// Conditional posterior means of block accuracies and weights at the given
/// configuration.
pub fn posterior_accuracy(
    x: &ResponseMatrix,
    columns: &Partition,
    rows: &RowEstimate,
    h: &Hyperparams,
) -> Result<FitSummary> {
    let n = x.n_examinees();
    if columns.n_items() != x.n_questions() || rows.clusters.len() != columns.n_blocks() {
        return Err(Error::PartitionShapeMismatch(
            "summary partitions do not match the data".into(),
        ));
    }
    let mut clusters = Vec::with_capacity(columns.n_blocks());
    for (cols, rp) in columns.blocks().into_iter().zip(&rows.clusters) {
        if rp.n_items() != n {
            return Err(Error::PartitionShapeMismatch(format!(
                "examinee partition covers {} rows, data has {n}",
                rp.n_items()
            )));
        }
        let k = rp.n_blocks();
        let mut successes = vec![0usize; k];
        let mut members = vec![0usize; k];
        for (i, &b) in rp.labels().iter().enumerate() {
            let row = x.row(i);
            successes[b] += cols.iter().map(|&j| row[j] as usize).sum::<usize>();
            members[b] += 1;
        }
        let size = cols.len();
        let theta = (0..k)
            .map(|b| {
                let s = successes[b] as f64;
                let f = (members[b] * size - successes[b]) as f64;
                (h.a0 + s) / (h.a0 + h.b0 + s + f)
            })
            .collect();
        let denom = n as f64 + k as f64 * h.alpha_row;
        let w = members.iter().map(|&m| (m as f64 + h.alpha_row) / denom).collect();
        clusters.push(ClusterSummary {
            columns: cols,
            size,
            k,
            theta,
            w,
            block_sizes: members,
        });
    }
    let labels = columns.labels();
    let accuracy = AccuracyMatrix::from_fn(n, x.n_questions(), |i, j| {
        let c = labels[j];
        clusters[c].theta[rows.clusters[c].labels()[i]]
    });
    Ok(FitSummary {
        col_partition: columns.clone(),
        row_partitions: rows.clusters.clone(),
        clusters,
        accuracy,
    })
}

/// Runs all three summaries on a trace.
pub fn summarize_trace(x: &ResponseMatrix, trace: &ChainTrace, h: &Hyperparams) -> Result<FitSummary> {
    let (columns, _) = dahl_column_estimate(trace)?;
    let rows = dahl_row_estimate(trace, &columns)?;
    posterior_accuracy(x, &columns, &rows, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::validate_matrix;
    use crate::trace::TraceMeta;

    fn trace_of(states: &[(&[usize], &[&[usize]])]) -> ChainTrace {
        ChainTrace {
            meta: TraceMeta {
                seed: 0,
                rng: "test".into(),
                n_iter: states.len(),
                n_rep: 1,
                burn_in: 0,
                thinning: 1,
                init_mode: "all-singletons".into(),
            },
            records: states
                .iter()
                .enumerate()
                .map(|(k, (c, r))| StateRecord {
                    iter: k,
                    col_assign: c.to_vec(),
                    row_assign: r.iter().map(|v| v.to_vec()).collect(),
                    log_joint: 0.0,
                })
                .collect(),
        }
    }

    #[test]
    fn single_state_trace() {
        let t = trace_of(&[(&[0, 0, 1], &[&[0, 0], &[0, 0]])]);
        let (p, k) = dahl_column_estimate(&t).unwrap();
        assert_eq!((p.labels(), k), (&[0, 0, 1][..], 0));
        let r = dahl_row_estimate(&t, &p).unwrap();
        assert_eq!(r.state_index, 0);
    }

    #[test]
    fn identical_states_pick_first() {
        let state: (&[usize], &[&[usize]]) = (&[0, 1, 1], &[&[0], &[0]]);
        let t = trace_of(&[state; 4]);
        assert_eq!(dahl_column_estimate(&t).unwrap().1, 0);
        let (p, _) = dahl_column_estimate(&t).unwrap();
        assert_eq!(dahl_row_estimate(&t, &p).unwrap().state_index, 0);
    }

    #[test]
    fn empty_trace_and_missing_partition() {
        let t = trace_of(&[]);
        assert!(matches!(dahl_column_estimate(&t), Err(Error::EmptyTrace)));
        let t = trace_of(&[(&[0, 1], &[&[0], &[0]])]);
        assert!(matches!(
            dahl_row_estimate(&t, &Partition::one_block(2)),
            Err(Error::NoMatchingState)
        ));
    }

    #[test]
    fn toy_column_argmin() {
        // exhaustive O(M D^2) loss by hand-built indicator sums
        let states: [&[usize]; 3] = [&[0, 1, 1], &[0, 0, 1], &[0, 0, 1]];
        let t = trace_of(&[
            (states[0], &[&[0], &[0]]),
            (states[1], &[&[0], &[0]]),
            (states[2], &[&[0], &[0]]),
        ]);
        let mut pi = [[0.0f64; 3]; 3];
        for s in &states {
            for i in 0..3 {
                for j in 0..3 {
                    pi[i][j] += f64::from(u8::from(s[i] == s[j])) / 3.0;
                }
            }
        }
        let loss = |s: &[usize]| -> f64 {
            let mut l = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let d = f64::from(u8::from(s[i] == s[j])) - pi[i][j];
                    l += d * d;
                }
            }
            l
        };
        let losses: Vec<f64> = states.iter().map(|s| loss(s)).collect();
        let expect = argmin(&losses);
        assert_eq!(expect, 1);
        assert_eq!(dahl_column_estimate(&t).unwrap().1, expect);
        for (a, b) in column_losses(&t).unwrap().iter().zip(&losses) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_losses_match_dense() {
        let labelings: Vec<Vec<usize>> = vec![
            vec![0, 0, 1, 1, 2, 0, 1, 2],
            vec![0, 1, 1, 1, 2, 0, 1, 2],
            vec![0, 0, 0, 0, 0, 0, 0, 0],
            vec![0, 1, 2, 3, 4, 5, 6, 7],
            vec![0, 0, 1, 1, 2, 0, 1, 2],
        ];
        let refs: Vec<&[usize]> = labelings.iter().map(|v| v.as_slice()).collect();
        let fast = partition_losses(&refs);
        let pi = CoclusteringMatrix::from_labels(8, refs.iter().copied());
        for (l, f) in refs.iter().zip(&fast) {
            assert!((pi.squared_loss(l) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn row_estimate_weights_columns() {
        let t = trace_of(&[
            (&[0, 0, 0, 1], &[&[0, 0, 1, 1], &[0, 0, 0, 0]]),
            (&[0, 0, 0, 1], &[&[0, 1, 1, 1], &[0, 0, 0, 0]]),
            (&[0, 0, 0, 1], &[&[0, 0, 1, 1], &[0, 0, 0, 0]]),
            (&[0, 1, 1, 1], &[&[0, 0, 0, 0], &[0, 0, 0, 0]]),
        ]);
        let (p, _) = dahl_column_estimate(&t).unwrap();
        assert_eq!(p.labels(), &[0, 0, 0, 1]);
        let r = dahl_row_estimate(&t, &p).unwrap();
        assert_eq!(r.state_index, 0);
        assert_eq!(r.for_column(2).labels(), &[0, 0, 1, 1]);
        assert_eq!(r.for_column(3).n_blocks(), 1);
    }

    #[test]
    fn accuracy_examples() {
        let x = validate_matrix(&[vec![1, 0], vec![0, 1]]).unwrap();
        let cols = Partition::one_block(2);
        let rows = RowEstimate {
            state_index: 0,
            columns: cols.clone(),
            clusters: vec![Partition::one_block(2)],
        };
        let s = posterior_accuracy(&x, &cols, &rows, &Hyperparams::unit()).unwrap();
        assert_eq!(s.clusters[0].theta, vec![0.5]);
        assert_eq!(s.clusters[0].w, vec![1.0]);
        assert_eq!(s.accuracy.get(1, 1), 0.5);
    }

    #[test]
    fn weights_from_block_sizes() {
        let n = 858;
        let rows: Vec<Vec<i64>> = (0..n).map(|i| vec![i64::from(i % 2 == 0); 3]).collect();
        let x = validate_matrix(&rows).unwrap();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= 300)).collect();
        let cols = Partition::one_block(3);
        let est = RowEstimate {
            state_index: 0,
            columns: cols.clone(),
            clusters: vec![Partition::from_labels(&labels)],
        };
        let s = posterior_accuracy(&x, &cols, &est, &Hyperparams::default()).unwrap();
        let w = &s.clusters[0].w;
        assert!((w[0] - 301.0 / 860.0).abs() < 1e-15);
        assert!((w[1] - 559.0 / 860.0).abs() < 1e-15);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.clusters[0].theta.iter().all(|&t| t > 0.0 && t < 1.0));
    }
}
