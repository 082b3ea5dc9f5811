//! Recovery criteria for simulated cohorts.
//!
//! | metric | meaning |
//! |--------|---------|
//! | CWRI   | Rand index of the question partition |
//! | ADK    | mean absolute error of the per-column component count |
//! | ADW    | permutation-matched weight error, 2 when the question partition is wrong |
//! | ADP    | permutation-matched accuracy error, 1 per missed or under-resolved cluster |
//! | ARWRI  | mean Rand index of the per-column examinee partitions |
//! | D1     | mean absolute entry-wise accuracy error |

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assignment::min_injection_cost;
use crate::error::{Error, Result};
use crate::matrix::AccuracyMatrix;
use crate::partition::{kmax_bound, Partition};
use crate::summarize::FitSummary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthCluster {
    pub weights: Vec<f64>,
    pub accuracies: Vec<f64>,
    /// True component label of every examinee under this cluster.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_labels: Option<Vec<usize>>,
}

impl TruthCluster {
    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

/// Generating configuration of a simulated cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub col_partition: Partition,
    /// Indexed by canonical true cluster id.
    pub clusters: Vec<TruthCluster>,
    /// Entry-wise true accuracy, n x D.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyMatrix>,
}

impl GroundTruth {
    /// Checks weights, accuracies and, when `require_bound`, the component cap.
    pub fn validate(&self, require_bound: bool) -> Result<()> {
        let bad = |m: String| Err(Error::DesignInvariantViolation(m));
        if self.clusters.len() != self.col_partition.n_blocks() {
            return bad("one truth entry per question cluster is required".into());
        }
        for (c, (tc, size)) in self.clusters.iter().zip(self.col_partition.block_sizes()).enumerate() {
            if tc.weights.len() != tc.accuracies.len() || tc.weights.is_empty() {
                return bad(format!("cluster {c}: weights and accuracies differ in length"));
            }
            let total: f64 = tc.weights.iter().sum();
            if (total - 1.0).abs() > 1e-9 || tc.weights.iter().any(|&w| w <= 0.0) {
                return bad(format!("cluster {c}: weights must be positive and sum to 1"));
            }
            if tc.accuracies.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
                return bad(format!("cluster {c}: accuracies must lie in [0, 1]"));
            }
            if require_bound && tc.k() > kmax_bound(size) {
                return bad(format!(
                    "cluster {c}: {} components exceed the bound {} for {size} questions",
                    tc.k(),
                    kmax_bound(size)
                ));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(f, self)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }

    fn cluster_of_column(&self, d: usize) -> &TruthCluster {
        &self.clusters[self.col_partition.labels()[d]]
    }
}

fn pairs(m: u64) -> u128 {
    u128::from(m) * u128::from(m.saturating_sub(1)) / 2
}

/// Fraction of item pairs on which the two partitions agree.
pub fn rand_index(p: &Partition, q: &Partition) -> Result<f64> {
    if p.n_items() != q.n_items() {
        return Err(Error::LengthMismatch {
            left: p.n_items(),
            right: q.n_items(),
        });
    }
    let n = p.n_items() as u64;
    if n < 2 {
        return Err(Error::SingleItem);
    }
    let table = p.contingency(q)?;
    let both: u128 = table.iter().flatten().map(|&c| pairs(c as u64)).sum();
    let in_p: u128 = table.iter().map(|r| pairs(r.iter().sum::<usize>() as u64)).sum();
    let in_q: u128 = (0..q.n_blocks())
        .map(|b| pairs(table.iter().map(|r| r[b]).sum::<usize>() as u64))
        .sum();
    let total = pairs(n);
    let agree = total + 2 * both - in_p - in_q;
    Ok(agree as f64 / total as f64)
}

/// Rand index with the convention that a single item agrees with itself.
fn rand_index_or_equal(p: &Partition, q: &Partition) -> Result<f64> {
    match rand_index(p, q) {
        Err(Error::SingleItem) => Ok(1.0),
        other => other,
    }
}

pub fn cwri(estimate: &Partition, truth: &GroundTruth) -> Result<f64> {
    rand_index_or_equal(estimate, &truth.col_partition)
}

pub fn adk(fit: &FitSummary, truth: &GroundTruth) -> Result<f64> {
    let d = truth.col_partition.n_items();
    check_columns(fit, truth)?;
    let total: f64 = (0..d)
        .map(|j| {
            let est = fit.row_partition_for_column(j).n_blocks() as f64;
            let k0 = truth.cluster_of_column(j).k() as f64;
            (est - k0).abs()
        })
        .sum();
    Ok(total / d as f64)
}

fn check_columns(fit: &FitSummary, truth: &GroundTruth) -> Result<()> {
    if fit.col_partition.n_items() != truth.col_partition.n_items() {
        return Err(Error::LengthMismatch {
            left: fit.col_partition.n_items(),
            right: truth.col_partition.n_items(),
        });
    }
    Ok(())
}

/// Fitted cluster whose column set equals that of true cluster `c`.
fn matching_cluster(fit: &FitSummary, truth: &GroundTruth, c: usize) -> Option<usize> {
    let true_cols: Vec<usize> = truth
        .col_partition
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == c)
        .map(|(j, _)| j)
        .collect();
    let est = fit.col_partition.labels()[true_cols[0]];
    (fit.clusters[est].columns == true_cols).then_some(est)
}

/// `(1/K0) min over injections of sum_i |w_hat - w0|`, with the estimate
/// zero-padded when it has fewer components than the truth.
pub fn matched_abs_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let k0 = truth.len();
    let slots = estimate.len().max(k0);
    let est = |j: usize| estimate.get(j).copied().unwrap_or(0.0);
    min_injection_cost(k0, slots, |i, j| (est(j) - truth[i]).abs()) / k0 as f64
}

/// `sqrt((1/K0) min over injections of sum_i (theta_hat - theta0)^2)`.
/// Requires at least as many estimated components as true ones.
pub fn matched_rms_error(estimate: &[f64], truth: &[f64]) -> f64 {
    let k0 = truth.len();
    assert!(estimate.len() >= k0);
    (min_injection_cost(k0, estimate.len(), |i, j| (estimate[j] - truth[i]).powi(2)) / k0 as f64)
        .sqrt()
}

pub fn adw(fit: &FitSummary, truth: &GroundTruth) -> Result<f64> {
    check_columns(fit, truth)?;
    if fit.col_partition != truth.col_partition {
        return Ok(2.0);
    }
    let total: f64 = (0..truth.clusters.len())
        .map(|c| {
            let est = matching_cluster(fit, truth, c).expect("equal partitions share clusters");
            matched_abs_error(&fit.clusters[est].w, &truth.clusters[c].weights)
        })
        .sum();
    Ok(total / truth.clusters.len() as f64)
}

pub fn adp(fit: &FitSummary, truth: &GroundTruth) -> Result<f64> {
    check_columns(fit, truth)?;
    let total: f64 = (0..truth.clusters.len())
        .map(|c| {
            let tc = &truth.clusters[c];
            match matching_cluster(fit, truth, c) {
                Some(est) if fit.clusters[est].k >= tc.k() => {
                    matched_rms_error(&fit.clusters[est].theta, &tc.accuracies)
                }
                _ => 1.0,
            }
        })
        .sum();
    Ok(total / truth.clusters.len() as f64)
}

/// Mean Rand index between each column's fitted examinee partition and the
/// true labels of the true cluster containing that column. `None` when the
/// truth carries no examinee labels.
pub fn arwri(fit: &FitSummary, truth: &GroundTruth) -> Result<Option<f64>> {
    check_columns(fit, truth)?;
    let d = truth.col_partition.n_items();
    let mut total = 0.0;
    for j in 0..d {
        let Some(labels) = &truth.cluster_of_column(j).row_labels else {
            return Ok(None);
        };
        total += rand_index_or_equal(fit.row_partition_for_column(j), &Partition::from_labels(labels))?;
    }
    Ok(Some(total / d as f64))
}

/// Mean absolute entry-wise difference.
pub fn d1(estimate: &AccuracyMatrix, truth: &AccuracyMatrix) -> Result<f64> {
    if estimate.rows() != truth.rows() || estimate.cols() != truth.cols() {
        return Err(Error::LengthMismatch {
            left: estimate.values().len(),
            right: truth.values().len(),
        });
    }
    let total: f64 = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / estimate.values().len() as f64)
}

/// Every applicable criterion for one fit.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub cwri: f64,
    pub adk: f64,
    pub adw: f64,
    pub adp: f64,
    pub arwri: Option<f64>,
    pub d1_acbm: Option<f64>,
    pub d1_rasch: Option<f64>,
}

pub fn evaluate(
    fit: &FitSummary,
    truth: &GroundTruth,
    rasch_accuracy: Option<&AccuracyMatrix>,
) -> Result<MetricRow> {
    let d1_acbm = truth.accuracy.as_ref().map(|t| d1(&fit.accuracy, t)).transpose()?;
    let d1_rasch = match (rasch_accuracy, &truth.accuracy) {
        (Some(r), Some(t)) => Some(d1(r, t)?),
        _ => None,
    };
    Ok(MetricRow {
        cwri: cwri(&fit.col_partition, truth)?,
        adk: adk(fit, truth)?,
        adw: adw(fit, truth)?,
        adp: adp(fit, truth)?,
        arwri: arwri(fit, truth)?,
        d1_acbm,
        d1_rasch,
    })
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}
