//! Scores a hand-written fit against a hand-written truth with every
//! recovery criterion.

use acbm::matrix::AccuracyMatrix;
use acbm::metrics::{evaluate, GroundTruth, TruthCluster};
use acbm::summarize::{ClusterSummary, FitSummary};
use acbm::Partition;

fn main() -> acbm::Result<()> {
    // questions 0-2 form one cluster with two ability levels, question 3 is alone
    let truth = GroundTruth {
        col_partition: Partition::from_labels(&[0, 0, 0, 1]),
        clusters: vec![
            TruthCluster {
                weights: vec![0.5, 0.5],
                accuracies: vec![0.2, 0.8],
                row_labels: Some(vec![0, 0, 1, 1]),
            },
            TruthCluster {
                weights: vec![1.0],
                accuracies: vec![0.6],
                row_labels: Some(vec![0, 0, 0, 0]),
            },
        ],
        accuracy: Some(AccuracyMatrix::from_fn(4, 4, |i, j| match (j, i < 2) {
            (3, _) => 0.6,
            (_, true) => 0.2,
            _ => 0.8,
        })),
    };
    let rows = vec![Partition::from_labels(&[0, 0, 1, 0]), Partition::one_block(4)];
    let fit = FitSummary {
        col_partition: truth.col_partition.clone(),
        clusters: vec![
            ClusterSummary {
                columns: vec![0, 1, 2],
                size: 3,
                k: 2,
                theta: vec![0.35, 0.78],
                w: vec![0.7, 0.3],
                block_sizes: rows[0].block_sizes(),
            },
            ClusterSummary {
                columns: vec![3],
                size: 1,
                k: 1,
                theta: vec![0.62],
                w: vec![1.0],
                block_sizes: vec![4],
            },
        ],
        accuracy: AccuracyMatrix::from_fn(4, 4, |i, j| match (j, i) {
            (3, _) => 0.62,
            (_, 2) => 0.78,
            _ => 0.35,
        }),
        row_partitions: rows,
    };
    let m = evaluate(&fit, &truth, None)?;
    println!("CWRI  {:.3}", m.cwri);
    println!("ADK   {:.3}", m.adk);
    println!("ADW   {:.3}", m.adw);
    println!("ADP   {:.3}", m.adp);
    println!("ARWRI {:.3}", m.arwri.unwrap_or(f64::NAN));
    println!("D1    {:.3}", m.d1_acbm.unwrap_or(f64::NAN));
    Ok(())
}
