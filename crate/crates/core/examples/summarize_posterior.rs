//! Runs a short chain on a small cohort, then walks through the posterior
//! summaries: co-clustering frequencies, Dahl's question partition, the
//! examinee partitions tied to it and the accuracy matrix.

use acbm::dgp::Design;
use acbm::summarize::{dahl_column_estimate, dahl_row_estimate, posterior_accuracy, CoclusteringMatrix};
use acbm::{run_chain, Hyperparams, SamplerConfig};

fn main() -> acbm::Result<()> {
    let (x, truth) = Design::builtin("dgp1", 200, 3).expect("built-in").generate()?;
    let h = Hyperparams::default();
    let config = SamplerConfig {
        n_iter: 40,
        n_rep: 50,
        seed: 3,
        ..SamplerConfig::default()
    };
    let trace = run_chain(&x, &h, &config)?;

    let labels: Vec<Vec<usize>> = trace.records.iter().map(|r| r.col_assign.clone()).collect();
    let pi = CoclusteringMatrix::from_labels(x.n_questions(), labels.iter().map(Vec::as_slice));
    println!("co-clustering frequency of question 0 with the others:");
    let row: Vec<String> = (0..pi.dim()).map(|j| format!("{:.2}", pi.get(0, j))).collect();
    println!("  {}", row.join(" "));

    let (cols, idx) = dahl_column_estimate(&trace)?;
    println!("Dahl question partition (kept state {idx}): {:?}", cols.labels());
    println!("true question partition:                  {:?}", truth.col_partition.labels());

    let rows = dahl_row_estimate(&trace, &cols)?;
    for (c, p) in rows.clusters.iter().enumerate() {
        println!("cluster {c}: {} examinee blocks of sizes {:?}", p.n_blocks(), p.block_sizes());
    }

    let summary = posterior_accuracy(&x, &cols, &rows, &h)?;
    println!("accuracy of examinee 0 on each question:");
    let acc: Vec<String> = (0..x.n_questions()).map(|j| format!("{:.2}", summary.accuracy.get(0, j))).collect();
    println!("  {}", acc.join(" "));
    let path = std::env::temp_dir().join("acbm_summary.json");
    summary.write(&path)?;
    println!("summary written to {}", path.display());
    Ok(())
}
