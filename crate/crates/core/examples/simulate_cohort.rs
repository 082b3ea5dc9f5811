//! Draws a cohort from a built-in design, writes it to disk and compares
//! each question's empirical accuracy with the mixture mean it came from.
//!
//! Usage: cargo run --example simulate_cohort -- [design] [n] [seed] [out_dir]

use std::path::PathBuf;

use acbm::dgp::Design;

fn main() -> acbm::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "dgp1".to_string());
    let n: usize = args.next().map_or(2000, |v| v.parse().expect("n must be an integer"));
    let seed: u64 = args.next().map_or(7, |v| v.parse().expect("seed must be an integer"));
    let out = args.next().map_or_else(|| std::env::temp_dir().join("acbm_cohort"), PathBuf::from);

    let design = Design::builtin(&name, n, seed).expect("design must be dgp1..dgp4");
    let (x, truth) = design.generate()?;
    std::fs::create_dir_all(&out).map_err(|e| acbm::Error::Io { path: out.clone(), source: e })?;
    x.write_csv(out.join("matrix.csv"))?;
    truth.write(out.join("truth.json"))?;
    println!("wrote {} x {} matrix and truth to {}", x.n_examinees(), x.n_questions(), out.display());

    let sums = x.column_sums();
    for (j, &s) in sums.iter().enumerate() {
        let c = truth.col_partition.labels()[j];
        let tc = &truth.clusters[c];
        let mean: f64 = tc.weights.iter().zip(&tc.accuracies).map(|(w, t)| w * t).sum();
        println!("question {j:2}  cluster {c}  observed {:.3}  expected {mean:.3}", s as f64 / n as f64);
    }
    Ok(())
}
