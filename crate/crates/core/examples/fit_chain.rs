//! Simulates a DGP1 cohort, runs the Gibbs sampler and prints the point
//! estimate of the question partition with its per-cluster mixtures.
//!
//! Usage: cargo run --release --example fit_chain -- [n] [n_iter] [n_rep] [seed]

use std::time::Instant;

use acbm::dgp::Design;
use acbm::metrics::evaluate;
use acbm::summarize::summarize_trace;
use acbm::{run_chain, Hyperparams, SamplerConfig};

fn main() -> acbm::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let arg = |i: usize, default: u64| args.get(i).copied().unwrap_or(default);
    let n = arg(0, 300) as usize;
    let config = SamplerConfig {
        n_iter: arg(1, 60) as usize,
        n_rep: arg(2, 100) as usize,
        seed: arg(3, 1),
        ..SamplerConfig::default()
    };

    let design = Design::builtin("dgp1", n, config.seed).expect("built-in design");
    let (x, truth) = design.generate()?;
    let h = Hyperparams::default();

    let start = Instant::now();
    let trace = run_chain(&x, &h, &config)?;
    let elapsed = start.elapsed();
    let fit = summarize_trace(&x, &trace, &h)?;

    println!(
        "{} x {} responses, {} kept states in {:.2?}",
        x.n_examinees(),
        x.n_questions(),
        trace.len(),
        elapsed
    );
    println!("question clusters: {:?}", fit.col_partition.labels());
    for (c, cl) in fit.clusters.iter().enumerate() {
        let theta: Vec<String> = cl.theta.iter().map(|t| format!("{t:.3}")).collect();
        let w: Vec<String> = cl.w.iter().map(|t| format!("{t:.3}")).collect();
        println!("  cluster {c}: columns {:?} K={} theta=[{}] w=[{}]", cl.columns, cl.k, theta.join(", "), w.join(", "));
    }
    let m = evaluate(&fit, &truth, None)?;
    println!("CWRI {:.3}  ADK {:.3}  ADW {:.3}  ADP {:.3}", m.cwri, m.adk, m.adw, m.adp);
    Ok(())
}
