//! A miniature Monte Carlo study: a few replications per cohort size with
//! short chains, printed as the median/SD table the `bench` command writes.
//!
//! Set ACBM_THREADS to cap the worker count.

use acbm::bench::{run_bench, BenchConfig};
use acbm::SamplerConfig;

fn main() -> acbm::Result<()> {
    let mut cfg = BenchConfig::builtin("dgp3", vec![100, 200], 4, 1).expect("built-in");
    cfg.sampler = SamplerConfig {
        n_iter: 30,
        n_rep: 20,
        ..SamplerConfig::default()
    };
    let report = run_bench(&cfg)?;
    print!("{}", report.replications_csv());
    println!();
    print!("{}", report.aggregate_csv());
    Ok(())
}
