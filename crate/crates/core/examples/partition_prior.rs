//! The partition priors behind the sampler: component caps per cluster size,
//! the V coefficients of the capped and uncapped priors, and the prior mass
//! of a few partitions.

use acbm::priors::{build_mfm_coefficients, log_beta_binomial_marginal, log_partition_prior};
use acbm::{kmax_bound, Partition};

fn main() -> acbm::Result<()> {
    println!("cluster size -> component cap");
    for size in 1..=8 {
        println!("  {size} -> {}", kmax_bound(size));
    }

    let n = 6;
    let capped = build_mfm_coefficients(n, 1.0, 1.0, Some(2));
    let open = build_mfm_coefficients(n, 1.0, 1.0, None);
    println!("log V_{n}(t), capped at 2 vs uncapped:");
    for t in 1..=4 {
        println!("  t={t}: {:>9.4} {:>9.4}", capped.log_v(t), open.log_v(t));
    }

    for labels in [[0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 1, 1], [0, 1, 2, 0, 1, 2]] {
        let p = Partition::from_labels(&labels);
        let lp = |c| log_partition_prior(&p, c).map_or(f64::NEG_INFINITY, |v| v);
        println!("{labels:?}: prior {:.5} capped, {:.5} uncapped", lp(&capped).exp(), lp(&open).exp());
    }

    println!("marginal of 3 successes in 4 trials, uniform prior: {:.5}", log_beta_binomial_marginal(3, 1, 1.0, 1.0)?.exp());
    Ok(())
}
