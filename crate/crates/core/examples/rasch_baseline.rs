//! Fits the Rasch baseline to Rasch-generated data and reports how well the
//! two difficulty levels and the entry-wise accuracies are recovered.

use acbm::dgp::Design;
use acbm::metrics::d1;
use acbm::rasch::{fit_rasch, RaschConfig};

fn main() -> acbm::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(1000, |v| v.parse().expect("n must be an integer"));
    let (x, truth) = Design::builtin("dgp3", n, 21).expect("built-in").generate()?;
    let fit = fit_rasch(&x, &RaschConfig::default())?;
    println!(
        "EM: {} iterations, converged {}, log-likelihood {:.3}, sigma {:.3}",
        fit.iterations, fit.converged, fit.loglik, fit.sigma
    );
    let center = fit.psi.iter().sum::<f64>() / fit.psi.len() as f64;
    let half = fit.psi.len() / 2;
    let group = |s: &[f64]| s.iter().map(|p| p - center).sum::<f64>() / s.len() as f64;
    println!("centered difficulty means: {:.3} (true -0.5), {:.3} (true 0.5)", group(&fit.psi[..half]), group(&fit.psi[half..]));
    let truth_acc = truth.accuracy.expect("Rasch designs carry accuracies");
    println!("mean absolute accuracy error: {:.4}", d1(&fit.accuracy_matrix(), &truth_acc)?);
    Ok(())
}
