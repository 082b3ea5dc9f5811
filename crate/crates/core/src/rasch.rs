//! Rasch baseline fitted by marginal maximum likelihood.
//!
//! Abilities are `xi = sigma * z` with `z ~ N(0, 1)` integrated on a fixed
//! Gauss–Hermite grid. Under this model an examinee's posterior over the grid
//! depends on the responses only through the raw score, so the E-step works
//! on score groups. The M-step maximizes the expected complete-data
//! log-likelihood in `(sigma, psi)` by damped Newton steps, which keeps the
//! marginal log-likelihood nondecreasing.

use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dgp::logistic;
use crate::error::{Error, Result};
use crate::matrix::{AccuracyMatrix, ResponseMatrix};
use crate::priors::log_sum_exp_iter;
use crate::quadrature::NormalQuadrature;

/// Difficulty assigned to an item nobody (or everybody) answered correctly.
pub const CLAMP_LOGIT: f64 = 10.0;
const MIN_SIGMA: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaschConfig {
    pub n_nodes: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for RaschConfig {
    fn default() -> Self {
        Self {
            n_nodes: 21,
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaschFit {
    pub psi: Vec<f64>,
    pub xi: Vec<f64>,
    pub sigma: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Items whose difficulty was clamped because every answer agreed.
    #[serde(default)]
    pub degenerate_items: Vec<usize>,
    /// Marginal log-likelihood after each EM iteration.
    #[serde(default)]
    pub loglik_trace: Vec<f64>,
}

impl RaschFit {
    /// Entry `(i, j)` is `logistic(xi_i - psi_j)`.
    pub fn accuracy_matrix(&self) -> AccuracyMatrix {
        AccuracyMatrix::from_fn(self.xi.len(), self.psi.len(), |i, j| logistic(self.xi[i] - self.psi[j]))
    }

    /// True when no EM iteration lowered the marginal log-likelihood by more
    /// than a relative `1e-10`.
    pub fn loglik_monotone(&self) -> bool {
        self.loglik_trace
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0))
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
}

pub fn rasch_accuracy_matrix(fit: &RaschFit) -> AccuracyMatrix {
    fit.accuracy_matrix()
}

/// Sufficient statistics: examinees per raw score and, per item, successes
/// among examinees with each raw score.
struct ScoreTable {
    count: Vec<f64>,
    /// `item_by_score[j][r]`
    item_by_score: Vec<Vec<f64>>,
    scores: Vec<usize>,
    column_sums: Vec<f64>,
}

impl ScoreTable {
    fn new(x: &ResponseMatrix) -> Self {
        let d = x.n_questions();
        let scores = x.row_sums();
        let mut count = vec![0.0; d + 1];
        let mut item_by_score = vec![vec![0.0; d + 1]; d];
        for (i, &r) in scores.iter().enumerate() {
            count[r] += 1.0;
            for (j, &v) in x.row(i).iter().enumerate() {
                if v == 1 {
                    item_by_score[j][r] += 1.0;
                }
            }
        }
        let column_sums = x.column_sums().into_iter().map(|s| s as f64).collect();
        Self {
            count,
            item_by_score,
            scores,
            column_sums,
        }
    }
}

struct EStep {
    /// `post[r][q]`, posterior over grid nodes for raw score `r`.
    post: Vec<Vec<f64>>,
    loglik: f64,
}

fn log_one_plus_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn e_step(tab: &ScoreTable, quad: &NormalQuadrature, sigma: f64, psi: &[f64]) -> EStep {
    let d = psi.len();
    // log prior weight plus the score-free part of log p(x | node)
    let base: Vec<f64> = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .map(|(&z, &w)| w.ln() - psi.iter().map(|&p| log_one_plus_exp(sigma * z - p)).sum::<f64>())
        .collect();
    let mut post = vec![Vec::new(); d + 1];
    let mut loglik = -psi.iter().zip(&tab.column_sums).map(|(p, s)| p * s).sum::<f64>();
    for r in 0..=d {
        if tab.count[r] == 0.0 {
            continue;
        }
        let lp: Vec<f64> = quad
            .nodes
            .iter()
            .zip(&base)
            .map(|(&z, &b)| b + r as f64 * sigma * z)
            .collect();
        let norm = log_sum_exp_iter(lp.iter().copied());
        loglik += tab.count[r] * norm;
        post[r] = lp.iter().map(|v| (v - norm).exp()).collect();
    }
    EStep { post, loglik }
}

/// Expected complete-data counts: examinees at each node, and per item the
/// expected successes at each node.
fn expected_counts(tab: &ScoreTable, e: &EStep, n_nodes: usize, items: &[usize]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut at_node = vec![0.0; n_nodes];
    for (r, p) in e.post.iter().enumerate() {
        for (q, v) in p.iter().enumerate() {
            at_node[q] += tab.count[r] * v;
        }
    }
    let successes = items
        .iter()
        .map(|&j| {
            let mut s = vec![0.0; n_nodes];
            for (r, p) in e.post.iter().enumerate() {
                let c = tab.item_by_score[j][r];
                if c > 0.0 {
                    for (q, v) in p.iter().enumerate() {
                        s[q] += c * v;
                    }
                }
            }
            s
        })
        .collect();
    (at_node, successes)
}

/// Expected complete-data log-likelihood over the free items.
fn q_value(z: &[f64], at_node: &[f64], succ: &[Vec<f64>], sigma: f64, psi: &[f64]) -> f64 {
    let mut total = 0.0;
    for (s, &p) in succ.iter().zip(psi) {
        for q in 0..z.len() {
            let eta = sigma * z[q] - p;
            total += s[q] * eta - at_node[q] * log_one_plus_exp(eta);
        }
    }
    total
}

/// Maximizes the expected log-likelihood in `(sigma, psi_free)` by Newton steps
/// on the arrowhead Hessian, halving any step that would not improve it.
fn m_step(z: &[f64], at_node: &[f64], succ: &[Vec<f64>], sigma: &mut f64, psi: &mut [f64]) {
    let m = psi.len();
    let mut current = q_value(z, at_node, succ, *sigma, psi);
    for _ in 0..50 {
        let mut g_psi = vec![0.0; m];
        let mut h_psi = vec![0.0; m];
        let mut h_cross = vec![0.0; m];
        let mut g_sigma = 0.0;
        let mut h_sigma = 0.0;
        for j in 0..m {
            for q in 0..z.len() {
                let p = logistic(*sigma * z[q] - psi[j]);
                let resid = succ[j][q] - at_node[q] * p;
                let info = at_node[q] * p * (1.0 - p);
                g_psi[j] -= resid;
                g_sigma += z[q] * resid;
                h_psi[j] += info;
                h_cross[j] += z[q] * info;
                h_sigma += z[q] * z[q] * info;
            }
        }
        // Solve the negated Hessian system [[A, b], [b^T, c]] [dpsi; ds] = g
        // where A = diag(h_psi), b_j = -h_cross_j, c = h_sigma.
        let mut schur = h_sigma;
        let mut rhs = g_sigma;
        for j in 0..m {
            if h_psi[j] > 0.0 {
                schur -= h_cross[j] * h_cross[j] / h_psi[j];
                rhs += h_cross[j] * g_psi[j] / h_psi[j];
            }
        }
        let ds = if schur > 1e-12 { rhs / schur } else { 0.0 };
        let dpsi: Vec<f64> = (0..m)
            .map(|j| if h_psi[j] > 0.0 { (g_psi[j] + h_cross[j] * ds) / h_psi[j] } else { 0.0 })
            .collect();
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let s_new = *sigma + step * ds;
            if s_new > MIN_SIGMA {
                let p_new: Vec<f64> = psi.iter().zip(&dpsi).map(|(p, d)| p + step * d).collect();
                let v = q_value(z, at_node, succ, s_new, &p_new);
                if v >= current {
                    let gain = v - current;
                    *sigma = s_new;
                    psi.copy_from_slice(&p_new);
                    current = v;
                    improved = gain > 1e-12 * current.abs().max(1.0);
                    break;
                }
            }
            step *= 0.5;
        }
        let size = ds.abs().max(dpsi.iter().fold(0.0f64, |a, d| a.max(d.abs()))) * step;
        if !improved || size < 1e-10 {
            break;
        }
    }
}

/// Marginal maximum likelihood fit with expected-a-posteriori abilities.
pub fn fit_rasch(x: &ResponseMatrix, config: &RaschConfig) -> Result<RaschFit> {
    if config.n_nodes == 0 || config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("bad Rasch settings {config:?}")));
    }
    let n = x.n_examinees() as f64;
    let d = x.n_questions();
    let tab = ScoreTable::new(x);
    let quad = NormalQuadrature::new(config.n_nodes);

    let mut psi = vec![0.0; d];
    let mut degenerate_items = Vec::new();
    let mut free = Vec::new();
    for j in 0..d {
        let s = tab.column_sums[j];
        if s == 0.0 {
            psi[j] = CLAMP_LOGIT;
            degenerate_items.push(j);
        } else if s == n {
            psi[j] = -CLAMP_LOGIT;
            degenerate_items.push(j);
        } else {
            psi[j] = ((n - s) / s).ln();
            free.push(j);
        }
    }
    let mut sigma = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut loglik_trace = Vec::new();
    let mut e = e_step(&tab, &quad, sigma, &psi);
    loglik_trace.push(e.loglik);
    while iterations < config.max_iter {
        iterations += 1;
        let (at_node, succ) = expected_counts(&tab, &e, quad.len(), &free);
        let mut free_psi: Vec<f64> = free.iter().map(|&j| psi[j]).collect();
        let old_sigma = sigma;
        m_step(&quad.nodes, &at_node, &succ, &mut sigma, &mut free_psi);
        let mut change = (sigma - old_sigma).abs();
        for (&j, &p) in free.iter().zip(&free_psi) {
            change = change.max((p - psi[j]).abs());
            psi[j] = p;
        }
        e = e_step(&tab, &quad, sigma, &psi);
        loglik_trace.push(e.loglik);
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let xi = tab
        .scores
        .iter()
        .map(|&r| sigma * e.post[r].iter().zip(&quad.nodes).map(|(p, z)| p * z).sum::<f64>())
        .collect();
    Ok(RaschFit {
        psi,
        xi,
        sigma,
        loglik: e.loglik,
        converged,
        iterations,
        degenerate_items,
        loglik_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{Design, RaschDesign};
    use crate::sampler::seeded_rng;
    use rand::Rng;

    /// Direct marginal likelihood, summing over examinees one by one.
    fn direct_loglik(x: &ResponseMatrix, fit: &RaschFit, quad: &NormalQuadrature) -> f64 {
        (0..x.n_examinees())
            .map(|i| {
                log_sum_exp_iter(quad.nodes.iter().zip(&quad.weights).map(|(&z, &w)| {
                    w.ln()
                        + x.row(i)
                            .iter()
                            .zip(&fit.psi)
                            .map(|(&v, &p)| {
                                let pr = logistic(fit.sigma * z - p);
                                if v == 1 { pr.ln() } else { (1.0 - pr).ln() }
                            })
                            .sum::<f64>()
                }))
            })
            .sum()
    }

    #[test]
    fn grouped_likelihood_matches_direct_sum() {
        let (x, _) = Design::builtin("dgp3", 120, 4).unwrap().generate().unwrap();
        let fit = fit_rasch(&x, &RaschConfig { max_iter: 3, ..Default::default() }).unwrap();
        let direct = direct_loglik(&x, &fit, &NormalQuadrature::new(21));
        assert!((fit.loglik - direct).abs() < 1e-8 * direct.abs());
    }

    #[test]
    fn recovers_difficulty_groups() {
        let (x, _) = Design::builtin("dgp3", 1000, 9).unwrap().generate().unwrap();
        let fit = fit_rasch(&x, &RaschConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.loglik_monotone());
        let mean = fit.psi.iter().sum::<f64>() / 20.0;
        let lo = fit.psi[..10].iter().map(|p| p - mean).sum::<f64>() / 10.0;
        let hi = fit.psi[10..].iter().map(|p| p - mean).sum::<f64>() / 10.0;
        assert!((lo + 0.5).abs() < 0.1 && (hi - 0.5).abs() < 0.1, "{lo} {hi}");
    }

    #[test]
    fn fair_coin_items_have_zero_difficulty() {
        let mut rng = seeded_rng(2, 0);
        let entries: Vec<u8> = (0..4000 * 5).map(|_| u8::from(rng.random_bool(0.5))).collect();
        let x = ResponseMatrix::from_row_major(4000, 5, entries).unwrap();
        let fit = fit_rasch(&x, &RaschConfig::default()).unwrap();
        for p in &fit.psi {
            assert!(p.abs() < 0.1, "{p}");
        }
    }

    #[test]
    fn constant_items_are_clamped() {
        let x = crate::validate_matrix(&[vec![1, 0, 1], vec![1, 0, 0], vec![1, 0, 1], vec![1, 0, 0]]).unwrap();
        let fit = fit_rasch(&x, &RaschConfig::default()).unwrap();
        assert_eq!(fit.degenerate_items, vec![0, 1]);
        assert_eq!(fit.psi[0], -CLAMP_LOGIT);
        assert_eq!(fit.psi[1], CLAMP_LOGIT);
        assert!(fit.loglik_monotone());
        let acc = fit.accuracy_matrix();
        let clamped = RaschFit { xi: vec![0.0], psi: vec![CLAMP_LOGIT], ..fit.clone() };
        assert!((clamped.accuracy_matrix().get(0, 0) - 4.5397868702434395e-5).abs() < 1e-15);
        assert!(acc.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn accuracy_entries() {
        let fit = RaschFit {
            psi: vec![0.5, 2.0],
            xi: vec![2.0],
            sigma: 1.0,
            loglik: 0.0,
            converged: true,
            iterations: 1,
            degenerate_items: vec![],
            loglik_trace: vec![],
        };
        let a = rasch_accuracy_matrix(&fit);
        assert!((a.get(0, 0) - 0.8175744761936437).abs() < 1e-15);
        assert_eq!(a.get(0, 1), 0.5);
    }

    #[test]
    fn row_permutation_permutes_abilities() {
        let design = RaschDesign {
            psi: vec![-1.0, 0.0, 0.5, 1.0],
            xi_support: vec![-1.0, 1.0],
            n_examinees: 60,
            seed: 8,
        };
        let (x, _) = design.generate().unwrap();
        let n = x.n_examinees();
        let perm: Vec<usize> = (0..n).rev().collect();
        let rows: Vec<Vec<i64>> = perm.iter().map(|&i| x.row(i).iter().map(|&v| i64::from(v)).collect()).collect();
        let y = crate::validate_matrix(&rows).unwrap();
        let a = fit_rasch(&x, &RaschConfig::default()).unwrap();
        let b = fit_rasch(&y, &RaschConfig::default()).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            assert!((a.xi[i] - b.xi[k]).abs() < 1e-12);
        }
        for (p, q) in a.psi.iter().zip(&b.psi) {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
