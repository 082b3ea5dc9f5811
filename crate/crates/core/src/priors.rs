//! Beta-Binomial marginal likelihoods and mixture-of-finite-mixtures
//! partition priors.
//!
//! The partition prior has the form
//! `p(partition) = V_n(t) * prod_b alpha^(|b|)` where `t` is the number of
//! blocks, `x^(m)` is the rising factorial and
//!
//! ```text
//! V_n(t) = sum_{k >= t} p_K(k) * k! / (k - t)! / (k alpha)^(n)
//! ```
//!
//! with `p_K` a Poisson(gamma) mass restricted to `{1, ..., k_max}` (or to
//! `{1, 2, ...}` when unbounded) and renormalized.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use libm::lgamma;

use crate::error::{Error, Result};
use crate::partition::Partition;

/// `log[B(a0 + s, b0 + f) / B(a0, b0)]`: log probability of one particular
/// binary sequence with `s` ones and `f` zeros under a Beta(a0, b0) prior.
pub fn log_beta_binomial_marginal(s: usize, f: usize, a0: f64, b0: f64) -> Result<f64> {
    log_predictive(s, f, 0, 0, a0, b0)
}

/// Log probability of `s_add` further ones and `f_add` further zeros given a
/// block that already holds `big_s` ones and `big_f` zeros.
pub fn log_predictive(
    s_add: usize,
    f_add: usize,
    big_s: usize,
    big_f: usize,
    a0: f64,
    b0: f64,
) -> Result<f64> {
    let a = a0 + big_s as f64;
    let b = b0 + big_f as f64;
    let ab = a0 + b0 + (big_s + big_f) as f64;
    let v = lgamma_diff(a, s_add) + lgamma_diff(b, f_add) - lgamma_diff(ab, s_add + f_add);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteResult {
            successes: s_add,
            failures: f_add,
            a0,
            b0,
        })
    }
}

/// `ln Gamma(x + m) - ln Gamma(x)`, exactly zero for `m = 0`.
#[inline]
fn lgamma_diff(x: f64, m: usize) -> f64 {
    if m == 0 {
        0.0
    } else {
        lgamma(x + m as f64) - lgamma(x)
    }
}

/// Log rising factorial `ln x^(m)`.
#[inline]
pub fn log_rising_factorial(x: f64, m: usize) -> f64 {
    lgamma_diff(x, m)
}

/// Lookup tables of `ln Gamma(a0 + x)`, `ln Gamma(b0 + x)` and
/// `ln Gamma(a0 + b0 + x)` for integer `x` up to a fixed count. Every
/// Beta-Binomial term in the sampler becomes six table reads.
#[derive(Clone, Debug)]
pub struct BetaBinomialTable {
    a0: f64,
    b0: f64,
    lg_a: Vec<f64>,
    lg_b: Vec<f64>,
    lg_ab: Vec<f64>,
}

impl BetaBinomialTable {
    pub fn new(a0: f64, b0: f64, max_count: usize) -> Self {
        let build = |base: f64| (0..=max_count).map(|x| lgamma(base + x as f64)).collect();
        BetaBinomialTable {
            a0,
            b0,
            lg_a: build(a0),
            lg_b: build(b0),
            lg_ab: build(a0 + b0),
        }
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn max_count(&self) -> usize {
        self.lg_a.len() - 1
    }

    #[inline]
    pub fn log_marginal(&self, s: usize, f: usize) -> f64 {
        self.log_predictive(s, f, 0, 0)
    }

    #[inline]
    pub fn log_predictive(&self, s_add: usize, f_add: usize, big_s: usize, big_f: usize) -> f64 {
        let n_old = big_s + big_f;
        (self.lg_a[big_s + s_add] - self.lg_a[big_s]) + (self.lg_b[big_f + f_add] - self.lg_b[big_f])
            - (self.lg_ab[n_old + s_add + f_add] - self.lg_ab[n_old])
    }
}

/// Table of `ln V_n(t)` for one `(n, k_max, gamma, alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MfmCoefficients {
    n_items: usize,
    k_max: Option<usize>,
    gamma: f64,
    alpha: f64,
    /// Index `t`; entry 0 is unused.
    log_v: Vec<f64>,
}

const SERIES_REL_TOL: f64 = 1e-12;
const SERIES_MAX_TERMS: usize = 1_000_000;

/// Builds the `ln V_n(t)` table. `k_max = None` means the component count is
/// unbounded.
pub fn build_mfm_coefficients(
    n_items: usize,
    gamma: f64,
    alpha: f64,
    k_max: Option<usize>,
) -> MfmCoefficients {
    assert!(n_items >= 1, "partition prior needs at least one item");
    assert!(gamma > 0.0 && alpha > 0.0);
    let t_max = k_max.map_or(n_items, |k| k.min(n_items));
    let ln_gamma = gamma.ln();
    // unnormalized log Poisson mass, e^{-gamma} dropped
    let log_pois = |k: usize| k as f64 * ln_gamma - lgamma(k as f64 + 1.0);
    let log_norm = match k_max {
        Some(k) => log_sum_exp_iter((1..=k).map(log_pois)),
        // ln(e^gamma - 1)
        None => gamma + (-(-gamma).exp_m1()).ln(),
    };
    let log_term = |k: usize, t: usize| {
        log_pois(k) + lgamma(k as f64 + 1.0) - lgamma((k - t) as f64 + 1.0)
            - log_rising_factorial(k as f64 * alpha, n_items)
    };

    let mut log_v = vec![f64::NEG_INFINITY; t_max + 1];
    for (t, slot) in log_v.iter_mut().enumerate().skip(1) {
        let total = match k_max {
            Some(k) => log_sum_exp_iter((t..=k).map(|kk| log_term(kk, t))),
            None => {
                let floor = gamma + 10.0 * gamma.sqrt() + t as f64;
                let mut acc = f64::NEG_INFINITY;
                let mut k = t;
                loop {
                    let term = log_term(k, t);
                    acc = log_add_exp(acc, term);
                    if (term - acc) < SERIES_REL_TOL.ln() && k as f64 > floor {
                        break;
                    }
                    k += 1;
                    if k - t > SERIES_MAX_TERMS {
                        break;
                    }
                }
                acc
            }
        };
        *slot = total - log_norm;
    }
    MfmCoefficients {
        n_items,
        k_max,
        gamma,
        alpha,
        log_v,
    }
}

impl MfmCoefficients {
    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn k_max(&self) -> Option<usize> {
        self.k_max
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest block count with positive prior mass.
    pub fn support_max(&self) -> usize {
        self.log_v.len() - 1
    }

    /// `ln V_n(t)`; negative infinity outside the support.
    #[inline]
    pub fn log_v(&self, t: usize) -> f64 {
        self.log_v.get(t).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `ln V_n(t + 1) - ln V_n(t)`, the new-block factor of the restaurant
    /// process with `t` occupied blocks.
    #[inline]
    pub fn log_v_ratio(&self, t: usize) -> f64 {
        self.log_v(t + 1) - self.log_v(t)
    }

    /// `ln alpha^(m)`, the per-block factor of the partition prior.
    #[inline]
    pub fn log_block_factor(&self, m: usize) -> f64 {
        log_rising_factorial(self.alpha, m)
    }
}

/// Log prior mass of `partition` under the coefficients' partition prior.
pub fn log_partition_prior(partition: &Partition, coeffs: &MfmCoefficients) -> Result<f64> {
    if partition.n_items() != coeffs.n_items() {
        return Err(Error::LengthMismatch {
            left: partition.n_items(),
            right: coeffs.n_items(),
        });
    }
    let t = partition.n_blocks();
    if t > coeffs.support_max() {
        return Err(Error::BlockCountExceedsSupport {
            blocks: t,
            k_max: coeffs.support_max(),
        });
    }
    Ok(coeffs.log_v(t)
        + partition
            .block_sizes()
            .into_iter()
            .map(|m| coeffs.log_block_factor(m))
            .sum::<f64>())
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp_iter(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

type CacheKey = (usize, Option<usize>, u64, u64);

/// Shared store of coefficient tables keyed by `(n, k_max, gamma, alpha)`.
#[derive(Debug, Default)]
pub struct MfmCache {
    tables: RwLock<HashMap<CacheKey, Arc<MfmCoefficients>>>,
}

impl MfmCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        n_items: usize,
        gamma: f64,
        alpha: f64,
        k_max: Option<usize>,
    ) -> Arc<MfmCoefficients> {
        let key = (n_items, k_max, gamma.to_bits(), alpha.to_bits());
        if let Some(t) = self.tables.read().expect("cache poisoned").get(&key) {
            return Arc::clone(t);
        }
        let built = Arc::new(build_mfm_coefficients(n_items, gamma, alpha, k_max));
        let mut w = self.tables.write().expect("cache poisoned");
        Arc::clone(w.entry(key).or_insert(built))
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    /// Telescoping product for the Beta-Binomial sequence probability.
    fn telescoping(s: usize, f: usize, a0: f64, b0: f64) -> f64 {
        let mut lp = 0.0;
        for t in 0..s {
            lp += ((a0 + t as f64) / (a0 + b0 + t as f64)).ln();
        }
        for t in 0..f {
            lp += ((b0 + t as f64) / (a0 + b0 + (s + t) as f64)).ln();
        }
        lp
    }

    #[test]
    fn marginal_examples() {
        assert!(close(log_beta_binomial_marginal(1, 0, 1.0, 1.0).unwrap(), 0.5f64.ln(), 1e-14));
        assert!(close(
            log_beta_binomial_marginal(1, 1, 1.0, 1.0).unwrap(),
            (1.0f64 / 6.0).ln(),
            1e-14
        ));
        let direct = lgamma(0.01 + 3.0) + lgamma(0.01 + 1.0) - lgamma(0.02 + 4.0) - lgamma(0.01)
            - lgamma(0.01)
            + lgamma(0.02);
        let v = log_beta_binomial_marginal(3, 1, 0.01, 0.01).unwrap();
        assert!(close(v, direct, 1e-12));
        assert!(close(v, telescoping(3, 1, 0.01, 0.01), 1e-12));
    }

    #[test]
    fn marginal_of_nothing_is_zero() {
        assert_eq!(log_beta_binomial_marginal(0, 0, 0.01, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn extreme_shapes_report_non_finite() {
        let err = log_beta_binomial_marginal(1, 0, f64::MAX, f64::MAX);
        assert!(matches!(err, Err(Error::NonFiniteResult { .. })));
    }

    #[test]
    fn predictive_examples() {
        assert!(close(log_predictive(1, 0, 0, 0, 1.0, 1.0).unwrap(), 0.5f64.ln(), 1e-14));
        assert!(close(
            log_predictive(1, 0, 9, 0, 1.0, 1.0).unwrap(),
            (10.0f64 / 11.0).ln(),
            1e-14
        ));
        let diff = log_beta_binomial_marginal(5, 5, 0.01, 0.01).unwrap()
            - log_beta_binomial_marginal(3, 4, 0.01, 0.01).unwrap();
        assert!(close(log_predictive(2, 1, 3, 4, 0.01, 0.01).unwrap(), diff, 1e-12));
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let tab = BetaBinomialTable::new(0.01, 0.5, 200);
        for &(s, f, bs, bf) in &[(0, 0, 0, 0), (3, 1, 0, 0), (2, 5, 40, 17), (10, 0, 100, 90)] {
            let direct = log_predictive(s, f, bs, bf, 0.01, 0.5).unwrap();
            assert!(close(tab.log_predictive(s, f, bs, bf), direct, 1e-12));
        }
    }

    #[test]
    fn v_coefficient_examples() {
        let c = build_mfm_coefficients(1, 1.0, 1.0, None);
        assert!(c.log_v(1).abs() < 1e-12);

        // oracle: E[1/(K+1)] under zero-truncated Poisson(1), summed directly
        let e = std::f64::consts::E;
        let mut series = 0.0;
        let mut fact = 1.0;
        for k in 1..40 {
            fact *= k as f64;
            series += (-1.0f64).exp() / (fact * (1.0 - (-1.0f64).exp())) / (k as f64 + 1.0);
        }
        let c = build_mfm_coefficients(2, 1.0, 1.0, None);
        assert!(close(c.log_v(1).exp(), series, 1e-12));
        assert!(close(c.log_v(1).exp(), (e - 2.0) / (e - 1.0), 1e-12));

        let c = build_mfm_coefficients(5, 1.0, 1.0, Some(1));
        assert!(close(c.log_v(1).exp(), 1.0 / 120.0, 1e-12));
        assert_eq!(c.log_v(2), f64::NEG_INFINITY);
    }

    #[test]
    fn partition_prior_examples() {
        let c = build_mfm_coefficients(1, 1.0, 1.0, None);
        let p = Partition::singletons(1);
        assert!(close(log_partition_prior(&p, &c).unwrap(), c.log_v(1) + 1.0f64.ln(), 1e-14));

        let c = build_mfm_coefficients(3, 1.0, 1.0, Some(1));
        let p = Partition::from_labels(&[0, 0, 1]);
        assert!(matches!(
            log_partition_prior(&p, &c),
            Err(Error::BlockCountExceedsSupport { blocks: 2, k_max: 1 })
        ));

        // exhaustive normalization over the five partitions of three items
        let c = build_mfm_coefficients(3, 1.0, 1.0, None);
        let all = [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1], [0, 1, 2]];
        let total: f64 = all
            .iter()
            .map(|l| log_partition_prior(&Partition::from_labels(l), &c).unwrap().exp())
            .sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn larger_cap_never_decreases_unnormalized_v() {
        // Renormalizing the truncated Poisson can lower V itself, so the
        // monotone quantity is V times the truncation mass.
        let gamma: f64 = 1.0;
        for n in 1..8 {
            for t in 1..=n {
                let mut prev = f64::NEG_INFINITY;
                for k in 1..=n + 1 {
                    let c = build_mfm_coefficients(n, gamma, 1.0, Some(k));
                    let log_mass = log_sum_exp_iter(
                        (1..=k).map(|j| j as f64 * gamma.ln() - lgamma(j as f64 + 1.0)),
                    );
                    let v = c.log_v(t) + log_mass;
                    assert!(!v.is_finite() || v >= prev - 1e-12);
                    assert_eq!(v.is_finite(), t <= k);
                    prev = prev.max(v);
                }
            }
        }
        // the normalized value can drop: n = 2, t = 1 goes from 1/2 to 4/9
        let v1 = build_mfm_coefficients(2, 1.0, 1.0, Some(1)).log_v(1).exp();
        let v2 = build_mfm_coefficients(2, 1.0, 1.0, Some(2)).log_v(1).exp();
        assert!((v1 - 0.5).abs() < 1e-14 && (v2 - 4.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn cache_returns_shared_tables() {
        let cache = MfmCache::new();
        let a = cache.get(10, 1.0, 1.0, Some(3));
        let b = cache.get(10, 1.0, 1.0, Some(3));
        assert!(Arc::ptr_eq(&a, &b));
        let _ = cache.get(10, 1.0, 1.0, None);
        assert_eq!(cache.len(), 2);
    }

    proptest! {
        #[test]
        fn predictive_consistency(s1 in 0usize..20, f1 in 0usize..20, s2 in 0usize..20, f2 in 0usize..20) {
            let (a0, b0) = (0.3, 1.7);
            let joint = log_beta_binomial_marginal(s1 + s2, f1 + f2, a0, b0).unwrap();
            let split = log_beta_binomial_marginal(s1, f1, a0, b0).unwrap()
                + log_predictive(s2, f2, s1, f1, a0, b0).unwrap();
            prop_assert!(close(joint, split, 1e-11));
        }

        #[test]
        fn marginal_symmetry(s in 0usize..60, f in 0usize..60, a0 in 0.01f64..5.0, b0 in 0.01f64..5.0) {
            let l = log_beta_binomial_marginal(s, f, a0, b0).unwrap();
            let r = log_beta_binomial_marginal(f, s, b0, a0).unwrap();
            prop_assert!(close(l, r, 1e-12));
        }
    }
}
