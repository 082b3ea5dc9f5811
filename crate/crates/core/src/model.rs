use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;
use crate::partition::kmax_bound;
use crate::priors::{BetaBinomialTable, MfmCache, MfmCoefficients};

/// Prior hyperparameters of the two-level model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Beta prior shapes on every component accuracy.
    pub a0: f64,
    pub b0: f64,
    /// Poisson rate of the per-cluster component count.
    pub gamma_row: f64,
    /// Symmetric Dirichlet concentration of the examinee mixture weights.
    pub alpha_row: f64,
    /// Poisson rate of the question-cluster count.
    pub gamma_col: f64,
    /// Dirichlet concentration of the question-level partition prior.
    pub alpha_col: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            a0: 0.01,
            b0: 0.01,
            gamma_row: 1.0,
            alpha_row: 1.0,
            gamma_col: 1.0,
            alpha_col: 1.0,
        }
    }
}

impl Hyperparams {
    /// Uniform Beta prior with unit rates and concentrations.
    pub fn unit() -> Self {
        Hyperparams {
            a0: 1.0,
            b0: 1.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a0", self.a0),
            ("b0", self.b0),
            ("gamma_row", self.gamma_row),
            ("alpha_row", self.alpha_row),
            ("gamma_col", self.gamma_col),
            ("alpha_col", self.alpha_col),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidHyperparameter { name, value });
            }
        }
        Ok(())
    }
}

/// Immutable per-dataset context shared by every sweep of a chain: the data,
/// the hyperparameters and all precomputed prior tables.
#[derive(Clone, Debug)]
pub struct Model<'a> {
    x: &'a ResponseMatrix,
    h: Hyperparams,
    bb: BetaBinomialTable,
    col_prior: Arc<MfmCoefficients>,
    /// Indexed by the cap `k_max`; entry 0 is a placeholder.
    row_priors: Vec<Arc<MfmCoefficients>>,
    base_loglik: Vec<f64>,
}

impl<'a> Model<'a> {
    pub fn new(x: &'a ResponseMatrix, h: Hyperparams) -> Result<Self> {
        Self::with_cache(x, h, &MfmCache::new())
    }

    pub fn with_cache(x: &'a ResponseMatrix, h: Hyperparams, cache: &MfmCache) -> Result<Self> {
        h.validate()?;
        let n = x.n_examinees();
        let d = x.n_questions();
        let bb = BetaBinomialTable::new(h.a0, h.b0, n * d);
        let col_prior = cache.get(d, h.gamma_col, h.alpha_col, None);
        let max_cap = kmax_bound(d);
        let mut row_priors = Vec::with_capacity(max_cap + 1);
        row_priors.push(cache.get(n, h.gamma_row, h.alpha_row, Some(1)));
        for cap in 1..=max_cap {
            row_priors.push(cache.get(n, h.gamma_row, h.alpha_row, Some(cap)));
        }
        let base_loglik = x
            .column_sums()
            .into_iter()
            .map(|s| bb.log_marginal(s, n - s))
            .collect();
        Ok(Model {
            x,
            h,
            bb,
            col_prior,
            row_priors,
            base_loglik,
        })
    }

    #[inline]
    pub fn data(&self) -> &'a ResponseMatrix {
        self.x
    }

    #[inline]
    pub fn hyperparams(&self) -> &Hyperparams {
        &self.h
    }

    #[inline]
    pub fn beta_binomial(&self) -> &BetaBinomialTable {
        &self.bb
    }

    #[inline]
    pub fn column_prior(&self) -> &MfmCoefficients {
        &self.col_prior
    }

    /// Examinee-level partition prior for a question cluster of `cluster_size`.
    #[inline]
    pub fn row_prior(&self, cluster_size: usize) -> &MfmCoefficients {
        &self.row_priors[kmax_bound(cluster_size)]
    }

    /// Log likelihood of each column as its own cluster with one examinee block.
    #[inline]
    pub fn base_logliks(&self) -> &[f64] {
        &self.base_loglik
    }
}
