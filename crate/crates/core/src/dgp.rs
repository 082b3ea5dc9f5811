//! Synthetic cohorts with known ground truth.
//!
//! Two generators: [`AcbmDesign`] draws each question cluster's examinees from
//! a binomial mixture; [`RaschDesign`] draws responses from the one-parameter
//! logistic model. Built-in designs `dgp1`..`dgp4` are available through
//! [`Design::builtin`].

use std::fs::File;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{AccuracyMatrix, ResponseMatrix};
use crate::metrics::{GroundTruth, TruthCluster};
use crate::partition::{kmax_bound, Partition};
use crate::sampler::seeded_rng;

/// RNG stream used for data generation; chains use their own stream.
pub const DATA_STREAM: u64 = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub size: usize,
    pub weights: Vec<f64>,
    pub accuracies: Vec<f64>,
}

impl MixtureSpec {
    fn new(size: usize, weights: &[f64], accuracies: &[f64]) -> Self {
        Self {
            size,
            weights: weights.to_vec(),
            accuracies: accuracies.to_vec(),
        }
    }
}

/// Question clusters occupy contiguous column ranges in listed order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcbmDesign {
    pub clusters: Vec<MixtureSpec>,
    pub n_examinees: usize,
    pub seed: u64,
}

impl AcbmDesign {
    pub fn n_questions(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::DesignInvariantViolation(m));
        if self.n_examinees == 0 || self.clusters.is_empty() {
            return bad("design needs at least one examinee and one cluster".into());
        }
        for (c, spec) in self.clusters.iter().enumerate() {
            if spec.size == 0 {
                return bad(format!("cluster {c} has no questions"));
            }
            let mut sorted = spec.accuracies.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return bad(format!("cluster {c}: accuracies must be distinct"));
            }
        }
        self.truth_skeleton().validate(true)
    }

    fn column_partition(&self) -> Partition {
        let labels: Vec<usize> = self
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(c, spec)| std::iter::repeat_n(c, spec.size))
            .collect();
        Partition::from_labels(&labels)
    }

    fn truth_skeleton(&self) -> GroundTruth {
        GroundTruth {
            col_partition: self.column_partition(),
            clusters: self
                .clusters
                .iter()
                .map(|s| TruthCluster {
                    weights: s.weights.clone(),
                    accuracies: s.accuracies.clone(),
                    row_labels: None,
                })
                .collect(),
            accuracy: None,
        }
    }

    /// Per cluster, draw every examinee's component, then each response as
    /// Bernoulli(accuracy of that component).
    pub fn generate(&self) -> Result<(ResponseMatrix, GroundTruth)> {
        self.validate()?;
        let n = self.n_examinees;
        let d = self.n_questions();
        let mut rng = seeded_rng(self.seed, DATA_STREAM);
        let mut truth = self.truth_skeleton();
        let mut entries = vec![0u8; n * d];
        let mut theta = vec![0.0; n * d];
        let mut first_col = 0;
        for (spec, tc) in self.clusters.iter().zip(truth.clusters.iter_mut()) {
            let pick = WeightedIndex::new(&spec.weights)
                .map_err(|e| Error::DesignInvariantViolation(e.to_string()))?;
            let labels: Vec<usize> = (0..n).map(|_| pick.sample(&mut rng)).collect();
            for (i, &k) in labels.iter().enumerate() {
                let p = spec.accuracies[k];
                for j in first_col..first_col + spec.size {
                    entries[i * d + j] = u8::from(rng.random_bool(p));
                    theta[i * d + j] = p;
                }
            }
            tc.row_labels = Some(labels);
            first_col += spec.size;
        }
        truth.accuracy = Some(AccuracyMatrix::from_fn(n, d, |i, j| theta[i * d + j]));
        Ok((ResponseMatrix::from_row_major(n, d, entries)?, truth))
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaschDesign {
    /// Difficulty of each question.
    pub psi: Vec<f64>,
    /// Abilities drawn uniformly per examinee.
    pub xi_support: Vec<f64>,
    pub n_examinees: usize,
    pub seed: u64,
}

impl RaschDesign {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DesignInvariantViolation(m.into()));
        if self.psi.is_empty() || self.xi_support.is_empty() || self.n_examinees == 0 {
            return bad("Rasch design needs questions, abilities and examinees");
        }
        if self.psi.iter().chain(&self.xi_support).any(|v| !v.is_finite()) {
            return bad("Rasch parameters must be finite");
        }
        let mut xs = self.xi_support.clone();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[0] == w[1]) {
            return bad("ability support values must be distinct");
        }
        Ok(())
    }

    /// Groups questions sharing a difficulty, in order of first appearance.
    fn difficulty_groups(&self) -> (Partition, Vec<f64>) {
        let mut levels: Vec<f64> = Vec::new();
        let labels: Vec<usize> = self
            .psi
            .iter()
            .map(|&p| match levels.iter().position(|&l| l == p) {
                Some(k) => k,
                None => {
                    levels.push(p);
                    levels.len() - 1
                }
            })
            .collect();
        (Partition::from_labels(&labels), levels)
    }

    pub fn generate(&self) -> Result<(ResponseMatrix, GroundTruth)> {
        self.validate()?;
        let n = self.n_examinees;
        let d = self.psi.len();
        let m = self.xi_support.len();
        let mut rng = seeded_rng(self.seed, DATA_STREAM);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let theta = AccuracyMatrix::from_fn(n, d, |i, j| logistic(self.xi_support[labels[i]] - self.psi[j]));
        let entries: Vec<u8> = theta.values().iter().map(|&p| u8::from(rng.random_bool(p))).collect();
        let (col_partition, levels) = self.difficulty_groups();
        let clusters = levels
            .iter()
            .map(|&psi| TruthCluster {
                weights: vec![1.0 / m as f64; m],
                accuracies: self.xi_support.iter().map(|&xi| logistic(xi - psi)).collect(),
                row_labels: Some(labels.clone()),
            })
            .collect();
        let truth = GroundTruth {
            col_partition,
            clusters,
            accuracy: Some(theta),
        };
        truth.validate(false)?;
        Ok((ResponseMatrix::from_row_major(n, d, entries)?, truth))
    }
}

/// A design file: either generator, tagged by `"kind"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Design {
    Acbm(AcbmDesign),
    Rasch(RaschDesign),
}

pub const BUILTIN_NAMES: [&str; 4] = ["dgp1", "dgp2", "dgp3", "dgp4"];

fn acbm_builtin(sizes: [usize; 3], n: usize, seed: u64) -> Design {
    let third = 1.0 / 3.0;
    Design::Acbm(AcbmDesign {
        clusters: vec![
            MixtureSpec::new(sizes[0], &[third, third, third], &[0.2, 0.5, 0.8]),
            MixtureSpec::new(sizes[1], &[0.5, 0.5], &[0.3, 0.9]),
            MixtureSpec::new(sizes[2], &[0.4, 0.3, 0.3], &[0.15, 0.55, 0.95]),
            MixtureSpec::new(1, &[1.0], &[0.4]),
            MixtureSpec::new(1, &[1.0], &[0.7]),
        ],
        n_examinees: n,
        seed,
    })
}

fn rasch_builtin(d: usize, n: usize, seed: u64) -> Design {
    Design::Rasch(RaschDesign {
        psi: (0..d).map(|j| if j < d / 2 { -0.5 } else { 0.5 }).collect(),
        xi_support: vec![-2.0, 0.0, 2.0],
        n_examinees: n,
        seed,
    })
}

impl Design {
    /// `dgp1`/`dgp2`: binomial mixtures on 20/60 questions;
    /// `dgp3`/`dgp4`: Rasch data on 20/60 questions.
    pub fn builtin(name: &str, n: usize, seed: u64) -> Option<Self> {
        Some(match name {
            "dgp1" => acbm_builtin([6, 6, 6], n, seed),
            "dgp2" => acbm_builtin([20, 20, 18], n, seed),
            "dgp3" => rasch_builtin(20, n, seed),
            "dgp4" => rasch_builtin(60, n, seed),
            _ => return None,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }

    pub fn n_examinees(&self) -> usize {
        match self {
            Design::Acbm(d) => d.n_examinees,
            Design::Rasch(d) => d.n_examinees,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Design::Acbm(d) => d.seed,
            Design::Rasch(d) => d.seed,
        }
    }

    /// Same design with another cohort size and seed.
    pub fn with_run(&self, n: usize, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Design::Acbm(d) => (d.n_examinees, d.seed) = (n, seed),
            Design::Rasch(d) => (d.n_examinees, d.seed) = (n, seed),
        }
        out
    }

    pub fn is_rasch(&self) -> bool {
        matches!(self, Design::Rasch(_))
    }

    pub fn generate(&self) -> Result<(ResponseMatrix, GroundTruth)> {
        match self {
            Design::Acbm(d) => d.generate(),
            Design::Rasch(d) => d.generate(),
        }
    }
}

/// Checks that every cluster in a design respects the component cap.
pub fn respects_bound(design: &AcbmDesign) -> bool {
    design.clusters.iter().all(|c| c.weights.len() <= kmax_bound(c.size))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_accuracy_gives_constant_columns() {
        let d = AcbmDesign {
            clusters: vec![MixtureSpec::new(3, &[1.0], &[1.0])],
            n_examinees: 50,
            seed: 1,
        };
        let (x, truth) = d.generate().unwrap();
        assert!(x.column_sums().iter().all(|&s| s == 50));
        assert_eq!(truth.col_partition.n_blocks(), 1);
    }

    #[test]
    fn builtin_dimensions() {
        let dims = |name: &str| {
            let (x, t) = Design::builtin(name, 30, 7).unwrap().generate().unwrap();
            (x.n_examinees(), x.n_questions(), t.col_partition.n_blocks())
        };
        assert_eq!(dims("dgp1"), (30, 20, 5));
        assert_eq!(dims("dgp2"), (30, 60, 5));
        assert_eq!(dims("dgp3"), (30, 20, 2));
        assert_eq!(dims("dgp4"), (30, 60, 2));
        assert!(Design::builtin("dgp9", 30, 7).is_none());
    }

    #[test]
    fn seeded_determinism() {
        let a = Design::builtin("dgp1", 40, 11).unwrap().generate().unwrap();
        let b = Design::builtin("dgp1", 40, 11).unwrap().generate().unwrap();
        let c = Design::builtin("dgp1", 40, 12).unwrap().generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn column_means_follow_mixture_means() {
        let n = 100_000;
        let Design::Acbm(design) = Design::builtin("dgp1", n, 5).unwrap() else {
            unreachable!()
        };
        let (x, _) = design.generate().unwrap();
        let sums = x.column_sums();
        let mut j = 0;
        for spec in &design.clusters {
            let mean: f64 = spec.weights.iter().zip(&spec.accuracies).map(|(w, t)| w * t).sum();
            for _ in 0..spec.size {
                let emp = sums[j] as f64 / n as f64;
                assert!((emp - mean).abs() < 0.01, "column {j}: {emp} vs {mean}");
                j += 1;
            }
        }
    }

    #[test]
    fn rasch_accuracies() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(1.5) - 1.0 / (1.0 + (-1.5f64).exp())).abs() < 1e-15);
        assert!((logistic(1.5) - 0.8176).abs() < 1e-4);
        let (_, truth) = Design::builtin("dgp3", 200, 3).unwrap().generate().unwrap();
        let acc = truth.accuracy.unwrap();
        let labels = truth.clusters[0].row_labels.as_ref().unwrap();
        let xi = [-2.0, 0.0, 2.0];
        for i in 0..200 {
            assert!((acc.get(i, 0) - logistic(xi[labels[i]] + 0.5)).abs() < 1e-15);
            assert!((acc.get(i, 19) - logistic(xi[labels[i]] - 0.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_designs_rejected() {
        let over_cap = AcbmDesign {
            clusters: vec![MixtureSpec::new(2, &[0.5, 0.5], &[0.2, 0.8])],
            n_examinees: 10,
            seed: 0,
        };
        assert!(!respects_bound(&over_cap));
        assert!(matches!(over_cap.generate(), Err(Error::DesignInvariantViolation(_))));
        let repeated = AcbmDesign {
            clusters: vec![MixtureSpec::new(3, &[0.5, 0.5], &[0.4, 0.4])],
            n_examinees: 10,
            seed: 0,
        };
        assert!(repeated.validate().is_err());
        let bad_weights = AcbmDesign {
            clusters: vec![MixtureSpec::new(3, &[0.5, 0.6], &[0.2, 0.4])],
            n_examinees: 10,
            seed: 0,
        };
        assert!(bad_weights.validate().is_err());
    }

    #[test]
    fn design_json_is_tagged() {
        let d = Design::builtin("dgp3", 10, 1).unwrap();
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.starts_with(r#"{"kind":"rasch""#));
        assert_eq!(serde_json::from_str::<Design>(&s).unwrap(), d);
    }
}
