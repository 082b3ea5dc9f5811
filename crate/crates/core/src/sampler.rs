//! Collapsed Gibbs sampler over the question partition and the examinee
//! partitions under each question cluster.
//!
//! One outer iteration is a sweep over the columns followed by `n_rep`
//! sweeps over the examinees of every question cluster. Mixture weights and
//! component accuracies are integrated out, so the state is purely
//! combinatorial.
//!
//! The target is
//!
//! ```text
//! p(C, rho | X) ∝ m(C) * prod_c [ EPPF_{n, kmax(|c|)}(rho_c) * prod_k BB(S_ck, F_ck) ]
//! ```
//!
//! where `m` is the question-level partition prior, `rho_c` the examinee
//! partition of cluster `c`, and the examinee-level prior is truncated at
//! `kmax(|c|) = floor((|c| + 1) / 2)` components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ResponseMatrix;
use crate::model::{Hyperparams, Model};
use crate::partition::{kmax_bound, Partition};
use crate::priors::{log_partition_prior, MfmCache};
use crate::state::{ClusterState, ModelState};
use crate::trace::{ChainTrace, TraceMeta};

pub const RNG_NAME: &str = "ChaCha8Rng";
/// RNG stream of the Gibbs chain, distinct from the data-generation stream.
pub const CHAIN_STREAM: u64 = 1;

/// Generator for `seed` on an independent `stream`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    OneCluster,
    #[default]
    AllSingletons,
    Random,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::OneCluster => "one-cluster",
            InitMode::AllSingletons => "all-singletons",
            InitMode::Random => "random",
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "one-cluster" => Ok(InitMode::OneCluster),
            "all-singletons" => Ok(InitMode::AllSingletons),
            "random" => Ok(InitMode::Random),
            other => Err(format!("unknown init mode '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub n_rep: usize,
    /// Defaults to `n_iter / 2`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    pub thinning: usize,
    pub init_mode: InitMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_iter: 200,
            n_rep: 400,
            burn_in: None,
            seed: 0,
            thinning: 1,
            init_mode: InitMode::AllSingletons,
        }
    }
}

impl SamplerConfig {
    pub fn burn_in(&self) -> usize {
        self.burn_in.unwrap_or(self.n_iter / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidConfig("n_iter must be positive".into()));
        }
        if self.burn_in() >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "burn_in {} must be below n_iter {}",
                self.burn_in(),
                self.n_iter
            )));
        }
        if self.n_rep == 0 {
            return Err(Error::InvalidConfig("n_rep must be at least 1".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// Log likelihood of each column as a lone cluster with one examinee block.
pub fn precompute_column_base_logliks(x: &ResponseMatrix, h: &Hyperparams) -> Result<Vec<f64>> {
    let n = x.n_examinees();
    x.column_sums()
        .into_iter()
        .map(|s| crate::priors::log_beta_binomial_marginal(s, n - s, h.a0, h.b0))
        .collect()
}

/// Draws an index with probability proportional to `exp(log_weights)`.
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    sample_log_weights_with(log_weights, &mut Vec::new(), rng)
}

/// As [`sample_log_weights`], using `probs` as scratch space.
#[inline]
pub fn sample_log_weights_with<R: Rng + ?Sized>(
    log_weights: &[f64],
    probs: &mut Vec<f64>,
    rng: &mut R,
) -> usize {
    debug_assert!(!log_weights.is_empty());
    if log_weights.len() == 1 {
        return 0;
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "no feasible candidate");
    probs.clear();
    let mut total = 0.0;
    for &w in log_weights {
        let p = (w - max).exp();
        total += p;
        probs.push(p);
    }
    let mut u = rng.random::<f64>() * total;
    for (k, &p) in probs.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    // rounding fallthrough: last candidate with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Unnormalized log posterior of `state`.
pub fn log_joint(model: &Model<'_>, state: &ModelState) -> f64 {
    let bb = model.beta_binomial();
    let col = log_partition_prior(&state.column_partition(), model.column_prior())
        .expect("question partition outside prior support");
    let clusters: f64 = state
        .clusters()
        .map(|(_, c)| {
            let prior = model.row_prior(c.size());
            let mut v = prior.log_v(c.n_blocks());
            for (_, b) in c.active_blocks() {
                v += prior.log_block_factor(b.members) + bb.log_marginal(b.successes, b.failures);
            }
            v
        })
        .sum();
    col + clusters
}

/// Log examinee-partition prior of a fresh single-column cluster.
fn singleton_row_prior(model: &Model<'_>) -> f64 {
    let prior = model.row_prior(1);
    prior.log_v(1) + prior.log_block_factor(model.data().n_examinees())
}

/// Reusable buffers for the column sweep.
#[derive(Default)]
struct ColumnScratch {
    per_block: Vec<usize>,
    own_per_block: Vec<usize>,
    weights: Vec<f64>,
    probs: Vec<f64>,
    targets: Vec<Option<usize>>,
}

/// Log weight of column `j` joining `cluster` (which does not contain it).
fn join_weight(model: &Model<'_>, cluster: &ClusterState, per_block: &[usize]) -> f64 {
    let h = model.hyperparams();
    let bb = model.beta_binomial();
    let size = cluster.size();
    let k = cluster.n_blocks();
    let mut w = (size as f64 + h.alpha_col).ln() + model.row_prior(size + 1).log_v(k)
        - model.row_prior(size).log_v(k);
    for (b, stats) in cluster.active_blocks() {
        let s = per_block[b];
        w += bb.log_predictive(s, stats.members - s, stats.successes, stats.failures);
    }
    w
}

/// One sweep over the columns in index order.
pub fn gibbs_update_columns<R: Rng + ?Sized>(model: &Model<'_>, state: &mut ModelState, rng: &mut R) {
    let mut scratch = ColumnScratch::default();
    for j in 0..model.data().n_questions() {
        update_column(model, state, j, rng, &mut scratch);
    }
}

fn update_column<R: Rng + ?Sized>(
    model: &Model<'_>,
    state: &mut ModelState,
    j: usize,
    rng: &mut R,
    scratch: &mut ColumnScratch,
) {
    let x = model.data();
    let h = model.hyperparams();
    let src = state.col_cluster[j];
    let src_size = state.cluster(src).expect("live slot").size();
    if src_size >= 2 && state.cluster(src).unwrap().n_blocks() > kmax_bound(src_size - 1) {
        // every other destination has zero prior mass
        return;
    }

    // take j out
    let from_singleton = src_size == 1;
    if from_singleton {
        state.clusters[src] = None;
        state.n_clusters -= 1;
    } else {
        let c = state.cluster(src).unwrap();
        c.column_block_successes(x, j, &mut scratch.own_per_block);
        state.cluster_mut(src).remove_column(x, j, &scratch.own_per_block);
    }

    scratch.weights.clear();
    scratch.targets.clear();
    let mut original = None;
    for (slot, c) in state.clusters() {
        let per_block = if slot == src {
            original = Some(scratch.weights.len());
            &scratch.own_per_block
        } else {
            c.column_block_successes(x, j, &mut scratch.per_block);
            &scratch.per_block
        };
        scratch.weights.push(join_weight(model, c, per_block));
        scratch.targets.push(Some(slot));
    }
    let t = state.n_clusters;
    let new_weight = h.alpha_col.ln()
        + model.column_prior().log_v_ratio(t)
        + model.base_logliks()[j]
        + singleton_row_prior(model);
    if from_singleton {
        original = Some(scratch.weights.len());
    }
    scratch.weights.push(new_weight);
    scratch.targets.push(None);

    let pick = sample_log_weights_with(&scratch.weights, &mut scratch.probs, rng);
    let original = original.expect("current placement is always a candidate");
    state.log_joint += scratch.weights[pick] - scratch.weights[original];

    match scratch.targets[pick] {
        Some(slot) => {
            let per_block: &[usize] = if slot == src {
                &scratch.own_per_block
            } else {
                state
                    .cluster(slot)
                    .unwrap()
                    .column_block_successes(x, j, &mut scratch.per_block);
                &scratch.per_block
            };
            state.cluster_mut(slot).insert_column(x, j, per_block);
            state.col_cluster[j] = slot;
        }
        None => {
            let fresh = ClusterState::singleton(x, j);
            let slot = match state.clusters.iter().position(Option::is_none) {
                Some(s) => {
                    state.clusters[s] = Some(fresh);
                    s
                }
                None => {
                    state.clusters.push(Some(fresh));
                    state.clusters.len() - 1
                }
            };
            state.n_clusters += 1;
            state.col_cluster[j] = slot;
        }
    }
}

/// One sweep over the examinees of the cluster in `slot`, in row order.
pub fn gibbs_update_rows<R: Rng + ?Sized>(
    model: &Model<'_>,
    state: &mut ModelState,
    slot: usize,
    rng: &mut R,
) {
    let h = model.hyperparams();
    let bb = model.beta_binomial();
    let size = state.cluster(slot).expect("live slot").size();
    let cap = kmax_bound(size);
    if cap == 1 {
        // a single block is the only configuration with prior mass
        return;
    }
    let prior = model.row_prior(size);
    let ln_alpha = h.alpha_row.ln();
    let n = model.data().n_examinees();
    let mut weights: Vec<f64> = Vec::with_capacity(cap + 1);
    let mut targets: Vec<usize> = Vec::with_capacity(cap + 1);
    let mut probs: Vec<f64> = Vec::with_capacity(cap + 1);
    let mut delta = 0.0;
    let cluster = state.cluster_mut(slot);
    for i in 0..n {
        let s = cluster.row_successes[i];
        let f = size - s;
        let (from, emptied) = cluster.detach_row(i);

        weights.clear();
        targets.clear();
        let mut original = usize::MAX;
        for (b, stats) in cluster.blocks.iter().enumerate() {
            if stats.members == 0 {
                continue;
            }
            if b == from {
                original = weights.len();
            }
            weights.push(
                (stats.members as f64 + h.alpha_row).ln()
                    + bb.log_predictive(s, f, stats.successes, stats.failures),
            );
            targets.push(b);
        }
        let t = cluster.n_active;
        if t < cap {
            if emptied {
                original = weights.len();
            }
            weights.push(ln_alpha + prior.log_v_ratio(t) + bb.log_marginal(s, f));
            targets.push(usize::MAX);
        }

        let pick = sample_log_weights_with(&weights, &mut probs, rng);
        delta += weights[pick] - weights[original];
        let dest = match targets[pick] {
            usize::MAX => {
                if emptied {
                    from
                } else {
                    cluster.free_block_slot()
                }
            }
            b => b,
        };
        cluster.attach_row(i, dest);
    }
    state.log_joint += delta;
}

fn initial_state<R: Rng + ?Sized>(
    x: &ResponseMatrix,
    mode: InitMode,
    rng: &mut R,
) -> ModelState {
    let d = x.n_questions();
    let n = x.n_examinees();
    let columns = match mode {
        InitMode::AllSingletons => return ModelState::all_singletons(x),
        InitMode::OneCluster => Partition::one_block(d),
        InitMode::Random => {
            let labels: Vec<usize> = (0..d).map(|_| rng.random_range(0..d)).collect();
            Partition::from_labels(&labels)
        }
    };
    let rows = vec![Partition::one_block(n); columns.n_blocks()];
    ModelState::from_partitions(x, &columns, &rows).expect("single-block clusters always fit")
}

const DEBUG_CHECK_EVERY: usize = 50;

/// Runs a chain and hands every kept state to `keep` together with its outer
/// iteration index. Returns the final state.
pub fn run_chain_with<F>(
    model: &Model<'_>,
    config: &SamplerConfig,
    mut keep: F,
) -> Result<ModelState>
where
    F: FnMut(usize, &ModelState),
{
    config.validate()?;
    let x = model.data();
    let mut rng = seeded_rng(config.seed, CHAIN_STREAM);
    let mut state = initial_state(x, config.init_mode, &mut rng);
    state.set_log_joint(log_joint(model, &state));
    let burn_in = config.burn_in();
    let mut sweeps = 0usize;
    for iter in 0..config.n_iter {
        gibbs_update_columns(model, &mut state, &mut rng);
        for _ in 0..config.n_rep {
            for slot in state.canonical_slots() {
                gibbs_update_rows(model, &mut state, slot, &mut rng);
            }
            sweeps += 1;
            if cfg!(debug_assertions) && sweeps % DEBUG_CHECK_EVERY == 0 {
                debug_assert!(state.verify_suffstats(x), "incremental statistics drifted");
                let fresh = log_joint(model, &state);
                debug_assert!(
                    (fresh - state.log_joint).abs() <= 1e-6 * (1.0 + fresh.abs()),
                    "cached log joint {} drifted from {}",
                    state.log_joint,
                    fresh
                );
            }
        }
        assert!(state.satisfies_bounds(), "component bound violated at iteration {iter}");
        // refresh to keep rounding from accumulating
        state.set_log_joint(log_joint(model, &state));
        if iter >= burn_in && (iter - burn_in) % config.thinning == 0 {
            keep(iter, &state);
        }
    }
    Ok(state)
}

/// Runs a chain and records every kept state.
pub fn run_chain(x: &ResponseMatrix, h: &Hyperparams, config: &SamplerConfig) -> Result<ChainTrace> {
    run_chain_cached(x, h, config, &MfmCache::new())
}

pub fn run_chain_cached(
    x: &ResponseMatrix,
    h: &Hyperparams,
    config: &SamplerConfig,
    cache: &MfmCache,
) -> Result<ChainTrace> {
    let model = Model::with_cache(x, *h, cache)?;
    let mut records = Vec::new();
    run_chain_with(&model, config, |iter, st| records.push(st.record(iter)))?;
    Ok(ChainTrace {
        meta: TraceMeta {
            seed: config.seed,
            rng: RNG_NAME.to_string(),
            n_iter: config.n_iter,
            n_rep: config.n_rep,
            burn_in: config.burn_in(),
            thinning: config.thinning,
            init_mode: config.init_mode.name().to_string(),
        },
        records,
    })
}
