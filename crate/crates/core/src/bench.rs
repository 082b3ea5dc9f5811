//! Seeded Monte Carlo replications: simulate, fit, score, aggregate.
//!
//! Replication `r` uses seed `seed + r` for both the cohort and the chain
//! (on separate RNG streams). Replications run on a rayon pool whose size
//! can be capped with the `ACBM_THREADS` environment variable; results are
//! collected in replication order so reports are byte-stable.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::Design;
use crate::error::{Error, Result};
use crate::metrics::{evaluate, median, std_dev, MetricRow};
use crate::model::Hyperparams;
use crate::priors::MfmCache;
use crate::rasch::{fit_rasch, RaschConfig};
use crate::sampler::{run_chain_cached, SamplerConfig};
use crate::summarize::summarize_trace;

pub const THREADS_ENV: &str = "ACBM_THREADS";
pub const REPLICATIONS_FILE: &str = "replications.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const FAILURES_FILE: &str = "failures.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    /// Label written to the reports.
    pub name: String,
    /// Template design; cohort size and seed are replaced per replication.
    pub design: Design,
    pub ns: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Chain settings; the seed field is replaced per replication.
    pub sampler: SamplerConfig,
    pub hyper: Hyperparams,
    /// Fit the Rasch baseline too. Defaults to on for Rasch designs.
    pub rasch: Option<RaschConfig>,
}

impl BenchConfig {
    pub fn builtin(name: &str, ns: Vec<usize>, reps: usize, seed: u64) -> Option<Self> {
        let design = Design::builtin(name, 1, seed)?;
        let rasch = design.is_rasch().then(RaschConfig::default);
        Some(Self {
            name: name.to_string(),
            design,
            ns,
            reps,
            seed,
            sampler: SamplerConfig::default(),
            hyper: Hyperparams::default(),
            rasch,
        })
    }

    pub fn replication_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub dgp: String,
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub metrics: MetricRow,
    /// Kept states with a cluster above its component bound.
    pub constraint_violations: usize,
    pub kept_states: usize,
    /// Whether the Rasch EM log-likelihood never decreased, when fitted.
    pub rasch_monotone: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    pub message: String,
}

/// Median and sample standard deviation of each metric for one cohort size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dgp: String,
    pub n: usize,
    pub reps: usize,
    /// `(name, median, sd)` for every metric with at least one value.
    pub stats: Vec<(String, f64, f64)>,
}

impl AggregateRow {
    pub fn median_of(&self, metric: &str) -> Option<f64> {
        self.stats.iter().find(|s| s.0 == metric).map(|s| s.1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub replications: Vec<ReplicationResult>,
    pub aggregates: Vec<AggregateRow>,
    pub failures: Vec<ReplicationFailure>,
}

pub const METRIC_NAMES: [&str; 7] = ["cwri", "adk", "adw", "adp", "arwri", "d1_acbm", "d1_rasch"];

fn metric_values(m: &MetricRow) -> [Option<f64>; 7] {
    [
        Some(m.cwri),
        Some(m.adk),
        Some(m.adw),
        Some(m.adp),
        m.arwri,
        m.d1_acbm,
        m.d1_rasch,
    ]
}

/// One simulate-fit-score cycle.
pub fn run_replication(cfg: &BenchConfig, n: usize, rep: usize, cache: &MfmCache) -> Result<ReplicationResult> {
    let seed = cfg.replication_seed(rep);
    let (x, truth) = cfg.design.with_run(n, seed).generate()?;
    let sampler = SamplerConfig {
        seed,
        ..cfg.sampler
    };
    let trace = run_chain_cached(&x, &cfg.hyper, &sampler, cache)?;
    let constraint_violations = trace.records.iter().filter(|r| r.bound_violations() > 0).count();
    let fit = summarize_trace(&x, &trace, &cfg.hyper)?;
    let rasch = cfg.rasch.as_ref().map(|rc| fit_rasch(&x, rc)).transpose()?;
    let rasch_acc = rasch.as_ref().map(|f| f.accuracy_matrix());
    let metrics = evaluate(&fit, &truth, rasch_acc.as_ref())?;
    Ok(ReplicationResult {
        dgp: cfg.name.clone(),
        n,
        replication: rep,
        seed,
        metrics,
        constraint_violations,
        kept_states: trace.len(),
        rasch_monotone: rasch.map(|f| f.loglik_monotone()),
    })
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v
            .parse()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(k);
    }
    builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

pub fn aggregate(name: &str, n: usize, results: &[&ReplicationResult]) -> AggregateRow {
    let stats = METRIC_NAMES
        .iter()
        .enumerate()
        .filter_map(|(k, &metric)| {
            let vals: Vec<f64> = results.iter().filter_map(|r| metric_values(&r.metrics)[k]).collect();
            (!vals.is_empty()).then(|| (metric.to_string(), median(&vals), std_dev(&vals)))
        })
        .collect();
    AggregateRow {
        dgp: name.to_string(),
        n,
        reps: results.len(),
        stats,
    }
}

/// Runs every (n, replication) pair and aggregates per n.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.ns.is_empty() || cfg.reps == 0 {
        return Err(Error::InvalidConfig("bench needs at least one n and one replication".into()));
    }
    cfg.sampler.validate()?;
    cfg.hyper.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .ns
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |r| (n, r)))
        .collect();
    let cache = MfmCache::new();
    let outcomes: Vec<Result<ReplicationResult>> =
        thread_pool()?.install(|| jobs.par_iter().map(|&(n, r)| run_replication(cfg, n, r, &cache)).collect());

    let mut report = BenchReport::default();
    for ((n, rep), out) in jobs.into_iter().zip(outcomes) {
        match out {
            Ok(r) => report.replications.push(r),
            Err(e) => report.failures.push(ReplicationFailure {
                n,
                replication: rep,
                seed: cfg.replication_seed(rep),
                message: e.to_string(),
            }),
        }
    }
    for &n in &cfg.ns {
        let rows: Vec<&ReplicationResult> = report.replications.iter().filter(|r| r.n == n).collect();
        if !rows.is_empty() {
            report.aggregates.push(aggregate(&cfg.name, n, &rows));
        }
    }
    Ok(report)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl BenchReport {
    pub fn replications_csv(&self) -> String {
        let mut out = String::from(
            "dgp,n,replication,seed,cwri,adk,adw,adp,arwri,d1_acbm,d1_rasch,constraint_violations\n",
        );
        for r in &self.replications {
            let vals: Vec<String> = metric_values(&r.metrics).into_iter().map(fmt_opt).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.dgp,
                r.n,
                r.replication,
                r.seed,
                vals.join(","),
                r.constraint_violations
            );
        }
        out
    }

    /// One row per cohort size; each metric as `median,sd` columns.
    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("dgp,n,reps");
        for m in METRIC_NAMES {
            let _ = write!(out, ",{m}_median,{m}_sd");
        }
        out.push('\n');
        for a in &self.aggregates {
            let _ = write!(out, "{},{},{}", a.dgp, a.n, a.reps);
            for m in METRIC_NAMES {
                match a.stats.iter().find(|s| s.0 == m) {
                    Some((_, med, sd)) => {
                        let _ = write!(out, ",{med:.6},{sd:.6}");
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn failures_csv(&self) -> String {
        let mut out = String::from("n,replication,seed,message\n");
        for f in &self.failures {
            let msg = f.message.replace('"', "'");
            let _ = writeln!(out, "{},{},{},\"{}\"", f.n, f.replication, f.seed, msg);
        }
        out
    }

    /// Writes the report CSVs into `dir`, creating it if needed. The
    /// failures file is written only when some replication failed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (REPLICATIONS_FILE, self.replications_csv()),
            (AGGREGATE_FILE, self.aggregate_csv()),
        ];
        if !self.failures.is_empty() {
            files.push((FAILURES_FILE, self.failures_csv()));
        }
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn total_violations(&self) -> usize {
        self.replications.iter().map(|r| r.constraint_violations).sum()
    }

    pub fn aggregate_for(&self, n: usize) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.n == n)
    }
}
