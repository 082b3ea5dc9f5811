//! Command-line front end: `simulate`, `fit`, `rasch`, `evaluate`, `bench`
//! and `report`.
//!
//! Any flag may also come from a JSON object passed with `--config FILE`
//! (keys are long flag names); flags given on the command line win.
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{run_bench, BenchConfig};
use crate::dgp::Design;
use crate::error::Error;
use crate::matrix::ResponseMatrix;
use crate::metrics::{evaluate, GroundTruth, MetricRow};
use crate::model::Hyperparams;
use crate::rasch::{fit_rasch, RaschConfig, RaschFit};
use crate::sampler::{run_chain, InitMode, SamplerConfig};
use crate::summarize::{summarize_trace, FitSummary};

#[derive(Debug, Parser)]
#[command(name = "acbm", version, about = "Averaged constrained binomial mixture IRT model")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file supplying default values for any flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a cohort and write matrix.csv and truth.json.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler and summarize the chain.
    Fit(FitArgs),
    /// Fit the Rasch baseline.
    Rasch(RaschArgs),
    /// Score a fit against the simulation truth.
    Evaluate(EvaluateArgs),
    /// Monte Carlo replications with median/SD tables.
    Bench(BenchArgs),
    /// Per-cluster table and examinee cross-tabulations of a fit.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Built-in design (dgp1..dgp4) or path to a design JSON file.
    #[arg(long)]
    pub design: String,
    /// Number of examinees (required for built-in designs).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 200)]
    pub n_iter: usize,
    #[arg(long, default_value_t = 400)]
    pub n_rep: usize,
    /// Discarded outer iterations (default n_iter / 2).
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub thinning: usize,
    #[arg(long, default_value = "all-singletons")]
    pub init: InitMode,
    #[arg(long, default_value_t = 0.01)]
    pub a0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub b0: f64,
    /// Poisson rate of the examinee-level component count.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Dirichlet concentration at the examinee level.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Question-level Poisson rate (defaults to --gamma).
    #[arg(long)]
    pub gamma_col: Option<f64>,
    /// Question-level concentration (defaults to --alpha).
    #[arg(long)]
    pub alpha_col: Option<f64>,
}

impl ChainArgs {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            a0: self.a0,
            b0: self.b0,
            gamma_row: self.gamma,
            alpha_row: self.alpha,
            gamma_col: self.gamma_col.unwrap_or(self.gamma),
            alpha_col: self.alpha_col.unwrap_or(self.alpha),
        }
    }

    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            n_iter: self.n_iter,
            n_rep: self.n_rep,
            burn_in: self.burn_in,
            seed,
            thinning: self.thinning,
            init_mode: self.init,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Response matrix CSV (0/1 entries, optional header row).
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RaschArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 21)]
    pub nodes: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub summary: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Rasch fit JSON, for the baseline D1 column.
    #[arg(long)]
    pub rasch: Option<PathBuf>,
    /// Design label for the `dgp` column.
    #[arg(long, default_value = "custom")]
    pub dgp: String,
    #[arg(long, default_value_t = 0)]
    pub replication: usize,
    /// Output CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Built-in design (dgp1..dgp4) or path to a design JSON file.
    #[arg(long)]
    pub design: String,
    /// Cohort sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also fit the Rasch baseline (always on for Rasch designs).
    #[arg(long)]
    pub with_rasch: bool,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value = "bench")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub summary: PathBuf,
    /// Two question-cluster ids to cross-tabulate, e.g. `0,2`.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub pair: Option<Vec<usize>>,
    /// Output file; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Turns a JSON object into `--key value` pairs.
fn config_flags(path: &Path) -> Result<Vec<OsString>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(Error::io(path, e)))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Runtime(e.into()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Usage(format!("{} must hold a JSON object", path.display())))?;
    let mut out = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => out.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                out.push(flag.into());
                out.push(s.into());
            }
            serde_json::Value::Number(n) => {
                out.push(flag.into());
                out.push(n.to_string().into());
            }
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string))
                    .collect();
                out.push(flag.into());
                out.push(joined.join(",").into());
            }
            serde_json::Value::Object(_) => {
                return Err(CliError::Usage(format!("config key {key:?} cannot be an object")));
            }
        }
    }
    Ok(out)
}

/// Splices config-file flags in right after the subcommand so that later
/// command-line occurrences override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let pos = args.iter().position(|a| a == "--config");
    let Some(pos) = pos else {
        return Ok(args);
    };
    let path = args
        .get(pos + 1)
        .ok_or_else(|| CliError::Usage("--config needs a file".into()))?;
    let flags = config_flags(Path::new(path))?;
    let mut rest: Vec<OsString> = args[..pos].iter().chain(&args[pos + 2..]).cloned().collect();
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(rest.len(), |p| p + 2);
    rest.splice(sub..sub, flags);
    Ok(rest)
}

fn resolve_design(spec: &str, n: Option<usize>, seed: u64) -> Result<Design, CliError> {
    if let Some(d) = Design::builtin(spec, n.unwrap_or(1), seed) {
        if n.is_none() {
            return Err(CliError::Usage(format!("--n is required for built-in design {spec}")));
        }
        return Ok(d);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "unknown design {spec:?}: expected dgp1, dgp2, dgp3, dgp4 or a design JSON file"
        )));
    }
    let d = Design::read(path).map_err(|e| CliError::Usage(format!("invalid design file: {e}")))?;
    Ok(d.with_run(n.unwrap_or_else(|| d.n_examinees()), seed))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Runtime(Error::io(p, e))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let design = resolve_design(&args.design, args.n, args.seed)?;
    let (x, truth) = design.generate().map_err(|e| match e {
        Error::DesignInvariantViolation(m) => CliError::Usage(format!("invalid design: {m}")),
        other => CliError::Runtime(other),
    })?;
    create_dir(&args.out)?;
    x.write_csv(args.out.join("matrix.csv"))?;
    truth.write(args.out.join("truth.json"))?;
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<FitSummary, CliError> {
    let x = ResponseMatrix::read_csv(&args.matrix)?;
    let h = args.chain.hyperparams();
    let config = args.chain.sampler(args.seed);
    let trace = run_chain(&x, &h, &config)?;
    let summary = summarize_trace(&x, &trace, &h)?;
    create_dir(&args.out)?;
    trace.write(args.out.join("trace.ndjson"))?;
    summary.write(args.out.join("summary.json"))?;
    Ok(summary)
}

pub fn cmd_rasch(args: &RaschArgs) -> Result<RaschFit, CliError> {
    let x = ResponseMatrix::read_csv(&args.matrix)?;
    let config = RaschConfig {
        n_nodes: args.nodes,
        max_iter: args.max_iter,
        tol: args.tol,
    };
    let fit = fit_rasch(&x, &config)?;
    if !fit.degenerate_items.is_empty() {
        eprintln!(
            "warning: items {:?} have constant responses; difficulties clamped at +/-10",
            fit.degenerate_items
        );
    }
    if !fit.converged {
        eprintln!("warning: EM stopped after {} iterations without converging", fit.iterations);
    }
    create_dir(&args.out)?;
    fit.write(args.out.join("rasch.json"))?;
    fit.accuracy_matrix().write_csv(args.out.join("rasch_accuracy.csv"))?;
    Ok(fit)
}

pub const METRICS_HEADER: &str = "dgp,n,replication,cwri,adk,adw,adp,arwri,d1_acbm,d1_rasch";

pub fn metrics_csv_line(dgp: &str, n: usize, replication: usize, m: &MetricRow) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    format!(
        "{dgp},{n},{replication},{:.6},{:.6},{:.6},{:.6},{},{},{}",
        m.cwri,
        m.adk,
        m.adw,
        m.adp,
        opt(m.arwri),
        opt(m.d1_acbm),
        opt(m.d1_rasch)
    )
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<MetricRow, CliError> {
    let fit = FitSummary::read(&args.summary)?;
    let truth = GroundTruth::read(&args.truth)?;
    let rasch = args.rasch.as_ref().map(RaschFit::read).transpose()?;
    let rasch_acc = rasch.map(|r| r.accuracy_matrix());
    let m = evaluate(&fit, &truth, rasch_acc.as_ref())?;
    let line = metrics_csv_line(&args.dgp, fit.accuracy.rows(), args.replication, &m);
    write_text(args.out.as_deref(), &format!("{METRICS_HEADER}\n{line}\n"))?;
    Ok(m)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let (name, design) = match Design::builtin(&args.design, 1, args.seed) {
        Some(d) => (args.design.clone(), d),
        None => {
            let d = resolve_design(&args.design, None, args.seed)?;
            let stem = Path::new(&args.design)
                .file_stem()
                .map_or_else(|| "custom".to_string(), |s| s.to_string_lossy().into_owned());
            (stem, d)
        }
    };
    let rasch = (design.is_rasch() || args.with_rasch).then(RaschConfig::default);
    let cfg = BenchConfig {
        name,
        design,
        ns: args.n.clone(),
        reps: args.reps,
        seed: args.seed,
        sampler: args.chain.sampler(args.seed),
        hyper: args.chain.hyperparams(),
        rasch,
    };
    let report = run_bench(&cfg)?;
    report.write(&args.out)?;
    for f in &report.failures {
        eprintln!("replication {} (n={}, seed {}) failed: {}", f.replication, f.n, f.seed, f.message);
    }
    if !report.failures.is_empty() {
        return Err(CliError::Runtime(Error::InvalidConfig(format!(
            "{} replications failed; see {}",
            report.failures.len(),
            args.out.join(crate::bench::FAILURES_FILE).display()
        ))));
    }
    Ok(())
}

/// Block order of a cluster, by ascending accuracy.
fn accuracy_order(theta: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| theta[a].total_cmp(&theta[b]));
    order
}

/// Per-cluster table: size, component count and accuracies in ascending
/// order with block sizes.
pub fn cluster_table(fit: &FitSummary) -> String {
    let mut out = String::from("cluster,size,K,accuracies,examinees\n");
    for (c, cl) in fit.clusters.iter().enumerate() {
        let order = accuracy_order(&cl.theta);
        let acc: Vec<String> = order.iter().map(|&k| format!("{:.3}", cl.theta[k])).collect();
        let sizes: Vec<String> = order.iter().map(|&k| cl.block_sizes[k].to_string()).collect();
        let _ = writeln!(out, "{c},{},{},{},{}", cl.size, cl.k, acc.join(" "), sizes.join(" "));
    }
    out
}

/// Examinee counts for each pair of blocks of two question clusters, blocks
/// ordered by ascending accuracy.
pub fn pair_table(fit: &FitSummary, a: usize, b: usize) -> Result<String, CliError> {
    let n_clusters = fit.clusters.len();
    if a >= n_clusters || b >= n_clusters {
        return Err(CliError::Usage(format!("cluster ids must be below {n_clusters}")));
    }
    let (pa, pb) = (&fit.row_partitions[a], &fit.row_partitions[b]);
    let table = pa.contingency(pb)?;
    let (oa, ob) = (accuracy_order(&fit.clusters[a].theta), accuracy_order(&fit.clusters[b].theta));
    let mut out = String::new();
    let head: Vec<String> = ob.iter().map(|&k| format!("{:.3}", fit.clusters[b].theta[k])).collect();
    let _ = writeln!(out, "cluster {a} \\ cluster {b},{}", head.join(","));
    for &r in &oa {
        let cells: Vec<String> = ob.iter().map(|&k| table[r][k].to_string()).collect();
        let _ = writeln!(out, "{:.3},{}", fit.clusters[a].theta[r], cells.join(","));
    }
    Ok(out)
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let fit = FitSummary::read(&args.summary)?;
    let mut text = cluster_table(&fit);
    if let Some(pair) = &args.pair {
        if pair.len() != 2 {
            return Err(CliError::Usage("--pair takes exactly two cluster ids".into()));
        }
        text.push('\n');
        text.push_str(&pair_table(&fit, pair[0], pair[1])?);
    }
    write_text(args.out.as_deref(), &text)
}

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a).map(drop),
        Command::Rasch(a) => cmd_rasch(a).map(drop),
        Command::Evaluate(a) => cmd_evaluate(a).map(drop),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let outcome = expand_config(args).and_then(|args| match Cli::try_parse_from(args) {
        Ok(cli) => dispatch(&cli),
        Err(e) => {
            let _ = e.print();
            // --help and --version exit successfully
            if e.exit_code() == 0 {
                Ok(())
            } else {
                Err(CliError::Usage(String::new()))
            }
        }
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            if !matches!(&e, CliError::Usage(m) if m.is_empty()) {
                eprintln!("{e}");
            }
            e.exit_code()
        }
    }
}

pub fn main() {
    std::process::exit(run(std::env::args_os()));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_flags_are_spliced_after_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"design": "dgp1", "n_iter": 7, "seed": 3, "n": [100, 300]}"#).unwrap();
        let args: Vec<OsString> = ["acbm", "--config", cfg.to_str().unwrap(), "bench", "--seed", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        let out = expand_config(args).unwrap();
        let strs: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(strs[..2], ["acbm", "bench"]);
        assert_eq!(strs.last().unwrap(), "9");
        let Cli { command: Command::Bench(b), .. } = Cli::try_parse_from(out).unwrap() else {
            panic!("expected bench");
        };
        assert_eq!((b.seed, b.chain.n_iter, b.n.clone()), (9, 7, vec![100, 300]));
    }

    #[test]
    fn unknown_design_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let code = run(["acbm", "simulate", "--design", "dgp9", "--n", "5", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code, 2);
        assert_eq!(run(["acbm", "simulate"]), 2);
        assert_eq!(run(["acbm", "fit", "--matrix", "/nonexistent/matrix.csv"]), 1);
    }

    #[test]
    fn fit_defaults_follow_the_reference_settings() {
        let cli = Cli::try_parse_from(["acbm", "fit", "--matrix", "m.csv"]).unwrap();
        let Command::Fit(f) = cli.command else { panic!() };
        let h = f.chain.hyperparams();
        assert_eq!((f.chain.n_iter, f.chain.n_rep, f.chain.burn_in), (200, 400, None));
        assert_eq!((h.a0, h.b0, h.gamma_row, h.alpha_row, h.gamma_col), (0.01, 0.01, 1.0, 1.0, 1.0));
        assert_eq!(f.chain.init, InitMode::AllSingletons);
    }
}
