//! CSV-driven command line: solution paths, bootstrap intervals, policy
//! comparisons, simulation, and score construction.
//!
//! Commands write fixed-name CSV outputs into `--out` together with a
//! `manifest.json` recording the command, configuration, input checksums,
//! and produced files; reruns with an identical manifest produce
//! byte-identical outputs, for any `--threads`.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 malformed CSV or usage, 3
//! constraint violation (non-positive cost, bad probabilities, ...), 4
//! degenerate comparison (identical masks without `--baseline`; the zero
//! curve is still written).

mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::dgp;
use crate::error::QiniError;
use crate::inference::{
    bootstrap_curve, difference_curve, normal_quantile, spend_grid, PolicySpec,
};
use crate::path::compute_path;
use crate::scores::{aipw_scores, ipw_scores, unobserved_arms, NuisanceEstimates};
use io::{
    carried_effects_and_costs, fmt_float, input_digest, read_frame, read_nuisance_matrix,
    read_observed, write_csv, write_manifest, Manifest, Table,
};

/// Errors surfaced to the shell, with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, message: String },
    Csv { path: PathBuf, message: String },
    Constraint(QiniError),
    Usage(String),
    DegenerateComparison,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 1,
            Self::Csv { .. } | Self::Usage(_) => 2,
            Self::Constraint(_) => 3,
            Self::DegenerateComparison => 4,
        }
    }

    pub fn is_warning(&self) -> bool {
        matches!(self, Self::DegenerateComparison)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, message } => write!(f, "{}: {message}", path.display()),
            Self::Csv { path, message } => write!(f, "{}: {message}", path.display()),
            Self::Constraint(e) => write!(f, "{e}"),
            Self::Usage(m) => write!(f, "{m}"),
            Self::DegenerateComparison => write!(
                f,
                "the two policies are identical; the difference curve is exactly zero"
            ),
        }
    }
}

impl std::error::Error for CliError {}

impl From<QiniError> for CliError {
    fn from(e: QiniError) -> Self {
        Self::Constraint(e)
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "qini",
    version,
    about = "Solution paths and bootstrap inference for budget-constrained multi-armed targeting policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute the solution path and gain curve for one frame.
    Path(PathArgs),
    /// Bootstrap pointwise confidence intervals for a Qini curve.
    Bootstrap(BootstrapArgs),
    /// Paired-bootstrap difference between two policies.
    Diff(DiffArgs),
    /// Draw a synthetic dataset from the built-in three-armed design.
    Simulate(SimulateArgs),
    /// Construct IPW or AIPW evaluation scores from observations.
    Scores(ScoresArgs),
}

#[derive(Args, Debug)]
pub struct PathArgs {
    /// Frame CSV with columns tau_1..K, cost_1..K, score_1..K.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated arm subset, e.g. `--arms 1,3`.
    #[arg(long)]
    pub arms: Option<String>,
    #[arg(long = "b-max", default_value_t = 1.0)]
    pub b_max: f64,
    /// Points on the uniform spend grid of curve.csv.
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub arms: Option<String>,
    #[arg(long = "b-max", default_value_t = 1.0)]
    pub b_max: f64,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Interval level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Worker threads for bootstrap replicates.
    #[arg(long, env = "QINI_PATH_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DiffArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Arm subset per policy; repeat for two policies, e.g.
    /// `--arms 1,2 --arms 1`. Omitted arms mean all arms.
    #[arg(long)]
    pub arms: Vec<String>,
    /// Compare against the covariate-free baseline (second policy).
    #[arg(long)]
    pub baseline: bool,
    #[arg(long = "b-max", default_value_t = 1.0)]
    pub b_max: f64,
    #[arg(long, default_value_t = 100)]
    pub grid: usize,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "QINI_PATH_THREADS", default_value_t = 1)]
    pub threads: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Number of units to draw.
    #[arg(long)]
    pub units: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ScoresArgs {
    /// Observations CSV with columns w, y (plus optional effect/cost
    /// columns, carried through so the output feeds `path` directly).
    #[arg(long)]
    pub input: PathBuf,
    /// Known randomization probabilities p0,p1,...,pK.
    #[arg(long, value_name = "PROBS", conflicts_with = "aipw")]
    pub ipw: Option<String>,
    /// Cross-fit nuisance files: mu.csv (mu_0..mu_K), e.csv (e_0..e_K),
    /// folds.csv (fold).
    #[arg(long, num_args = 3, value_names = ["MU", "EHAT", "FOLDS"])]
    pub aipw: Option<Vec<PathBuf>>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Runs one parsed command. On `Err`, the caller maps the error to its
/// exit code; `CliError::DegenerateComparison` is reported as a warning
/// after the outputs have been written.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Path(args) => cmd_path(args),
        Command::Bootstrap(args) => cmd_bootstrap(args),
        Command::Diff(args) => cmd_diff(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Scores(args) => cmd_scores(args),
    }
}

fn parse_arm_list(raw: &str) -> Result<Vec<usize>, CliError> {
    let mut arms = Vec::new();
    for tok in raw.split(',') {
        let tok = tok.trim();
        let arm: usize = tok
            .parse()
            .map_err(|_| CliError::Usage(format!("--arms: {tok:?} is not an arm index")))?;
        if arm == 0 {
            return Err(CliError::Usage(
                "--arms: arms are numbered from 1".to_string(),
            ));
        }
        if arms.contains(&arm) {
            return Err(CliError::Usage(format!("--arms: arm {arm} listed twice")));
        }
        arms.push(arm);
    }
    if arms.is_empty() {
        return Err(CliError::Usage("--arms: empty arm list".to_string()));
    }
    Ok(arms)
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot build thread pool: {e}")))
}

fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })
}

fn json_arms(arms: &Option<String>) -> serde_json::Value {
    match arms {
        None => json!(null),
        Some(s) => json!(s),
    }
}

fn cmd_path(args: PathArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out)?;
    let table = Table::read(&args.input)?;
    let mut frame = read_frame(&table)?;
    if let Some(raw) = &args.arms {
        frame = frame.select_arms(&parse_arm_list(raw)?)?;
    }
    let path = compute_path(&frame, args.b_max)?;

    let events_path = args.out.join("path_events.csv");
    write_csv(
        &events_path,
        &["event_index", "unit_id", "arm", "spend", "gain", "is_upgrade"],
        path.events.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                e.unit_id.to_string(),
                e.arm_id.to_string(),
                fmt_float(e.spend),
                fmt_float(e.gain),
                e.is_upgrade.to_string(),
            ]
        }),
    )?;

    let grid = spend_grid(args.b_max, args.grid)?;
    let curve_path = args.out.join("curve.csv");
    write_csv(
        &curve_path,
        &["spend", "gain"],
        grid.iter()
            .map(|&b| vec![fmt_float(b), fmt_float(path.gain_at(b))]),
    )?;

    let mut config = BTreeMap::new();
    config.insert("input".to_string(), json!(args.input.display().to_string()));
    config.insert("arms".to_string(), json_arms(&args.arms));
    config.insert("b_max".to_string(), json!(args.b_max));
    config.insert("grid".to_string(), json!(args.grid));
    write_manifest(
        &args.out,
        &Manifest {
            command: "path".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: vec![input_digest(&args.input)?],
            outputs: vec!["path_events.csv".to_string(), "curve.csv".to_string()],
        },
    )
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must be in (0, 1), got {}",
            args.alpha
        )));
    }
    ensure_out_dir(&args.out)?;
    let table = Table::read(&args.input)?;
    let mut frame = read_frame(&table)?;
    if let Some(raw) = &args.arms {
        frame = frame.select_arms(&parse_arm_list(raw)?)?;
    }
    let pool = thread_pool(args.threads)?;
    let est = pool.install(|| {
        bootstrap_curve(&frame, args.b_max, args.grid, args.replicates, args.seed)
    })?;
    let z = normal_quantile(1.0 - args.alpha / 2.0);

    write_csv(
        &args.out.join("curve_ci.csv"),
        &["spend", "gain", "std_err", "ci_lo", "ci_hi"],
        (0..est.spend_grid.len()).map(|i| {
            vec![
                fmt_float(est.spend_grid[i]),
                fmt_float(est.gain[i]),
                fmt_float(est.std_err[i]),
                fmt_float(est.gain[i] - z * est.std_err[i]),
                fmt_float(est.gain[i] + z * est.std_err[i]),
            ]
        }),
    )?;

    let mut config = BTreeMap::new();
    config.insert("input".to_string(), json!(args.input.display().to_string()));
    config.insert("arms".to_string(), json_arms(&args.arms));
    config.insert("b_max".to_string(), json!(args.b_max));
    config.insert("grid".to_string(), json!(args.grid));
    config.insert("replicates".to_string(), json!(args.replicates));
    config.insert("seed".to_string(), json!(args.seed));
    config.insert("alpha".to_string(), json!(args.alpha));
    config.insert("threads".to_string(), json!(args.threads));
    write_manifest(
        &args.out,
        &Manifest {
            command: "bootstrap".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: vec![input_digest(&args.input)?],
            outputs: vec!["curve_ci.csv".to_string()],
        },
    )
}

fn cmd_diff(args: DiffArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must be in (0, 1), got {}",
            args.alpha
        )));
    }
    let masks: Vec<Vec<usize>> = args
        .arms
        .iter()
        .map(|raw| parse_arm_list(raw))
        .collect::<Result<_, _>>()?;
    let (policy_a, policy_b) = match (masks.len(), args.baseline) {
        (0, true) => (PolicySpec::Targeting { arms: None }, PolicySpec::Baseline { arms: None }),
        (1, true) => (
            PolicySpec::targeting(masks[0].clone()),
            PolicySpec::baseline(Some(masks[0].clone())),
        ),
        (2, true) => (
            PolicySpec::targeting(masks[0].clone()),
            PolicySpec::baseline(Some(masks[1].clone())),
        ),
        (2, false) => (
            PolicySpec::targeting(masks[0].clone()),
            PolicySpec::targeting(masks[1].clone()),
        ),
        _ => {
            return Err(CliError::Usage(
                "diff needs two --arms masks, or --baseline".to_string(),
            ))
        }
    };
    let degenerate = {
        let sorted = |m: &[usize]| {
            let mut v = m.to_vec();
            v.sort_unstable();
            v
        };
        masks.len() == 2 && !args.baseline && sorted(&masks[0]) == sorted(&masks[1])
    };

    ensure_out_dir(&args.out)?;
    let table = Table::read(&args.input)?;
    let frame = read_frame(&table)?;
    let pool = thread_pool(args.threads)?;
    let est = pool.install(|| {
        difference_curve(
            &frame,
            &policy_a,
            &policy_b,
            args.b_max,
            args.grid,
            args.replicates,
            args.seed,
        )
    })?;
    let z = normal_quantile(1.0 - args.alpha / 2.0);

    write_csv(
        &args.out.join("diff_ci.csv"),
        &["spend", "diff", "std_err", "ci_lo", "ci_hi"],
        (0..est.spend_grid.len()).map(|i| {
            vec![
                fmt_float(est.spend_grid[i]),
                fmt_float(est.diff[i]),
                fmt_float(est.std_err[i]),
                fmt_float(est.diff[i] - z * est.std_err[i]),
                fmt_float(est.diff[i] + z * est.std_err[i]),
            ]
        }),
    )?;

    let mut config = BTreeMap::new();
    config.insert("input".to_string(), json!(args.input.display().to_string()));
    config.insert("arms".to_string(), json!(args.arms));
    config.insert("baseline".to_string(), json!(args.baseline));
    config.insert("b_max".to_string(), json!(args.b_max));
    config.insert("grid".to_string(), json!(args.grid));
    config.insert("replicates".to_string(), json!(args.replicates));
    config.insert("seed".to_string(), json!(args.seed));
    config.insert("alpha".to_string(), json!(args.alpha));
    config.insert("threads".to_string(), json!(args.threads));
    write_manifest(
        &args.out,
        &Manifest {
            command: "diff".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: vec![input_digest(&args.input)?],
            outputs: vec!["diff_ci.csv".to_string()],
        },
    )?;

    if degenerate {
        return Err(CliError::DegenerateComparison);
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out)?;
    let draw = dgp::simulate(args.units, args.seed);

    let mut header: Vec<String> = (1..=dgp::NUM_COVARIATES).map(|j| format!("x{j}")).collect();
    header.extend(["w", "y", "c1", "c2", "tau1_true", "tau2_true"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &args.out.join("data.csv"),
        &header_refs,
        (0..draw.n).map(|i| {
            let mut row: Vec<String> = (0..dgp::NUM_COVARIATES)
                .map(|j| fmt_float(draw.x[i * dgp::NUM_COVARIATES + j]))
                .collect();
            row.push(draw.w[i].to_string());
            row.push(fmt_float(draw.y[i]));
            row.push(fmt_float(draw.cost[2 * i]));
            row.push(fmt_float(draw.cost[2 * i + 1]));
            row.push(fmt_float(draw.tau_true[2 * i]));
            row.push(fmt_float(draw.tau_true[2 * i + 1]));
            row
        }),
    )?;

    let mut config = BTreeMap::new();
    config.insert("units".to_string(), json!(args.units));
    config.insert("seed".to_string(), json!(args.seed));
    write_manifest(
        &args.out,
        &Manifest {
            command: "simulate".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: vec![],
            outputs: vec!["data.csv".to_string()],
        },
    )
}

fn cmd_scores(args: ScoresArgs) -> Result<(), CliError> {
    ensure_out_dir(&args.out)?;
    let table = Table::read(&args.input)?;
    let data = read_observed(&table)?;

    let mut inputs = vec![input_digest(&args.input)?];
    let mut config = BTreeMap::new();
    config.insert("input".to_string(), json!(args.input.display().to_string()));

    let (num_arms, score_matrix) = match (&args.ipw, &args.aipw) {
        (Some(raw), None) => {
            let probs: Vec<f64> = raw
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        CliError::Usage(format!("--ipw: {tok:?} is not a probability"))
                    })
                })
                .collect::<Result<_, _>>()?;
            config.insert("ipw".to_string(), json!(probs));
            let k = probs.len().saturating_sub(1);
            (k, ipw_scores(&data, &probs)?)
        }
        (None, Some(paths)) => {
            let mu_table = Table::read(&paths[0])?;
            let e_table = Table::read(&paths[1])?;
            let folds_table = Table::read(&paths[2])?;
            let (k_mu, mu) = read_nuisance_matrix(&mu_table, "mu_")?;
            let (k_e, e) = read_nuisance_matrix(&e_table, "e_")?;
            if k_mu != k_e {
                return Err(CliError::Usage(format!(
                    "mu has {k_mu} arms but e has {k_e}"
                )));
            }
            let fold_col = folds_table.require("fold")?;
            let fold_id: Vec<usize> = (0..folds_table.len())
                .map(|r| folds_table.usize_at(r, fold_col, "fold"))
                .collect::<Result<_, _>>()?;
            let nuisance = NuisanceEstimates::new(data.len(), k_mu, mu, e, fold_id)?;
            for p in paths {
                inputs.push(input_digest(p)?);
            }
            config.insert(
                "aipw".to_string(),
                json!(paths
                    .iter()
                    .map(|p| p.display().to_string())
                    .collect::<Vec<_>>()),
            );
            (k_mu, aipw_scores(&data, &nuisance)?)
        }
        _ => {
            return Err(CliError::Usage(
                "scores needs exactly one of --ipw or --aipw".to_string(),
            ))
        }
    };

    for arm in unobserved_arms(&data, num_arms) {
        eprintln!("warning: arm {arm} has no observations; its scores are degenerate");
    }

    let carried = carried_effects_and_costs(&table, num_arms)?;
    let n = data.len();
    let mut header = Vec::new();
    if carried.is_some() {
        header.extend((1..=num_arms).map(|j| format!("tau_{j}")));
        header.extend((1..=num_arms).map(|j| format!("cost_{j}")));
    }
    header.extend((1..=num_arms).map(|j| format!("score_{j}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &args.out.join("scores.csv"),
        &header_refs,
        (0..n).map(|i| {
            let mut row = Vec::with_capacity(header_refs.len());
            if let Some((tau, cost)) = &carried {
                row.extend((0..num_arms).map(|j| fmt_float(tau[i * num_arms + j])));
                row.extend((0..num_arms).map(|j| fmt_float(cost[i * num_arms + j])));
            }
            row.extend((0..num_arms).map(|j| fmt_float(score_matrix[i * num_arms + j])));
            row
        }),
    )?;

    write_manifest(
        &args.out,
        &Manifest {
            command: "scores".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs,
            outputs: vec!["scores.csv".to_string()],
        },
    )
}
