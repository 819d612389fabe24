//! Command-line entry point: `validate-weights`, `check-nqd`,
//! `verify-lemmas` and `run-convergence`.
//!
//! Exit status is 0 when every emitted pass flag is true, 1 when a check
//! fails and 2 on a configuration or input error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::load_experiment_config;
use crate::design::DesignGrid;
use crate::error::{Error, Result};
use crate::experiments::run_experiment;
use crate::kernels::KernelSpec;
use crate::lemma_suite::{verify_lemma22, verify_riemann_limits, EvalSpec, LemmaReport, RiemannMode};
use crate::nqd_errors::{adjacent_pairs, all_pairs, check_nqd, ErrorModel};
use crate::report::{fmt_stat, write_csv, write_json};
use crate::weights::{check_ladder, uniform_eval_grid, BandwidthRule, CheckParams, ConditionId, SchemeRule};

/// Environment variable naming the output directory when `--out` is absent.
pub const OUTPUT_DIR_ENV: &str = "NQDREG_OUTPUT_DIR";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "nqdreg", version, about = "Regression under pairwise NQD errors: weight, dependence, lemma and convergence checks")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (default: $NQDREG_OUTPUT_DIR, else the current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate weight conditions along a ladder of sample sizes.
    ValidateWeights(ValidateWeightsArgs),
    /// Empirical quadrant-dependence test of an error model.
    CheckNqd(CheckNqdArgs),
    /// Partial-sum inequalities (l22) or kernel Riemann limits (l23 abs, l24 signed).
    VerifyLemmas(VerifyLemmasArgs),
    /// Monte Carlo convergence experiment from a config file.
    RunConvergence(RunConvergenceArgs),
}

#[derive(Debug, clap::Args, Serialize)]
struct ValidateWeightsArgs {
    /// `nn:<k>`, `nn:n^<e>`, `pc:<kernel>:<h>` or `pc:<kernel>:n^-<e>`.
    #[arg(long)]
    scheme: String,
    /// `equispaced:<n>` or `file:<path>`; replaces the ladder with one design.
    #[arg(long)]
    design: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    ladder: Vec<usize>,
    /// Evaluation points.
    #[arg(long, value_delimiter = ',', default_value = "0.5", conflicts_with = "tau")]
    eval: Vec<f64>,
    /// Check the uniform conditions over a 101-point grid on [tau, 1 - tau].
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    conditions: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.25)]
    a: f64,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = crate::weights::DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long, default_value_t = crate::weights::DEFAULT_BOUND)]
    bound: f64,
}

#[derive(Debug, clap::Args, Serialize)]
struct CheckNqdArgs {
    /// `iid:<marginal>`, `neg_ma1:<theta>`, `gauss_negcorr:<banded|equi>:<rho>`, `gauss_corr:<banded|equi>:<rho>`.
    #[arg(long)]
    model: String,
    /// `adjacent`, `all`, or a list such as `0-1,2-5`.
    #[arg(long, default_value = "adjacent")]
    pairs: String,
    #[arg(long, default_value_t = 100_000)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dimension used to expand `adjacent` and `all`.
    #[arg(long, default_value_t = 10)]
    n: usize,
    /// Quadrant thresholds (default: marginal quantiles).
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Which {
    L22,
    L23,
    L24,
}

#[derive(Debug, clap::Args, Serialize)]
struct VerifyLemmasArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    ladder: Vec<usize>,
    #[arg(long, default_value_t = 0.5, conflicts_with = "tau")]
    x: f64,
    /// Uniform mode over [tau, 1 - tau].
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long, default_value_t = 1.0)]
    h_scale: f64,
    #[arg(long, default_value_t = 0.25)]
    h_exp: f64,
    #[arg(long, default_value = "neg_ma1:0.6")]
    model: String,
    #[arg(long, default_value_t = 10_000)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, clap::Args, Serialize)]
struct RunConvergenceArgs {
    #[arg(long)]
    config: PathBuf,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let out_dir = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = pool.install(|| {
        std::fs::create_dir_all(&out_dir).map_err(|e| io_err(&out_dir, e))?;
        match &cli.command {
            Command::ValidateWeights(a) => validate_weights(a, &out_dir),
            Command::CheckNqd(a) => run_check_nqd(a, &out_dir),
            Command::VerifyLemmas(a) => verify_lemmas(a, &out_dir),
            Command::RunConvergence(a) => run_convergence(a, &out_dir),
        }
    });
    match result {
        Ok(true) => EXIT_PASS,
        Ok(false) => EXIT_FAIL,
        Err(e) => {
            eprintln!("error: {}", diagnostic(&e));
            EXIT_CONFIG
        }
    }
}

fn diagnostic(e: &Error) -> String {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn echo<T: Serialize>(subcommand: &str, args: &T) -> Value {
    json!({ "subcommand": subcommand, "args": args })
}

fn validate_weights(args: &ValidateWeightsArgs, out: &Path) -> Result<bool> {
    let rule = SchemeRule::parse(&args.scheme)?;
    let is_pc = matches!(rule, SchemeRule::PriestleyChao { .. });
    let eval = match args.tau {
        Some(tau) => {
            if !(tau > 0.0 && tau < 0.5) {
                return Err(Error::Config(format!("tau must lie in (0, 1/2), got {tau}")));
            }
            uniform_eval_grid(tau, crate::lemma_suite::UNIFORM_GRID_POINTS)
        }
        None => args.eval.clone(),
    };
    let conditions: Vec<ConditionId> = match &args.conditions {
        Some(list) => list.iter().map(|c| c.parse()).collect::<Result<_>>()?,
        None => {
            let mut ids = vec![ConditionId::B1, ConditionId::B2, ConditionId::B3, ConditionId::B4, ConditionId::MaxWeight];
            if is_pc {
                ids.push(ConditionId::A4);
            }
            if args.s.is_some() {
                ids.push(ConditionId::SPower);
            }
            ids
        }
    };
    let params = CheckParams { a: Some(args.a), s: args.s, tolerance: args.tolerance, bound: args.bound };
    let (ladder, fixed) = match &args.design {
        Some(d) => {
            let design = Arc::new(DesignGrid::from_descriptor(d)?);
            (vec![design.len()], Some(design))
        }
        None => (args.ladder.clone(), None),
    };
    let build = |n: usize| match &fixed {
        Some(d) => rule.build_on(Arc::clone(d), &eval),
        None => rule.build(n, &eval),
    };
    let reports = conditions
        .iter()
        .map(|&id| check_ladder(build, id, &params, &ladder, args.tau))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rep in &reports {
        for rung in &rep.rungs {
            for &(x, stat) in &rung.per_eval_point {
                rows.push(vec![
                    rung.condition_id.to_string(),
                    rung.n.to_string(),
                    fmt_stat(x),
                    fmt_stat(stat),
                    fmt_stat(rung.threshold),
                    (stat <= rung.threshold).to_string(),
                ]);
            }
        }
    }
    let config = echo("validate-weights", args);
    let pass = reports.iter().all(|r| r.pass);
    write_csv(&out.join("weights_report.csv"), &config, &["condition", "n", "x", "statistic", "threshold", "pass"], &rows)
        .map_err(|e| io_err(out, e))?;
    write_json(&out.join("weights_report.json"), &config, pass, &reports).map_err(|e| io_err(out, e))?;
    Ok(pass)
}

fn parse_pairs(spec: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    match spec {
        "adjacent" => Ok(adjacent_pairs(n)),
        "all" => Ok(all_pairs(n)),
        list => list
            .split(',')
            .map(|p| {
                let (i, j) = p
                    .split_once('-')
                    .ok_or_else(|| Error::Config(format!("pair '{p}' must look like i-j")))?;
                let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Config(format!("bad index in pair '{p}'")));
                Ok((idx(i)?, idx(j)?))
            })
            .collect(),
    }
}

fn run_check_nqd(args: &CheckNqdArgs, out: &Path) -> Result<bool> {
    let model = ErrorModel::parse(&args.model)?;
    let n = model.fixed_dimension().unwrap_or(args.n);
    let pairs = parse_pairs(&args.pairs, n)?;
    let report = check_nqd(&model, &pairs, args.m, args.grid.as_deref(), args.seed)?;
    let config = echo("check-nqd", args);
    write_json(&out.join("nqd_report.json"), &config, report.within_noise, &report).map_err(|e| io_err(out, e))?;
    Ok(report.within_noise)
}

fn verify_lemmas(args: &VerifyLemmasArgs, out: &Path) -> Result<bool> {
    let reports: Vec<LemmaReport> = match args.which {
        Which::L22 => {
            let model = ErrorModel::parse(&args.model)?;
            let rep = verify_lemma22(&model, &args.ladder, args.replicates, args.seed)?;
            vec![rep.variance, rep.maximal]
        }
        Which::L23 | Which::L24 => {
            let kernel = KernelSpec::by_name(&args.kernel)?;
            let rule = BandwidthRule { scale: args.h_scale, exponent: args.h_exp };
            let eval = match args.tau {
                Some(tau) => EvalSpec::Interval { tau },
                None => EvalSpec::Point { x: args.x },
            };
            let mode = if matches!(args.which, Which::L23) { RiemannMode::Abs } else { RiemannMode::Signed };
            vec![verify_riemann_limits(&kernel, rule, &args.ladder, eval, mode)?]
        }
    };
    let rows: Vec<Vec<String>> = reports
        .iter()
        .flat_map(|r| {
            let id = serde_json::to_value(r.lemma_id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            r.ladder.iter().map(move |row| {
                vec![
                    id.clone(),
                    row.n.to_string(),
                    fmt_stat(row.lhs),
                    fmt_stat(row.rhs_or_limit),
                    fmt_stat(row.gap),
                    fmt_stat(row.slack),
                ]
            })
        })
        .collect();
    let config = echo("verify-lemmas", args);
    let pass = reports.iter().all(|r| r.pass);
    write_csv(&out.join("lemma_report.csv"), &config, &["lemma", "n", "lhs", "rhs_or_limit", "gap", "slack"], &rows)
        .map_err(|e| io_err(out, e))?;
    write_json(&out.join("lemma_report.json"), &config, pass, &reports).map_err(|e| io_err(out, e))?;
    Ok(pass)
}

fn run_convergence(args: &RunConvergenceArgs, out: &Path) -> Result<bool> {
    let config = load_experiment_config(&args.config)?;
    let report = run_experiment(&config)?;
    let echo = json!({
        "subcommand": "run-convergence",
        "config_path": args.config,
        "config": config,
    });
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![r.n.to_string(), fmt_stat(r.statistic), fmt_stat(r.mc_stderr)])
        .collect();
    write_csv(&out.join("report.csv"), &echo, &["n", "statistic", "stderr"], &rows).map_err(|e| io_err(out, e))?;
    write_json(&out.join("report.json"), &echo, report.pass(), &report).map_err(|e| io_err(out, e))?;
    Ok(report.pass())
}
