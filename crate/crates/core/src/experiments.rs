//! Monte Carlo harness for the consistency results: mean convergence at a
//! point, uniform mean convergence over `[τ, 1 − τ]`, and convergence in
//! probability, for nearest-neighbour and kernel weights.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignGrid;
use crate::error::{invalid, Error, Result};
use crate::estimator::{bias, RegressionFunction};
use crate::kernels::{check_condition_a1_a3, KernelConditionReport, KernelSpec};
use crate::nqd_errors::ErrorModel;
use crate::rng::replicate_seed;
use crate::stats::{self, CompensatedSum};
use crate::weights::{
    check_ladder, uniform_eval_grid, BandwidthRule, CheckParams, ConditionId, LadderReport, NeighborRule,
    SchemeRule, WeightMatrix, DEFAULT_BOUND, DEFAULT_LADDER, DEFAULT_TOLERANCE,
};

/// Ratio between the last and first ladder statistics required of moment
/// statistics.
pub const FINAL_RATIO: f64 = 0.25;

/// Final exceedance frequency required of in-probability runs.
pub const EXCEEDANCE_TARGET: f64 = 0.05;

/// Monotonicity allowance, in combined Monte Carlo standard errors.
pub const MONOTONE_SLACK_SE: f64 = 2.0;

/// Agreement band of the bias/variance decomposition, in standard errors.
pub const DECOMPOSITION_SE: f64 = 3.0;

/// Default radius `a` for the locality conditions during validation.
pub const DEFAULT_VALIDATION_RADIUS: f64 = 0.25;

/// Sampling resolution for the kernel regularity checks.
pub const KERNEL_CHECK_RESOLUTION: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    /// Mean convergence at a point, general weights.
    T31,
    /// Mean convergence under a power-sum condition with exponent `s`.
    T31p,
    /// Uniform mean convergence, general weights.
    T32,
    /// Convergence in probability, general weights.
    T33,
    /// Mean convergence with kernel weights; uniform when `eval` is an interval.
    C31,
    /// Convergence in probability with kernel weights.
    C32,
}

impl TheoremId {
    pub const ALL: [TheoremId; 6] =
        [TheoremId::T31, TheoremId::T31p, TheoremId::T32, TheoremId::T33, TheoremId::C31, TheoremId::C32];

    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::T31 => "T31",
            TheoremId::T31p => "T31p",
            TheoremId::T32 => "T32",
            TheoremId::T33 => "T33",
            TheoremId::C31 => "C31",
            TheoremId::C32 => "C32",
        }
    }

    fn is_kernel(&self) -> bool {
        matches!(self, TheoremId::C31 | TheoremId::C32)
    }

    fn is_probability(&self) -> bool {
        matches!(self, TheoremId::T33 | TheoremId::C32)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremId::ALL
            .iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown theorem id '{s}'")))
    }
}

/// Serializable weight family with its tuning schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeConfig {
    /// `k_n = ⌈k_scale · n^k_exp⌉`.
    Nn { k_scale: f64, k_exp: f64 },
    /// `h_n = h_scale · n^(−h_exp)`.
    Pc { kernel: String, h_scale: f64, h_exp: f64 },
}

impl SchemeConfig {
    pub fn rule(&self) -> Result<SchemeRule> {
        match self {
            SchemeConfig::Nn { k_scale, k_exp } => {
                if !(*k_scale > 0.0 && k_scale.is_finite() && k_exp.is_finite()) {
                    return invalid("nearest-neighbour schedule needs k_scale > 0 and finite k_exp");
                }
                Ok(SchemeRule::NearestNeighbor(NeighborRule { scale: *k_scale, exponent: *k_exp }))
            }
            SchemeConfig::Pc { kernel, h_scale, h_exp } => {
                if !(*h_scale > 0.0 && h_scale.is_finite() && h_exp.is_finite()) {
                    return invalid("bandwidth schedule needs h_scale > 0 and finite h_exp");
                }
                Ok(SchemeRule::PriestleyChao {
                    kernel: KernelSpec::by_name(kernel)?,
                    bandwidth: BandwidthRule { scale: *h_scale, exponent: *h_exp },
                })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalTarget {
    Point { x: f64 },
    /// `points` equispaced abscissae covering `[τ, 1 − τ]`.
    Interval { tau: f64, points: usize },
}

impl EvalTarget {
    pub fn points(&self) -> Vec<f64> {
        match *self {
            EvalTarget::Point { x } => vec![x],
            EvalTarget::Interval { tau, points } => uniform_eval_grid(tau, points),
        }
    }

    fn tau(&self) -> Option<f64> {
        match *self {
            EvalTarget::Point { .. } => None,
            EvalTarget::Interval { tau, .. } => Some(tau),
        }
    }
}

/// How the weight conditions are checked before a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSettings {
    pub ladder: Vec<usize>,
    pub a: f64,
    pub tolerance: f64,
    pub bound: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            ladder: DEFAULT_LADDER.to_vec(),
            a: DEFAULT_VALIDATION_RADIUS,
            tolerance: DEFAULT_TOLERANCE,
            bound: DEFAULT_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub theorem_id: TheoremId,
    pub g: RegressionFunction,
    pub model: ErrorModel,
    pub scheme: SchemeConfig,
    /// Multiplier applied to every weight; values other than 1 give
    /// negative controls.
    pub weight_scale: f64,
    pub n_ladder: Vec<usize>,
    pub replicates: usize,
    pub p: f64,
    pub s: Option<f64>,
    pub eval: EvalTarget,
    pub epsilon: Option<f64>,
    pub base_seed: u64,
    pub validation: ValidationSettings,
}

impl ExperimentConfig {
    /// Type-level checks, run before any simulation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.p > 0.0 && self.p <= 2.0) {
            return bad("p must lie in (0,2]".into());
        }
        if self.theorem_id == TheoremId::T31p {
            match self.s {
                Some(s) if s > 1.0 && s <= self.p => {}
                _ => return bad("T31p requires s with 1 < s <= p".into()),
            }
        } else if let Some(s) = self.s {
            if !(s > 1.0 && s <= 2.0) {
                return bad("s must lie in (1,2]".into());
            }
        }
        if self.theorem_id == TheoremId::T32 && self.eval.tau().is_none() {
            return bad("T32 requires an interval evaluation grid (eval.tau)".into());
        }
        if self.theorem_id.is_probability() {
            if self.eval.tau().is_some() {
                return bad(format!("{} evaluates at a single point (eval.x)", self.theorem_id));
            }
            match self.epsilon {
                Some(e) if e > 0.0 && e.is_finite() => {}
                _ => return bad(format!("{} requires epsilon > 0", self.theorem_id)),
            }
        }
        if self.theorem_id.is_kernel() && !matches!(self.scheme, SchemeConfig::Pc { .. }) {
            return bad(format!("{} requires kernel weights (scheme.kind = \"pc\")", self.theorem_id));
        }
        match self.eval {
            EvalTarget::Point { x } if !(x > 0.0 && x < 1.0) => return bad(format!("eval.x must lie in (0,1), got {x}")),
            EvalTarget::Interval { tau, points } => {
                if !(tau > 0.0 && tau < 0.5) {
                    return bad(format!("eval.tau must lie in (0,1/2), got {tau}"));
                }
                if points < 2 {
                    return bad("eval.points must be at least 2".into());
                }
            }
            _ => {}
        }
        check_ladder_shape("ladder", &self.n_ladder)?;
        check_ladder_shape("validation.ladder", &self.validation.ladder)?;
        if self.replicates < 2 {
            return bad("replicates must be at least 2".into());
        }
        if !(self.weight_scale.is_finite() && self.weight_scale != 0.0) {
            return bad("weight_scale must be finite and non-zero".into());
        }
        let v = &self.validation;
        if !(v.a > 0.0 && v.tolerance > 0.0 && v.bound > 0.0) {
            return bad("validation.a, validation.tolerance and validation.bound must be positive".into());
        }
        self.scheme.rule().map_err(as_config)?;
        self.g.check_eval_points(&self.eval.points()).map_err(as_config)?;
        Ok(())
    }

    fn check_params(&self) -> CheckParams {
        CheckParams { a: Some(self.validation.a), s: self.s, tolerance: self.validation.tolerance, bound: self.validation.bound }
    }

    /// Weights on the equispaced design of size `n`, scaled by `weight_scale`.
    pub fn weights(&self, n: usize) -> Result<WeightMatrix> {
        let wm = self.scheme.rule()?.build(n, &self.eval.points())?;
        Ok(if self.weight_scale == 1.0 { wm } else { wm.scaled(self.weight_scale) })
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

fn check_ladder_shape(name: &str, ladder: &[usize]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if ladder[0] < 2 {
        return Err(Error::Config(format!("{name} entries must be at least 2")));
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!("{name} must be strictly increasing")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `E|g_n(x) − g(x)|^p`.
    LpError,
    /// `max_x E|g_n(x) − g(x)|^p` over the evaluation grid.
    SupLpError,
    /// `P(|g_n(x) − g(x)| > ε)`.
    ExceedanceFreq,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub statistic: f64,
    pub mc_stderr: f64,
    /// Evaluation point attaining the statistic.
    pub x: f64,
    /// Per-replicate values at `x`, stored as `f32`.
    pub per_replicate: Vec<f32>,
}

impl ConvergenceRow {
    /// The statistic recomputed from the stored per-replicate values.
    pub fn recompute(&self) -> f64 {
        stats::sum(self.per_replicate.iter().map(|&v| v as f64)) / self.per_replicate.len() as f64
    }
}

/// A schedule-level hypothesis evaluated along the validation ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleCheck {
    pub name: String,
    pub values: Vec<(usize, f64)>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub conditions: Vec<LadderReport>,
    pub schedule: Vec<ScheduleCheck>,
    pub kernel: Option<KernelConditionReport>,
}

impl HypothesisReport {
    pub fn met(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
            && self.schedule.iter().all(|c| c.pass)
            && self.kernel.as_ref().is_none_or(|k| k.pass())
    }

    /// Names of the failing checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> =
            self.conditions.iter().filter(|c| !c.pass).map(|c| c.condition_id.to_string()).collect();
        out.extend(self.schedule.iter().filter(|c| !c.pass).map(|c| c.name.clone()));
        if let Some(k) = &self.kernel {
            out.extend(k.checks.iter().filter(|c| !c.pass).map(|c| c.condition.to_string()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub statistic_kind: StatisticKind,
    pub rows: Vec<ConvergenceRow>,
    /// Non-increasing within [`MONOTONE_SLACK_SE`] combined standard errors.
    pub monotone_pass: bool,
    pub strictly_decreasing: bool,
    pub final_below: bool,
    pub hypotheses_met: bool,
    pub hypotheses: HypothesisReport,
    pub config_echo: ExperimentConfig,
}

impl ConvergenceReport {
    pub fn pass(&self) -> bool {
        self.monotone_pass && self.final_below && self.hypotheses_met
    }

    pub fn statistics(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.statistic).collect()
    }
}

/// Conditions checked for each result.
pub fn required_conditions(theorem: TheoremId, eval: &EvalTarget) -> Vec<ConditionId> {
    use ConditionId::*;
    let uniform = eval.tau().is_some();
    match theorem {
        TheoremId::T31 => vec![B1, B2, B3, B4],
        TheoremId::T31p => vec![B1, B2, B4, SPower],
        TheoremId::T32 => vec![B1u, B2u, B3u, B4u],
        TheoremId::T33 => vec![B1, B2, B4, MaxWeight],
        TheoremId::C31 if uniform => vec![B1u, B2u, B3u, A4u],
        TheoremId::C31 => vec![B1, B2, B3, A4],
        TheoremId::C32 => vec![B1, B2, A4, MaxWeight],
    }
}

/// Checks the weight, kernel and bandwidth hypotheses of `config.theorem_id`
/// along `config.validation.ladder`.
pub fn validate_hypotheses(config: &ExperimentConfig) -> Result<HypothesisReport> {
    let params = config.check_params();
    let ladder = &config.validation.ladder;
    let tau = config.eval.tau();
    let conditions = required_conditions(config.theorem_id, &config.eval)
        .into_iter()
        .map(|id| check_ladder(|n| config.weights(n), id, &params, ladder, tau))
        .collect::<Result<Vec<_>>>()?;
    let mut schedule = Vec::new();
    let mut kernel = None;
    if let SchemeRule::PriestleyChao { kernel: k, bandwidth } = config.scheme.rule()? {
        if config.theorem_id.is_kernel() {
            let alpha = k.meta().lipschitz_alpha;
            let tol = config.validation.tolerance;
            let mesh = |n: usize| DesignGrid::equispaced(n).map(|d| d.mesh());
            let a2 = ladder
                .iter()
                .map(|&n| Ok((n, mesh(n)?.powf(alpha) / bandwidth.bandwidth(n).powf(1.0 + alpha))))
                .collect::<Result<Vec<_>>>()?;
            let h_decreasing = ladder.windows(2).all(|w| bandwidth.bandwidth(w[1]) < bandwidth.bandwidth(w[0]));
            schedule.push(decreasing_check("A2_bandwidth", a2, tol, h_decreasing));
            if config.theorem_id == TheoremId::C32 {
                let ratio = ladder
                    .iter()
                    .map(|&n| Ok((n, mesh(n)? / bandwidth.bandwidth(n))))
                    .collect::<Result<Vec<_>>>()?;
                schedule.push(decreasing_check("mesh_over_bandwidth", ratio, tol, true));
            }
            kernel = Some(check_condition_a1_a3(&k, KERNEL_CHECK_RESOLUTION)?);
        }
    }
    Ok(HypothesisReport { conditions, schedule, kernel })
}

fn decreasing_check(name: &str, values: Vec<(usize, f64)>, threshold: f64, extra: bool) -> ScheduleCheck {
    let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = extra && decreasing && values.last().is_some_and(|v| v.1 <= threshold);
    ScheduleCheck { name: name.to_string(), values, threshold, pass }
}

enum Reduction {
    Power(f64),
    Exceeds(f64),
}

impl Reduction {
    fn apply(&self, err: f64) -> f64 {
        match *self {
            Reduction::Power(p) => err.abs().powf(p),
            Reduction::Exceeds(eps) => f64::from(u8::from(err.abs() > eps)),
        }
    }
}

/// Per-replicate values of `reduction(g_n(x_j) − g(x_j))` for each evaluation
/// point, indexed `[replicate][point]`.
fn simulate(config: &ExperimentConfig, wm: &WeightMatrix, reduction: &Reduction) -> Result<Vec<Vec<f64>>> {
    let n = wm.n();
    let biases = bias(&config.g, wm)?;
    let sampler = config.model.sampler(n)?;
    let seed = config.base_seed;
    Ok((0..config.replicates)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |eps, r| {
                sampler.sample_into(replicate_seed(seed, r as u64), eps);
                wm.rows()
                    .zip(&biases)
                    .map(|(row, b)| reduction.apply(b + crate::estimator::dot(row, eps)))
                    .collect()
            },
        )
        .collect())
}

fn run_checked(config: &ExperimentConfig, kind: StatisticKind) -> Result<ConvergenceReport> {
    config.validate()?;
    let hypotheses = validate_hypotheses(config)?;
    let reduction = match kind {
        StatisticKind::ExceedanceFreq => Reduction::Exceeds(config.epsilon.expect("validated")),
        _ => Reduction::Power(config.p),
    };
    let mut rows = Vec::with_capacity(config.n_ladder.len());
    for &n in &config.n_ladder {
        let wm = config.weights(n)?;
        let values = simulate(config, &wm, &reduction)?;
        let reps = values.len() as f64;
        let means: Vec<f64> = (0..wm.m())
            .map(|j| {
                let mut acc = CompensatedSum::new();
                values.iter().for_each(|v| acc.add(v[j]));
                acc.total() / reps
            })
            .collect();
        // first maximiser, so ties resolve to the leftmost point
        let j = (0..means.len()).fold(0, |best, j| if means[j] > means[best] { j } else { best });
        let column: Vec<f64> = values.iter().map(|v| v[j]).collect();
        let (_, se) = stats::mean_and_stderr(&column);
        rows.push(ConvergenceRow {
            n,
            statistic: means[j],
            mc_stderr: se,
            x: wm.eval_points()[j],
            per_replicate: column.iter().map(|&v| v as f32).collect(),
        });
    }
    let monotone_pass = rows.windows(2).all(|w| {
        let allowance = MONOTONE_SLACK_SE * (w[0].mc_stderr.powi(2) + w[1].mc_stderr.powi(2)).sqrt();
        w[1].statistic <= w[0].statistic + allowance
    });
    let strictly_decreasing = rows.windows(2).all(|w| w[1].statistic < w[0].statistic);
    let (first, last) = (rows[0].statistic, rows[rows.len() - 1].statistic);
    let final_below = match kind {
        StatisticKind::ExceedanceFreq => last < EXCEEDANCE_TARGET,
        _ => last < FINAL_RATIO * first || last == 0.0,
    };
    Ok(ConvergenceReport {
        statistic_kind: kind,
        rows,
        monotone_pass,
        strictly_decreasing,
        final_below,
        hypotheses_met: hypotheses.met(),
        hypotheses,
        config_echo: config.clone(),
    })
}

/// `E|g_n(x) − g(x)|^p` at a single point along the ladder.
pub fn run_mean_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let ok = matches!(config.theorem_id, TheoremId::T31 | TheoremId::T31p)
        || (config.theorem_id == TheoremId::C31 && config.eval.tau().is_none());
    if !ok {
        return Err(Error::Config(format!("{} with this evaluation target is not a pointwise mean result", config.theorem_id)));
    }
    run_checked(config, StatisticKind::LpError)
}

/// `max_x E|g_n(x) − g(x)|^p` over the evaluation grid.
pub fn run_uniform_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let ok = config.theorem_id == TheoremId::T32
        || (config.theorem_id == TheoremId::C31 && config.eval.tau().is_some());
    if !ok {
        return Err(Error::Config(format!("{} with this evaluation target is not a uniform mean result", config.theorem_id)));
    }
    run_checked(config, StatisticKind::SupLpError)
}

/// Fraction of replicates with `|g_n(x) − g(x)| > ε`.
pub fn run_probability_convergence(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    if !config.theorem_id.is_probability() {
        return Err(Error::Config(format!("{} is not an in-probability result", config.theorem_id)));
    }
    run_checked(config, StatisticKind::ExceedanceFreq)
}

/// Routes `config` to the run matching its theorem and evaluation target.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    match (config.theorem_id, config.eval.tau()) {
        (TheoremId::T33 | TheoremId::C32, _) => run_probability_convergence(config),
        (TheoremId::T32, _) | (TheoremId::C31, Some(_)) => run_uniform_convergence(config),
        _ => run_mean_convergence(config),
    }
}

/// Mean squared error at one point split into squared bias and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionCheck {
    pub n: usize,
    pub x: f64,
    pub mc_l2: f64,
    pub mc_stderr: f64,
    pub bias_sq: f64,
    /// Monte Carlo mean of `(Σ ω ε)²` on the same replicates.
    pub variance_mc: f64,
    /// `ωᵀ Σ ω` from the model covariance.
    pub variance_exact: f64,
    pub within_mc: bool,
    pub within_exact: bool,
}

impl DecompositionCheck {
    pub fn pass(&self) -> bool {
        self.within_mc && self.within_exact
    }
}

/// Compares the Monte Carlo `E(g_n(x) − g(x))²` with `bias² + variance` at
/// each evaluation point, for the design of size `n`.
pub fn decomposition_check(config: &ExperimentConfig, n: usize) -> Result<Vec<DecompositionCheck>> {
    config.validate()?;
    let wm = config.weights(n)?;
    let biases = bias(&config.g, &wm)?;
    let sampler = config.model.sampler(n)?;
    let seed = config.base_seed;
    let draws: Vec<Vec<(f64, f64)>> = (0..config.replicates)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |eps, r| {
                sampler.sample_into(replicate_seed(seed, r as u64), eps);
                wm.rows()
                    .zip(&biases)
                    .map(|(row, b)| {
                        let noise = crate::estimator::dot(row, eps);
                        ((b + noise).powi(2), noise * noise)
                    })
                    .collect()
            },
        )
        .collect();
    Ok((0..wm.m())
        .map(|j| {
            let total: Vec<f64> = draws.iter().map(|d| d[j].0).collect();
            let noise: Vec<f64> = draws.iter().map(|d| d[j].1).collect();
            let (mc_l2, mc_stderr) = stats::mean_and_stderr(&total);
            let (variance_mc, _) = stats::mean_and_stderr(&noise);
            let bias_sq = biases[j] * biases[j];
            let variance_exact = config.model.quadratic_form(wm.row(j));
            let band = DECOMPOSITION_SE * mc_stderr;
            DecompositionCheck {
                n,
                x: wm.eval_points()[j],
                mc_l2,
                mc_stderr,
                bias_sq,
                variance_mc,
                variance_exact,
                within_mc: (mc_l2 - bias_sq - variance_mc).abs() <= band,
                within_exact: (mc_l2 - bias_sq - variance_exact).abs() <= band,
            }
        })
        .collect())
}

/// The reference configuration: `sin 2πx`, MA(1) errors with `θ = 0.6`,
/// `k_n = ⌈n^0.6⌉` nearest-neighbour weights, `p = 2`, `x = 0.5`, ladder
/// `{50, 200, 800}` and 2000 replicates.
pub fn reference_config(theorem_id: TheoremId) -> ExperimentConfig {
    let kernel = theorem_id.is_kernel();
    ExperimentConfig {
        theorem_id,
        g: RegressionFunction::Sine2pi,
        model: ErrorModel::neg_ma1(0.6, 1.0).expect("valid"),
        scheme: if kernel {
            SchemeConfig::Pc { kernel: "gaussian".into(), h_scale: 1.0, h_exp: 0.25 }
        } else {
            SchemeConfig::Nn { k_scale: 1.0, k_exp: 0.6 }
        },
        weight_scale: 1.0,
        n_ladder: vec![50, 200, 800],
        replicates: 2000,
        p: 2.0,
        s: (theorem_id == TheoremId::T31p).then_some(1.8),
        eval: if theorem_id == TheoremId::T32 {
            EvalTarget::Interval { tau: 0.1, points: 101 }
        } else {
            EvalTarget::Point { x: 0.5 }
        },
        epsilon: theorem_id.is_probability().then_some(0.1),
        base_seed: 20_240_601,
        validation: ValidationSettings::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(theorem: TheoremId) -> ExperimentConfig {
        let mut c = reference_config(theorem);
        c.replicates = 200;
        c.validation.ladder = vec![100, 1000];
        c
    }

    #[test]
    fn p_out_of_range_is_a_config_error() {
        let mut c = small(TheoremId::T31);
        for p in [0.0, 3.0, -1.0] {
            c.p = p;
            match c.validate() {
                Err(Error::Config(m)) => assert_eq!(m, "p must lie in (0,2]"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn config_invariants() {
        let mut c = small(TheoremId::T31p);
        c.s = Some(2.0);
        c.p = 1.5;
        assert!(c.validate().is_err());
        let mut c = small(TheoremId::T32);
        c.eval = EvalTarget::Point { x: 0.5 };
        assert!(c.validate().is_err());
        let mut c = small(TheoremId::T31);
        c.n_ladder = vec![200, 50];
        assert!(c.validate().is_err());
        let mut c = small(TheoremId::T33);
        c.epsilon = None;
        assert!(c.validate().is_err());
        let mut c = small(TheoremId::C31);
        c.scheme = SchemeConfig::Nn { k_scale: 1.0, k_exp: 0.6 };
        assert!(c.validate().is_err());
        let mut c = small(TheoremId::T31);
        c.g = RegressionFunction::PiecewiseLinear;
        c.eval = EvalTarget::Point { x: 1.0 / 3.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn degenerate_model_constant_g_gives_zero() {
        for theorem in [TheoremId::T31, TheoremId::T32] {
            let mut c = small(theorem);
            c.model = ErrorModel::degenerate();
            c.g = RegressionFunction::Constant { c: 1.5 };
            let rep = run_experiment(&c).unwrap();
            assert!(rep.rows.iter().all(|r| r.statistic == 0.0), "{:?}", rep.statistics());
            assert!(rep.final_below);
        }
    }

    #[test]
    fn reproducible_and_seed_stream_isolated() {
        let c = small(TheoremId::T31);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment(&c).unwrap();
        assert_eq!(a.statistics(), b.statistics());
        let mut longer = c.clone();
        longer.replicates = 300;
        let l = run_experiment(&longer).unwrap();
        for (ra, rl) in a.rows.iter().zip(&l.rows) {
            assert_eq!(ra.per_replicate[..], rl.per_replicate[..200]);
        }
    }

    #[test]
    fn stored_replicates_recompute_statistic() {
        let rep = run_experiment(&small(TheoremId::T31)).unwrap();
        for row in &rep.rows {
            assert!((row.recompute() - row.statistic).abs() <= 1e-6 * row.statistic.max(1e-12));
        }
    }

    #[test]
    fn sup_dominates_point_for_same_seeds() {
        let point = run_experiment(&small(TheoremId::T31)).unwrap();
        let uniform = run_experiment(&small(TheoremId::T32)).unwrap();
        for (p, u) in point.rows.iter().zip(&uniform.rows) {
            assert!(u.statistic >= p.statistic);
        }
    }

    #[test]
    fn unreachable_threshold_gives_zero_frequency() {
        let mut c = small(TheoremId::T33);
        c.epsilon = Some(1.0 + 6.0);
        c.n_ladder = vec![50];
        let rep = run_experiment(&c).unwrap();
        assert_eq!(rep.rows[0].statistic, 0.0);
    }

    #[test]
    fn scaled_weights_break_hypotheses() {
        let mut c = small(TheoremId::T33);
        c.weight_scale = 2.0;
        c.eval = EvalTarget::Point { x: 0.25 };
        let rep = run_experiment(&c).unwrap();
        assert!(!rep.hypotheses_met);
        assert!(rep.hypotheses.failures().contains(&"B1".to_string()));
        assert!(!rep.pass());
    }

    #[test]
    fn reference_hypotheses_hold() {
        for t in [TheoremId::T31, TheoremId::T31p, TheoremId::T32, TheoremId::T33, TheoremId::C31, TheoremId::C32] {
            let c = reference_config(t);
            let h = validate_hypotheses(&c).unwrap();
            assert!(h.met(), "{t}: {:?}", h.failures());
        }
    }

    #[test]
    fn routing() {
        assert!(run_mean_convergence(&small(TheoremId::T32)).is_err());
        assert!(run_uniform_convergence(&small(TheoremId::T31)).is_err());
        assert!(run_probability_convergence(&small(TheoremId::T31)).is_err());
    }

    #[test]
    fn decomposition_within_band() {
        let mut c = small(TheoremId::T31);
        c.replicates = 4000;
        let checks = decomposition_check(&c, 200).unwrap();
        assert!(checks.iter().all(|d| d.pass()), "{checks:?}");
    }

    #[test]
    fn theorem_id_round_trip() {
        for t in TheoremId::ALL {
            assert_eq!(t.as_str().parse::<TheoremId>().unwrap(), t);
        }
        assert!("T34".parse::<TheoremId>().is_err());
    }
}
