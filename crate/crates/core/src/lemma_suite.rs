//! Numeric checks of the supporting results: the second-moment and maximal
//! inequalities for NQD partial sums (Monte Carlo), and the Riemann-sum limits
//! of the kernel weights (deterministic).

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignGrid;
use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;
use crate::nqd_errors::ErrorModel;
use crate::rng::replicate_seed;
use crate::stats;
use crate::weights::{pc_weights, uniform_eval_grid};

pub use crate::weights::BandwidthRule;

/// Slack multiplier for one-sided Monte Carlo inequality checks.
pub const MC_SLACK_SE: f64 = 5.0;

/// Minimum replicate count for the partial-sum checks.
pub const MIN_REPLICATES: usize = 1_000;

/// Largest admissible `|sum − limit|` at the top of a Riemann ladder.
pub const RIEMANN_TOLERANCE: f64 = 0.02;

/// Number of points in the uniform evaluation grid.
pub const UNIFORM_GRID_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LemmaId {
    /// `E(Σ ε)² ≤ Σ E ε²`.
    L22Var,
    /// `E max_k (Σ_{i≤k} ε_i)² ≤ (4 log² n / log² 2) Σ E ε²`.
    L22Max,
    /// `Σ (gap/h) |K| → ∫|K|` at a point.
    L23Point,
    L23Unif,
    /// `Σ (gap/h) K → 1` at a point.
    L24Point,
    L24Unif,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaRow {
    pub n: usize,
    pub lhs: f64,
    /// Right-hand side of an inequality, or the limit of a limit statement.
    pub rhs_or_limit: f64,
    /// `lhs − rhs_or_limit`.
    pub gap: f64,
    /// Monte Carlo allowance (inequalities) or 0 (deterministic limits).
    pub slack: f64,
    /// `h_n`, for Riemann ladders.
    pub bandwidth: Option<f64>,
    /// `δ_n^α / h_n^(1+α)`, for Riemann ladders.
    pub a2_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma_id: LemmaId,
    pub ladder: Vec<LemmaRow>,
    /// `|gap|` non-increasing along the ladder (limit statements).
    pub monotone: bool,
    /// `|gap|` strictly decreasing along the ladder (limit statements).
    pub strictly_decreasing: bool,
    pub pass: bool,
    /// Set when the inputs violate the bandwidth hypothesis.
    pub precondition_failure: Option<String>,
}

/// Both partial-sum inequalities for one model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma22Report {
    pub variance: LemmaReport,
    pub maximal: LemmaReport,
}

impl Lemma22Report {
    pub fn pass(&self) -> bool {
        self.variance.pass && self.maximal.pass
    }
}

/// `4 log² n / log² 2`.
pub fn maximal_constant(n: usize) -> f64 {
    let r = (n as f64).ln() / std::f64::consts::LN_2;
    4.0 * r * r
}

/// Monte Carlo check of both partial-sum inequalities at each `n`.
///
/// The right-hand sides use the model's declared second moments. The
/// maximal inequality is compared with the full-window sum `Σ_{i=1}^n E ε_i²`.
pub fn verify_lemma22(model: &ErrorModel, ns: &[usize], replicates: usize, seed: u64) -> Result<Lemma22Report> {
    if replicates < MIN_REPLICATES {
        return invalid(format!("replicates must be at least {MIN_REPLICATES}"));
    }
    if ns.is_empty() {
        return invalid("at least one n is required");
    }
    if let Some(n) = ns.iter().find(|&&n| n < 2) {
        return invalid(format!("n must be at least 2 (the maximal bound vanishes at n = 1), got {n}"));
    }
    let mut var_rows = Vec::with_capacity(ns.len());
    let mut max_rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let sampler = model.sampler(n)?;
        let draws: Vec<(f64, f64)> = (0..replicates)
            .into_par_iter()
            .map_init(
                || vec![0.0; n],
                |buf, r| {
                    sampler.sample_into(replicate_seed(seed, r as u64), buf);
                    let mut partial = 0.0;
                    let mut max_sq = 0.0_f64;
                    for &e in buf.iter() {
                        partial += e;
                        max_sq = max_sq.max(partial * partial);
                    }
                    (partial * partial, max_sq)
                },
            )
            .collect();
        let sq: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let mx: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let moment_sum = model.second_moment_sum(n);
        let (lhs_v, se_v) = stats::mean_and_stderr(&sq);
        let (lhs_m, se_m) = stats::mean_and_stderr(&mx);
        let rhs_m = maximal_constant(n) * moment_sum;
        var_rows.push(LemmaRow {
            n,
            lhs: lhs_v,
            rhs_or_limit: moment_sum,
            gap: lhs_v - moment_sum,
            slack: MC_SLACK_SE * se_v,
            bandwidth: None,
            a2_ratio: None,
        });
        max_rows.push(LemmaRow {
            n,
            lhs: lhs_m,
            rhs_or_limit: rhs_m,
            gap: lhs_m - rhs_m,
            slack: MC_SLACK_SE * se_m,
            bandwidth: None,
            a2_ratio: None,
        });
    }
    let inequality = |lemma_id, ladder: Vec<LemmaRow>| {
        let pass = ladder.iter().all(|r| r.gap <= r.slack);
        LemmaReport { lemma_id, ladder, monotone: true, strictly_decreasing: true, pass, precondition_failure: None }
    };
    Ok(Lemma22Report { variance: inequality(LemmaId::L22Var, var_rows), maximal: inequality(LemmaId::L22Max, max_rows) })
}

/// Where the Riemann sums are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvalSpec {
    Point { x: f64 },
    /// Sup over a 101-point grid on `[τ, 1 − τ]`.
    Interval { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiemannMode {
    /// `Σ (gap/h) |K(·)|`, limit `∫|K|`.
    Abs,
    /// `Σ (gap/h) K(·)`, limit 1.
    Signed,
}

/// Evaluates the kernel Riemann sums on equispaced designs along `ladder`.
///
/// Passes when `|sum − limit|` is non-increasing and below
/// [`RIEMANN_TOLERANCE`] at the largest `n`. A schedule under which `h_n` or
/// `δ_n^α / h_n^(1+α)` fails to decrease is reported as a precondition
/// failure.
pub fn verify_riemann_limits(
    kernel: &KernelSpec,
    rule: BandwidthRule,
    ladder: &[usize],
    eval: EvalSpec,
    mode: RiemannMode,
) -> Result<LemmaReport> {
    if ladder.is_empty() {
        return invalid("ladder must not be empty");
    }
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("ladder must be strictly increasing");
    }
    let eval_points = match eval {
        EvalSpec::Point { x } => {
            if !(x > 0.0 && x < 1.0) {
                return invalid(format!("x must lie in (0, 1), got {x}"));
            }
            vec![x]
        }
        EvalSpec::Interval { tau } => {
            if !(tau > 0.0 && tau < 0.5) {
                return invalid(format!("tau must lie in (0, 1/2), got {tau}"));
            }
            uniform_eval_grid(tau, UNIFORM_GRID_POINTS)
        }
    };
    let limit = match mode {
        RiemannMode::Abs => kernel.integrate_abs(),
        RiemannMode::Signed => 1.0,
    };
    let alpha = kernel.meta().lipschitz_alpha;
    let mut rows = Vec::with_capacity(ladder.len());
    for &n in ladder {
        let design = Arc::new(DesignGrid::equispaced(n)?);
        let h = rule.bandwidth(n);
        let ratio = design.mesh().powf(alpha) / h.powf(1.0 + alpha);
        let wm = pc_weights(design, &eval_points, kernel, h)?;
        let (mut worst_gap, mut worst_sum) = (-1.0_f64, 0.0);
        for row in wm.rows() {
            let s = match mode {
                RiemannMode::Abs => stats::sum(row.iter().map(|w| w.abs())),
                RiemannMode::Signed => stats::sum(row.iter().copied()),
            };
            if (s - limit).abs() > worst_gap {
                worst_gap = (s - limit).abs();
                worst_sum = s;
            }
        }
        rows.push(LemmaRow {
            n,
            lhs: worst_sum,
            rhs_or_limit: limit,
            gap: worst_sum - limit,
            slack: 0.0,
            bandwidth: Some(h),
            a2_ratio: Some(ratio),
        });
    }
    let h_decreasing = rows.windows(2).all(|w| w[1].bandwidth < w[0].bandwidth);
    let ratio_decreasing = rows.windows(2).all(|w| w[1].a2_ratio < w[0].a2_ratio);
    let precondition_failure = match (h_decreasing, ratio_decreasing) {
        (true, true) => None,
        (false, _) => Some("bandwidth does not decrease along the ladder".to_string()),
        (true, false) => Some("delta_n^alpha / h_n^(1+alpha) does not decrease along the ladder".to_string()),
    };
    let monotone = rows.windows(2).all(|w| w[1].gap.abs() <= w[0].gap.abs());
    let strictly_decreasing = rows.windows(2).all(|w| w[1].gap.abs() < w[0].gap.abs());
    let final_ok = rows.last().is_some_and(|r| r.gap.abs() < RIEMANN_TOLERANCE);
    let lemma_id = match (mode, eval) {
        (RiemannMode::Abs, EvalSpec::Point { .. }) => LemmaId::L23Point,
        (RiemannMode::Abs, EvalSpec::Interval { .. }) => LemmaId::L23Unif,
        (RiemannMode::Signed, EvalSpec::Point { .. }) => LemmaId::L24Point,
        (RiemannMode::Signed, EvalSpec::Interval { .. }) => LemmaId::L24Unif,
    };
    Ok(LemmaReport {
        lemma_id,
        pass: precondition_failure.is_none() && monotone && final_ok,
        ladder: rows,
        monotone,
        strictly_decreasing,
        precondition_failure,
    })
}
