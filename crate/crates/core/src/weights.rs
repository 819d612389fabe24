//! Weight families `ω_nk(x)` and validators for the conditions placed on them.
//!
//! Two families are built in: nearest-neighbour weights with a left-first tie
//! rule, and Priestley–Chao kernel weights `((x_(k) − x_(k−1))/h) K((x − x_(k))/h)`.
//! Arbitrary matrices can be wrapped with [`WeightMatrix::from_rows`].
//!
//! Conditions that send a statistic to a limit cannot be decided at a single
//! `n`; [`check_ladder`] evaluates them along an increasing ladder of sample
//! sizes and passes when the statistic is non-increasing and below tolerance
//! at the largest rung.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignGrid;
use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::stats;

/// Distances closer than this are treated as tied.
pub const TIE_EPSILON: f64 = 1e-12;

/// Default tolerance for limit-type conditions at the largest ladder rung.
pub const DEFAULT_TOLERANCE: f64 = 0.05;

/// Default bound `M` for bound-type conditions.
pub const DEFAULT_BOUND: f64 = 2.0;

/// Default validator ladder.
pub const DEFAULT_LADDER: [usize; 3] = [100, 1_000, 10_000];

/// Default `τ` for uniform checks.
pub const DEFAULT_TAU: f64 = 0.1;

/// How a weight matrix was produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightScheme {
    NearestNeighbor { k: usize },
    PriestleyChao { kernel: String, bandwidth: f64 },
    Custom,
}

/// `m × n` matrix whose row `j` holds `ω_nk(x_j)`.
#[derive(Debug, Clone)]
pub struct WeightMatrix {
    eval_points: Vec<f64>,
    weights: Vec<f64>,
    design: Arc<DesignGrid>,
    scheme: WeightScheme,
}

impl WeightMatrix {
    /// Wraps user-supplied rows. Every row must have one entry per design
    /// point and all entries must be finite.
    pub fn from_rows(design: Arc<DesignGrid>, eval_points: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != eval_points.len() {
            return invalid(format!(
                "{} weight rows for {} evaluation points",
                rows.len(),
                eval_points.len()
            ));
        }
        let n = design.len();
        let mut weights = Vec::with_capacity(n * rows.len());
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return invalid(format!("row {j} has {} entries, design has {n}", row.len()));
            }
            if let Some(bad) = row.iter().find(|w| !w.is_finite()) {
                return invalid(format!("row {j} contains non-finite weight {bad}"));
            }
            weights.extend(row);
        }
        Ok(Self { eval_points, weights, design, scheme: WeightScheme::Custom })
    }

    pub fn eval_points(&self) -> &[f64] {
        &self.eval_points
    }

    pub fn design(&self) -> &DesignGrid {
        &self.design
    }

    pub fn design_arc(&self) -> &Arc<DesignGrid> {
        &self.design
    }

    pub fn scheme(&self) -> &WeightScheme {
        &self.scheme
    }

    /// Number of design points.
    pub fn n(&self) -> usize {
        self.design.len()
    }

    /// Number of evaluation points.
    pub fn m(&self) -> usize {
        self.eval_points.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.weights[j * n..(j + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.n().max(1))
    }

    /// Every weight multiplied by `factor`. Kernel weights keep their scheme
    /// (the kernel becomes `factor · K`); nearest-neighbour weights become
    /// `Custom`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scheme = match &self.scheme {
            WeightScheme::PriestleyChao { .. } => self.scheme.clone(),
            _ => WeightScheme::Custom,
        };
        Self {
            eval_points: self.eval_points.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            design: Arc::clone(&self.design),
            scheme,
        }
    }

    /// Largest `|ω_nk(x)|` over the whole matrix.
    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m: f64, w| m.max(w.abs()))
    }
}

fn check_eval_points(eval_points: &[f64]) -> Result<()> {
    if let Some(bad) = eval_points.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return invalid(format!("evaluation point {bad} must lie in (0, 1)"));
    }
    Ok(())
}

/// Nearest-neighbour weights: `1/k_n` on the `k_n` design points of smallest
/// rank by `|x_nk − x|`, ties resolved in favour of the smaller design point.
///
/// Selection is by rank, so exactly `k_n` points receive weight and every row
/// sums to 1.
pub fn nn_weights(design: Arc<DesignGrid>, eval_points: &[f64], k_n: usize) -> Result<WeightMatrix> {
    let n = design.len();
    if k_n == 0 || k_n > n {
        return invalid(format!("k_n must lie in [1, {n}], got {k_n}"));
    }
    check_eval_points(eval_points)?;
    let w = 1.0 / k_n as f64;
    let mut weights = vec![0.0; n * eval_points.len()];
    let pts = design.points();
    weights.par_chunks_mut(n).zip(eval_points.par_iter()).for_each(|(row, &x)| {
        // The k nearest points of a sorted design form a contiguous window;
        // grow it by merging the left and right candidate lists in rank order.
        let split = pts.partition_point(|&p| p < x);
        let (mut lo, mut hi) = (split, split);
        for _ in 0..k_n {
            let take_left = match (lo > 0, hi < n) {
                (true, true) => (x - pts[lo - 1]) <= (pts[hi] - x) + TIE_EPSILON,
                (true, false) => true,
                (false, true) => false,
                (false, false) => unreachable!("k_n <= n"),
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        row[lo..hi].fill(w);
    });
    Ok(WeightMatrix {
        eval_points: eval_points.to_vec(),
        weights,
        design,
        scheme: WeightScheme::NearestNeighbor { k: k_n },
    })
}

/// Priestley–Chao weights `((x_(k) − x_(k−1))/h) K((x − x_(k))/h)` with
/// `x_(0) = 0`. The design must end at 1.
pub fn pc_weights(
    design: Arc<DesignGrid>,
    eval_points: &[f64],
    kernel: &KernelSpec,
    h_n: f64,
) -> Result<WeightMatrix> {
    if !(h_n > 0.0 && h_n.is_finite()) {
        return invalid(format!("bandwidth must be positive, got {h_n}"));
    }
    if !design.is_anchored() {
        return invalid("Priestley-Chao weights need a design whose last point is 1");
    }
    check_eval_points(eval_points)?;
    let n = design.len();
    let factors: Vec<f64> = design.gaps().into_iter().map(|g| g / h_n).collect();
    let pts = design.points();
    let mut weights = vec![0.0; n * eval_points.len()];
    weights.par_chunks_mut(n).zip(eval_points.par_iter()).for_each(|(row, &x)| {
        for ((w, &p), &f) in row.iter_mut().zip(pts).zip(&factors) {
            *w = f * kernel.evaluate((x - p) / h_n);
        }
    });
    Ok(WeightMatrix {
        eval_points: eval_points.to_vec(),
        weights,
        design,
        scheme: WeightScheme::PriestleyChao { kernel: kernel.name().to_string(), bandwidth: h_n },
    })
}

/// Conditions the validators know how to evaluate.
///
/// Suffix `u` marks the uniform (sup over evaluation points) variants.
/// `MaxWeight` is `max_k |ω_nk(x)|`, required to vanish for convergence in
/// probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionId {
    B1,
    B2,
    B3,
    B4,
    B1u,
    B2u,
    B3u,
    B4u,
    A4,
    A4u,
    #[serde(rename = "S_POWER")]
    SPower,
    #[serde(rename = "MAXW")]
    MaxWeight,
}

impl ConditionId {
    pub const ALL: [ConditionId; 12] = [
        ConditionId::B1,
        ConditionId::B2,
        ConditionId::B3,
        ConditionId::B4,
        ConditionId::B1u,
        ConditionId::B2u,
        ConditionId::B3u,
        ConditionId::B4u,
        ConditionId::A4,
        ConditionId::A4u,
        ConditionId::SPower,
        ConditionId::MaxWeight,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionId::B1 => "B1",
            ConditionId::B2 => "B2",
            ConditionId::B3 => "B3",
            ConditionId::B4 => "B4",
            ConditionId::B1u => "B1u",
            ConditionId::B2u => "B2u",
            ConditionId::B3u => "B3u",
            ConditionId::B4u => "B4u",
            ConditionId::A4 => "A4",
            ConditionId::A4u => "A4u",
            ConditionId::SPower => "S_POWER",
            ConditionId::MaxWeight => "MAXW",
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(
            self,
            ConditionId::B1u | ConditionId::B2u | ConditionId::B3u | ConditionId::B4u | ConditionId::A4u
        )
    }

    /// Bound-type conditions hold for every `n`; the rest are limits.
    pub fn is_bound(&self) -> bool {
        matches!(self, ConditionId::B2 | ConditionId::B2u)
    }

    fn pointwise(&self) -> ConditionId {
        match self {
            ConditionId::B1u => ConditionId::B1,
            ConditionId::B2u => ConditionId::B2,
            ConditionId::B3u => ConditionId::B3,
            ConditionId::B4u => ConditionId::B4,
            ConditionId::A4u => ConditionId::A4,
            other => *other,
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditionId::ALL
            .iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown condition id '{s}'")))
    }
}

/// Parameters shared by the validators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckParams {
    /// Radius `a` of the locality conditions (B4, A4).
    pub a: Option<f64>,
    /// Exponent `s` of the power condition, in `(1, 2]`.
    pub s: Option<f64>,
    /// Tolerance for limit-type conditions.
    pub tolerance: f64,
    /// Bound `M` for bound-type conditions.
    pub bound: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        Self { a: None, s: None, tolerance: DEFAULT_TOLERANCE, bound: DEFAULT_BOUND }
    }
}

impl CheckParams {
    pub fn with_a(mut self, a: f64) -> Self {
        self.a = Some(a);
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = Some(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub n: usize,
    /// Max over evaluation points of the per-point statistic.
    pub statistic: f64,
    /// Second reading of the uniform bound: `sup_x |Σ_k ω_nk(x)|` for `B2u`.
    pub secondary_statistic: Option<f64>,
    pub threshold: f64,
    pub per_eval_point: Vec<(f64, f64)>,
    pub pass: bool,
}

fn point_statistic(id: ConditionId, row: &[f64], design: &[f64], x: f64, params: &CheckParams) -> f64 {
    match id {
        ConditionId::B1 => (stats::sum(row.iter().copied()) - 1.0).abs(),
        ConditionId::B2 => stats::sum(row.iter().map(|w| w.abs())),
        ConditionId::B3 => stats::sum(row.iter().map(|w| w * w)),
        ConditionId::B4 | ConditionId::A4 => {
            let a = params.a.expect("validated");
            stats::sum(
                row.iter()
                    .zip(design)
                    .filter(|(_, &p)| (p - x).abs() > a)
                    .map(|(w, _)| w.abs()),
            )
        }
        ConditionId::SPower => {
            let s = params.s.expect("validated");
            stats::sum(row.iter().map(|w| w.abs().powf(s)))
        }
        ConditionId::MaxWeight => row.iter().fold(0.0, |m: f64, w| m.max(w.abs())),
        _ => unreachable!("uniform ids are mapped to pointwise ones"),
    }
}

fn validate_params(wm: &WeightMatrix, id: ConditionId, params: &CheckParams) -> Result<()> {
    let base = id.pointwise();
    if matches!(base, ConditionId::B4 | ConditionId::A4) {
        match params.a {
            Some(a) if a > 0.0 => {}
            _ => return invalid(format!("{id} requires a radius a > 0")),
        }
    }
    if base == ConditionId::SPower {
        match params.s {
            Some(s) if s > 1.0 && s <= 2.0 => {}
            _ => return invalid("S_POWER requires s in (1, 2]"),
        }
    }
    if base == ConditionId::A4 && !matches!(wm.scheme, WeightScheme::PriestleyChao { .. }) {
        return invalid(format!("{id} applies to Priestley-Chao kernel weights only"));
    }
    Ok(())
}

fn evaluate(wm: &WeightMatrix, id: ConditionId, params: &CheckParams) -> ConditionReport {
    let base = id.pointwise();
    let design = wm.design.points();
    let per_eval_point: Vec<(f64, f64)> = wm
        .eval_points
        .iter()
        .enumerate()
        .map(|(j, &x)| (x, point_statistic(base, wm.row(j), design, x, params)))
        .collect();
    let statistic = per_eval_point.iter().fold(0.0_f64, |m, &(_, s)| m.max(s));
    let secondary_statistic = (id == ConditionId::B2u).then(|| {
        wm.rows()
            .map(|r| stats::sum(r.iter().copied()).abs())
            .fold(0.0_f64, f64::max)
    });
    let threshold = if id.is_bound() { params.bound } else { params.tolerance };
    let pass = statistic <= threshold && secondary_statistic.is_none_or(|s| s <= threshold);
    ConditionReport { condition_id: id, n: wm.n(), statistic, secondary_statistic, threshold, per_eval_point, pass }
}

/// Pointwise condition check: one statistic per evaluation point, the report
/// statistic being their maximum.
pub fn check_b(wm: &WeightMatrix, which: ConditionId, params: &CheckParams) -> Result<ConditionReport> {
    if which.is_uniform() {
        return invalid(format!("{which} is a uniform condition; use check_b_uniform"));
    }
    validate_params(wm, which, params)?;
    Ok(evaluate(wm, which, params))
}

/// Uniform condition check over evaluation points inside `[τ, 1 − τ]`.
///
/// Accepts either the primed id or its pointwise counterpart; the report
/// always carries the primed id.
pub fn check_b_uniform(
    wm: &WeightMatrix,
    which: ConditionId,
    params: &CheckParams,
    tau: f64,
) -> Result<ConditionReport> {
    let id = match which {
        ConditionId::B1 => ConditionId::B1u,
        ConditionId::B2 => ConditionId::B2u,
        ConditionId::B3 => ConditionId::B3u,
        ConditionId::B4 => ConditionId::B4u,
        ConditionId::A4 => ConditionId::A4u,
        ConditionId::SPower | ConditionId::MaxWeight => which,
        uniform => uniform,
    };
    if !(tau > 0.0 && tau < 0.5) {
        return invalid(format!("tau must lie in (0, 1/2), got {tau}"));
    }
    if let Some(x) = wm.eval_points.iter().find(|&&x| x < tau - 1e-12 || x > 1.0 - tau + 1e-12) {
        return invalid(format!("evaluation point {x} lies outside [{tau}, {}]", 1.0 - tau));
    }
    validate_params(wm, id, params)?;
    Ok(evaluate(wm, id, params))
}

/// `m` equispaced points covering `[τ, 1 − τ]`.
pub fn uniform_eval_grid(tau: f64, m: usize) -> Vec<f64> {
    assert!(m >= 2);
    (0..m).map(|i| tau + (1.0 - 2.0 * tau) * i as f64 / (m - 1) as f64).collect()
}

/// Bandwidth schedule `h_n = scale · n^(−exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthRule {
    pub scale: f64,
    pub exponent: f64,
}

impl BandwidthRule {
    /// `h_n = n^(−1/4)`.
    pub const REFERENCE: BandwidthRule = BandwidthRule { scale: 1.0, exponent: 0.25 };

    pub fn bandwidth(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }
}

/// Neighbour-count schedule `k_n = ⌈scale · n^exponent⌉`, clamped to `[1, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborRule {
    pub scale: f64,
    pub exponent: f64,
}

impl NeighborRule {
    /// `k_n = ⌈n^0.6⌉`.
    pub const REFERENCE: NeighborRule = NeighborRule { scale: 1.0, exponent: 0.6 };

    pub fn neighbors(&self, n: usize) -> usize {
        let k = (self.scale * (n as f64).powf(self.exponent)).ceil() as usize;
        k.clamp(1, n.max(1))
    }
}

/// A weight family together with the rule that sets its tuning parameter
/// as a function of `n`.
#[derive(Debug, Clone)]
pub enum SchemeRule {
    NearestNeighbor(NeighborRule),
    PriestleyChao { kernel: KernelSpec, bandwidth: BandwidthRule },
}

impl SchemeRule {
    /// Parses `nn:<k>` / `nn:n^<e>` and `pc:<kernel>:<h>` / `pc:<kernel>:n^-<e>`.
    pub fn parse(descriptor: &str) -> Result<Self> {
        let parts: Vec<&str> = descriptor.split(':').collect();
        match parts.as_slice() {
            ["nn", k] => {
                let rule = if let Some(e) = k.strip_prefix("n^") {
                    NeighborRule { scale: 1.0, exponent: parse_num(e)? }
                } else {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad neighbour count '{k}'")))?;
                    NeighborRule { scale: k as f64, exponent: 0.0 }
                };
                Ok(SchemeRule::NearestNeighbor(rule))
            }
            ["pc", kernel, h] => {
                let kernel = KernelSpec::by_name(kernel)?;
                let bandwidth = if let Some(e) = h.strip_prefix("n^") {
                    BandwidthRule { scale: 1.0, exponent: -parse_num(e)? }
                } else {
                    BandwidthRule { scale: parse_num(h)?, exponent: 0.0 }
                };
                Ok(SchemeRule::PriestleyChao { kernel, bandwidth })
            }
            _ => invalid(format!("scheme must be 'nn:<k_n>' or 'pc:<kernel>:<h>', got '{descriptor}'")),
        }
    }

    pub fn build_on(&self, design: Arc<DesignGrid>, eval_points: &[f64]) -> Result<WeightMatrix> {
        let n = design.len();
        match self {
            SchemeRule::NearestNeighbor(rule) => nn_weights(design, eval_points, rule.neighbors(n)),
            SchemeRule::PriestleyChao { kernel, bandwidth } => {
                pc_weights(design, eval_points, kernel, bandwidth.bandwidth(n))
            }
        }
    }

    /// Weights on the equispaced design of size `n`.
    pub fn build(&self, n: usize, eval_points: &[f64]) -> Result<WeightMatrix> {
        self.build_on(Arc::new(DesignGrid::equispaced(n)?), eval_points)
    }

    pub fn describe(&self) -> String {
        match self {
            SchemeRule::NearestNeighbor(r) => format!("nn:k_n=ceil({}*n^{})", r.scale, r.exponent),
            SchemeRule::PriestleyChao { kernel, bandwidth } => {
                format!("pc:{}:h_n={}*n^-{}", kernel.name(), bandwidth.scale, bandwidth.exponent)
            }
        }
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number '{s}'")))
}

/// A condition evaluated along a ladder of sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub condition_id: ConditionId,
    pub rungs: Vec<ConditionReport>,
    /// Statistic non-increasing along the ladder.
    pub monotone: bool,
    /// Statistic within threshold at the largest rung.
    pub final_below: bool,
    pub pass: bool,
}

/// Evaluates `which` on `build(n)` for each `n` in `ladder`.
///
/// Bound-type conditions pass when every rung passes. Limit-type conditions
/// pass when the statistic is non-increasing and the last rung is within
/// tolerance.
pub fn check_ladder<F>(
    build: F,
    which: ConditionId,
    params: &CheckParams,
    ladder: &[usize],
    tau: Option<f64>,
) -> Result<LadderReport>
where
    F: Fn(usize) -> Result<WeightMatrix>,
{
    if ladder.is_empty() {
        return invalid("ladder must not be empty");
    }
    let rungs = ladder
        .iter()
        .map(|&n| {
            let wm = build(n)?;
            match tau {
                Some(t) => check_b_uniform(&wm, which, params, t),
                None => check_b(&wm, which, params),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let monotone = rungs.windows(2).all(|w| w[1].statistic <= w[0].statistic);
    let last = rungs.last().expect("non-empty");
    let final_below = last.pass;
    let pass = if which.is_bound() { rungs.iter().all(|r| r.pass) } else { monotone && final_below };
    Ok(LadderReport { condition_id: last.condition_id, rungs, monotone, final_below, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{epanechnikov_kernel, gaussian_kernel};
    use proptest::prelude::*;

    fn eq(n: usize) -> Arc<DesignGrid> {
        Arc::new(DesignGrid::equispaced(n).unwrap())
    }

    #[test]
    fn nn_tie_selects_both_neighbours() {
        let wm = nn_weights(eq(5), &[0.5], 2).unwrap();
        assert_eq!(wm.row(0), &[0.0, 0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn nn_tie_prefers_left() {
        let wm = nn_weights(eq(5), &[0.5], 1).unwrap();
        assert_eq!(wm.row(0), &[0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn nn_all_points() {
        let wm = nn_weights(eq(7), &[0.3, 0.9], 7).unwrap();
        for row in wm.rows() {
            assert!(row.iter().all(|&w| w == 1.0 / 7.0));
        }
    }

    #[test]
    fn nn_rejects_bad_k_and_points() {
        assert!(nn_weights(eq(5), &[0.5], 6).is_err());
        assert!(nn_weights(eq(5), &[0.5], 0).is_err());
        assert!(nn_weights(eq(5), &[1.0], 2).is_err());
        assert!(nn_weights(eq(5), &[0.0], 2).is_err());
    }

    #[test]
    fn nn_near_boundary_fills_from_inside() {
        let wm = nn_weights(eq(10), &[0.01], 3).unwrap();
        assert_eq!(&wm.row(0)[..4], &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.0]);
    }

    #[test]
    fn nn_b1_exact_and_b3_is_inverse_k() {
        let wm = nn_weights(eq(200), &uniform_eval_grid(0.1, 21), 16).unwrap();
        let p = CheckParams::default();
        assert_eq!(check_b(&wm, ConditionId::B1, &p).unwrap().statistic, 0.0);
        let b3 = check_b(&wm, ConditionId::B3, &p).unwrap().statistic;
        assert!((b3 - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn pc_row_sum_close_to_one() {
        // independent oracle: direct summation of the Riemann sum
        let n = 1000;
        let h = 0.05;
        let oracle: f64 = (1..=n)
            .map(|k| {
                let xk = k as f64 / n as f64;
                let u = (0.5 - xk) / h;
                (1.0 / n as f64) / h * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
            })
            .sum();
        let wm = pc_weights(eq(n), &[0.5], &gaussian_kernel(), h).unwrap();
        let s: f64 = wm.row(0).iter().sum();
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-3);
        let b2 = check_b(&wm, ConditionId::B2, &CheckParams::default()).unwrap();
        assert!(b2.pass);
        assert!((b2.statistic - 1.0).abs() < 1e-3);
    }

    #[test]
    fn pc_zero_row_far_from_support() {
        let wm = pc_weights(eq(100), &[0.05], &epanechnikov_kernel(), 0.01).unwrap();
        // points within 0.01 of 0.05 carry weight; check one far away instead
        let far = pc_weights(eq(100), &[0.5], &epanechnikov_kernel(), 1e-4).unwrap();
        assert!(far.row(0).iter().enumerate().all(|(k, &w)| k == 49 || w == 0.0));
        assert!(wm.row(0)[50..].iter().all(|&w| w == 0.0));
    }

    #[test]
    fn pc_gap_factor_constant_on_uniform_design() {
        let h = 0.3;
        let d = eq(4);
        let gaps = d.gaps();
        assert!(gaps.iter().all(|&g| g == 0.25));
        let k = epanechnikov_kernel();
        let wm = pc_weights(d.clone(), &[0.5], &k, h).unwrap();
        for (w, &p) in wm.row(0).iter().zip(d.points()) {
            assert!((w - 0.25 / h * k.evaluate((0.5 - p) / h)).abs() < 1e-15);
        }
    }

    #[test]
    fn pc_rejects_bad_bandwidth_and_unanchored_design() {
        assert!(pc_weights(eq(4), &[0.5], &gaussian_kernel(), 0.0).is_err());
        assert!(pc_weights(eq(4), &[0.5], &gaussian_kernel(), -1.0).is_err());
        let d = Arc::new(DesignGrid::from_points(vec![0.2, 0.6]).unwrap());
        assert!(pc_weights(d, &[0.5], &gaussian_kernel(), 0.1).is_err());
    }

    #[test]
    fn uniform_checks_on_nn() {
        let wm = nn_weights(eq(500), &uniform_eval_grid(0.1, 101), 20).unwrap();
        let r = check_b_uniform(&wm, ConditionId::B1u, &CheckParams::default(), 0.1).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.condition_id, ConditionId::B1u);
    }

    #[test]
    fn uniform_check_reports_both_b2_readings() {
        let d = eq(4);
        let wm = WeightMatrix::from_rows(d, vec![0.5], vec![vec![1.0, -1.0, 0.5, 0.0]]).unwrap();
        let r = check_b_uniform(&wm, ConditionId::B2u, &CheckParams::default(), 0.1).unwrap();
        assert_eq!(r.statistic, 2.5);
        assert_eq!(r.secondary_statistic, Some(0.5));
        assert!(!r.pass);
    }

    #[test]
    fn uniform_check_rejects_points_outside_window() {
        let wm = nn_weights(eq(50), &[0.05, 0.5], 3).unwrap();
        assert!(check_b_uniform(&wm, ConditionId::B1u, &CheckParams::default(), 0.1).is_err());
    }

    #[test]
    fn a4_uniform_small_for_narrow_bandwidth() {
        // oracle: direct summation of the Gaussian mass beyond a/h
        let n = 10_000;
        let h = 0.05;
        let a = 0.2;
        let grid = uniform_eval_grid(0.1, 101);
        let mut oracle = 0.0_f64;
        for &x in &grid {
            let s: f64 = (1..=n)
                .map(|k| k as f64 / n as f64)
                .filter(|xk| (xk - x).abs() > a)
                .map(|xk| {
                    let u = (x - xk) / h;
                    (1.0 / n as f64) / h * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
                })
                .sum();
            oracle = oracle.max(s);
        }
        let wm = pc_weights(eq(n), &grid, &gaussian_kernel(), h).unwrap();
        let r = check_b_uniform(&wm, ConditionId::A4u, &CheckParams::default().with_a(a), 0.1).unwrap();
        assert!((r.statistic - oracle).abs() < 1e-12);
        assert!(r.statistic < 1e-3);
    }

    #[test]
    fn parameter_errors() {
        let wm = nn_weights(eq(10), &[0.5], 3).unwrap();
        let p = CheckParams::default();
        assert!(check_b(&wm, ConditionId::B4, &p).is_err());
        assert!(check_b(&wm, ConditionId::SPower, &p.with_s(2.5)).is_err());
        assert!(check_b(&wm, ConditionId::A4, &p.with_a(0.1)).is_err());
        assert!(check_b(&wm, ConditionId::B1u, &p).is_err());
        assert!("B7".parse::<ConditionId>().is_err());
        assert_eq!("s_power".parse::<ConditionId>().unwrap(), ConditionId::SPower);
    }

    #[test]
    fn nn_b4_vanishes_once_window_fits() {
        let a = 0.2;
        let rule = SchemeRule::NearestNeighbor(NeighborRule::REFERENCE);
        let rep = check_ladder(
            |n| rule.build(n, &[0.5]),
            ConditionId::B4,
            &CheckParams::default().with_a(a),
            &DEFAULT_LADDER,
            None,
        )
        .unwrap();
        for r in &rep.rungs {
            let k = NeighborRule::REFERENCE.neighbors(r.n);
            if k as f64 / r.n as f64 <= a {
                assert_eq!(r.statistic, 0.0);
            }
        }
        assert!(rep.pass);
    }

    #[test]
    fn pc_row_sum_gap_shrinks_with_n() {
        let rule = SchemeRule::PriestleyChao { kernel: gaussian_kernel(), bandwidth: BandwidthRule::REFERENCE };
        let p = CheckParams::default();
        let small = check_b(&rule.build(100, &[0.5]).unwrap(), ConditionId::B1, &p).unwrap();
        let large = check_b(&rule.build(10_000, &[0.5]).unwrap(), ConditionId::B1, &p).unwrap();
        assert!(large.statistic < small.statistic);
    }

    #[test]
    fn scheme_descriptors() {
        assert!(matches!(SchemeRule::parse("nn:5").unwrap(), SchemeRule::NearestNeighbor(r) if r.neighbors(100) == 5));
        assert!(matches!(SchemeRule::parse("nn:n^0.6").unwrap(), SchemeRule::NearestNeighbor(r) if r.neighbors(800) == 56));
        match SchemeRule::parse("pc:gaussian:n^-0.25").unwrap() {
            SchemeRule::PriestleyChao { bandwidth, .. } => assert!((bandwidth.bandwidth(10_000) - 0.1).abs() < 1e-15),
            _ => panic!(),
        }
        match SchemeRule::parse("pc:epanechnikov:0.05").unwrap() {
            SchemeRule::PriestleyChao { bandwidth, .. } => assert_eq!(bandwidth.bandwidth(123), 0.05),
            _ => panic!(),
        }
        assert!(SchemeRule::parse("kde:3").is_err());
        assert!(SchemeRule::parse("pc:boxcar:0.1").is_err());
    }

    #[test]
    fn from_rows_validation() {
        let d = eq(3);
        assert!(WeightMatrix::from_rows(d.clone(), vec![0.5], vec![vec![1.0, 0.0]]).is_err());
        assert!(WeightMatrix::from_rows(d.clone(), vec![0.5, 0.6], vec![vec![1.0, 0.0, 0.0]]).is_err());
        assert!(WeightMatrix::from_rows(d, vec![0.5], vec![vec![f64::NAN, 0.0, 0.0]]).is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, f64)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), 1..4),
                0.05f64..0.9,
            )
        })
    }

    proptest! {
        #[test]
        fn nn_rows_have_exactly_k_entries(n in 1usize..300, kfrac in 0.0f64..1.0, x in 0.001f64..0.999) {
            let k = 1 + ((n - 1) as f64 * kfrac) as usize;
            let wm = nn_weights(eq(n), &[x], k).unwrap();
            let row = wm.row(0);
            let nz: Vec<f64> = row.iter().copied().filter(|&w| w != 0.0).collect();
            prop_assert_eq!(nz.len(), k);
            prop_assert!(nz.iter().all(|&w| w == 1.0 / k as f64));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn nn_selection_matches_sorting_oracle(
            pts in prop::collection::vec(0.0f64..=1.0, 1..40),
            x in 0.001f64..0.999,
            kfrac in 0.0f64..1.0,
        ) {
            let d = Arc::new(DesignGrid::from_points(pts).unwrap());
            let n = d.len();
            let k = 1 + ((n - 1) as f64 * kfrac) as usize;
            let wm = nn_weights(d.clone(), &[x], k).unwrap();
            // oracle: stable sort of indices by (distance, position), tolerance-free
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| {
                let (di, dj) = ((d.points()[i] - x).abs(), (d.points()[j] - x).abs());
                if (di - dj).abs() <= TIE_EPSILON { d.points()[i].total_cmp(&d.points()[j]).then(i.cmp(&j)) } else { di.total_cmp(&dj) }
            });
            let mut selected: Vec<usize> = idx[..k].to_vec();
            selected.sort();
            let got: Vec<usize> = wm.row(0).iter().enumerate().filter(|(_, &w)| w != 0.0).map(|(i, _)| i).collect();
            // duplicates at equal distance may swap identities but not positions
            let got_pos: Vec<f64> = got.iter().map(|&i| d.points()[i]).collect();
            let want_pos: Vec<f64> = selected.iter().map(|&i| d.points()[i]).collect();
            prop_assert_eq!(got_pos, want_pos);
        }

        #[test]
        fn nn_translation_stable(
            raw in prop::collection::btree_set(100u32..800, 2..30),
            xi in 100u32..800,
            shift in -0.05f64..0.05,
            kfrac in 0.0f64..1.0,
        ) {
            let pts: Vec<f64> = raw.iter().map(|&v| v as f64 / 1000.0).collect();
            let x = xi as f64 / 1000.0 + 0.0003;
            let n = pts.len();
            let k = 1 + ((n - 1) as f64 * kfrac) as usize;
            let a = nn_weights(Arc::new(DesignGrid::from_points(pts.clone()).unwrap()), &[x], k).unwrap();
            let shifted: Vec<f64> = pts.iter().map(|p| p + shift).collect();
            let b = nn_weights(Arc::new(DesignGrid::from_points(shifted).unwrap()), &[x + shift], k).unwrap();
            prop_assert_eq!(a.row(0), b.row(0));
        }

        #[test]
        fn statistics_invariant_under_column_permutation((pts, rows, a) in arb_matrix(), seed in any::<u64>()) {
            let n = pts.len();
            let mut perm: Vec<usize> = (0..n).collect();
            // deterministic shuffle from seed
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            // from_points sorts, so permuting raw points + columns together
            // must yield identical statistics
            let d1 = Arc::new(DesignGrid::from_points(pts.clone()).unwrap());
            let order: Vec<usize> = {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by(|&i, &j| pts[i].total_cmp(&pts[j]));
                o
            };
            let rows_sorted: Vec<Vec<f64>> = rows.iter().map(|r| order.iter().map(|&i| r[i]).collect()).collect();
            let pts_p: Vec<f64> = perm.iter().map(|&i| pts[i]).collect();
            let order_p: Vec<usize> = {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by(|&i, &j| pts_p[i].total_cmp(&pts_p[j]));
                o
            };
            let rows_p: Vec<Vec<f64>> = rows.iter().map(|r| order_p.iter().map(|&i| r[perm[i]]).collect()).collect();
            let d2 = Arc::new(DesignGrid::from_points(pts_p).unwrap());
            let eval = vec![0.5; rows.len()];
            let w1 = WeightMatrix::from_rows(d1, eval.clone(), rows_sorted).unwrap();
            let w2 = WeightMatrix::from_rows(d2, eval, rows_p).unwrap();
            let p = CheckParams::default().with_a(a).with_s(1.5);
            for id in [ConditionId::B1, ConditionId::B2, ConditionId::B3, ConditionId::B4, ConditionId::SPower, ConditionId::MaxWeight] {
                let s1 = check_b(&w1, id, &p).unwrap().statistic;
                let s2 = check_b(&w2, id, &p).unwrap().statistic;
                prop_assert!((s1 - s2).abs() <= 1e-12 * (1.0 + s1.abs()), "{:?}: {} vs {}", id, s1, s2);
            }
        }

        #[test]
        fn b3_bounded_by_max_times_b2((pts, rows, _a) in arb_matrix()) {
            let d = Arc::new(DesignGrid::from_points(pts).unwrap());
            let eval = vec![0.5; rows.len()];
            let wm = WeightMatrix::from_rows(d, eval, rows).unwrap();
            let p = CheckParams::default();
            for j in 0..wm.m() {
                let single = WeightMatrix::from_rows(wm.design_arc().clone(), vec![0.5], vec![wm.row(j).to_vec()]).unwrap();
                let b2 = check_b(&single, ConditionId::B2, &p).unwrap().statistic;
                let b3 = check_b(&single, ConditionId::B3, &p).unwrap().statistic;
                prop_assert!(b3 <= single.max_abs() * b2 * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
