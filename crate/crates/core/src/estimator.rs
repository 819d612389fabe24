//! The linear smoother `g_n(x) = Σ_k ω_nk(x) Y_nk` and its deterministic bias.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::design::DesignGrid;
use crate::error::{invalid, Result};
use crate::nqd_errors::ErrorModel;
use crate::stats;
use crate::weights::WeightMatrix;

/// Evaluation points must stay this far from a discontinuity of `g`'s
/// derivative (or of `g` itself).
pub const KINK_TOLERANCE: f64 = 1e-9;

/// Bounded regression functions on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum RegressionFunction {
    Constant { c: f64 },
    /// `sin(2πx)`.
    Sine2pi,
    /// Piecewise linear through `(0,0) (1/3,1) (2/3,−1) (1,0)`.
    PiecewiseLinear,
    /// Linear interpolation through `(x, y)` knots sorted by `x`.
    Table { knots: Vec<(f64, f64)> },
}

impl RegressionFunction {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sine2pi" => Ok(Self::Sine2pi),
            "piecewise-linear" | "piecewise_linear" => Ok(Self::PiecewiseLinear),
            other => match other.strip_prefix("constant:") {
                Some(c) => c
                    .parse()
                    .map(|c| Self::Constant { c })
                    .map_err(|_| crate::Error::InvalidArgument(format!("bad constant '{c}'"))),
                None => invalid(format!("unknown regression function '{other}'")),
            },
        }
    }

    pub fn table(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return invalid("a table needs at least two knots");
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        if knots.first().unwrap().0 > 0.0 || knots.last().unwrap().0 < 1.0 {
            return invalid("table knots must cover [0, 1]");
        }
        if knots.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("table knots must have distinct abscissae");
        }
        if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) {
            return invalid("table knots must be finite");
        }
        Ok(Self::Table { knots })
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            Self::Constant { c } => *c,
            Self::Sine2pi => (2.0 * PI * x).sin(),
            Self::PiecewiseLinear => interpolate(&PIECEWISE_KNOTS, x),
            Self::Table { knots } => interpolate(knots, x),
        }
    }

    /// `sup_{x ∈ [0,1]} |g(x)|`.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Constant { c } => c.abs(),
            Self::Sine2pi | Self::PiecewiseLinear => 1.0,
            Self::Table { knots } => knots.iter().fold(0.0, |m: f64, k| m.max(k.1.abs())),
        }
    }

    /// Points where `g` is not smooth. Evaluation points must avoid them.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Self::Constant { .. } | Self::Sine2pi => Vec::new(),
            Self::PiecewiseLinear => vec![1.0 / 3.0, 2.0 / 3.0],
            Self::Table { knots } => knots[1..knots.len() - 1].iter().map(|k| k.0).collect(),
        }
    }

    /// Rejects evaluation points within [`KINK_TOLERANCE`] of a kink.
    pub fn check_eval_points(&self, eval_points: &[f64]) -> Result<()> {
        let kinks = self.kinks();
        for &x in eval_points {
            if let Some(k) = kinks.iter().find(|&&k| (x - k).abs() <= KINK_TOLERANCE) {
                return invalid(format!("evaluation point {x} coincides with the kink at {k}"));
            }
        }
        Ok(())
    }
}

const PIECEWISE_KNOTS: [(f64, f64); 4] = [(0.0, 0.0), (1.0 / 3.0, 1.0), (2.0 / 3.0, -1.0), (1.0, 0.0)];

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let i = knots.partition_point(|k| k.0 <= x);
    if i == 0 {
        return knots[0].1;
    }
    if i == knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (x0, y0) = knots[i - 1];
    let (x1, y1) = knots[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Responses observed on a design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub design: DesignGrid,
    pub responses: Vec<f64>,
}

impl Sample {
    pub fn new(design: DesignGrid, responses: Vec<f64>) -> Result<Self> {
        if design.len() != responses.len() {
            return invalid(format!("{} responses for {} design points", responses.len(), design.len()));
        }
        Ok(Self { design, responses })
    }
}

/// `g(x_(k))` at every design point.
pub fn signal(g: &RegressionFunction, design: &DesignGrid) -> Vec<f64> {
    design.points().iter().map(|&x| g.evaluate(x)).collect()
}

/// `Y_k = g(x_(k)) + ε_k` with `ε` drawn from `model` under `seed`.
pub fn simulate_sample(g: &RegressionFunction, design: &DesignGrid, model: &ErrorModel, seed: u64) -> Result<Sample> {
    let errors = crate::nqd_errors::sample_errors(model, design.len(), seed)?;
    let responses = signal(g, design).into_iter().zip(errors).map(|(s, e)| s + e).collect();
    Ok(Sample { design: design.clone(), responses })
}

/// `Σ_k ω_k y_k` for each weight row.
pub fn smooth(weights: &WeightMatrix, values: &[f64]) -> Result<Vec<f64>> {
    if values.len() != weights.n() {
        return invalid(format!("{} values for {} weight columns", values.len(), weights.n()));
    }
    Ok(weights.rows().map(|row| dot(row, values)).collect())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The estimate `g_n(x_j)` at every evaluation point.
pub fn estimate(sample: &Sample, weights: &WeightMatrix) -> Result<Vec<f64>> {
    if sample.design.points() != weights.design().points() {
        return invalid("sample design does not match the weight matrix design");
    }
    smooth(weights, &sample.responses)
}

/// Exact deterministic bias `Σ_k ω_k(x_j) g(x_(k)) − g(x_j)`, evaluated as
/// `Σ_k ω_k (g(x_(k)) − g(x_j)) + g(x_j)(Σ_k ω_k − 1)` so that a constant `g`
/// under rows summing to 1 gives exactly zero.
pub fn bias(g: &RegressionFunction, weights: &WeightMatrix) -> Result<Vec<f64>> {
    let sig = signal(g, weights.design());
    Ok(weights
        .rows()
        .zip(weights.eval_points())
        .map(|(row, &x)| {
            let gx = g.evaluate(x);
            let local = stats::sum(row.iter().zip(&sig).map(|(w, s)| w * (s - gx)));
            let mass = stats::sum(row.iter().copied()) - 1.0;
            local + gx * mass
        })
        .collect())
}

/// `Σ_k ω_k²` per row; equals the variance of the noise term under
/// independent unit-variance errors.
pub fn squared_weight_sums(weights: &WeightMatrix) -> Vec<f64> {
    weights.rows().map(|r| stats::sum(r.iter().map(|w| w * w))).collect()
}
