//! Zero-mean, identically distributed, pairwise NQD error vectors and an
//! empirical test of negative quadrant dependence.
//!
//! Three generator families are available:
//!
//! * `iid` – independent draws from a unit-variance marginal (normal,
//!   centred exponential, centred uniform);
//! * `neg_ma1` – `ε_k = (Z_k − θ Z_{k+1}) / √(1 + θ²)`, a Gaussian moving
//!   average with lag-one correlation `−θ/(1+θ²)` and none beyond;
//! * `gauss_negcorr` – a Gaussian vector with a unit-diagonal covariance whose
//!   off-diagonal entries are all non-positive.
//!
//! Jointly Gaussian coordinates with non-positive correlation are pairwise
//! NQD; [`check_nqd`] exists to falsify that claim empirically rather than
//! trust it. `gauss_corr` accepts any covariance and is only meant as a
//! positively dependent negative control.
//!
//! Every draw is a pure function of `(model, n, seed)`; see [`crate::rng`].

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::rng::{replicate_seed, rng_for};
use crate::stats;

/// Relative tolerance of the pivoted factorisation.
pub const FACTOR_TOLERANCE: f64 = 1e-10;

/// Minimum replicate count for the Monte Carlo dependence checks.
pub const MIN_CHECK_SAMPLES: usize = 10_000;

/// Quantile levels used for the default quadrant grid.
pub const DEFAULT_QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

/// Unit-variance, zero-mean marginal law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Normal,
    /// `Exp(1) − 1`.
    CenteredExponential,
    /// Uniform on `[−√3, √3]`.
    UniformCentered,
}

impl Marginal {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Marginal::Normal),
            "centered-exponential" | "centered_exponential" => Ok(Marginal::CenteredExponential),
            "uniform-centered" | "uniform_centered" => Ok(Marginal::UniformCentered),
            other => invalid(format!("unknown marginal '{other}'")),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Marginal::Normal => "normal",
            Marginal::CenteredExponential => "centered-exponential",
            Marginal::UniformCentered => "uniform-centered",
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Normal => rng.sample(StandardNormal),
            Marginal::CenteredExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            Marginal::UniformCentered => {
                let u: f64 = rng.random();
                3f64.sqrt() * (2.0 * u - 1.0)
            }
        }
    }

    /// Quantile of the unit-variance law at level `q ∈ (0, 1)`.
    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            Marginal::Normal => Normal::standard().inverse_cdf(q),
            Marginal::CenteredExponential => -(1.0 - q).ln() - 1.0,
            Marginal::UniformCentered => 3f64.sqrt() * (2.0 * q - 1.0),
        }
    }
}

/// Unit-diagonal covariance structure for the Gaussian families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
pub enum CovarianceSpec {
    /// A fixed matrix; the sample size must equal its dimension.
    Explicit { matrix: Vec<Vec<f64>> },
    /// Correlation `rho` at lag one, zero elsewhere.
    Banded { rho: f64 },
    /// Correlation `rho` between every pair.
    Equicorrelated { rho: f64 },
}

impl CovarianceSpec {
    pub fn dimension(&self) -> Option<usize> {
        match self {
            CovarianceSpec::Explicit { matrix } => Some(matrix.len()),
            _ => None,
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            CovarianceSpec::Explicit { matrix } => matrix[i][j],
            CovarianceSpec::Banded { rho } => match i.abs_diff(j) {
                0 => 1.0,
                1 => *rho,
                _ => 0.0,
            },
            CovarianceSpec::Equicorrelated { rho } => {
                if i == j {
                    1.0
                } else {
                    *rho
                }
            }
        }
    }

    fn max_off_diagonal(&self) -> f64 {
        match self {
            CovarianceSpec::Explicit { matrix } => {
                let mut m = f64::NEG_INFINITY;
                for (i, row) in matrix.iter().enumerate() {
                    for (j, &v) in row.iter().enumerate() {
                        if i != j {
                            m = m.max(v);
                        }
                    }
                }
                m
            }
            CovarianceSpec::Banded { rho } | CovarianceSpec::Equicorrelated { rho } => *rho,
        }
    }

    fn validate(&self) -> Result<()> {
        if let CovarianceSpec::Explicit { matrix } = self {
            let n = matrix.len();
            if n == 0 {
                return invalid("covariance matrix is empty");
            }
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != n {
                    return invalid("covariance matrix must be square");
                }
                for (j, &v) in row.iter().enumerate() {
                    if !v.is_finite() {
                        return invalid("covariance matrix has non-finite entries");
                    }
                    if (v - matrix[j][i]).abs() > 1e-12 {
                        return invalid(format!("covariance not symmetric at ({i}, {j})"));
                    }
                }
                if (row[i] - 1.0).abs() > 1e-12 {
                    return invalid(format!("covariance diagonal must be 1, got {} at {i}", row[i]));
                }
            }
        } else if self.max_off_diagonal().is_nan() || self.max_off_diagonal().abs() > 1.0 {
            return invalid("correlation must lie in [-1, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    Iid { marginal: Marginal },
    NegMa1 { theta: f64 },
    GaussNegcorr { covariance: CovarianceSpec },
    /// Unrestricted Gaussian; negative control only.
    GaussCorr { covariance: CovarianceSpec },
}

/// A sampler of zero-mean identically distributed error vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub kind: ErrorKind,
    /// Common marginal variance; 0 gives the degenerate all-zero model.
    pub marginal_variance: f64,
    /// Law of the dominating variable `X` with `P(|ε| ≥ t) ≤ P(|X| ≥ t)`.
    /// With identical marginals this is the marginal itself.
    pub dominating_tail: Marginal,
}

impl ErrorModel {
    pub fn iid(marginal: Marginal, marginal_variance: f64) -> Result<Self> {
        check_variance(marginal_variance)?;
        Ok(Self { kind: ErrorKind::Iid { marginal }, marginal_variance, dominating_tail: marginal })
    }

    /// `θ ∈ (0, 1]`.
    pub fn neg_ma1(theta: f64, marginal_variance: f64) -> Result<Self> {
        check_variance(marginal_variance)?;
        if !(theta > 0.0 && theta <= 1.0) {
            return invalid(format!("theta must lie in (0, 1], got {theta}"));
        }
        Ok(Self { kind: ErrorKind::NegMa1 { theta }, marginal_variance, dominating_tail: Marginal::Normal })
    }

    /// Gaussian vector whose covariance has non-positive off-diagonal entries.
    pub fn gauss_negcorr(covariance: CovarianceSpec, marginal_variance: f64) -> Result<Self> {
        check_variance(marginal_variance)?;
        covariance.validate()?;
        if covariance.max_off_diagonal() > 0.0 {
            return invalid("gauss_negcorr covariance must have non-positive off-diagonal entries");
        }
        Ok(Self {
            kind: ErrorKind::GaussNegcorr { covariance },
            marginal_variance,
            dominating_tail: Marginal::Normal,
        })
    }

    /// Gaussian vector with arbitrary correlation; not NQD in general.
    pub fn gauss_corr(covariance: CovarianceSpec, marginal_variance: f64) -> Result<Self> {
        check_variance(marginal_variance)?;
        covariance.validate()?;
        Ok(Self { kind: ErrorKind::GaussCorr { covariance }, marginal_variance, dominating_tail: Marginal::Normal })
    }

    /// The all-zero model.
    pub fn degenerate() -> Self {
        Self {
            kind: ErrorKind::Iid { marginal: Marginal::Normal },
            marginal_variance: 0.0,
            dominating_tail: Marginal::Normal,
        }
    }

    /// Parses `iid:<marginal>`, `neg_ma1:<θ>`, `gauss_negcorr:<banded|equi>:<ρ>`
    /// or `gauss_corr:<banded|equi>:<ρ>`, with unit variance.
    pub fn parse(descriptor: &str) -> Result<Self> {
        let parts: Vec<&str> = descriptor.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::InvalidArgument(format!("bad number '{s}' in model '{descriptor}'")))
        };
        let structure = |name: &str, rho: f64| -> Result<CovarianceSpec> {
            match name {
                "banded" => Ok(CovarianceSpec::Banded { rho }),
                "equi" | "equicorrelated" => Ok(CovarianceSpec::Equicorrelated { rho }),
                other => invalid(format!("unknown covariance structure '{other}'")),
            }
        };
        match parts.as_slice() {
            ["iid"] => Self::iid(Marginal::Normal, 1.0),
            ["iid", m] => Self::iid(Marginal::parse(m)?, 1.0),
            ["neg_ma1", t] => Self::neg_ma1(num(t)?, 1.0),
            ["gauss_negcorr", s, r] => Self::gauss_negcorr(structure(s, num(r)?)?, 1.0),
            ["gauss_corr", s, r] => Self::gauss_corr(structure(s, num(r)?)?, 1.0),
            _ => invalid(format!("unrecognised error model '{descriptor}'")),
        }
    }

    pub fn with_variance(mut self, marginal_variance: f64) -> Result<Self> {
        check_variance(marginal_variance)?;
        self.marginal_variance = marginal_variance;
        Ok(self)
    }

    /// Unit-variance marginal law of every coordinate.
    pub fn marginal(&self) -> Marginal {
        match self.kind {
            ErrorKind::Iid { marginal } => marginal,
            _ => Marginal::Normal,
        }
    }

    /// Fixed dimension imposed by an explicit covariance, if any.
    pub fn fixed_dimension(&self) -> Option<usize> {
        match &self.kind {
            ErrorKind::GaussNegcorr { covariance } | ErrorKind::GaussCorr { covariance } => covariance.dimension(),
            _ => None,
        }
    }

    /// Declared covariance `Cov(ε_i, ε_j)` for vectors of length `n`.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let v = self.marginal_variance;
        match &self.kind {
            ErrorKind::Iid { .. } => {
                if i == j {
                    v
                } else {
                    0.0
                }
            }
            ErrorKind::NegMa1 { theta } => match i.abs_diff(j) {
                0 => v,
                1 => -v * theta / (1.0 + theta * theta),
                _ => 0.0,
            },
            ErrorKind::GaussNegcorr { covariance } | ErrorKind::GaussCorr { covariance } => v * covariance.entry(i, j),
        }
    }

    /// `Σ_i E ε_i²` for a vector of length `n`.
    pub fn second_moment_sum(&self, n: usize) -> f64 {
        stats::sum((0..n).map(|i| self.covariance(i, i)))
    }

    /// `Var(Σ_k w_k ε_k) = wᵀ Σ w` from the declared covariance.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = w.len();
        let mut acc = stats::CompensatedSum::new();
        match &self.kind {
            ErrorKind::Iid { .. } | ErrorKind::NegMa1 { .. } => {
                for i in 0..n {
                    acc.add(w[i] * w[i] * self.covariance(i, i));
                    if i + 1 < n {
                        acc.add(2.0 * w[i] * w[i + 1] * self.covariance(i, i + 1));
                    }
                }
            }
            _ => {
                for i in 0..n {
                    if w[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        acc.add(w[i] * w[j] * self.covariance(i, j));
                    }
                }
            }
        }
        acc.total()
    }

    /// Default quadrant grid: marginal quantiles at
    /// [`DEFAULT_QUANTILE_LEVELS`], in error units.
    pub fn default_quadrant_grid(&self) -> Vec<f64> {
        let sd = self.marginal_variance.sqrt();
        DEFAULT_QUANTILE_LEVELS.iter().map(|&q| sd * self.marginal().quantile(q)).collect()
    }

    /// Prepares a sampler for vectors of length `n`. Gaussian families are
    /// factorised here once.
    pub fn sampler(&self, n: usize) -> Result<ErrorSampler> {
        if n == 0 {
            return invalid("error vector length must be positive");
        }
        if let Some(d) = self.fixed_dimension() {
            if d != n {
                return invalid(format!("covariance dimension {d} does not match n = {n}"));
            }
        }
        let engine = match &self.kind {
            ErrorKind::Iid { marginal } => Engine::Iid(*marginal),
            ErrorKind::NegMa1 { theta } => Engine::Ma1 { theta: *theta, norm: (1.0 + theta * theta).sqrt() },
            ErrorKind::GaussNegcorr { covariance } | ErrorKind::GaussCorr { covariance } => {
                let matrix: Vec<f64> = (0..n * n).map(|k| covariance.entry(k / n, k % n)).collect();
                Engine::Gauss(PivotedCholesky::factor(&matrix, n)?)
            }
        };
        Ok(ErrorSampler { n, scale: self.marginal_variance.sqrt(), engine })
    }
}

fn check_variance(v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return invalid(format!("marginal variance must be finite and >= 0, got {v}"));
    }
    Ok(())
}

#[derive(Debug, Clone)]
enum Engine {
    Iid(Marginal),
    Ma1 { theta: f64, norm: f64 },
    Gauss(PivotedCholesky),
}

/// A model bound to a vector length, ready to draw.
#[derive(Debug, Clone)]
pub struct ErrorSampler {
    n: usize,
    scale: f64,
    engine: Engine,
}

impl ErrorSampler {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Draws one vector using the seed-stream contract.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.sample_into(seed, &mut out);
        out
    }

    pub fn sample_into(&self, seed: u64, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        let mut rng = rng_for(seed, self.n);
        self.unit_sample(&mut rng, out);
        for v in out.iter_mut() {
            *v *= self.scale;
        }
    }

    fn unit_sample<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.engine {
            Engine::Iid(m) => {
                for v in out.iter_mut() {
                    *v = m.sample(rng);
                }
            }
            Engine::Ma1 { theta, norm } => {
                let mut prev: f64 = rng.sample(StandardNormal);
                for v in out.iter_mut() {
                    let next: f64 = rng.sample(StandardNormal);
                    *v = (prev - theta * next) / norm;
                    prev = next;
                }
            }
            Engine::Gauss(f) => {
                let z: Vec<f64> = (0..f.rank).map(|_| rng.sample(StandardNormal)).collect();
                f.apply(&z, out);
            }
        }
    }
}

/// Draws one error vector of length `n`.
pub fn sample_errors(model: &ErrorModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(model.sampler(n)?.sample(seed))
}

/// `Σ = P L Lᵀ Pᵀ` with diagonal pivoting; accepts rank-deficient positive
/// semidefinite matrices.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    n: usize,
    rank: usize,
    /// `perm[i]` is the original index of pivoted row `i`.
    perm: Vec<usize>,
    /// Row-major `n × n`; only the first `rank` columns are used.
    lower: Vec<f64>,
}

impl PivotedCholesky {
    pub fn factor(matrix: &[f64], n: usize) -> Result<Self> {
        assert_eq!(matrix.len(), n * n);
        let mut a = matrix.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = (0..n).fold(0.0_f64, |m, i| m.max(a[i * n + i].abs())).max(f64::MIN_POSITIVE);
        let tol = FACTOR_TOLERANCE * scale;
        let mut rank = n;
        for k in 0..n {
            let (p, dmax) = (k..n).map(|i| (i, a[i * n + i])).fold((k, f64::NEG_INFINITY), |acc, (i, d)| {
                if d > acc.1 {
                    (i, d)
                } else {
                    acc
                }
            });
            if dmax <= tol {
                // Remaining Schur complement must vanish for a PSD input.
                for i in k..n {
                    for j in k..=i {
                        let v = a[i * n + j];
                        if (i == j && v < -tol) || (i != j && v.abs() > 1e2 * tol.max(1e-12)) {
                            return invalid(format!(
                                "covariance is not positive semidefinite (Schur residual {v:e} at step {k})"
                            ));
                        }
                    }
                }
                rank = k;
                break;
            }
            if p != k {
                swap_sym(&mut a, n, k, p);
                perm.swap(k, p);
            }
            let d = a[k * n + k].sqrt();
            a[k * n + k] = d;
            for i in k + 1..n {
                a[i * n + k] /= d;
            }
            for i in k + 1..n {
                a[k * n + i] = a[i * n + k];
            }
            for j in k + 1..n {
                let ljk = a[j * n + k];
                if ljk == 0.0 {
                    continue;
                }
                for i in k + 1..n {
                    a[i * n + j] -= a[i * n + k] * ljk;
                }
            }
            for i in k + 1..n {
                if a[i * n + i] < -tol {
                    return invalid(format!(
                        "covariance is not positive semidefinite (negative pivot {:e})",
                        a[i * n + i]
                    ));
                }
            }
        }
        let mut lower = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..(i + 1).min(rank) {
                lower[i * n + j] = a[i * n + j];
            }
        }
        Ok(Self { n, rank, perm, lower })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `out = P L z` for `z` of length `rank`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.lower[i * n..i * n + (i + 1).min(self.rank)];
            let v: f64 = row.iter().zip(z).map(|(l, z)| l * z).sum();
            out[self.perm[i]] = v;
        }
    }

    /// Reconstructs `P L Lᵀ Pᵀ`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..self.rank).map(|k| self.lower[i * n + k] * self.lower[j * n + k]).sum();
                out[self.perm[i] * n + self.perm[j]] = s;
            }
        }
        out
    }
}

/// Swaps rows and columns `k` and `p` of a dense symmetric matrix.
fn swap_sym(a: &mut [f64], n: usize, k: usize, p: usize) {
    for j in 0..n {
        a.swap(k * n + j, p * n + j);
    }
    for i in 0..n {
        a.swap(i * n + k, i * n + p);
    }
}

/// Empirical quadrant-dependence statistics for one `(pair, x, y)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadrantCell {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    /// `#{ε_i ≤ x, ε_j ≤ y}`.
    pub joint_count: u64,
    pub count_i: u64,
    pub count_j: u64,
}

impl QuadrantCell {
    /// `F̂_ij(x, y) − F̂_i(x) F̂_j(y)`.
    pub fn difference(&self, sample_size: usize) -> f64 {
        let m = sample_size as f64;
        self.joint_count as f64 / m - (self.count_i as f64 / m) * (self.count_j as f64 / m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NqdViolationReport {
    /// `max(0, max_cells F̂_ij − F̂_i F̂_j)`.
    pub max_violation: f64,
    /// Signed maximum over cells.
    pub max_difference: f64,
    pub pair_count: usize,
    pub sample_size: usize,
    pub grid: Vec<f64>,
    /// Sampling-noise allowance `3 √(log(#tests) / m)`.
    pub noise_band: f64,
    pub within_noise: bool,
    pub cells: Vec<QuadrantCell>,
}

impl NqdViolationReport {
    pub fn test_count(&self) -> usize {
        self.cells.len()
    }

    /// Recomputes the maximum difference from stored counts.
    pub fn recompute_max_difference(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.difference(self.sample_size))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn point_statistic(&self, i: usize, j: usize, x: f64, y: f64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.i == i && c.j == j && c.x == x && c.y == y)
            .map(|c| c.difference(self.sample_size))
    }
}

/// `3 √(log(tests) / m)`.
pub fn noise_band(tests: usize, sample_size: usize) -> f64 {
    3.0 * ((tests.max(2) as f64).ln() / sample_size as f64).sqrt()
}

fn validate_pairs(pairs: &[(usize, usize)]) -> Result<()> {
    if pairs.is_empty() {
        return invalid("at least one pair is required");
    }
    if let Some((i, _)) = pairs.iter().find(|(i, j)| i == j) {
        return invalid(format!("pair ({i}, {i}) repeats an index"));
    }
    Ok(())
}

/// Draws `sample_size` independent vectors and returns the requested
/// coordinates column by column. Replicate `r` uses seed `seed + r`.
pub fn draw_columns(model: &ErrorModel, indices: &[usize], sample_size: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = model
        .fixed_dimension()
        .unwrap_or_else(|| indices.iter().max().map_or(1, |m| m + 1));
    if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
        return invalid(format!("index {bad} out of range for dimension {n}"));
    }
    let sampler = model.sampler(n)?;
    let rows: Vec<Vec<f64>> = (0..sample_size)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |buf, r| {
                sampler.sample_into(replicate_seed(seed, r as u64), buf);
                indices.iter().map(|&i| buf[i]).collect()
            },
        )
        .collect();
    Ok((0..indices.len()).map(|c| rows.iter().map(|r| r[c]).collect()).collect())
}

/// Empirical NQD statistics from already drawn columns.
///
/// `columns[c]` holds the draws of variable `labels[c]`; pairs refer to labels.
pub fn empirical_nqd(
    labels: &[usize],
    columns: &[Vec<f64>],
    pairs: &[(usize, usize)],
    grid: &[f64],
) -> Result<NqdViolationReport> {
    validate_pairs(pairs)?;
    if grid.is_empty() {
        return invalid("quadrant grid must not be empty");
    }
    let m = columns.first().map_or(0, Vec::len);
    if m == 0 {
        return invalid("no samples");
    }
    let mut grid_sorted = grid.to_vec();
    grid_sorted.sort_by(f64::total_cmp);
    let g = grid_sorted.len();
    // bucket[r] = first grid index t with ε ≤ grid[t]; g means above all
    let bucket = |v: f64| grid_sorted.partition_point(|&t| t < v);
    let col = |label: usize| -> Result<&Vec<f64>> {
        labels
            .iter()
            .position(|&l| l == label)
            .map(|p| &columns[p])
            .ok_or_else(|| Error::InvalidArgument(format!("no samples for index {label}")))
    };

    let mut cells = Vec::with_capacity(pairs.len() * g * g);
    for &(i, j) in pairs {
        let (ci, cj) = (col(i)?, col(j)?);
        let mut hist = vec![0u64; (g + 1) * (g + 1)];
        for (&a, &b) in ci.iter().zip(cj) {
            hist[bucket(a) * (g + 1) + bucket(b)] += 1;
        }
        // cumulative counts: cum[s][t] = #{bucket_i <= s, bucket_j <= t}
        let mut cum = vec![0u64; g * g];
        for s in 0..g {
            for t in 0..g {
                let mut c = hist[s * (g + 1) + t];
                if s > 0 {
                    c += cum[(s - 1) * g + t];
                }
                if t > 0 {
                    c += cum[s * g + t - 1];
                }
                if s > 0 && t > 0 {
                    c -= cum[(s - 1) * g + t - 1];
                }
                cum[s * g + t] = c;
            }
        }
        let marg_i: Vec<u64> = (0..g).map(|s| ci.iter().filter(|&&v| bucket(v) <= s).count() as u64).collect();
        let marg_j: Vec<u64> = (0..g).map(|t| cj.iter().filter(|&&v| bucket(v) <= t).count() as u64).collect();
        for s in 0..g {
            for t in 0..g {
                cells.push(QuadrantCell {
                    i,
                    j,
                    x: grid_sorted[s],
                    y: grid_sorted[t],
                    joint_count: cum[s * g + t],
                    count_i: marg_i[s],
                    count_j: marg_j[t],
                });
            }
        }
    }
    let max_difference = cells.iter().map(|c| c.difference(m)).fold(f64::NEG_INFINITY, f64::max);
    let band = noise_band(cells.len(), m);
    Ok(NqdViolationReport {
        max_violation: max_difference.max(0.0),
        max_difference,
        pair_count: pairs.len(),
        sample_size: m,
        grid: grid_sorted,
        noise_band: band,
        within_noise: max_difference.max(0.0) <= band,
        cells,
    })
}

/// Monte Carlo test of the NQD inequality over every pair and every point
/// of `grid × grid`. `None` uses the model's default quantile grid.
pub fn check_nqd(
    model: &ErrorModel,
    pairs: &[(usize, usize)],
    sample_size: usize,
    grid: Option<&[f64]>,
    seed: u64,
) -> Result<NqdViolationReport> {
    validate_pairs(pairs)?;
    if sample_size < MIN_CHECK_SAMPLES {
        return invalid(format!("sample_size must be at least {MIN_CHECK_SAMPLES}"));
    }
    let mut labels: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
    labels.sort_unstable();
    labels.dedup();
    let columns = draw_columns(model, &labels, sample_size, seed)?;
    let default_grid;
    let grid = match grid {
        Some(g) => g,
        None => {
            default_grid = model.default_quadrant_grid();
            &default_grid
        }
    };
    empirical_nqd(&labels, &columns, pairs, grid)
}

/// Empirical `E(ε_i ε_j) − Ê ε_i · Ê ε_j`; non-positive for NQD pairs up to
/// Monte Carlo noise.
pub fn lemma21_product_check(model: &ErrorModel, pair: (usize, usize), sample_size: usize, seed: u64) -> Result<f64> {
    validate_pairs(&[pair])?;
    if sample_size < MIN_CHECK_SAMPLES {
        return invalid(format!("sample_size must be at least {MIN_CHECK_SAMPLES}"));
    }
    let cols = draw_columns(model, &[pair.0, pair.1], sample_size, seed)?;
    let m = sample_size as f64;
    let mean_i = stats::sum(cols[0].iter().copied()) / m;
    let mean_j = stats::sum(cols[1].iter().copied()) / m;
    let prod = stats::sum(cols[0].iter().zip(&cols[1]).map(|(a, b)| a * b)) / m;
    Ok(prod - mean_i * mean_j)
}

/// Adjacent pairs `(k, k+1)` for `k < n − 1`.
pub fn adjacent_pairs(n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|k| (k - 1, k)).collect()
}

/// Every pair `(i, j)` with `i < j < n`.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}
