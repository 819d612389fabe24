//! Smoothing kernels with declared regularity metadata, plus a numeric
//! falsification test of the boundedness, Hölder/Lipschitz and normalisation
//! hypotheses placed on them.
//!
//! A passing check never proves a hypothesis: the Lipschitz test samples
//! difference quotients on a finite grid and can only detect violations.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::stats::simpson;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Truncation radius for the Gaussian kernel; tail mass beyond it is ~1.2e-15.
pub const GAUSSIAN_TRUNCATION: f64 = 8.0;

/// Minimum Simpson panel count used for kernel integrals.
pub const QUADRATURE_PANELS: usize = 200_000;

/// Absolute tolerance for integral checks.
pub const INTEGRAL_TOLERANCE: f64 = 1e-6;

/// Extent of a kernel for numeric purposes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "radius", rename_all = "snake_case")]
pub enum Support {
    /// `K(u) = 0` for `|u| > radius`.
    Compact(f64),
    /// Unbounded support, integrated over `[-radius, radius]`.
    Truncated(f64),
}

impl Support {
    pub fn radius(&self) -> f64 {
        match *self {
            Support::Compact(r) | Support::Truncated(r) => r,
        }
    }
}

/// Declared regularity constants of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMeta {
    pub sup_bound: f64,
    pub lipschitz_alpha: f64,
    pub lipschitz_const: f64,
    pub abs_integral: f64,
    pub integral: f64,
    pub support: Support,
}

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct KernelSpec {
    name: String,
    func: KernelFn,
    meta: KernelMeta,
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelSpec")
            .field("name", &self.name)
            .field("meta", &self.meta)
            .finish()
    }
}

impl KernelSpec {
    /// Wraps an arbitrary kernel. The declared order must lie in `(0, 1]`;
    /// a larger order would force the kernel to be constant.
    pub fn new<F>(name: impl Into<String>, func: F, meta: KernelMeta) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(meta.lipschitz_alpha > 0.0 && meta.lipschitz_alpha <= 1.0) {
            return invalid(format!(
                "lipschitz_alpha must lie in (0, 1], got {}",
                meta.lipschitz_alpha
            ));
        }
        if !(meta.sup_bound > 0.0 && meta.lipschitz_const > 0.0 && meta.abs_integral > 0.0) {
            return invalid("sup_bound, lipschitz_const and abs_integral must be positive");
        }
        if meta.support.radius().is_nan() || meta.support.radius() <= 0.0 {
            return invalid("support radius must be positive");
        }
        Ok(Self { name: name.into(), func: Arc::new(func), meta })
    }

    /// Looks up a built-in kernel by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(gaussian_kernel()),
            "epanechnikov" => Ok(epanechnikov_kernel()),
            "signed_gaussian" => Ok(signed_gaussian_kernel()),
            other => invalid(format!("unknown kernel '{other}'")),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn meta(&self) -> &KernelMeta {
        &self.meta
    }

    #[inline]
    pub fn evaluate(&self, u: f64) -> f64 {
        (self.func)(u)
    }

    /// Returns a copy with replaced metadata; used to build deliberately
    /// mis-declared kernels for negative controls.
    pub fn with_meta(&self, meta: KernelMeta) -> Self {
        Self { name: self.name.clone(), func: Arc::clone(&self.func), meta }
    }

    /// Numeric `∫K` over the support window.
    pub fn integrate(&self) -> f64 {
        let r = self.meta.support.radius();
        simpson(|u| self.evaluate(u), -r, r, QUADRATURE_PANELS)
    }

    /// Numeric `∫|K|` over the support window.
    pub fn integrate_abs(&self) -> f64 {
        let r = self.meta.support.radius();
        simpson(|u| self.evaluate(u).abs(), -r, r, QUADRATURE_PANELS)
    }
}

/// Standard normal density.
pub fn gaussian_kernel() -> KernelSpec {
    KernelSpec {
        name: "gaussian".into(),
        func: Arc::new(|u: f64| INV_SQRT_2PI * (-0.5 * u * u).exp()),
        meta: KernelMeta {
            sup_bound: INV_SQRT_2PI,
            lipschitz_alpha: 1.0,
            // max |φ'| = φ(1)
            lipschitz_const: INV_SQRT_2PI * (-0.5f64).exp(),
            abs_integral: 1.0,
            integral: 1.0,
            support: Support::Truncated(GAUSSIAN_TRUNCATION),
        },
    }
}

/// `0.75 (1 − u²)` on `[-1, 1]`.
pub fn epanechnikov_kernel() -> KernelSpec {
    KernelSpec {
        name: "epanechnikov".into(),
        func: Arc::new(|u: f64| if u.abs() <= 1.0 { 0.75 * (1.0 - u * u) } else { 0.0 }),
        meta: KernelMeta {
            sup_bound: 0.75,
            lipschitz_alpha: 1.0,
            lipschitz_const: 1.5,
            abs_integral: 1.0,
            integral: 1.0,
            support: Support::Compact(1.0),
        },
    }
}

/// `(2 − u²) φ(u)`: integrates to 1 but changes sign at `|u| = √2`,
/// so `∫|K| > ∫K`.
pub fn signed_gaussian_kernel() -> KernelSpec {
    let t = std::f64::consts::SQRT_2;
    let phi_t = INV_SQRT_2PI * (-1.0f64).exp();
    let upper_tail = 0.5 * erfc(t / std::f64::consts::SQRT_2);
    // ∫_{|u|>√2} (u² − 2) φ(u) du = 2 (√2 φ(√2) − Q(√2))
    let negative_mass = 2.0 * (t * phi_t - upper_tail);
    KernelSpec {
        name: "signed_gaussian".into(),
        func: Arc::new(|u: f64| (2.0 - u * u) * INV_SQRT_2PI * (-0.5 * u * u).exp()),
        meta: KernelMeta {
            sup_bound: 2.0 * INV_SQRT_2PI,
            lipschitz_alpha: 1.0,
            // max |u (4 − u²) φ(u)| ≈ 0.7766
            lipschitz_const: 0.78,
            abs_integral: 1.0 + 2.0 * negative_mass,
            integral: 1.0,
            support: Support::Truncated(GAUSSIAN_TRUNCATION + 2.0),
        },
    }
}

/// One line of a kernel regularity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelCheck {
    pub condition: &'static str,
    /// Worst observed value of the checked quantity.
    pub observed: f64,
    /// Declared or required value the observation is compared with.
    pub declared: f64,
    /// Worst violation magnitude; `<= 0` means no violation was seen.
    pub violation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelConditionReport {
    pub kernel: String,
    pub grid_resolution: usize,
    pub checks: Vec<KernelCheck>,
}

impl KernelConditionReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, condition: &str) -> Option<&KernelCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Numeric falsification test of boundedness, the declared Hölder/Lipschitz
/// order, integrability of `|K|` and `∫K = 1`.
///
/// The kernel is sampled on `grid_resolution + 1` equispaced abscissae over a
/// window slightly wider than its support. Difference quotients are taken at
/// dyadic lags so that Hölder orders below 1 are also probed.
pub fn check_condition_a1_a3(kernel: &KernelSpec, grid_resolution: usize) -> Result<KernelConditionReport> {
    if grid_resolution < 100 {
        return invalid("grid_resolution must be at least 100");
    }
    let meta = kernel.meta;
    let half_width = 1.25 * meta.support.radius() + 0.5;
    let step = 2.0 * half_width / grid_resolution as f64;
    let abscissae: Vec<f64> = (0..=grid_resolution).map(|i| -half_width + i as f64 * step).collect();
    let mut values = Vec::with_capacity(abscissae.len());
    for &u in &abscissae {
        let v = kernel.evaluate(u);
        if !v.is_finite() {
            return Err(Error::Evaluation { abscissa: u, value: v });
        }
        values.push(v);
    }

    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let bound_violation = max_abs - meta.sup_bound;
    let bound = KernelCheck {
        condition: "A1_bounded",
        observed: max_abs,
        declared: meta.sup_bound,
        violation: bound_violation,
        pass: bound_violation <= 1e-12 * meta.sup_bound.max(1.0),
    };

    let mut worst_ratio = 0.0_f64;
    let mut lag = 1;
    while lag <= grid_resolution / 2 {
        let denom = (lag as f64 * step).powf(meta.lipschitz_alpha);
        for i in 0..values.len() - lag {
            let ratio = (values[i + lag] - values[i]).abs() / denom;
            worst_ratio = worst_ratio.max(ratio);
        }
        lag *= 2;
    }
    let lipschitz = KernelCheck {
        condition: "A1_lipschitz",
        observed: worst_ratio,
        declared: meta.lipschitz_const,
        violation: worst_ratio - meta.lipschitz_const,
        pass: worst_ratio <= meta.lipschitz_const * (1.0 + 1e-9),
    };

    let panels = QUADRATURE_PANELS.max(grid_resolution);
    let r = meta.support.radius();
    let abs_int = simpson(|u| kernel.evaluate(u).abs(), -r, r, panels);
    let abs_gap = (abs_int - meta.abs_integral).abs();
    let abs_integrable = KernelCheck {
        condition: "A1_abs_integral",
        observed: abs_int,
        declared: meta.abs_integral,
        violation: abs_gap - INTEGRAL_TOLERANCE,
        pass: abs_int.is_finite() && abs_gap <= INTEGRAL_TOLERANCE,
    };

    let int = simpson(|u| kernel.evaluate(u), -r, r, panels);
    let meta_gap = (int - meta.integral).abs();
    let integral_meta = KernelCheck {
        condition: "integral_metadata",
        observed: int,
        declared: meta.integral,
        violation: meta_gap - INTEGRAL_TOLERANCE,
        pass: meta_gap <= INTEGRAL_TOLERANCE,
    };
    let unit_gap = (int - 1.0).abs();
    let unit = KernelCheck {
        condition: "A3_unit_integral",
        observed: int,
        declared: 1.0,
        violation: unit_gap - INTEGRAL_TOLERANCE,
        pass: unit_gap <= INTEGRAL_TOLERANCE,
    };

    Ok(KernelConditionReport {
        kernel: kernel.name.clone(),
        grid_resolution,
        checks: vec![bound, lipschitz, abs_integrable, integral_meta, unit],
    })
}
