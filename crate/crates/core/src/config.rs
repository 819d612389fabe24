//! Experiment configuration files: flat TOML with dotted keys.
//!
//! ```toml
//! theorem = "T31"
//! g = "sine2pi"
//! ladder = [50, 200, 800]
//! replicates = 2000
//! p = 2.0
//! seed = 20240601
//! model.kind = "neg_ma1"
//! model.theta = 0.6
//! scheme.kind = "nn"
//! scheme.k_exp = 0.6
//! eval.x = 0.5
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimator::RegressionFunction;
use crate::experiments::{EvalTarget, ExperimentConfig, SchemeConfig, ValidationSettings};
use crate::nqd_errors::{CovarianceSpec, ErrorModel, Marginal};
use crate::lemma_suite::UNIFORM_GRID_POINTS;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    theorem: String,
    g: String,
    model: RawModel,
    scheme: RawScheme,
    ladder: Vec<usize>,
    replicates: usize,
    p: f64,
    s: Option<f64>,
    eval: RawEval,
    epsilon: Option<f64>,
    seed: u64,
    weight_scale: Option<f64>,
    #[serde(default)]
    validation: RawValidation,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: String,
    variance: Option<f64>,
    marginal: Option<String>,
    theta: Option<f64>,
    structure: Option<String>,
    rho: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    kind: String,
    k_exp: Option<f64>,
    k_scale: Option<f64>,
    kernel: Option<String>,
    h_exp: Option<f64>,
    h_scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    x: Option<f64>,
    tau: Option<f64>,
    points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawValidation {
    ladder: Option<Vec<usize>>,
    a: Option<f64>,
    tolerance: Option<f64>,
    bound: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| config_err(format!("missing field `{key}`")))
}

fn reclassify(e: Error, key: &str) -> Error {
    match e {
        Error::InvalidArgument(m) | Error::Config(m) => config_err(format!("{key}: {m}")),
        other => other,
    }
}

fn build_model(raw: RawModel) -> Result<ErrorModel> {
    let variance = raw.variance.unwrap_or(1.0);
    let covariance = |raw: &RawModel| -> Result<CovarianceSpec> {
        if let Some(matrix) = &raw.matrix {
            return Ok(CovarianceSpec::Explicit { matrix: matrix.clone() });
        }
        let rho = required(raw.rho, "model.rho")?;
        match required(raw.structure.as_deref(), "model.structure")? {
            "banded" => Ok(CovarianceSpec::Banded { rho }),
            "equi" | "equicorrelated" => Ok(CovarianceSpec::Equicorrelated { rho }),
            other => Err(config_err(format!("model.structure: unknown structure '{other}'"))),
        }
    };
    let model = match raw.kind.as_str() {
        "iid" => {
            let marginal = match raw.marginal.as_deref() {
                Some(m) => Marginal::parse(m),
                None => Ok(Marginal::Normal),
            };
            ErrorModel::iid(marginal.map_err(|e| reclassify(e, "model.marginal"))?, variance)
        }
        "neg_ma1" => ErrorModel::neg_ma1(required(raw.theta, "model.theta")?, variance),
        "gauss_negcorr" => ErrorModel::gauss_negcorr(covariance(&raw)?, variance),
        "gauss_corr" => ErrorModel::gauss_corr(covariance(&raw)?, variance),
        "degenerate" => Ok(ErrorModel::degenerate()),
        other => return Err(config_err(format!("model.kind: unknown error model '{other}'"))),
    };
    model.map_err(|e| reclassify(e, "model"))
}

fn build_scheme(raw: RawScheme) -> Result<SchemeConfig> {
    match raw.kind.as_str() {
        "nn" => Ok(SchemeConfig::Nn {
            k_scale: raw.k_scale.unwrap_or(1.0),
            k_exp: required(raw.k_exp, "scheme.k_exp")?,
        }),
        "pc" => Ok(SchemeConfig::Pc {
            kernel: required(raw.kernel, "scheme.kernel")?,
            h_scale: raw.h_scale.unwrap_or(1.0),
            h_exp: required(raw.h_exp, "scheme.h_exp")?,
        }),
        other => Err(config_err(format!("scheme.kind: expected \"nn\" or \"pc\", got '{other}'"))),
    }
}

fn build_eval(raw: RawEval) -> Result<EvalTarget> {
    match (raw.x, raw.tau) {
        (Some(x), None) if raw.points.is_none() => Ok(EvalTarget::Point { x }),
        (None, Some(tau)) => Ok(EvalTarget::Interval { tau, points: raw.points.unwrap_or(UNIFORM_GRID_POINTS) }),
        (Some(_), None) => Err(config_err("eval.points applies to interval evaluation only")),
        (Some(_), Some(_)) => Err(config_err("eval: give either eval.x or eval.tau, not both")),
        (None, None) => Err(config_err("missing field `eval.x` or `eval.tau`")),
    }
}

/// Parses and validates a configuration document.
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end().to_string()))?;
    let defaults = ValidationSettings::default();
    let config = ExperimentConfig {
        theorem_id: raw.theorem.parse()?,
        g: RegressionFunction::parse(&raw.g).map_err(|e| reclassify(e, "g"))?,
        model: build_model(raw.model)?,
        scheme: build_scheme(raw.scheme)?,
        weight_scale: raw.weight_scale.unwrap_or(1.0),
        n_ladder: raw.ladder,
        replicates: raw.replicates,
        p: raw.p,
        s: raw.s,
        eval: build_eval(raw.eval)?,
        epsilon: raw.epsilon,
        base_seed: raw.seed,
        validation: ValidationSettings {
            ladder: raw.validation.ladder.unwrap_or(defaults.ladder),
            a: raw.validation.a.unwrap_or(defaults.a),
            tolerance: raw.validation.tolerance.unwrap_or(defaults.tolerance),
            bound: raw.validation.bound.unwrap_or(defaults.bound),
        },
    };
    config.validate()?;
    Ok(config)
}

pub fn load_experiment_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    parse_experiment_config(&text)
}

/// Renders `config` in the file format accepted by [`parse_experiment_config`].
pub fn to_toml(config: &ExperimentConfig) -> String {
    let mut lines = vec![
        format!("theorem = \"{}\"", config.theorem_id),
        format!("g = \"{}\"", regression_descriptor(&config.g)),
        format!("ladder = {:?}", config.n_ladder),
        format!("replicates = {}", config.replicates),
        format!("p = {:?}", config.p),
    ];
    if let Some(s) = config.s {
        lines.push(format!("s = {s:?}"));
    }
    if let Some(e) = config.epsilon {
        lines.push(format!("epsilon = {e:?}"));
    }
    lines.push(format!("seed = {}", config.base_seed));
    if config.weight_scale != 1.0 {
        lines.push(format!("weight_scale = {:?}", config.weight_scale));
    }
    let m = &config.model;
    use crate::nqd_errors::ErrorKind;
    let covariance_lines = |c: &CovarianceSpec| match c {
        CovarianceSpec::Banded { rho } => vec!["model.structure = \"banded\"".to_string(), format!("model.rho = {rho:?}")],
        CovarianceSpec::Equicorrelated { rho } => vec!["model.structure = \"equi\"".to_string(), format!("model.rho = {rho:?}")],
        CovarianceSpec::Explicit { matrix } => vec![format!("model.matrix = {matrix:?}")],
    };
    match &m.kind {
        _ if m.marginal_variance == 0.0 => lines.push("model.kind = \"degenerate\"".into()),
        ErrorKind::Iid { marginal } => {
            lines.push("model.kind = \"iid\"".into());
            lines.push(format!("model.marginal = \"{}\"", marginal.as_str()));
        }
        ErrorKind::NegMa1 { theta } => {
            lines.push("model.kind = \"neg_ma1\"".into());
            lines.push(format!("model.theta = {theta:?}"));
        }
        ErrorKind::GaussNegcorr { covariance } => {
            lines.push("model.kind = \"gauss_negcorr\"".into());
            lines.extend(covariance_lines(covariance));
        }
        ErrorKind::GaussCorr { covariance } => {
            lines.push("model.kind = \"gauss_corr\"".into());
            lines.extend(covariance_lines(covariance));
        }
    }
    if m.marginal_variance != 0.0 && m.marginal_variance != 1.0 {
        lines.push(format!("model.variance = {:?}", m.marginal_variance));
    }
    match &config.scheme {
        SchemeConfig::Nn { k_scale, k_exp } => {
            lines.push("scheme.kind = \"nn\"".into());
            lines.push(format!("scheme.k_scale = {k_scale:?}"));
            lines.push(format!("scheme.k_exp = {k_exp:?}"));
        }
        SchemeConfig::Pc { kernel, h_scale, h_exp } => {
            lines.push("scheme.kind = \"pc\"".into());
            lines.push(format!("scheme.kernel = \"{kernel}\""));
            lines.push(format!("scheme.h_scale = {h_scale:?}"));
            lines.push(format!("scheme.h_exp = {h_exp:?}"));
        }
    }
    match config.eval {
        EvalTarget::Point { x } => lines.push(format!("eval.x = {x:?}")),
        EvalTarget::Interval { tau, points } => {
            lines.push(format!("eval.tau = {tau:?}"));
            lines.push(format!("eval.points = {points}"));
        }
    }
    let v = &config.validation;
    lines.push(format!("validation.ladder = {:?}", v.ladder));
    lines.push(format!("validation.a = {:?}", v.a));
    lines.push(format!("validation.tolerance = {:?}", v.tolerance));
    lines.push(format!("validation.bound = {:?}", v.bound));
    lines.join("\n") + "\n"
}

fn regression_descriptor(g: &RegressionFunction) -> String {
    match g {
        RegressionFunction::Constant { c } => format!("constant:{c:?}"),
        RegressionFunction::Sine2pi => "sine2pi".into(),
        RegressionFunction::PiecewiseLinear => "piecewise-linear".into(),
        RegressionFunction::Table { .. } => "table".into(),
    }
}
