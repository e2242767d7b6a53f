//! TOML experiment descriptions.
//!
//! ```toml
//! scheme = "qpsk"
//! snr_db = [-5, 0, 5, 10, 15, 20]
//! mode = "both"              # clm | lm-uniform | both
//! gamma = 1.0                # or "unconstrained"
//! metric = "identity"        # identity | true-h | [[a, b], [c, d]]
//! output = "out/qpsk"
//!
//! [channel]
//! eta = 0.9
//! theta = "pi/18"
//!
//! [grid]
//! n = 2500
//! bound = 8.0
//!
//! [solver]
//! max_iter = 3000
//! rate_tol = 1e-10
//! ```
//!
//! A `[sweep]` table with `eta` and `theta` lists replaces `[channel]` and
//! runs their cross product.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::channel::{Matrix2, Scheme};
use crate::dual::PowerBudget;
use crate::error::{Error, Result};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "clm")]
    Clm,
    #[serde(rename = "lm-uniform")]
    LmUniform,
    #[default]
    #[serde(rename = "both")]
    Both,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Clm => "clm",
            Mode::LmUniform => "lm-uniform",
            Mode::Both => "both",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clm" => Ok(Mode::Clm),
            "lm-uniform" => Ok(Mode::LmUniform),
            "both" => Ok(Mode::Both),
            _ => Err(Error::Config(format!(
                "unknown mode {s:?} (expected clm, lm-uniform or both)"
            ))),
        }
    }
}

/// The matrix `H_hat` used by the decoding metric.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "MetricRepr", into = "MetricRepr")]
pub enum MetricChoice {
    #[default]
    Identity,
    TrueChannel,
    Explicit(Matrix2),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MetricRepr {
    Named(String),
    Matrix(Matrix2),
}

impl TryFrom<MetricRepr> for MetricChoice {
    type Error = Error;

    fn try_from(repr: MetricRepr) -> Result<Self> {
        match repr {
            MetricRepr::Named(s) if s == "identity" => Ok(MetricChoice::Identity),
            MetricRepr::Named(s) if s == "true-h" => Ok(MetricChoice::TrueChannel),
            MetricRepr::Named(s) => Err(Error::Config(format!(
                "unknown metric {s:?} (expected identity, true-h or a 2x2 matrix)"
            ))),
            MetricRepr::Matrix(m) if m.iter().flatten().all(|v| v.is_finite()) => {
                Ok(MetricChoice::Explicit(m))
            }
            MetricRepr::Matrix(_) => {
                Err(Error::Config("metric matrix entries must be finite".into()))
            }
        }
    }
}

impl From<MetricChoice> for MetricRepr {
    fn from(m: MetricChoice) -> Self {
        match m {
            MetricChoice::Identity => MetricRepr::Named("identity".into()),
            MetricChoice::TrueChannel => MetricRepr::Named("true-h".into()),
            MetricChoice::Explicit(m) => MetricRepr::Matrix(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub eta: f64,
    pub theta: Angle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n: usize,
    pub bound: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n: 2500,
            bound: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub max_iter: usize,
    pub rate_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    pub record_trajectory: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            max_iter: cfg.max_iter,
            rate_tol: cfg.rate_tol,
            residual_tol: cfg.residual_tol,
            record_trajectory: cfg.record_trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eta: Vec<f64>,
    pub theta: Vec<Angle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scheme: Scheme,
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_gamma")]
    pub gamma: PowerBudget,
    #[serde(default)]
    pub metric: MetricChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_gamma() -> PowerBudget {
    PowerBudget::Limit(1.0)
}

/// Parses and validates an experiment description.
pub fn parse_experiment(text: &str) -> Result<ExperimentSpec> {
    let spec: ExperimentSpec =
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_owned()))?;
    spec.validate()?;
    Ok(spec)
}

fn field(name: &str, message: impl fmt::Display) -> Error {
    Error::Config(format!("field `{name}`: {message}"))
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(field("snr_db", "must list at least one value"));
        }
        if let Some(v) = self.snr_db.iter().find(|v| !v.is_finite()) {
            return Err(field("snr_db", format!("{v} is not finite")));
        }
        let side = self.grid.n.isqrt();
        if self.grid.n < 4 || side * side != self.grid.n {
            return Err(field(
                "grid.n",
                format!("{} is not a perfect square >= 4", self.grid.n),
            ));
        }
        if !(self.grid.bound > 0.0 && self.grid.bound.is_finite()) {
            return Err(field(
                "grid.bound",
                format!("{} must be positive", self.grid.bound),
            ));
        }
        if self.solver.max_iter == 0 {
            return Err(field("solver.max_iter", "must be at least 1"));
        }
        if !(self.solver.rate_tol >= 0.0 && self.solver.rate_tol.is_finite()) {
            return Err(field(
                "solver.rate_tol",
                format!("{} must be finite and nonnegative", self.solver.rate_tol),
            ));
        }
        if let Some(t) = self.solver.residual_tol {
            if !(t > 0.0) {
                return Err(field(
                    "solver.residual_tol",
                    format!("{t} must be positive"),
                ));
            }
        }
        match (&self.channel, &self.sweep) {
            (None, None) => {
                return Err(Error::Config(
                    "one of [channel] or [sweep] is required".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "[channel] and [sweep] are mutually exclusive".into(),
                ))
            }
            (Some(c), None) => check_eta("channel.eta", c.eta)?,
            (None, Some(s)) => {
                if s.eta.is_empty() {
                    return Err(field("sweep.eta", "must list at least one value"));
                }
                if s.theta.is_empty() {
                    return Err(field("sweep.theta", "must list at least one value"));
                }
                for &e in &s.eta {
                    check_eta("sweep.eta", e)?;
                }
            }
        }
        Ok(())
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iter: self.solver.max_iter,
            rate_tol: self.solver.rate_tol,
            residual_tol: self.solver.residual_tol,
            power_budget: self.gamma,
            record_trajectory: self.solver.record_trajectory,
        }
    }

    /// `(eta, theta)` pairs sorted by `eta`, then `theta`.
    pub fn operating_points(&self) -> Vec<(f64, Angle)> {
        let mut points: Vec<(f64, Angle)> = match (&self.channel, &self.sweep) {
            (Some(c), _) => vec![(c.eta, c.theta)],
            (None, Some(s)) => s
                .eta
                .iter()
                .flat_map(|&e| s.theta.iter().map(move |&t| (e, t)))
                .collect(),
            (None, None) => Vec::new(),
        };
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        points.dedup();
        points
    }
}

fn check_eta(name: &str, eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("{eta} must be positive")))
    }
}
