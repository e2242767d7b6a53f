//! Runs an [`ExperimentSpec`] and renders its results.
//!
//! Output directory layout:
//!
//! * `summary.csv`, one row per solve;
//! * `records/NNN.json`, the full record of row `NNN`;
//! * `trajectories/NNN.csv` when trajectories are recorded.

use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::Angle;
use crate::channel::{
    build_constellation, discretize_awgn, iq_channel, metric_matrix, output_grid,
    sigma2_from_snr_db, Scheme, IDENTITY,
};
use crate::config::{ExperimentSpec, MetricChoice, Mode};
use crate::error::{Error, Result};
use crate::info::ProbabilityVector;
use crate::solver::{solve_clm, solve_lm_fixed_input, Residuals, SolveReport, Termination};

pub const SCHEMA_VERSION: u32 = 1;

/// Which rate a row holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RateKind {
    #[serde(rename = "clm")]
    Clm,
    #[serde(rename = "lm-uniform")]
    LmUniform,
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateKind::Clm => "clm",
            RateKind::LmUniform => "lm-uniform",
        })
    }
}

impl Mode {
    pub fn kinds(self) -> &'static [RateKind] {
        match self {
            Mode::Clm => &[RateKind::Clm],
            Mode::LmUniform => &[RateKind::LmUniform],
            Mode::Both => &[RateKind::Clm, RateKind::LmUniform],
        }
    }
}

/// Identifies one solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowKey {
    pub scheme: Scheme,
    pub eta: f64,
    pub theta: Angle,
    pub snr_db: f64,
    pub mode: RateKind,
}

/// Everything a solve produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub schema_version: u32,
    #[serde(flatten)]
    pub key: RowKey,
    pub rate_nats: f64,
    pub rate_bits: f64,
    pub iterations: usize,
    pub termination: Termination,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    pub residuals: Residuals,
    pub input_distribution: Vec<f64>,
    pub zeta: f64,
    pub lambda: f64,
    pub objective_trajectory: Vec<f64>,
    pub residual_trajectory: Vec<Residuals>,
}

impl SolveRecord {
    fn new(key: RowKey, report: SolveReport) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            key,
            rate_nats: report.rate,
            rate_bits: report.rate_bits(),
            iterations: report.iterations,
            termination: report.termination,
            diagnostic: report.diagnostic,
            residuals: report.residuals,
            input_distribution: report.input_distribution.into_vec(),
            zeta: report.dual_state.zeta(),
            lambda: report.dual_state.lambda(),
            objective_trajectory: report.objective_trajectory,
            residual_trajectory: report.residual_trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub key: RowKey,
    pub outcome: std::result::Result<SolveRecord, String>,
}

impl Row {
    /// Errors and numerical-failure terminations both count as failed.
    pub fn failed(&self) -> bool {
        match &self.outcome {
            Ok(r) => r.termination == Termination::NumericalFailure,
            Err(_) => true,
        }
    }
}

/// Solves every `(eta, theta, snr)` point of `spec` for each requested mode.
/// Points run in parallel on the current rayon pool; rows come back sorted
/// by `(eta, theta, snr)`, then mode.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>> {
    spec.validate()?;
    let mut snrs = spec.snr_db.clone();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let tasks: Vec<(f64, Angle, f64)> = spec
        .operating_points()
        .into_iter()
        .flat_map(|(eta, theta)| snrs.iter().map(move |&snr| (eta, theta, snr)))
        .collect();
    let rows: Vec<Vec<Row>> = tasks
        .par_iter()
        .map(|&(eta, theta, snr)| solve_point(spec, eta, theta, snr))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// All modes of `spec` at one operating point; shares the discretized channel.
pub fn solve_point(spec: &ExperimentSpec, eta: f64, theta: Angle, snr_db: f64) -> Vec<Row> {
    let kinds = spec.mode.kinds();
    let key = |mode| RowKey {
        scheme: spec.scheme,
        eta,
        theta,
        snr_db,
        mode,
    };
    let setup = (|| -> Result<_> {
        let constellation = build_constellation(spec.scheme);
        let channel = iq_channel(eta, theta.radians())?;
        let grid = output_grid(spec.grid.n, spec.grid.bound)?;
        let s = discretize_awgn(&channel, sigma2_from_snr_db(snr_db), &constellation, &grid)?;
        let h_hat = match spec.metric {
            MetricChoice::Identity => IDENTITY,
            MetricChoice::TrueChannel => channel.matrix(),
            MetricChoice::Explicit(m) => m,
        };
        let d = metric_matrix(&constellation, &grid, &h_hat)?;
        Ok((constellation, s, d))
    })();
    let (constellation, s, d) = match setup {
        Ok(v) => v,
        Err(e) => {
            return kinds
                .iter()
                .map(|&k| Row {
                    key: key(k),
                    outcome: Err(e.to_string()),
                })
                .collect()
        }
    };
    let cfg = spec.solver_config();
    kinds
        .iter()
        .map(|&kind| {
            let report = match kind {
                RateKind::Clm => solve_clm(&s, &d, &constellation.powers(), &cfg),
                RateKind::LmUniform => solve_lm_fixed_input(
                    &ProbabilityVector::uniform(constellation.len()),
                    &s,
                    &d,
                    &cfg,
                ),
            };
            Row {
                key: key(kind),
                outcome: report
                    .map(|r| SolveRecord::new(key(kind), r))
                    .map_err(|e| e.to_string()),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "scheme",
    "eta",
    "theta",
    "snr_db",
    "mode",
    "rate_nats",
    "rate_bits",
    "iters",
    "term",
    "r_phi",
    "r_psi",
    "r_zeta",
    "r_lambda",
];

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn io(e: impl fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Summary table; failed rows carry `failed` in `term` and empty numbers.
pub fn summary_csv(rows: &[Row]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for row in rows {
        let k = &row.key;
        let mut fields = vec![
            k.scheme.to_string(),
            k.eta.to_string(),
            k.theta.to_string(),
            k.snr_db.to_string(),
            k.mode.to_string(),
        ];
        match &row.outcome {
            Ok(r) => fields.extend([
                num(r.rate_nats),
                num(r.rate_bits),
                r.iterations.to_string(),
                r.termination.to_string(),
                num(r.residuals.phi),
                num(r.residuals.psi),
                num(r.residuals.zeta),
                num(r.residuals.lambda),
            ]),
            Err(_) => {
                fields.extend([String::new(), String::new(), String::new(), "failed".into()]);
                fields.extend(std::iter::repeat_n(String::new(), 4));
            }
        }
        w.write_record(&fields).map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(io)?).map_err(io)
}

/// Per-iteration objective and residuals.
pub fn trajectory_csv(record: &SolveRecord) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "objective", "r_phi", "r_psi", "r_zeta", "r_lambda"])
        .map_err(io)?;
    for (k, (obj, r)) in record
        .objective_trajectory
        .iter()
        .zip(&record.residual_trajectory)
        .enumerate()
    {
        w.write_record([
            (k + 1).to_string(),
            num(*obj),
            num(r.phi),
            num(r.psi),
            num(r.zeta),
            num(r.lambda),
        ])
        .map_err(io)?;
    }
    String::from_utf8(w.into_inner().map_err(io)?).map_err(io)
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    schema_version: u32,
    #[serde(flatten)]
    key: &'a RowKey,
    error: &'a str,
}

/// Writes `summary.csv`, `records/` and, when present, `trajectories/`.
/// Existing files with the same names are replaced.
pub fn write_outputs(dir: &Path, rows: &[Row]) -> Result<()> {
    let records = dir.join("records");
    fs::create_dir_all(&records).map_err(io)?;
    fs::write(dir.join("summary.csv"), summary_csv(rows)?).map_err(io)?;
    for (idx, row) in rows.iter().enumerate() {
        let name = format!("{idx:03}");
        let json = match &row.outcome {
            Ok(r) => serde_json::to_string_pretty(r),
            Err(e) => serde_json::to_string_pretty(&FailureRecord {
                schema_version: SCHEMA_VERSION,
                key: &row.key,
                error: e,
            }),
        }
        .map_err(io)?;
        fs::write(records.join(format!("{name}.json")), json + "\n").map_err(io)?;
        if let Ok(r) = &row.outcome {
            if !r.residual_trajectory.is_empty() {
                let traj = dir.join("trajectories");
                fs::create_dir_all(&traj).map_err(io)?;
                fs::write(traj.join(format!("{name}.csv")), trajectory_csv(r)?).map_err(io)?;
            }
        }
    }
    Ok(())
}
