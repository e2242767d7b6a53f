//! Alternating double maximization.
//!
//! One iteration updates, in order: `lambda` and `p` from `T` of the previous
//! dual iterate, then `phi`, then `psi~`, then `zeta`. Every step is an exact
//! block maximizer, so the objective trajectory is non-decreasing.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dual::{
    column_log_sums, eval_f, update_p_from, DualState, OutputLaw, PowerBudget, Problem,
};
use crate::error::{check_dim, Error, Result};
use crate::info::{JointDistribution, MetricMatrix, ProbabilityVector, TransitionMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once consecutive objective values differ by less than this (nats).
    /// Zero disables the rule.
    pub rate_tol: f64,
    /// Optional second stopping rule: all four residuals at or below this.
    pub residual_tol: Option<f64>,
    pub power_budget: PowerBudget,
    pub record_trajectory: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 3000,
            rate_tol: 1e-10,
            residual_tol: None,
            power_budget: PowerBudget::Limit(1.0),
            record_trajectory: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.rate_tol >= 0.0 && self.rate_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate_tol must be finite and nonnegative, got {}",
                self.rate_tol
            )));
        }
        if let Some(t) = self.residual_tol {
            if !(t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "residual_tol must be positive, got {t}"
                )));
            }
        }
        if let PowerBudget::Limit(g) = self.power_budget {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "power budget must be positive, got {g}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RateTol,
    ResidualTol,
    MaxIter,
    NumericalFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::RateTol => "rate_tol",
            Termination::ResidualTol => "residual_tol",
            Termination::MaxIter => "max_iter",
            Termination::NumericalFailure => "numerical_failure",
        })
    }
}

/// Optimality residuals of the four dual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub phi: f64,
    pub psi: f64,
    pub zeta: f64,
    pub lambda: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.phi.max(self.psi).max(self.zeta).max(self.lambda)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Final dual objective, nats.
    pub rate: f64,
    pub input_distribution: ProbabilityVector,
    pub dual_state: DualState,
    pub iterations: usize,
    pub termination: Termination,
    pub diagnostic: Option<String>,
    /// Residuals at the returned state.
    pub residuals: Residuals,
    /// Per-iteration residuals; empty unless the trajectory was requested.
    pub residual_trajectory: Vec<Residuals>,
    pub objective_trajectory: Vec<f64>,
}

impl SolveReport {
    pub fn rate_bits(&self) -> f64 {
        self.rate / std::f64::consts::LN_2
    }

    /// Largest drop between consecutive objective values (zero if monotone).
    pub fn worst_descent(&self) -> f64 {
        self.objective_trajectory
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }
}

/// Input-optimized LM rate under `cfg.power_budget`.
pub fn solve_clm(
    s: &TransitionMatrix,
    d: &MetricMatrix,
    powers: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let problem = Problem::new(s, d)?;
    check_dim("powers", problem.inputs(), powers.len())?;
    if let PowerBudget::Limit(budget) = cfg.power_budget {
        let min_power = powers.iter().copied().fold(f64::INFINITY, f64::min);
        if min_power > budget {
            return Err(Error::InfeasiblePower { budget, min_power });
        }
    }
    let mut state = DualState::initial(problem.inputs(), problem.outputs());
    if cfg.power_budget == PowerBudget::Unconstrained {
        state.set_lambda(0.0);
    }
    let p = ProbabilityVector::uniform(problem.inputs());
    run(&problem, state, p, Some(powers), cfg)
}

/// LM rate of a fixed input law; only `(phi, psi~, zeta)` move.
pub fn solve_lm_fixed_input(
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let problem = Problem::new(s, d)?;
    check_dim("input distribution", problem.inputs(), p.len())?;
    let mut state = DualState::initial(problem.inputs(), problem.outputs());
    state.set_lambda(0.0);
    run(&problem, state, p.clone(), None, cfg)
}

fn run(
    problem: &Problem<'_>,
    mut state: DualState,
    mut p: ProbabilityVector,
    powers: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    let budget = match powers {
        Some(_) => cfg.power_budget,
        None => PowerBudget::Unconstrained,
    };
    let mut law = OutputLaw::new(problem, &p)?;
    let mut log_t = problem.log_t(&state, &law.active)?;
    let mut objective_trajectory = Vec::with_capacity(cfg.max_iter.min(4096));
    let mut residual_trajectory = Vec::new();
    let mut termination = Termination::MaxIter;
    let mut diagnostic = None;
    let mut good = (state.clone(), p.clone());
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        let step = (|| -> Result<f64> {
            if let Some(powers) = powers {
                let (p_new, lambda) =
                    update_p_from(&log_t, powers, cfg.power_budget, state.lambda())?;
                p = p_new;
                state.set_lambda(lambda);
                law = OutputLaw::new(problem, &p)?;
            }
            problem.update_phi(&mut state, &p, &law)?;
            problem.update_psi(&mut state)?;
            let zeta = problem.solve_zeta(&state, &law)?;
            state.set_zeta(zeta);
            log_t = problem.log_t(&state, &law.active)?;
            problem.objective_from_log_t(&p, &log_t)
        })();

        let rate = match step {
            Ok(v) => v,
            Err(e) => {
                termination = Termination::NumericalFailure;
                diagnostic = Some(e.to_string());
                state = good.0.clone();
                p = good.1.clone();
                law = OutputLaw::new(problem, &p)?;
                break;
            }
        };
        iterations += 1;
        good = (state.clone(), p.clone());
        let previous = objective_trajectory.last().copied();
        objective_trajectory.push(rate);

        let residuals = if cfg.record_trajectory || cfg.residual_tol.is_some() {
            let r = residuals_with(problem, &state, &p, &law, budget, powers)?;
            if cfg.record_trajectory {
                residual_trajectory.push(r);
            }
            Some(r)
        } else {
            None
        };

        if let (Some(tol), Some(r)) = (cfg.residual_tol, residuals) {
            if r.max() <= tol {
                termination = Termination::ResidualTol;
                break;
            }
        }
        if let Some(prev) = previous {
            if (rate - prev).abs() < cfg.rate_tol {
                termination = Termination::RateTol;
                break;
            }
        }
    }

    let residuals = residuals_with(problem, &state, &p, &law, budget, powers)?;
    let rate = match objective_trajectory.last() {
        Some(&r) => r,
        None => problem
            .objective(&state, &p, &law, None)
            .unwrap_or(f64::NAN),
    };
    Ok(SolveReport {
        rate,
        input_distribution: p,
        dual_state: state,
        iterations,
        termination,
        diagnostic,
        residuals,
        residual_trajectory,
        objective_trajectory,
    })
}

/// `r_phi`, `r_psi`, `r_zeta`, `r_lambda` at `state`. At a zero multiplier the
/// complementary-slackness form `max(0, .)` is used.
pub fn residuals(
    state: &DualState,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
    budget: PowerBudget,
    powers: &[f64],
) -> Result<Residuals> {
    let problem = Problem::new(s, d)?;
    check_dim("dual state phi", problem.inputs(), state.log_phi().len())?;
    check_dim("dual state psi", problem.outputs(), state.log_psi().len())?;
    check_dim("powers", problem.inputs(), powers.len())?;
    let law = OutputLaw::new(&problem, p)?;
    residuals_with(&problem, state, p, &law, budget, Some(powers))
}

fn residuals_with(
    problem: &Problem<'_>,
    state: &DualState,
    p: &ProbabilityVector,
    law: &OutputLaw,
    budget: PowerBudget,
    powers: Option<&[f64]>,
) -> Result<Residuals> {
    let rows = problem.row_log_sums(state, law);
    let phi = state
        .log_phi()
        .iter()
        .zip(&rows)
        .zip(p.as_slice())
        .map(|((a, b), pi)| ((a + b).exp() - pi).abs())
        .sum();

    let cols = column_log_sums(problem.d, state.log_phi(), state.zeta(), &law.active);
    let psi = law
        .active
        .iter()
        .map(|&j| (((state.log_psi()[j] + cols[j]).exp() - 1.0) * law.q[j]).abs())
        .sum();

    let g = problem.g_probe(state, state.zeta(), law).value;
    let zeta = slackness(state.zeta(), g);

    let lambda = match (budget, powers) {
        (PowerBudget::Limit(gamma), Some(powers)) => {
            let log_t = problem.log_t(state, &law.active)?;
            slackness(
                state.lambda(),
                eval_f(state.lambda(), &log_t, powers, gamma),
            )
        }
        _ => 0.0,
    };
    Ok(Residuals {
        phi,
        psi,
        zeta,
        lambda,
    })
}

fn slackness(multiplier: f64, derivative: f64) -> f64 {
    if multiplier > 0.0 {
        derivative.abs()
    } else {
        derivative.max(0.0)
    }
}

/// Primal coupling `gamma_ij = phi_i e^{-zeta d_ij} psi~_j q_j`, scaled to unit
/// mass, and its mutual information.
pub fn reconstruct_primal(
    state: &DualState,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
) -> Result<(JointDistribution, f64)> {
    let problem = Problem::new(s, d)?;
    check_dim("dual state phi", problem.inputs(), state.log_phi().len())?;
    check_dim("dual state psi", problem.outputs(), state.log_psi().len())?;
    let law = OutputLaw::new(&problem, p)?;
    let (m, n) = (problem.inputs(), problem.outputs());
    let mut gamma = Array2::<f64>::zeros((m, n));
    for i in 0..m {
        let d_row = d.row(i);
        let lphi = state.log_phi()[i];
        for &j in &law.active {
            gamma[(i, j)] =
                (lphi - state.zeta() * d_row[j] + state.log_psi()[j] + law.log_q[j]).exp();
        }
    }
    let joint = JointDistribution::normalized(gamma)?;
    let rate = joint.mutual_information();
    Ok((joint, rate))
}
