//! Dual objective of the LM rate and its exact block maximizers.
//!
//! The dual variables are stored as logarithms: `ln phi`, `ln psi~` where
//! `psi~_j = psi_j / q_j`. Every kernel sum of `exp(-zeta d_ij)` is a
//! streaming log-sum-exp, and output columns with `q_j < 1e-250` are left
//! out of every `q`-weighted sum.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::info::{entropy_of, MetricMatrix, ProbabilityVector, TransitionMatrix};
use crate::logsum::{log_sum_exp, LogSumExp};
use crate::root::{decreasing_root, Probe};

/// Columns whose output mass falls below this are pruned.
pub const PRUNE_MASS: f64 = 1e-250;

/// Function-value tolerance for the multiplier root solves.
pub const ROOT_TOL: f64 = 1e-12;

/// Average power constraint `sum_i p_i ||x_i||^2 <= budget`.
///
/// Serialized as the budget number or the string `"unconstrained"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BudgetRepr", into = "BudgetRepr")]
pub enum PowerBudget {
    Unconstrained,
    Limit(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BudgetRepr {
    Limit(f64),
    Named(String),
}

impl TryFrom<BudgetRepr> for PowerBudget {
    type Error = Error;

    fn try_from(repr: BudgetRepr) -> Result<Self> {
        match repr {
            BudgetRepr::Limit(g) if g > 0.0 && g.is_finite() => Ok(PowerBudget::Limit(g)),
            BudgetRepr::Limit(g) => Err(Error::InvalidParameter(format!(
                "power budget must be positive, got {g}"
            ))),
            BudgetRepr::Named(s) if s == "unconstrained" => Ok(PowerBudget::Unconstrained),
            BudgetRepr::Named(s) => Err(Error::InvalidParameter(format!(
                "power budget must be a number or \"unconstrained\", got {s:?}"
            ))),
        }
    }
}

impl From<PowerBudget> for BudgetRepr {
    fn from(b: PowerBudget) -> Self {
        match b {
            PowerBudget::Unconstrained => BudgetRepr::Named("unconstrained".into()),
            PowerBudget::Limit(g) => BudgetRepr::Limit(g),
        }
    }
}

impl PowerBudget {
    pub fn limit(self) -> Option<f64> {
        match self {
            PowerBudget::Unconstrained => None,
            PowerBudget::Limit(g) => Some(g),
        }
    }
}

/// Iterate of the alternating maximization: `(phi, psi~, zeta, lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    log_phi: Vec<f64>,
    log_psi: Vec<f64>,
    zeta: f64,
    lambda: f64,
}

impl DualState {
    pub fn new(phi: &[f64], psi: &[f64], zeta: f64, lambda: f64) -> Result<Self> {
        if let Some(v) = phi
            .iter()
            .chain(psi)
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidState(format!(
                "multiplier {v} is not a positive real"
            )));
        }
        Self::from_logs(
            phi.iter().map(|v| v.ln()).collect(),
            psi.iter().map(|v| v.ln()).collect(),
            zeta,
            lambda,
        )
    }

    pub fn from_logs(log_phi: Vec<f64>, log_psi: Vec<f64>, zeta: f64, lambda: f64) -> Result<Self> {
        if !(zeta >= 0.0 && zeta.is_finite() && lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidState(format!(
                "zeta = {zeta}, lambda = {lambda}"
            )));
        }
        if log_phi.iter().chain(&log_psi).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite log multiplier".into()));
        }
        Ok(Self {
            log_phi,
            log_psi,
            zeta,
            lambda,
        })
    }

    /// `phi = 1`, `psi~ = 1`, `zeta = lambda = 1`.
    pub fn initial(inputs: usize, outputs: usize) -> Self {
        Self {
            log_phi: vec![0.0; inputs],
            log_psi: vec![0.0; outputs],
            zeta: 1.0,
            lambda: 1.0,
        }
    }

    pub fn log_phi(&self) -> &[f64] {
        &self.log_phi
    }

    pub fn log_psi(&self) -> &[f64] {
        &self.log_psi
    }

    pub fn phi(&self) -> Vec<f64> {
        self.log_phi.iter().map(|v| v.exp()).collect()
    }

    pub fn psi(&self) -> Vec<f64> {
        self.log_psi.iter().map(|v| v.exp()).collect()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn set_zeta(&mut self, zeta: f64) {
        assert!(zeta >= 0.0 && zeta.is_finite());
        self.zeta = zeta;
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        assert!(lambda >= 0.0 && lambda.is_finite());
        self.lambda = lambda;
    }

    /// Multiplies `phi` by `c` and divides `psi~` by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        let shift = c.ln();
        Self {
            log_phi: self.log_phi.iter().map(|v| v + shift).collect(),
            log_psi: self.log_psi.iter().map(|v| v - shift).collect(),
            ..self.clone()
        }
    }

    /// `phi_i <- p_i / sum_j exp(-zeta d_ij) psi~_j q_j`.
    pub fn update_phi(
        &mut self,
        p: &ProbabilityVector,
        s: &TransitionMatrix,
        d: &MetricMatrix,
    ) -> Result<()> {
        let problem = Problem::new(s, d)?;
        self.check_dims(&problem)?;
        let law = OutputLaw::new(&problem, p)?;
        problem.update_phi(self, p, &law).map(|_| ())
    }

    /// `psi~_j <- 1 / sum_i phi_i exp(-zeta d_ij)`.
    pub fn update_psi(&mut self, d: &MetricMatrix) -> Result<()> {
        check_dim("update_psi rows", d.rows(), self.log_phi.len())?;
        check_dim("update_psi cols", d.cols(), self.log_psi.len())?;
        let cols: Vec<usize> = (0..d.cols()).collect();
        let sums = column_log_sums(d, &self.log_phi, self.zeta, &cols);
        apply_psi(self, &sums, &cols)
    }

    /// Sets `zeta` to the nonnegative root of `G`, warm-started at the current value.
    pub fn update_zeta(
        &mut self,
        p: &ProbabilityVector,
        s: &TransitionMatrix,
        d: &MetricMatrix,
    ) -> Result<()> {
        self.zeta = solve_zeta(self, p, s, d)?;
        Ok(())
    }

    fn check_dims(&self, problem: &Problem<'_>) -> Result<()> {
        check_dim("dual state phi", problem.inputs(), self.log_phi.len())?;
        check_dim("dual state psi", problem.outputs(), self.log_psi.len())
    }
}

/// Channel law and metric with precomputed `ln d`.
pub(crate) struct Problem<'a> {
    pub s: &'a TransitionMatrix,
    pub d: &'a MetricMatrix,
    log_d: Vec<f64>,
}

/// Output law `q` induced by an input law, with its pruned support.
pub(crate) struct OutputLaw {
    pub q: Vec<f64>,
    pub log_q: Vec<f64>,
    pub active: Vec<usize>,
    /// `sum_ij d_ij s_ij p_i`
    pub metric_mean: f64,
}

impl OutputLaw {
    pub fn new(problem: &Problem<'_>, p: &ProbabilityVector) -> Result<Self> {
        check_dim("input distribution", problem.inputs(), p.len())?;
        let q = problem.s.output_distribution(p);
        let active = (0..q.len()).filter(|&j| q[j] >= PRUNE_MASS).collect();
        let log_q = q.iter().map(|v| v.ln()).collect();
        Ok(Self {
            q,
            log_q,
            active,
            metric_mean: problem.d.expected_under(p, problem.s),
        })
    }
}

impl<'a> Problem<'a> {
    pub fn new(s: &'a TransitionMatrix, d: &'a MetricMatrix) -> Result<Self> {
        check_dim("metric rows", s.inputs(), d.rows())?;
        check_dim("metric cols", s.outputs(), d.cols())?;
        let log_d = d.entries().iter().map(|v| v.ln()).collect();
        Ok(Self { s, d, log_d })
    }

    pub fn inputs(&self) -> usize {
        self.s.inputs()
    }

    pub fn outputs(&self) -> usize {
        self.s.outputs()
    }

    fn log_d_row(&self, i: usize) -> &[f64] {
        let n = self.outputs();
        &self.log_d[i * n..(i + 1) * n]
    }

    /// `b_i = ln sum_{j active} exp(-zeta d_ij) psi~_j q_j`.
    pub fn row_log_sums(&self, state: &DualState, law: &OutputLaw) -> Vec<f64> {
        let zeta = state.zeta;
        let offsets: Vec<f64> = law
            .active
            .iter()
            .map(|&j| state.log_psi[j] + law.log_q[j])
            .collect();
        (0..self.inputs())
            .map(|i| {
                let row = self.d.row(i);
                let mut acc = LogSumExp::default();
                for (&j, &off) in law.active.iter().zip(&offsets) {
                    acc.push(off - zeta * row[j]);
                }
                acc.value()
            })
            .collect()
    }

    /// `ln T_i`, with the column sums restricted to `cols`.
    pub fn log_t(&self, state: &DualState, cols: &[usize]) -> Result<Vec<f64>> {
        let zeta = state.zeta;
        let col_sums = column_log_sums(self.d, &state.log_phi, zeta, cols);
        // bracket_j = -A_j psi~_j + ln psi~_j, with A_j = sum_k phi_k exp(-zeta d_kj)
        let bracket: Vec<f64> = cols
            .iter()
            .map(|&j| -(state.log_psi[j] + col_sums[j]).exp() + state.log_psi[j])
            .collect();
        let out: Vec<f64> = (0..self.inputs())
            .map(|i| {
                let s_row = self.s.row(i);
                let d_row = self.d.row(i);
                let mut total = 0.0;
                for (&j, &b) in cols.iter().zip(&bracket) {
                    let sij = s_row[j];
                    if sij != 0.0 {
                        total += sij * (b - zeta * d_row[j]);
                    }
                }
                state.log_phi[i] + total
            })
            .collect();
        if out.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NumericalFailure("ln T is not finite".into()));
        }
        Ok(out)
    }

    /// Dual objective; `row_sums` may carry `row_log_sums` for the same state.
    pub fn objective(
        &self,
        state: &DualState,
        p: &ProbabilityVector,
        law: &OutputLaw,
        row_sums: Option<&[f64]>,
    ) -> Result<f64> {
        let owned;
        let row_sums = match row_sums {
            Some(r) => r,
            None => {
                owned = self.row_log_sums(state, law);
                &owned
            }
        };
        let coupling: f64 = state
            .log_phi
            .iter()
            .zip(row_sums)
            .map(|(a, b)| (a + b).exp())
            .sum();
        let phi_term: f64 = p
            .as_slice()
            .iter()
            .zip(&state.log_phi)
            .map(|(&pi, &lp)| if pi > 0.0 { pi * lp } else { 0.0 })
            .sum();
        let psi_term: f64 = law
            .active
            .iter()
            .map(|&j| law.q[j] * state.log_psi[j])
            .sum();
        let value = 1.0 - coupling + entropy_of(p.as_slice()) + phi_term + psi_term
            - state.zeta * law.metric_mean;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NumericalFailure(format!(
                "dual objective evaluated to {value}"
            )))
        }
    }

    /// Dual objective from `ln T` of the same state: `1 + H(p) + sum_i p_i ln T_i`.
    pub fn objective_from_log_t(&self, p: &ProbabilityVector, log_t: &[f64]) -> Result<f64> {
        let weighted: f64 = p
            .as_slice()
            .iter()
            .zip(log_t)
            .map(|(&pi, &lt)| if pi > 0.0 { pi * lt } else { 0.0 })
            .sum();
        let value = 1.0 + entropy_of(p.as_slice()) + weighted;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NumericalFailure(format!(
                "dual objective evaluated to {value}"
            )))
        }
    }

    /// Exact maximization over `phi`. Returns the row sums used, which are
    /// stale once `psi~` or `zeta` move.
    pub fn update_phi(
        &self,
        state: &mut DualState,
        p: &ProbabilityVector,
        law: &OutputLaw,
    ) -> Result<Vec<f64>> {
        let sums = self.row_log_sums(state, law);
        for ((lp, &pi), &b) in state.log_phi.iter_mut().zip(p.as_slice()).zip(&sums) {
            if !b.is_finite() {
                return Err(Error::NumericalFailure(
                    "phi update denominator vanished".into(),
                ));
            }
            *lp = pi.ln() - b;
        }
        Ok(sums)
    }

    pub fn update_psi(&self, state: &mut DualState) -> Result<()> {
        let cols: Vec<usize> = (0..self.outputs()).collect();
        let sums = column_log_sums(self.d, &state.log_phi, state.zeta, &cols);
        apply_psi(state, &sums, &cols)
    }

    /// `G(zeta)` with a Newton increment for `ln(sum phi d e^{-zeta d} psi~ q) - ln(mean d)`.
    pub fn g_probe(&self, state: &DualState, zeta: f64, law: &OutputLaw) -> Probe {
        let offsets: Vec<f64> = law
            .active
            .iter()
            .map(|&j| state.log_psi[j] + law.log_q[j])
            .collect();
        let rows: Vec<usize> = (0..self.inputs())
            .filter(|&k| state.log_phi[k] != f64::NEG_INFINITY)
            .collect();
        let mut shift = f64::NEG_INFINITY;
        for &k in &rows {
            let lphi = state.log_phi[k];
            let d_row = self.d.row(k);
            let ld_row = self.log_d_row(k);
            for (&j, &off) in law.active.iter().zip(&offsets) {
                shift = shift.max(lphi + off - zeta * d_row[j] + ld_row[j]);
            }
        }
        let (mut first, mut second) = (0.0, 0.0);
        if shift.is_finite() {
            for &k in &rows {
                let lphi = state.log_phi[k] - shift;
                let d_row = self.d.row(k);
                let ld_row = self.log_d_row(k);
                for (&j, &off) in law.active.iter().zip(&offsets) {
                    let e = (lphi + off - zeta * d_row[j] + ld_row[j]).exp();
                    first += e;
                    second += e * d_row[j];
                }
            }
        }
        let l1 = shift + first.ln();
        let l2 = shift + second.ln();
        let value = l1.exp() - law.metric_mean;
        let step = if law.metric_mean > 0.0 && l1.is_finite() {
            (l1 - law.metric_mean.ln()) * (l1 - l2).exp()
        } else {
            f64::NAN
        };
        Probe { value, step }
    }

    pub fn solve_zeta(&self, state: &DualState, law: &OutputLaw) -> Result<f64> {
        decreasing_root(
            "G",
            |z| Ok(self.g_probe(state, z, law)),
            state.zeta,
            ROOT_TOL,
        )
    }
}

/// `ln sum_k phi_k exp(-zeta d_kj)` for `j` in `cols`; other entries are NaN.
pub(crate) fn column_log_sums(
    d: &MetricMatrix,
    log_phi: &[f64],
    zeta: f64,
    cols: &[usize],
) -> Vec<f64> {
    let mut acc = vec![LogSumExp::default(); d.cols()];
    for (k, &lphi) in log_phi.iter().enumerate() {
        let row = d.row(k);
        for &j in cols {
            acc[j].push(lphi - zeta * row[j]);
        }
    }
    let mut out = vec![f64::NAN; d.cols()];
    for &j in cols {
        out[j] = acc[j].value();
    }
    out
}

fn apply_psi(state: &mut DualState, sums: &[f64], cols: &[usize]) -> Result<()> {
    for &j in cols {
        if !sums[j].is_finite() {
            return Err(Error::NumericalFailure(format!(
                "psi update denominator at column {j} is {}",
                sums[j]
            )));
        }
        state.log_psi[j] = -sums[j];
    }
    Ok(())
}

/// Softmax weights `T_i exp(-lambda P_i)` as `(ln normalizer, F, -F')`.
fn power_moments(lambda: f64, log_t: &[f64], powers: &[f64]) -> (f64, f64, f64) {
    let logits: Vec<f64> = log_t
        .iter()
        .zip(powers)
        .map(|(t, pw)| t - lambda * pw)
        .collect();
    let norm = log_sum_exp(logits.iter().copied());
    let mut mean = 0.0;
    let mut second = 0.0;
    for (l, pw) in logits.iter().zip(powers) {
        let w = (l - norm).exp();
        mean += w * pw;
        second += w * pw * pw;
    }
    (norm, mean, (second - mean * mean).max(0.0))
}

/// `F(lambda) = -Gamma + sum_i P_i T_i e^{-lambda P_i} / sum_i T_i e^{-lambda P_i}`.
pub fn eval_f(lambda: f64, log_t: &[f64], powers: &[f64], budget: f64) -> f64 {
    assert_eq!(log_t.len(), powers.len());
    power_moments(lambda, log_t, powers).1 - budget
}

/// Root of the non-increasing `F` on `[0, inf)`, or zero when the power
/// constraint is slack at `lambda = 0`.
pub fn solve_lambda(log_t: &[f64], powers: &[f64], budget: f64) -> Result<f64> {
    solve_lambda_from(log_t, powers, budget, 1.0)
}

pub(crate) fn solve_lambda_from(
    log_t: &[f64],
    powers: &[f64],
    budget: f64,
    warm: f64,
) -> Result<f64> {
    check_dim("powers", log_t.len(), powers.len())?;
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "power budget must be positive, got {budget}"
        )));
    }
    let min_power = powers.iter().copied().fold(f64::INFINITY, f64::min);
    if min_power > budget {
        return Err(Error::InfeasiblePower { budget, min_power });
    }
    decreasing_root(
        "F",
        |lambda| {
            let (_, mean, var) = power_moments(lambda, log_t, powers);
            let value = mean - budget;
            let step = if var > 1e-300 { value / var } else { f64::NAN };
            Ok(Probe { value, step })
        },
        warm,
        ROOT_TOL,
    )
}

/// Exact maximization over `p`: `p_i ∝ T_i e^{-lambda P_i}` with the
/// multiplier from [`solve_lambda`] (zero when unconstrained).
pub fn update_p(
    log_t: &[f64],
    powers: &[f64],
    budget: PowerBudget,
) -> Result<(ProbabilityVector, f64)> {
    update_p_from(log_t, powers, budget, 1.0)
}

pub(crate) fn update_p_from(
    log_t: &[f64],
    powers: &[f64],
    budget: PowerBudget,
    warm: f64,
) -> Result<(ProbabilityVector, f64)> {
    check_dim("powers", log_t.len(), powers.len())?;
    let lambda = match budget {
        PowerBudget::Unconstrained => 0.0,
        PowerBudget::Limit(g) => solve_lambda_from(log_t, powers, g, warm)?,
    };
    let logits: Vec<f64> = log_t
        .iter()
        .zip(powers)
        .map(|(t, pw)| t - lambda * pw)
        .collect();
    let norm = log_sum_exp(logits.iter().copied());
    if !norm.is_finite() {
        return Err(Error::NumericalFailure(
            "input-law normalizer is not finite".into(),
        ));
    }
    let p =
        ProbabilityVector::from_unnormalized(logits.iter().map(|l| (l - norm).exp()).collect())?;
    Ok((p, lambda))
}

/// Dual objective at `state` with `psi_j = psi~_j q_j`.
pub fn dual_objective(
    state: &DualState,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
) -> Result<f64> {
    let problem = Problem::new(s, d)?;
    state.check_dims(&problem)?;
    let law = OutputLaw::new(&problem, p)?;
    problem.objective(state, p, &law, None)
}

/// `ln T_i(phi, psi~, zeta)` over all output columns.
pub fn log_t(state: &DualState, s: &TransitionMatrix, d: &MetricMatrix) -> Result<Vec<f64>> {
    let problem = Problem::new(s, d)?;
    state.check_dims(&problem)?;
    let cols: Vec<usize> = (0..problem.outputs()).collect();
    problem.log_t(state, &cols)
}

/// `G(zeta) = sum_kj [phi_k d_kj e^{-zeta d_kj} psi~_j q_j - d_kj s_kj p_k]`.
pub fn eval_g(
    zeta: f64,
    state: &DualState,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
) -> Result<f64> {
    let problem = Problem::new(s, d)?;
    state.check_dims(&problem)?;
    let law = OutputLaw::new(&problem, p)?;
    Ok(problem.g_probe(state, zeta, &law).value)
}

/// Nonnegative root of `G`, or zero when `G(0) <= 0`.
pub fn solve_zeta(
    state: &DualState,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
) -> Result<f64> {
    let problem = Problem::new(s, d)?;
    state.check_dims(&problem)?;
    let law = OutputLaw::new(&problem, p)?;
    problem.solve_zeta(state, &law)
}
