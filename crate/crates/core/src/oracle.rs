//! Reference computations that share no kernels with [`crate::dual`].
//!
//! * [`brute_force_lm`] minimizes the primal mutual information directly over
//!   couplings with the required marginals and metric budget.
//! * [`blahut_arimoto`] computes matched-decoding capacity.
//! * [`scarlett_dual_objective`] evaluates the dual form with `psi`
//!   eliminated in closed form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::info::{MetricMatrix, ProbabilityVector, TransitionMatrix};

/// Largest `M * N` accepted by [`brute_force_lm`].
pub const BRUTE_FORCE_MAX_CELLS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Newton steps allowed per barrier stage.
    pub max_newton_steps: usize,
    /// Factor applied to the barrier weight between stages.
    pub barrier_growth: f64,
    /// Duality-gap bound `m / t` at which the barrier method stops (nats).
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_newton_steps: 200,
            barrier_growth: 8.0,
            tolerance: 1e-10,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.max_newton_steps == 0 || !(self.barrier_growth > 1.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "invalid oracle configuration {self:?}"
            )));
        }
        Ok(())
    }
}

/// Reduced transportation polytope: `gamma = base + E z`, where column
/// `(a, b)` of `E` adds one at `(a, b)` and `(last, last)` and removes one at
/// `(a, last)` and `(last, b)`. Every `z` preserves both marginals.
struct Polytope {
    rows: usize,
    cols: usize,
    base: Vec<f64>,
    basis: DMatrix<f64>,
    /// Metric budget as `c . z <= 0`; `None` when `c` vanishes.
    metric: Option<DVector<f64>>,
    log_marginals: Vec<f64>,
}

impl Polytope {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn coupling(&self, z: &DVector<f64>) -> Vec<f64> {
        let shift = &self.basis * z;
        self.base
            .iter()
            .zip(shift.iter())
            .map(|(b, s)| b + s)
            .collect()
    }

    fn slack(&self, z: &DVector<f64>) -> Option<f64> {
        self.metric.as_ref().map(|c| -c.dot(z))
    }

    fn feasible(&self, z: &DVector<f64>) -> bool {
        self.coupling(z).iter().all(|&g| g > 0.0) && self.slack(z).is_none_or(|s| s > 0.0)
    }

    /// `sum gamma ln(gamma / (p_i q_j))`.
    fn information(&self, gamma: &[f64]) -> f64 {
        gamma
            .iter()
            .zip(&self.log_marginals)
            .map(|(&g, &lm)| if g > 0.0 { g * (g.ln() - lm) } else { 0.0 })
            .sum()
    }

    fn barrier(&self, z: &DVector<f64>, t: f64) -> f64 {
        let gamma = self.coupling(z);
        if gamma.iter().any(|&g| g <= 0.0) {
            return f64::INFINITY;
        }
        let mut value = t * self.information(&gamma) - gamma.iter().map(|g| g.ln()).sum::<f64>();
        if let Some(s) = self.slack(z) {
            if s <= 0.0 {
                return f64::INFINITY;
            }
            value -= s.ln();
        }
        value
    }

    fn constraint_count(&self) -> usize {
        self.base.len() + usize::from(self.metric.is_some())
    }
}

fn build_polytope(p: &[f64], s: &TransitionMatrix, d: &MetricMatrix) -> Polytope {
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let q: Vec<f64> = (0..s.outputs())
        .map(|j| rows.iter().map(|&i| p[i] * s.entries()[(i, j)]).sum())
        .collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    let (m, n) = (rows.len(), cols.len());
    let mut base = Vec::with_capacity(m * n);
    let mut metric_flat = Vec::with_capacity(m * n);
    let mut log_marginals = Vec::with_capacity(m * n);
    for &i in &rows {
        for &j in &cols {
            base.push(p[i] * s.entries()[(i, j)]);
            metric_flat.push(d.entries()[(i, j)]);
            log_marginals.push(p[i].ln() + q[j].ln());
        }
    }
    let k = m.saturating_sub(1) * n.saturating_sub(1);
    let mut basis = DMatrix::<f64>::zeros(m * n, k);
    let mut c = DVector::<f64>::zeros(k);
    let at = |a: usize, b: usize| a * n + b;
    for a in 0..m.saturating_sub(1) {
        for b in 0..n - 1 {
            let col = a * (n - 1) + b;
            basis[(at(a, b), col)] = 1.0;
            basis[(at(a, n - 1), col)] = -1.0;
            basis[(at(m - 1, b), col)] = -1.0;
            basis[(at(m - 1, n - 1), col)] = 1.0;
            c[col] = metric_flat[at(a, b)] - metric_flat[at(a, n - 1)] - metric_flat[at(m - 1, b)]
                + metric_flat[at(m - 1, n - 1)];
        }
    }
    let scale = metric_flat.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let metric = (c.amax() > 1e-12 * scale).then_some(c);
    Polytope {
        rows: m,
        cols: n,
        base,
        basis,
        metric,
        log_marginals,
    }
}

/// Strictly feasible start: mix toward the product coupling, then step
/// against the metric gradient.
fn interior_start(poly: &Polytope) -> Result<DVector<f64>> {
    let k = poly.dim();
    let (m, n) = (poly.rows, poly.cols);
    let row: Vec<f64> = (0..m)
        .map(|a| (0..n).map(|b| poly.base[a * n + b]).sum())
        .collect();
    let col: Vec<f64> = (0..n)
        .map(|b| (0..m).map(|a| poly.base[a * n + b]).sum())
        .collect();
    let to_product = {
        let mut z = DVector::<f64>::zeros(k);
        for a in 0..m.saturating_sub(1) {
            for b in 0..n - 1 {
                z[a * (n - 1) + b] = row[a] * col[b] - poly.base[a * n + b];
            }
        }
        z
    };
    let needs_mixing = poly.base.iter().any(|&g| g <= 0.0);
    for tau in [0.0, 1e-3, 1e-2, 1e-1, 0.5] {
        if tau == 0.0 && needs_mixing {
            continue;
        }
        let mixed = &to_product * tau;
        let Some(c) = &poly.metric else {
            if poly.feasible(&mixed) {
                return Ok(mixed);
            }
            continue;
        };
        let norm2 = c.norm_squared();
        let deficit = c.dot(&mixed).max(0.0) / norm2;
        for eps in [1e-6, 1e-4, 1e-3, 1e-2, 1e-1] {
            let z = &mixed - c * (deficit * 2.0 + eps);
            if poly.feasible(&z) {
                return Ok(z);
            }
        }
    }
    Err(Error::Oracle("no strictly feasible coupling found".into()))
}

/// Minimum of `I_gamma(X;Y)` over couplings with row marginal `p`, column
/// marginal `q = p s`, and `E_gamma[d] <= E_{p s}[d]`.
///
/// Uses a log-barrier interior-point method; the result is within
/// `cfg.tolerance` of the optimum.
pub fn brute_force_lm(
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
    cfg: &OracleConfig,
) -> Result<f64> {
    cfg.validate()?;
    check_dim("input distribution", s.inputs(), p.len())?;
    check_dim("metric rows", s.inputs(), d.rows())?;
    check_dim("metric cols", s.outputs(), d.cols())?;
    if s.inputs() * s.outputs() > BRUTE_FORCE_MAX_CELLS {
        return Err(Error::Oracle(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_CELLS} cells, got {}x{}",
            s.inputs(),
            s.outputs()
        )));
    }
    let poly = build_polytope(p.as_slice(), s, d);
    if poly.dim() == 0 {
        return Ok(poly.information(&poly.base).max(0.0));
    }
    let mut z = interior_start(&poly)?;
    let count = poly.constraint_count() as f64;
    let mut t = 1.0;
    loop {
        newton_center(&poly, &mut z, t, cfg.max_newton_steps)?;
        if count / t < cfg.tolerance {
            break;
        }
        t *= cfg.barrier_growth;
    }
    Ok(poly.information(&poly.coupling(&z)).max(0.0))
}

fn newton_center(poly: &Polytope, z: &mut DVector<f64>, t: f64, max_steps: usize) -> Result<()> {
    for _ in 0..max_steps {
        let gamma = poly.coupling(z);
        let cell_grad: Vec<f64> = gamma
            .iter()
            .zip(&poly.log_marginals)
            .map(|(&g, &lm)| t * (g.ln() - lm + 1.0) - 1.0 / g)
            .collect();
        let cell_curv: Vec<f64> = gamma.iter().map(|&g| t / g + 1.0 / (g * g)).collect();
        let mut grad = poly.basis.tr_mul(&DVector::from_vec(cell_grad));
        let weighted = DMatrix::from_fn(poly.basis.nrows(), poly.basis.ncols(), |r, c| {
            poly.basis[(r, c)] * cell_curv[r]
        });
        let mut hess = poly.basis.tr_mul(&weighted);
        if let (Some(c), Some(slack)) = (&poly.metric, poly.slack(z)) {
            grad += c / slack;
            hess += c * c.transpose() / (slack * slack);
        }
        let chol = hess
            .cholesky()
            .ok_or_else(|| Error::Oracle("barrier Hessian is not positive definite".into()))?;
        let step = -chol.solve(&grad);
        let decrement = -grad.dot(&step);
        if decrement / 2.0 <= 1e-14 {
            return Ok(());
        }
        let current = poly.barrier(z, t);
        let mut alpha = 1.0;
        loop {
            let trial = &*z + &step * alpha;
            let value = poly.barrier(&trial, t);
            if value <= current - 0.25 * alpha * decrement {
                *z = trial;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                return Ok(());
            }
        }
    }
    Ok(())
}

/// Channel capacity by the Blahut–Arimoto iteration, stopped once the upper
/// and lower capacity bounds are within `tol` nats.
pub fn blahut_arimoto(s: &TransitionMatrix, tol: f64) -> Result<(f64, ProbabilityVector)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let m = s.inputs();
    let mut p = vec![1.0 / m as f64; m];
    loop {
        let q: Vec<f64> = (0..s.outputs())
            .map(|j| (0..m).map(|i| p[i] * s.entries()[(i, j)]).sum())
            .collect();
        // ln c_i = D(s_i || q)
        let log_c: Vec<f64> = (0..m)
            .map(|i| {
                s.row(i)
                    .iter()
                    .zip(&q)
                    .map(|(&sij, &qj)| {
                        if sij > 0.0 {
                            sij * (sij / qj).ln()
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
            .collect();
        let top = log_c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = p
            .iter()
            .zip(&log_c)
            .map(|(pi, lc)| pi * (lc - top).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let lower = top + total.ln();
        if top - lower <= tol {
            return Ok((lower.max(0.0), ProbabilityVector::from_unnormalized(p)?));
        }
        p = weights.iter().map(|w| w / total).collect();
    }
}

/// Dual objective with `psi` eliminated:
/// `sum_ij p_i s_ij ln( e^{-zeta d_ij} phi_hat_i / sum_k p_k e^{-zeta d_kj} phi_hat_k )`.
pub fn scarlett_dual_objective(
    phi_hat: &[f64],
    zeta: f64,
    p: &ProbabilityVector,
    s: &TransitionMatrix,
    d: &MetricMatrix,
) -> Result<f64> {
    let (m, n) = (s.inputs(), s.outputs());
    check_dim("phi_hat", m, phi_hat.len())?;
    check_dim("input distribution", m, p.len())?;
    check_dim("metric rows", m, d.rows())?;
    check_dim("metric cols", n, d.cols())?;
    if phi_hat.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(
            "phi_hat must be positive and finite".into(),
        ));
    }
    if !(zeta >= 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "zeta must be finite and nonnegative, got {zeta}"
        )));
    }
    let pw = p.as_slice();
    let mut total = 0.0;
    for j in 0..n {
        let logs: Vec<f64> = (0..m)
            .filter(|&k| pw[k] > 0.0)
            .map(|k| pw[k].ln() + phi_hat[k].ln() - zeta * d.entries()[(k, j)])
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_den = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        for i in 0..m {
            let w = pw[i] * s.entries()[(i, j)];
            if w > 0.0 {
                total += w * (-zeta * d.entries()[(i, j)] + phi_hat[i].ln() - log_den);
            }
        }
    }
    Ok(total)
}

/// A tiny random channel problem.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub p: ProbabilityVector,
    pub s: TransitionMatrix,
    pub d: MetricMatrix,
}

/// Seeded instance with strictly positive `p` and `s` and metric entries in
/// `[0, 3)`.
pub fn random_instance(m: usize, n: usize, seed: u64) -> Result<RandomInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "instance dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positive = |len: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    };
    let p = ProbabilityVector::from_unnormalized(positive(m))?;
    let s_rows: Vec<Vec<f64>> = (0..m).map(|_| positive(n)).collect();
    let d_rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(0.0..3.0)).collect())
        .collect();
    Ok(RandomInstance {
        p,
        s: TransitionMatrix::from_rows(&s_rows)?,
        d: MetricMatrix::from_rows(&d_rows)?,
    })
}
