//! Agreement checks between the solver and the reference oracles on seeded
//! tiny instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{dual_objective, DualState, PowerBudget};
use crate::error::Result;
use crate::info::{MetricMatrix, TransitionMatrix};
use crate::oracle::{
    blahut_arimoto, brute_force_lm, random_instance, scarlett_dual_objective, OracleConfig,
};
use crate::solver::{solve_clm, solve_lm_fixed_input, SolverConfig};

/// Tolerance for rate agreement checks (nats).
pub const RATE_TOL: f64 = 1e-4;
/// Tolerance for the eliminated-`psi` identity.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.error <= self.tolerance
    }
}

/// `|ADM - brute force|` on seeded `m x n` instances.
pub fn brute_force_checks(m: usize, n: usize, seeds: std::ops::Range<u64>) -> Result<Vec<Check>> {
    let cfg = SolverConfig::default();
    seeds
        .map(|seed| {
            let inst = random_instance(m, n, seed)?;
            let adm = solve_lm_fixed_input(&inst.p, &inst.s, &inst.d, &cfg)?.rate;
            let primal = brute_force_lm(&inst.p, &inst.s, &inst.d, &OracleConfig::default())?;
            Ok(Check {
                name: format!("adm vs brute force {m}x{n} seed {seed}"),
                error: (adm - primal).abs(),
                tolerance: RATE_TOL,
            })
        })
        .collect()
}

/// `|C_LM - Blahut-Arimoto|` with the matched metric and no power budget.
pub fn matched_capacity_check(name: &str, s: &TransitionMatrix) -> Result<Check> {
    let d = MetricMatrix::matched(s)?;
    let cfg = SolverConfig {
        power_budget: PowerBudget::Unconstrained,
        ..SolverConfig::default()
    };
    let clm = solve_clm(s, &d, &vec![0.0; s.inputs()], &cfg)?.rate;
    let (capacity, _) = blahut_arimoto(s, 1e-12)?;
    Ok(Check {
        name: format!("matched clm vs blahut-arimoto {name}"),
        error: (clm - capacity).abs(),
        tolerance: RATE_TOL,
    })
}

/// Largest `|g(phi, psi*, zeta) - eliminated form(phi / p, zeta)|` over
/// `draws` seeded `m x n` evaluations.
pub fn eliminated_psi_check(m: usize, n: usize, draws: u64, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for k in 0..draws {
        let inst = random_instance(m, n, seed.wrapping_mul(1_000).wrapping_add(k))?;
        let phi: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..5.0)).collect();
        let zeta = rng.gen_range(0.0..4.0);
        let psi: Vec<f64> = (0..n)
            .map(|j| {
                let col: f64 = (0..m)
                    .map(|i| phi[i] * (-zeta * inst.d.row(i)[j]).exp())
                    .sum();
                1.0 / col
            })
            .collect();
        let state = DualState::new(&phi, &psi, zeta, 0.0)?;
        let g = dual_objective(&state, &inst.p, &inst.s, &inst.d)?;
        let phi_hat: Vec<f64> = phi
            .iter()
            .zip(inst.p.as_slice())
            .map(|(f, p)| f / p)
            .collect();
        let h = scarlett_dual_objective(&phi_hat, zeta, &inst.p, &inst.s, &inst.d)?;
        worst = worst.max((g - h).abs());
    }
    Ok(Check {
        name: format!("eliminated-psi identity {m}x{n}, {draws} draws"),
        error: worst,
        tolerance: IDENTITY_TOL,
    })
}

/// The full release-gate suite.
pub fn run_checks() -> Result<Vec<Check>> {
    let mut checks = brute_force_checks(2, 3, 0..10)?;
    checks.extend(brute_force_checks(3, 3, 0..10)?);
    let bsc = TransitionMatrix::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]])?;
    checks.push(matched_capacity_check("bsc(0.1)", &bsc)?);
    for seed in 0..3 {
        let inst = random_instance(3, 5, 500 + seed)?;
        checks.push(matched_capacity_check(
            &format!("3x5 seed {}", 500 + seed),
            &inst.s,
        )?);
    }
    checks.push(eliminated_psi_check(3, 4, 50, 1)?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let checks = run_checks().unwrap();
        assert_eq!(checks.len(), 25);
        for c in &checks {
            assert!(c.passed(), "{c:?}");
        }
    }
}
