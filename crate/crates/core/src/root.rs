//! Root finding for monotone non-increasing scalar functions on `[0, inf)`.
//!
//! Newton steps are taken while they stay inside a sign-change bracket;
//! otherwise the bracket is bisected.

use crate::error::{Error, Result};

/// Upper limit for the bracket search.
pub const BRACKET_CAP: f64 = 1e6;

/// Value and proposed Newton increment at one abscissa.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Probe {
    pub value: f64,
    pub step: f64,
}

/// Returns the smallest `x >= 0` with `f(x) = 0`, or `0` when `f(0) <= 0`.
///
/// `f` must be non-increasing. A probe value of `+inf` is accepted and read
/// as "root lies to the right".
pub(crate) fn decreasing_root(
    function: &'static str,
    mut eval: impl FnMut(f64) -> Result<Probe>,
    warm_start: f64,
    tol: f64,
) -> Result<f64> {
    let mut x = if warm_start.is_finite() && warm_start > 0.0 {
        warm_start.min(BRACKET_CAP)
    } else {
        0.0
    };
    let mut probe = checked(function, eval(x)?)?;
    let mut lo = 0.0;
    let mut hi;

    if probe.value <= 0.0 {
        if x == 0.0 || checked(function, eval(0.0)?)?.value <= 0.0 {
            return Ok(0.0);
        }
        if probe.value >= -tol {
            return Ok(x);
        }
        hi = x;
    } else {
        if x > 0.0 && probe.value <= tol {
            return Ok(x);
        }
        let mut steps = 0;
        hi = loop {
            lo = x;
            if x >= BRACKET_CAP {
                return Err(Error::NoSignChange {
                    function,
                    cap: BRACKET_CAP,
                });
            }
            let doubled = (2.0 * x).max(1.0);
            let newton = x + probe.step;
            x = if steps < 200 && probe.step.is_finite() && probe.step > 0.0 {
                newton.min(doubled)
            } else {
                doubled
            }
            .min(BRACKET_CAP);
            if x - lo <= 4.0 * f64::EPSILON * x {
                return Ok(lo);
            }
            steps += 1;
            probe = checked(function, eval(x)?)?;
            if probe.value.abs() <= tol {
                return Ok(x);
            }
            if probe.value < 0.0 {
                break x;
            }
        };
    }

    let mut best = (x, probe.value.abs());
    for _ in 0..500 {
        let newton = x + probe.step;
        x = if probe.step.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        probe = checked(function, eval(x)?)?;
        let size = probe.value.abs();
        if size <= tol {
            return Ok(x);
        }
        if size < best.1 {
            best = (x, size);
        }
        if probe.value > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(best.0);
        }
    }
    Ok(best.0)
}

fn checked(function: &'static str, probe: Probe) -> Result<Probe> {
    if probe.value.is_nan() || probe.value == f64::NEG_INFINITY {
        Err(Error::NumericalFailure(format!(
            "{function} evaluated to {}",
            probe.value
        )))
    } else {
        Ok(probe)
    }
}
