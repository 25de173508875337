//! Asymptotic profiles and bound envelopes, with a shared calibration
//! protocol for comparing envelopes against computed values.

use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};
use crate::fredholm::log_trace_exact;
use crate::kernel::KernelParams;
use crate::quadrature::{log_integral_unimodal, LogIntegralSpec};
use crate::specfun::{ln_gamma, log_aisq};

/// `U_q(x) = q x^2 - (4/3) x^3`; increases on `[0, q/2]` to `q^3/12`.
pub fn u_profile(q: f64, x: f64) -> f64 {
    q * x * x - (4.0 / 3.0) * x * x * x
}

/// Upper-tail rate function `(4/3) y^{3/2}`.
pub fn phi_plus(y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(KpzError::Domain {
            func: "phi_plus",
            value: y,
        });
    }
    Ok((4.0 / 3.0) * y * y.sqrt())
}

/// Exponential rate of the single-trace term:
/// `-(4/3) y^{3/2}` on `(0, 1/4]`, `1/12 - y` beyond.
pub fn crossover_rate(y: f64) -> f64 {
    if y <= 0.25 {
        -(4.0 / 3.0) * y * y.sqrt()
    } else {
        1.0 / 12.0 - y
    }
}

/// `kappa_p = min(1/6, p^3/16)`.
pub fn kappa(p: f64) -> f64 {
    (1.0 / 6.0f64).min(p * p * p / 16.0)
}

/// `min(sqrt(y), cap)`, taking `sqrt(y)` on ties.
fn capped_root(y: f64, cap: f64) -> f64 {
    let r = y.sqrt();
    if r <= cap {
        r
    } else {
        cap
    }
}

/// `log int_{-inf}^{upper} e^{qrt} aisq(t^{2/3} r) dr`.
pub fn log_airy_laplace(q: f64, t: f64, upper: Option<f64>) -> Result<f64> {
    if !(q > 0.0) || !(t > 0.0) {
        return Err(KpzError::Parameter(format!(
            "need q > 0 and t > 0, got q={q}, t={t}"
        )));
    }
    let c2 = t.powf(2.0 / 3.0);
    let peak = q * q / 4.0;
    let sigma = (q / (2.0 * t)).sqrt();
    let spec = LogIntegralSpec {
        scan_lo: peak - 3.0 - 2.0 / (q * t),
        scan_hi: peak + 3.0,
        width: sigma.min(2.0 / (q * t)).min(1.0),
        left_rate: q * t,
        right_rate: q * t,
        upper,
    };
    log_integral_unimodal(|r| q * r * t + log_aisq(c2 * r), &spec)
}

/// `log(t^{-7/6} q^{-3/2} e^{q^3 t/12})`.
pub fn log_sandwich_envelope(q: f64, t: f64) -> f64 {
    -(7.0 / 6.0) * t.ln() - 1.5 * q.ln() + q * q * q * t / 12.0
}

/// `log(t^{-5/6} exp(t U_q(min(sqrt(y), q/2))))`; `y = None` is `+inf`.
pub fn log_partial_envelope(q: f64, t: f64, y: Option<f64>) -> f64 {
    let x = match y {
        Some(y) => capped_root(y, q / 2.0),
        None => q / 2.0,
    };
    -(5.0 / 6.0) * t.ln() + t * u_profile(q, x)
}

/// Envelope of `|tr K^{(n)}_{e^{-t sigma}, t}|` with unit constant.
pub fn trace_bound(sigma: f64, t: f64, n: usize) -> Result<f64> {
    Ok(log_trace_bound(sigma, t, n)?.exp())
}

pub fn log_trace_bound(sigma: f64, t: f64, n: usize) -> Result<f64> {
    if !(t >= 0.25) || !(sigma >= 0.0) {
        return Err(KpzError::Parameter(format!(
            "trace_bound needs sigma >= 0 and t >= 0.25, got sigma={sigma}, t={t}"
        )));
    }
    if n == 0 {
        Ok(t * u_profile(1.0, capped_root(sigma, 0.5)) - t * sigma)
    } else {
        let nf = n as f64;
        Ok(ln_gamma(nf + 1.0) + t * u_profile(nf, capped_root(sigma, nf / 2.0)))
    }
}

/// `log(n (n!)^2 (n C)^n t^{1/2} e^{p^3 t/12 - kappa_p t})`.
pub fn log_remainder_global_bound(p: f64, t: f64, c: f64) -> Result<f64> {
    if !(p >= 0.25) || !(t >= 0.25) || !(c > 0.0) {
        return Err(KpzError::Parameter(format!(
            "remainder bound needs p >= 0.25, t >= 0.25, C > 0; got p={p}, t={t}, C={c}"
        )));
    }
    let n = p.floor() + 1.0;
    Ok(
        n.ln() + 2.0 * ln_gamma(n + 1.0) + n * (n * c).ln() + 0.5 * t.ln() + p * p * p * t / 12.0
            - kappa(p) * t,
    )
}

pub fn remainder_global_bound(p: f64, t: f64, c: f64) -> Result<f64> {
    Ok(log_remainder_global_bound(p, t, c)?.exp())
}

/// An inequality `lhs <= C rhs` (or `rhs / C <= lhs <= C rhs` when two-sided)
/// checked over a grid, with `C` the smallest constant that works.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub grid: Vec<Vec<f64>>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub two_sided: bool,
    pub calibrated_constant: f64,
    pub satisfied: bool,
}

impl BoundReport {
    /// Calibrate from log-values (so that overflowing magnitudes compare
    /// correctly); `lhs` and `rhs` are stored exponentiated.
    pub fn from_logs(
        name: &str,
        grid: Vec<Vec<f64>>,
        log_lhs: &[f64],
        log_rhs: &[f64],
        two_sided: bool,
    ) -> Self {
        let mut log_c = f64::NEG_INFINITY;
        for (l, r) in log_lhs.iter().zip(log_rhs) {
            let d = l - r;
            log_c = log_c.max(if two_sided { d.abs() } else { d });
        }
        // slack against rounding in the final comparison
        let c = log_c.exp() * (1.0 + 1e-12);
        let lc = c.ln();
        let satisfied = log_c.is_finite()
            && log_lhs.iter().zip(log_rhs).all(|(l, r)| {
                let d = l - r;
                d <= lc && (!two_sided || -d <= lc)
            });
        BoundReport {
            name: name.to_string(),
            grid,
            lhs: log_lhs.iter().map(|v| v.exp()).collect(),
            rhs: log_rhs.iter().map(|v| v.exp()).collect(),
            two_sided,
            calibrated_constant: c,
            satisfied,
        }
    }

    /// True when the calibrated constant is within `limit`.
    pub fn holds_with(&self, limit: f64) -> bool {
        self.satisfied && self.calibrated_constant <= limit
    }
}

/// Two-sided comparison of `int e^{qrt} aisq(t^{2/3} r) dr` with
/// `t^{-7/6} q^{-3/2} e^{q^3 t/12}` over `(q, t)` points.
pub fn sandwich_report(points: &[(f64, f64)]) -> Result<BoundReport> {
    let mut grid = Vec::new();
    let mut ll = Vec::new();
    let mut lr = Vec::new();
    for &(q, t) in points {
        if !(q >= 0.25) || !(t >= 0.25) {
            return Err(KpzError::Parameter(format!(
                "sandwich needs q >= 0.25 and t >= 0.25, got q={q}, t={t}"
            )));
        }
        grid.push(vec![q, t]);
        ll.push(log_airy_laplace(q, t, None)?);
        lr.push(log_sandwich_envelope(q, t));
    }
    Ok(BoundReport::from_logs(
        "airy_laplace_sandwich",
        grid,
        &ll,
        &lr,
        true,
    ))
}

pub fn airy_laplace_sandwich(q: f64, t: f64) -> Result<BoundReport> {
    sandwich_report(&[(q, t)])
}

/// One-sided comparison of the partial integral up to `y` with
/// `t^{-5/6} exp(t U_q(min(sqrt(y), q/2)))` over `(q, t, y)` points
/// (`y = None` is `+inf`).
pub fn partial_report(points: &[(f64, f64, Option<f64>)]) -> Result<BoundReport> {
    let mut grid = Vec::new();
    let mut ll = Vec::new();
    let mut lr = Vec::new();
    for &(q, t, y) in points {
        if !(q >= 0.25) || !(t >= 0.25) || y.is_some_and(|y| !(y >= 0.0)) {
            return Err(KpzError::Parameter(format!(
                "partial bound needs q, t >= 0.25 and y >= 0, got q={q}, t={t}, y={y:?}"
            )));
        }
        grid.push(vec![q, t, y.unwrap_or(f64::INFINITY)]);
        ll.push(log_airy_laplace(q, t, y)?);
        lr.push(log_partial_envelope(q, t, y));
    }
    Ok(BoundReport::from_logs(
        "airy_laplace_partial",
        grid,
        &ll,
        &lr,
        false,
    ))
}

pub fn airy_laplace_partial(q: f64, t: f64, y: Option<f64>) -> Result<BoundReport> {
    partial_report(&[(q, t, y)])
}

/// `|tr K^{(n)}_{e^{-t sigma}, t}|` against [`trace_bound`] over `(sigma, t)`.
pub fn trace_bound_report(n: usize, points: &[(f64, f64)]) -> Result<BoundReport> {
    let mut grid = Vec::new();
    let mut ll = Vec::new();
    let mut lr = Vec::new();
    for &(sigma, t) in points {
        grid.push(vec![sigma, t]);
        let s = (-t * sigma).exp();
        ll.push(log_trace_exact(KernelParams::new(s, t, n)?)?);
        lr.push(log_trace_bound(sigma, t, n)?);
    }
    Ok(BoundReport::from_logs(
        &format!("trace_bound_n{n}"),
        grid,
        &ll,
        &lr,
        false,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_picks_root() {
        assert_eq!(capped_root(0.25, 0.5), 0.5);
        assert_eq!(capped_root(1.0, 0.5), 0.5);
    }
}
