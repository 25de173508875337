//! Upper-tail rate functions: Chernoff optimization, moment-based tail
//! estimates and the variational problem with its non-unique solutions.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{crossover_rate, phi_plus};
use crate::error::{KpzError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub y: f64,
    pub phi: f64,
    pub chernoff: f64,
    pub crossover: f64,
    /// `(1/t) log` of the Chernoff bound built from finite-`t` moments.
    pub tail_log_estimate: Option<f64>,
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Minimizer of `-p y + p^3/12` over `(0, 4 sqrt(y)]`.
pub fn chernoff_minimizer(y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(KpzError::Domain {
            func: "chernoff_rate",
            value: y,
        });
    }
    let f = |p: f64| -p * y + p * p * p / 12.0;
    Ok(golden_min(f, 0.0, 4.0 * y.sqrt(), 1e-12 * (1.0 + y.sqrt())))
}

/// `inf_p { -p y + p^3/12 }`.
pub fn chernoff_rate(y: f64) -> Result<f64> {
    let p = chernoff_minimizer(y)?;
    Ok(-p * y + p * p * p / 12.0)
}

/// `sup_{xi > 0} { min(xi - y, 0) - phi(xi) }` by a 10^4-point scan of
/// `[1e-4, y + 10]` followed by ternary refinement around the best point.
pub fn variational_value<F: Fn(f64) -> f64>(phi: F, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(KpzError::Domain {
            func: "variational_value",
            value: y,
        });
    }
    let g = |xi: f64| (xi - y).min(0.0) - phi(xi);
    let lo = 1e-4;
    let hi = y + 10.0;
    let m = 10_000;
    let h = (hi - lo) / (m - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg: usize = 0;
    for i in 0..m {
        let xi = lo + h * i as f64;
        let v = g(xi);
        if !v.is_finite() {
            return Err(KpzError::Evaluation { node: xi, value: v });
        }
        if v > best {
            best = v;
            arg = i;
        }
    }
    let mut a = lo + h * arg.saturating_sub(1) as f64;
    let mut b = (lo + h * (arg + 1) as f64).min(hi);
    for _ in 0..200 {
        let c = a + (b - a) / 3.0;
        let d = b - (b - a) / 3.0;
        if g(c) < g(d) {
            a = c;
        } else {
            b = d;
        }
    }
    Ok(best.max(g(0.5 * (a + b))))
}

/// Right-hand side of the variational identity, `crossover_rate`.
pub fn variational_target(y: f64) -> f64 {
    crossover_rate(y)
}

/// A rate function agreeing with `(4/3) xi^{3/2}` on `(0, 1/4]` and, for
/// `xi > 1/4`, interpolating between `(4/3) xi^{3/2}` (`blend = 1`) and the
/// lower edge `xi - 1/12` of the admissible corridor (`blend = 0`).
pub fn blended_rate(blend: f64) -> impl Fn(f64) -> f64 {
    move |xi: f64| {
        let upper = (4.0 / 3.0) * xi * xi.sqrt();
        if xi <= 0.25 {
            return upper;
        }
        // the edges touch at 1/4; keep rounding from inverting them
        let lower = (xi - 1.0 / 12.0).min(upper);
        (blend * upper + (1.0 - blend) * lower).clamp(lower, upper)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonuniqueRow {
    pub y: f64,
    pub blend: f64,
    pub value_phi_plus: f64,
    pub value_blend: f64,
    pub difference: f64,
    pub target: f64,
}

pub fn nonuniqueness_demo(y_grid: &[f64], blend: f64) -> Result<Vec<NonuniqueRow>> {
    if y_grid.is_empty() {
        return Err(KpzError::Parameter("y_grid is empty".into()));
    }
    if !(0.0..=1.0).contains(&blend) {
        return Err(KpzError::Parameter(format!("blend {blend} outside [0, 1]")));
    }
    let phi = blended_rate(1.0);
    let alt = blended_rate(blend);
    y_grid
        .iter()
        .map(|&y| {
            let a = variational_value(&phi, y)?;
            let b = variational_value(&alt, y)?;
            Ok(NonuniqueRow {
                y,
                blend,
                value_phi_plus: a,
                value_blend: b,
                difference: (a - b).abs(),
                target: variational_target(y),
            })
        })
        .collect()
}

/// `p = 0.1, 0.2, ..., 4.0`.
pub fn tail_p_grid() -> Vec<f64> {
    (1..=40).map(|k| k as f64 / 10.0).collect()
}

/// `(1/t) min_p { -p t y + log E[U^p] }` over [`tail_p_grid`].
pub fn tail_estimate<F: Fn(f64) -> Result<f64>>(y: f64, t: f64, log_moment: F) -> Result<f64> {
    if !(y > 0.0) || !(t > 0.0) {
        return Err(KpzError::Parameter(format!(
            "tail_estimate needs y > 0 and t > 0, got y={y}, t={t}"
        )));
    }
    let mut best = f64::INFINITY;
    for p in tail_p_grid() {
        let v = -p * t * y + log_moment(p)?;
        best = best.min(v);
    }
    Ok(best / t)
}

pub fn rate_report(y: f64) -> Result<RateReport> {
    Ok(RateReport {
        y,
        phi: phi_plus(y)?,
        chernoff: chernoff_rate(y)?,
        crossover: crossover_rate(y),
        tail_log_estimate: None,
    })
}
