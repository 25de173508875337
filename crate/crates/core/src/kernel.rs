//! The Fermi-type weight and the kernels `K_{s,t}`, `K^{(n)}_{s,t}`.
//!
//! Throughout, `tau = t^{1/3} r` is the weight argument of the primary
//! representation `K(x,y) = int Ai(x+r) Ai(y+r) / (1 + s^{-1} e^{-tau}) dr`.

use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};
use crate::quadrature::{airy_panels, rule};
use crate::specfun::{airy, ln_gamma};

pub const MAX_ORDER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub s: f64,
    pub t: f64,
    pub order: usize,
}

impl KernelParams {
    pub fn new(s: f64, t: f64, order: usize) -> Result<Self> {
        let p = KernelParams { s, t, order };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(KpzError::Parameter(format!(
                "s must be positive, got {}",
                self.s
            )));
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return Err(KpzError::Parameter(format!(
                "t must be positive, got {}",
                self.t
            )));
        }
        if self.order > MAX_ORDER {
            return Err(KpzError::Parameter(format!(
                "derivative order {} exceeds {MAX_ORDER}",
                self.order
            )));
        }
        Ok(())
    }

    pub fn with_order(&self, order: usize) -> Self {
        KernelParams { order, ..*self }
    }
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `d^n/ds^n` of `1 / (1 + s^{-1} e^{-tau})`, evaluated in log space.
#[inline]
pub fn weight_derivative(s: f64, tau: f64, n: usize) -> f64 {
    let ls = s.ln();
    let lden = log_add_exp(ls, -tau);
    if n == 0 {
        return (ls - lden).exp();
    }
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    sign * (ln_gamma(n as f64 + 1.0) - tau - (n as f64 + 1.0) * lden).exp()
}

/// Taylor coefficient `weight_derivative(s, tau, n) / n!`.
#[inline]
pub fn weight_taylor(s: f64, tau: f64, n: usize) -> f64 {
    let ls = s.ln();
    let lden = log_add_exp(ls, -tau);
    if n == 0 {
        return (ls - lden).exp();
    }
    let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
    sign * (-tau - (n as f64 + 1.0) * lden).exp()
}

/// `v(s,t,r) = 1/(1 + s^{-1} e^{-rt})` and its `s`-derivatives.
pub fn fermi_weight(params: KernelParams, r: f64) -> f64 {
    weight_derivative(params.s, r * params.t, params.order)
}

/// Quadrature grid in the `r` variable of the primary representation.
#[derive(Clone, Debug)]
pub struct RGrid {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub tau: Vec<f64>,
    pub t: f64,
}

/// Specification of the `s`-range and derivative orders an [`RGrid`] must serve.
#[derive(Clone, Copy, Debug)]
pub struct RGridSpec {
    pub t: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub max_order: usize,
    /// Smallest Airy argument offset `x` that will be combined with the grid.
    pub x_min: f64,
    pub order: usize,
    pub tau_width: f64,
}

impl RGridSpec {
    pub fn new(t: f64, s_min: f64, s_max: f64, max_order: usize) -> Self {
        RGridSpec {
            t,
            s_min,
            s_max,
            max_order,
            x_min: 0.0,
            order: 20,
            tau_width: 2.5,
        }
    }
}

/// `log Ai(r)^2` upper envelope used for truncation decisions.
fn log_ai_sq_envelope(r: f64) -> f64 {
    if r <= 1.0 {
        0.0
    } else {
        -(4.0 / 3.0) * r * r.sqrt() - (4.0 * std::f64::consts::PI * r.sqrt()).ln()
    }
}

/// Upper truncation point: beyond it `Ai(x+r)^2` times the largest weight
/// derivative is below `e^{-80}` of its peak.
pub fn r_upper(t: f64, s_min: f64, max_order: usize, x_min: f64) -> f64 {
    let c = t.cbrt();
    let cap = -s_min.ln();
    let n = max_order as f64;
    let f = |r: f64| log_ai_sq_envelope(x_min + r) + n * (c * r).min(cap.max(0.0));
    let mut best = f64::NEG_INFINITY;
    let mut r = -x_min;
    let mut hi = 14.0 - x_min;
    while r < 400.0 {
        let v = f(r);
        if v > best {
            best = v;
        }
        if v < best - 80.0 && r > 14.0 - x_min {
            hi = r;
            break;
        }
        r += 0.05;
    }
    hi.max(14.0 - x_min)
}

pub fn r_grid(spec: &RGridSpec) -> Result<RGrid> {
    let c = spec.t.cbrt();
    let tau_lo = -spec.s_max.ln() - 40.0;
    let lo = tau_lo / c;
    let hi = r_upper(spec.t, spec.s_min, spec.max_order, spec.x_min);
    let max_width = (spec.tau_width / c).min(1.0);
    let edges = airy_panels(lo, hi, spec.x_min, max_width, 1.0);
    let gl = rule(spec.order)?;
    let mut r = Vec::new();
    let mut w = Vec::new();
    for e in edges.windows(2) {
        for (x, wt) in gl.mapped(e[0], e[1]) {
            r.push(x);
            w.push(wt);
        }
    }
    let tau = r.iter().map(|&x| c * x).collect();
    Ok(RGrid {
        r,
        w,
        tau,
        t: spec.t,
    })
}

fn check_xy(x: f64, y: f64) -> Result<()> {
    if !(x >= 0.0) || !(y >= 0.0) || !x.is_finite() || !y.is_finite() {
        return Err(KpzError::Parameter(format!(
            "kernel arguments must be finite and nonnegative, got ({x}, {y})"
        )));
    }
    Ok(())
}

fn eval_on_grid(params: &KernelParams, grid: &RGrid, x: f64, y: f64) -> Result<f64> {
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    let mut sum = 0.0;
    for ((&r, &w), &tau) in grid.r.iter().zip(&grid.w).zip(&grid.tau) {
        let v = weight_derivative(params.s, tau, params.order);
        if v == 0.0 {
            continue;
        }
        sum += w * v * airy(a + r).0 * airy(b + r).0;
    }
    if !sum.is_finite() {
        return Err(KpzError::Convergence(format!(
            "kernel integral not finite at (x,y)=({x},{y})"
        )));
    }
    Ok(sum)
}

/// `K^{(n)}_{s,t}(x, y)` in the primary representation.
pub fn kernel_eval(params: KernelParams, x: f64, y: f64) -> Result<f64> {
    params.validate()?;
    check_xy(x, y)?;
    let mut spec = RGridSpec::new(params.t, params.s, params.s, params.order);
    spec.x_min = x.min(y);
    let grid = r_grid(&spec)?;
    eval_on_grid(&params, &grid, x, y)
}

/// Same kernel through the rescaled representation
/// `t^{2/3} int Ai(x + t^{2/3} rho) Ai(y + t^{2/3} rho) d^n_s v(s,t,rho) d rho`,
/// on an independently laid out grid in `rho`.
pub fn kernel_eval_rescaled(params: KernelParams, x: f64, y: f64) -> Result<f64> {
    params.validate()?;
    check_xy(x, y)?;
    let t = params.t;
    let c2 = t.powf(2.0 / 3.0);
    let (a, b) = if x <= y { (x, y) } else { (y, x) };
    let rho_lo = (-params.s.ln() - 42.0) / t;
    let rho_hi = r_upper(t, params.s, params.order, a) / c2 + 1.0 / c2;
    let max_width = (1.5 / t).min(0.5 / c2);
    // oscillation control in the Airy argument a + c2 * rho
    let edges = airy_panels(rho_lo * c2, rho_hi * c2, a, max_width * c2, 1.3);
    let gl = rule(24)?;
    let mut sum = 0.0;
    for e in edges.windows(2) {
        for (u, wu) in gl.mapped(e[0], e[1]) {
            let rho = u / c2;
            let v = weight_derivative(params.s, rho * t, params.order);
            if v == 0.0 {
                continue;
            }
            sum += wu * v * airy(a + u).0 * airy(b + u).0;
        }
    }
    Ok(sum)
}

/// Kernel bound to a prebuilt `r`-grid, so that pointwise values coincide with
/// the Nystrom assembly that shares the grid.
pub struct Kernel {
    pub params: KernelParams,
    pub grid: RGrid,
}

impl Kernel {
    pub fn new(params: KernelParams, grid: RGrid) -> Result<Self> {
        params.validate()?;
        Ok(Kernel { params, grid })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        check_xy(x, y)?;
        eval_on_grid(&self.params, &self.grid, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_taylor_is_derivative_over_factorial() {
        for n in 0..6 {
            let d = weight_derivative(0.7, 0.3, n);
            let tc = weight_taylor(0.7, 0.3, n);
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            assert!((d - tc * fact).abs() <= 1e-14 * d.abs());
        }
    }
}
