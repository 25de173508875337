//! Fractional moments of `U = Z(2t,0) e^{t/12}` from the Laplace transform
//! `D(s) = E[e^{-sU}] = det(I - K_{s,t})`:
//!
//! `E[U^p] = (-1)^n / Gamma(1-alpha) * int_0^inf s^{-alpha} D^{(n)}(s) ds`,
//! `n = floor(p) + 1`, `alpha = p - n + 1`.
//!
//! With `s = e^w` the weight becomes `e^{(1-alpha) w} dw`. The leg `w <= 0`
//! is integrated down to `w_0`, below which `D^{(n)}` is constant to
//! `e^{-34}` relative accuracy and the remainder is added in closed form; the
//! leg `w >= 0` is extended until its last panel is negligible.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::log_airy_laplace;
use crate::error::{KpzError, Result};
use crate::fredholm::{discretization_for, trace_exact, Engine, DEFAULT_NODES};
use crate::kernel::KernelParams;
use crate::quadrature::{integrate_decaying_width, rule};
use crate::specfun::ln_gamma;

pub const P_MIN: f64 = 0.05;
pub const P_MAX: f64 = 4.0;
pub const T_MIN: f64 = 0.1;
pub const T_MAX_PIPELINE: f64 = 12.0;
pub const L_MAX: usize = 8;

/// A real number as `sign * exp(log_abs)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub fn value(&self) -> f64 {
        self.sign * self.log_abs.exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentDecomposition {
    pub p: f64,
    pub t: f64,
    pub n: usize,
    pub alpha: f64,
    pub leading: f64,
    pub leading_hat: f64,
    pub tail_term: f64,
    /// `B_{p,L}` for `L = 2..=l_max`.
    pub higher: Vec<f64>,
    /// Full-determinant value of the moment.
    pub total: f64,
    /// The `L = 1` part of the truncated integral, the discrete counterpart
    /// of `leading - leading_hat`.
    pub leading_disc: f64,
}

impl MomentDecomposition {
    /// `leading - leading_hat + tail_term + sum(higher)`.
    pub fn recombined(&self) -> f64 {
        self.leading - self.leading_hat + self.tail_term + self.higher.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSettings {
    pub nodes: usize,
    /// Relative size of the last high-leg panel at which the leg is closed.
    pub high_tol: f64,
}

impl Default for MomentSettings {
    fn default() -> Self {
        MomentSettings {
            nodes: DEFAULT_NODES,
            high_tol: 1e-9,
        }
    }
}

/// `(n, alpha)` with `n = floor(p) + 1`, `alpha = p - floor(p)`.
pub fn moment_order(p: f64) -> Result<(usize, f64)> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(KpzError::Parameter(format!("p must be positive, got {p}")));
    }
    let fl = p.floor();
    Ok((fl as usize + 1, p - fl))
}

fn check_leading(p: f64, t: f64) -> Result<()> {
    if !(p >= P_MIN) || !p.is_finite() {
        return Err(KpzError::Parameter(format!(
            "p must be >= {P_MIN}, got {p}"
        )));
    }
    if !(t >= T_MIN) || !t.is_finite() {
        return Err(KpzError::Parameter(format!(
            "t must be >= {T_MIN}, got {t}"
        )));
    }
    Ok(())
}

fn check_pipeline(p: f64, t: f64) -> Result<()> {
    check_leading(p, t)?;
    if p > P_MAX {
        return Err(KpzError::Parameter(format!(
            "p must be <= {P_MAX}, got {p}"
        )));
    }
    if t > T_MAX_PIPELINE {
        return Err(KpzError::Parameter(format!(
            "t must be <= {T_MAX_PIPELINE} for the determinant pipeline, got {t}"
        )));
    }
    Ok(())
}

/// `A_p(t) = t^{2/3} Gamma(p+1) int e^{prt} aisq(t^{2/3} r) dr`.
pub fn leading_term(p: f64, t: f64) -> Result<SignedLog> {
    check_leading(p, t)?;
    let li = log_airy_laplace(p, t, None).map_err(|e| e.context(format!("A_p at p={p}, t={t}")))?;
    Ok(SignedLog {
        sign: 1.0,
        log_abs: (2.0 / 3.0) * t.ln() + ln_gamma(p + 1.0) + li,
    })
}

/// `(-1)^{n+1} d^n_s tr K_{s,t}`, positive for `n >= 1`.
fn abs_trace_derivative(s: f64, t: f64, n: usize) -> Result<f64> {
    Ok(trace_exact(KernelParams::new(s, t, n)?)?.abs())
}

/// `A-hat_p(t) = (1/Gamma(1-alpha)) int_1^inf s^{-alpha} |d^n_s tr K_{s,t}| ds`,
/// integrated in `u = log s` until the `e^{-pu}` tail is below `1e-14`
/// relative.
pub fn leading_term_hat(p: f64, t: f64) -> Result<f64> {
    check_leading(p, t)?;
    let (n, alpha) = moment_order(p)?;
    let f = |u: f64| -> f64 {
        match abs_trace_derivative(u.exp(), t, n) {
            Ok(v) => ((1.0 - alpha) * u).exp() * v,
            Err(_) => f64::NAN,
        }
    };
    let f0 = f(0.0);
    if !f0.is_finite() {
        return Err(KpzError::Evaluation {
            node: 0.0,
            value: f0,
        });
    }
    let integral = integrate_decaying_width(f, 0.0, 0.8 * p, 1e-14 * f0, 1.0)
        .map_err(|e| e.context(format!("A-hat_p at p={p}, t={t}")))?;
    Ok(integral / ln_gamma(1.0 - alpha).exp())
}

#[derive(Clone, Debug)]
struct JetNode {
    w: f64,
    weight: f64,
    /// `D^{(k)}(e^w)`, `k = 0..=n_max`.
    d: Vec<f64>,
    /// `d^k/ds^k e_L(e^w)`, `[k][L]`; empty when exterior jets are off.
    ext: Vec<Vec<f64>>,
}

/// Laplace-transform derivatives of one `t` tabulated on the moment
/// quadrature grid, shared by every `p` with `floor(p) + 1 <= n_max`.
#[derive(Clone, Debug)]
pub struct LaplaceProfile {
    pub t: f64,
    pub n_max: usize,
    pub l_max: usize,
    pub w0: f64,
    pub u_cap: f64,
    pub settings: MomentSettings,
    anchor: JetNode,
    low: Vec<JetNode>,
    high: Vec<JetNode>,
}

/// Left end `w_0 = log s_0` of the low leg for derivative order `n`.
pub fn low_cutoff(t: f64, n: usize) -> f64 {
    let nf = n as f64;
    -(((nf + 1.0).powi(3) - nf.powi(3)) * t / 12.0 + (nf + 2.0).ln() + 34.0)
}

fn gl_nodes(edges: &[f64], order: usize) -> Result<Vec<(f64, f64)>> {
    let r = rule(order)?;
    let mut out = Vec::new();
    for e in edges.windows(2) {
        out.extend(r.mapped(e[0], e[1]));
    }
    Ok(out)
}

fn uniform_edges(lo: f64, hi: f64, max_width: f64) -> Vec<f64> {
    let k = ((hi - lo) / max_width).ceil().max(1.0) as usize;
    (0..=k)
        .map(|i| lo + (hi - lo) * i as f64 / k as f64)
        .collect()
}

fn eval_jets(engine: &Engine, pts: &[(f64, f64)], n: usize, l_max: usize) -> Result<Vec<JetNode>> {
    pts.par_iter()
        .map(|&(w, weight)| {
            let s = w.exp();
            let (jet, ext) = if l_max > 0 {
                engine.full_jet(s, n, l_max)?
            } else {
                (engine.det_jet(s, n)?, Vec::new())
            };
            Ok(JetNode {
                w,
                weight,
                d: jet.derivatives(),
                ext,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e: KpzError| e.context(format!("Laplace jets at t={}", engine.t)))
}

impl LaplaceProfile {
    /// Tabulate derivatives up to order `n_max` (and exterior-trace jets up
    /// to `l_max`, none when `l_max = 0`).
    pub fn build(t: f64, n_max: usize, l_max: usize, settings: MomentSettings) -> Result<Self> {
        if !(T_MIN..=T_MAX_PIPELINE).contains(&t) {
            return Err(KpzError::Parameter(format!(
                "t must lie in [{T_MIN}, {T_MAX_PIPELINE}], got {t}"
            )));
        }
        if n_max == 0 || n_max > 6 {
            return Err(KpzError::Parameter(format!("n_max {n_max} outside 1..=6")));
        }
        if l_max > L_MAX {
            return Err(KpzError::Parameter(format!(
                "l_max {l_max} exceeds {L_MAX}"
            )));
        }
        let w0 = low_cutoff(t, n_max);
        let nf = n_max as f64;
        let wc = -(nf + 1.0).powi(2) * t / 4.0 - 8.0;
        let mut pts = Vec::new();
        if wc > w0 {
            pts.extend(gl_nodes(&uniform_edges(w0, wc, 6.0), 8)?);
            pts.extend(gl_nodes(&uniform_edges(wc, 0.0, 3.0), 8)?);
        } else {
            pts.extend(gl_nodes(&uniform_edges(w0, 0.0, 3.0), 8)?);
        }
        let disc = discretization_for(t, 1.0, settings.nodes)?;
        let engine = Engine::new(t, disc, w0.exp(), 1.0, n_max)?;
        let mut low = eval_jets(&engine, &pts, n_max, l_max)?;
        let anchor = eval_jets(&engine, &[(w0, 0.0)], n_max, l_max)?.remove(0);
        drop(engine);
        low.shrink_to_fit();

        let mut u_lo: f64 = 0.0;
        let mut u_hi = 4.0 + 4.0 * t.cbrt();
        let mut high: Vec<JetNode> = Vec::new();
        loop {
            let disc = discretization_for(t, u_hi.exp(), settings.nodes)?;
            let engine = Engine::new(t, disc, u_lo.exp(), u_hi.exp(), n_max)?;
            let edges = uniform_edges(u_lo, u_hi, 3.0);
            let seg = eval_jets(&engine, &gl_nodes(&edges, 8)?, n_max, 0)?;
            let last_lo = edges[edges.len() - 2];
            high.extend(seg);
            let mut settled = true;
            for k in 1..=n_max {
                let total: f64 = low
                    .iter()
                    .chain(high.iter())
                    .map(|j| j.weight * j.w.exp() * j.d[k])
                    .sum::<f64>()
                    .abs();
                let last: f64 = high
                    .iter()
                    .filter(|j| j.w >= last_lo)
                    .map(|j| (j.weight * j.w.exp() * j.d[k]).abs())
                    .sum();
                if !(last <= settings.high_tol * total) {
                    settled = false;
                }
            }
            if settled {
                break;
            }
            if u_hi > 120.0 {
                return Err(KpzError::Convergence(format!(
                    "s-integral over [1, inf) not settled by log s = {u_hi} at t={t}"
                )));
            }
            u_lo = u_hi;
            u_hi += 3.0;
        }
        Ok(LaplaceProfile {
            t,
            n_max,
            l_max,
            w0,
            u_cap: u_hi,
            settings,
            anchor,
            low,
            high,
        })
    }

    fn order_for(&self, p: f64) -> Result<(usize, f64, f64)> {
        check_pipeline(p, self.t)?;
        let (n, alpha) = moment_order(p)?;
        if n > self.n_max {
            return Err(KpzError::Parameter(format!(
                "p={p} needs derivative order {n} > profile order {}",
                self.n_max
            )));
        }
        let gamma = ln_gamma(1.0 - alpha).exp();
        Ok((n, alpha, gamma))
    }

    /// `int_{w0}^0 e^{(1-alpha)w} g(w) dw + g(w0) e^{(1-alpha)w0}/(1-alpha)`.
    fn low_integral<G: Fn(&JetNode) -> f64>(&self, alpha: f64, g: G) -> f64 {
        let b = 1.0 - alpha;
        let body: f64 = self
            .low
            .iter()
            .map(|j| j.weight * (b * j.w).exp() * g(j))
            .sum();
        body + g(&self.anchor) * (b * self.w0).exp() / b
    }

    fn high_integral(&self, n: usize, alpha: f64) -> f64 {
        let b = 1.0 - alpha;
        self.high
            .iter()
            .map(|j| j.weight * (b * j.w).exp() * j.d[n])
            .sum()
    }

    /// `E[U^p]` from the full determinant.
    pub fn moment(&self, p: f64) -> Result<f64> {
        let (n, alpha, gamma) = self.order_for(p)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let v =
            sign / gamma * (self.low_integral(alpha, |j| j.d[n]) + self.high_integral(n, alpha));
        if !(v > 0.0) {
            return Err(KpzError::Numerical(format!(
                "moment at p={p}, t={} evaluated to {v}",
                self.t
            )));
        }
        Ok(v)
    }

    /// Moment with the `s`-integral truncated at `s = 1`.
    pub fn truncated_moment(&self, p: f64) -> Result<f64> {
        let (n, alpha, gamma) = self.order_for(p)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign / gamma * self.low_integral(alpha, |j| j.d[n]))
    }

    /// `B_{p,1}`: the `[1, inf)` part of the moment integral.
    pub fn tail_term(&self, p: f64) -> Result<f64> {
        let (n, alpha, gamma) = self.order_for(p)?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(sign / gamma * self.high_integral(n, alpha))
    }

    /// `(-1)^{n+L}/Gamma(1-alpha) int_0^1 s^{-alpha} d^n_s tr(K^{wedge L}) ds`
    /// for `L = 1..=l_max`.
    pub fn exterior_terms(&self, p: f64) -> Result<Vec<f64>> {
        let (n, alpha, gamma) = self.order_for(p)?;
        if self.l_max == 0 {
            return Err(KpzError::Parameter(
                "profile was built without exterior-trace jets".into(),
            ));
        }
        Ok((1..=self.l_max)
            .map(|l| {
                let sign = if (n + l) % 2 == 0 { 1.0 } else { -1.0 };
                sign / gamma * self.low_integral(alpha, |j| j.ext[n][l])
            })
            .collect())
    }

    pub fn decompose(&self, p: f64) -> Result<MomentDecomposition> {
        let (n, alpha, _) = self.order_for(p)?;
        let ext = self.exterior_terms(p)?;
        Ok(MomentDecomposition {
            p,
            t: self.t,
            n,
            alpha,
            leading: leading_term(p, self.t)?.value(),
            leading_hat: leading_term_hat(p, self.t)?,
            tail_term: self.tail_term(p)?,
            higher: ext[1..].to_vec(),
            total: self.moment(p)?,
            leading_disc: ext[0],
        })
    }
}

/// `log E[U^p]` through the full determinant pipeline.
pub fn moment(p: f64, t: f64, settings: MomentSettings) -> Result<f64> {
    check_pipeline(p, t)?;
    let (n, _) = moment_order(p)?;
    let profile = LaplaceProfile::build(t, n, 0, settings)?;
    Ok(profile.moment(p)?.ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Remainders {
    pub tail_term: f64,
    /// `B_{p,L}`, `L = 2..=l_max`.
    pub higher: Vec<f64>,
}

pub fn remainder_terms(
    p: f64,
    t: f64,
    settings: MomentSettings,
    l_max: usize,
) -> Result<Remainders> {
    check_pipeline(p, t)?;
    if !(2..=L_MAX).contains(&l_max) {
        return Err(KpzError::Parameter(format!(
            "l_max {l_max} outside 2..={L_MAX}"
        )));
    }
    let (n, _) = moment_order(p)?;
    let profile = LaplaceProfile::build(t, n, l_max, settings)?;
    let ext = profile.exterior_terms(p)?;
    Ok(Remainders {
        tail_term: profile.tail_term(p)?,
        higher: ext[1..].to_vec(),
    })
}

pub fn decompose(
    p: f64,
    t: f64,
    settings: MomentSettings,
    l_max: usize,
) -> Result<MomentDecomposition> {
    check_pipeline(p, t)?;
    if !(2..=L_MAX).contains(&l_max) {
        return Err(KpzError::Parameter(format!(
            "l_max {l_max} outside 2..={L_MAX}"
        )));
    }
    let (n, _) = moment_order(p)?;
    LaplaceProfile::build(t, n, l_max, settings)?.decompose(p)
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(KpzError::Parameter(
            "t_grid must be increasing with at least 3 points".into(),
        ));
    }
    Ok(())
}

/// Slope of `log A_p(t)` against `t`; estimates `p^3/12`.
pub fn lyapunov_slope(p: f64, t_grid: &[f64]) -> Result<f64> {
    check_grid(t_grid)?;
    let ys = t_grid
        .iter()
        .map(|&t| leading_term(p, t).map(|a| a.log_abs))
        .collect::<Result<Vec<_>>>()?;
    Ok(ls_slope(t_grid, &ys))
}

/// Slope of the full-pipeline `log E[U^p]` against `t`.
pub fn lyapunov_slope_moments(p: f64, t_grid: &[f64], settings: MomentSettings) -> Result<f64> {
    check_grid(t_grid)?;
    let ys = t_grid
        .iter()
        .map(|&t| moment(p, t, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(ls_slope(t_grid, &ys))
}
