//! Oracles independent of the Fredholm pipeline.
//!
//! # Second moment
//!
//! The mild form of the stochastic heat equation with delta initial data,
//! `Z(T,x) = p_T(x) + int_0^T int p_{T-u}(x-y) Z(u,y) xi(du,dy)`, gives by the
//! Ito isometry
//!
//! `E[Z(T,x)^2] = p_T(x)^2 + int_0^T int p_{T-u}(x-y)^2 E[Z(u,y)^2] dy du`.
//!
//! With the ansatz `E[Z(u,y)^2] = p_u(y)^2 h(u)` the Gaussian `y`-integral is
//! `int p_{T-u}(x-y)^2 p_u(y)^2 dy = p_T(x)^2 sqrt(T) / (2 sqrt(pi) sqrt(u (T-u)))`,
//! so `h` solves the scalar Volterra equation
//!
//! `h(T) = 1 + sqrt(T)/(2 sqrt(pi)) int_0^T h(u) / sqrt(u (T-u)) du`
//!
//! and `E[(Z(2t,0) e^{t/12})^2] = e^{t/6} h(2t) / (4 pi t)`.
//!
//! The solver uses the graded mesh `u_j = T (j/N)^2` (the solution has a
//! `sqrt(u)` term at the origin), piecewise-linear `h` and exact product
//! weights: with `u = T sin^2(theta)` one has `du / sqrt(u(T-u)) = 2 dtheta`
//! and `int u du / sqrt(u(T-u)) = T (theta - sin(theta) cos(theta))`. The
//! unknown at the right end enters its own equation linearly and is solved
//! for directly. Second-order Richardson extrapolation over doubled meshes
//! is iterated until successive extrapolants agree to `1e-6`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};
use crate::fredholm::{discretization_for, laplace_transform_value};
use crate::kernel::KernelParams;
use crate::quadrature::rule;
use crate::specfun::{airy, aisq_threshold};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub name: String,
    pub pipeline_value: f64,
    pub oracle_value: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleComparison {
    pub fn new(name: &str, pipeline_value: f64, oracle_value: f64, tolerance: f64) -> Self {
        let rel_error = (pipeline_value - oracle_value).abs() / oracle_value.abs();
        OracleComparison {
            name: name.to_string(),
            pipeline_value,
            oracle_value,
            rel_error,
            tolerance,
            pass: rel_error <= tolerance,
        }
    }
}

/// `E[Z(2t,0) e^{t/12}] = (4 pi t)^{-1/2} e^{t/12}`.
pub fn first_moment_oracle(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(KpzError::Parameter(format!("t must be positive, got {t}")));
    }
    Ok((4.0 * PI * t).powf(-0.5) * (t / 12.0).exp())
}

/// `h(T)` on the graded mesh with `n` intervals.
fn volterra_h(big_t: f64, n: usize) -> f64 {
    let u: Vec<f64> = (0..=n)
        .map(|j| big_t * (j as f64 / n as f64).powi(2))
        .collect();
    let mut h = vec![1.0; n + 1];
    let mut theta = vec![0.0; n + 1];
    let mut moment = vec![0.0; n + 1];
    for m in 1..=n {
        let tm = u[m];
        let c = tm.sqrt() / (2.0 * PI.sqrt());
        for j in 0..=m {
            let th = (u[j] / tm).min(1.0).sqrt().asin();
            theta[j] = th;
            moment[j] = th - 0.5 * (2.0 * th).sin();
        }
        let mut acc = 0.0;
        let mut w_last = 0.0;
        for j in 0..m {
            let d = u[j + 1] - u[j];
            let i0 = 2.0 * (theta[j + 1] - theta[j]);
            let i1 = tm * (moment[j + 1] - moment[j]);
            let wj = (u[j + 1] * i0 - i1) / d;
            let wj1 = (i1 - u[j] * i0) / d;
            acc += h[j] * wj;
            if j + 1 < m {
                acc += h[j + 1] * wj1;
            } else {
                w_last = wj1;
            }
        }
        h[m] = (1.0 + c * acc) / (1.0 - c * w_last);
    }
    h[n]
}

/// Solution `h(T)` of the second-moment Volterra equation.
pub fn second_moment_factor(big_t: f64) -> Result<f64> {
    if !(big_t > 0.0) || big_t > 12.0 {
        return Err(KpzError::Parameter(format!(
            "Volterra horizon must lie in (0, 12], got {big_t}"
        )));
    }
    let mut n = 100;
    let mut coarse = volterra_h(big_t, n);
    let mut prev: Option<f64> = None;
    while n <= 6400 {
        let fine = volterra_h(big_t, 2 * n);
        let extrap = (4.0 * fine - coarse) / 3.0;
        if let Some(p) = prev {
            if (extrap - p).abs() <= 1e-6 * extrap.abs() {
                return Ok(extrap);
            }
        }
        prev = Some(extrap);
        coarse = fine;
        n *= 2;
    }
    Err(KpzError::Numerical(format!(
        "Volterra solver not self-converged at T={big_t}"
    )))
}

/// `E[(Z(2t,0) e^{t/12})^2]` from the Volterra equation.
pub fn second_moment_oracle(t: f64) -> Result<f64> {
    if !(t > 0.0) || t > 6.0 {
        return Err(KpzError::Parameter(format!(
            "t must lie in (0, 6], got {t}"
        )));
    }
    Ok((t / 6.0).exp() * second_moment_factor(2.0 * t)? / (4.0 * PI * t))
}

/// `det(I - K_Ai)` on `L^2(sigma, inf)` by Gauss-Legendre Nystrom with
/// `nodes` points on `[sigma, max(sigma, 0) + x_*]`, `aisq(x_*) < 1e-30`.
pub fn airy_kernel_det(sigma: f64, nodes: usize) -> Result<f64> {
    if !sigma.is_finite() || !(-30.0..=30.0).contains(&sigma) {
        return Err(KpzError::Parameter(format!(
            "sigma {sigma} outside [-30, 30]"
        )));
    }
    let hi = sigma.max(0.0) + aisq_threshold(1e-30);
    let r = rule(nodes)?;
    let pts: Vec<(f64, f64)> = r.mapped(sigma, hi).collect();
    let vals: Vec<(f64, f64)> = pts.iter().map(|&(x, _)| airy(x)).collect();
    let m = pts.len();
    let mut g = DMatrix::<f64>::identity(m, m);
    for i in 0..m {
        for j in 0..m {
            let (xi, wi) = pts[i];
            let (xj, wj) = pts[j];
            let (ai, api) = vals[i];
            let (aj, apj) = vals[j];
            let k = if i == j {
                api * api - xi * ai * ai
            } else {
                (ai * apj - api * aj) / (xi - xj)
            };
            g[(i, j)] -= (wi * wj).sqrt() * k;
        }
    }
    Ok(g.determinant())
}

/// Laplace transform at `s = e^{-t^{1/3} sigma}` against the Airy-kernel
/// determinant on `[sigma, inf)`.
pub fn tw_limit_compare(sigma: f64, t: f64, nodes: usize) -> Result<OracleComparison> {
    if !(t >= 100.0) {
        return Err(KpzError::Parameter(format!("t must be >= 100, got {t}")));
    }
    let s = (-t.cbrt() * sigma).exp();
    let disc = discretization_for(t, s.max(1.0), nodes)?;
    let value = laplace_transform_value(KernelParams::new(s, t, 0)?, &disc)?;
    let oracle = airy_kernel_det(sigma, 120)?;
    Ok(OracleComparison::new(
        &format!("tracy_widom_sigma_{sigma}"),
        value,
        oracle,
        1e-2,
    ))
}
