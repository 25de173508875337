//! The acceptance suite: eleven criteria, each a list of numeric checks.
//!
//! Checks marked `diagnostic` do not enter the verdict; they pin down the
//! exact value a failing check lands on, so a failure can be told apart
//! from a numerical defect.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{partial_report, sandwich_report, BoundReport};
use crate::error::{KpzError, Result};
use crate::fredholm::{
    det_s_derivatives, discretization_for, exterior_traces, laplace_transform_value,
    nystrom_matrix, trace_exact,
};
use crate::kernel::KernelParams;
use crate::ldp::{chernoff_rate, nonuniqueness_demo, tail_estimate};
use crate::moments::{leading_term, ls_slope, LaplaceProfile, MomentSettings};
use crate::specfun::gamma;
use crate::validation::{airy_kernel_det, first_moment_oracle, tw_limit_compare};

pub const CRITERIA: [(usize, &str); 11] = [
    (1, "trace identity"),
    (2, "determinant series"),
    (3, "first-moment oracle"),
    (4, "complete monotonicity"),
    (5, "Lyapunov exponent"),
    (6, "leading-term sandwich"),
    (7, "Airy-integral sandwich"),
    (8, "remainder envelopes"),
    (9, "rate function"),
    (10, "nonuniqueness"),
    (11, "Tracy-Widom crossover"),
];

type Parts = (Vec<Check>, Vec<(String, f64)>);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub diagnostic: bool,
}

impl Check {
    /// `|measured - target| <= tolerance`.
    pub fn abs(label: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            target,
            tolerance,
            pass: (measured - target).abs() <= tolerance,
            diagnostic: false,
        }
    }

    /// `|measured - target| <= tolerance |target|`.
    pub fn rel(label: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            target,
            tolerance,
            pass: (measured - target).abs() <= tolerance * target.abs(),
            diagnostic: false,
        }
    }

    /// `measured <= bound`, stored with `tolerance = 0`.
    pub fn at_most(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            target: bound,
            tolerance: 0.0,
            pass: measured <= bound,
            diagnostic: false,
        }
    }

    pub fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Check {
            label: label.into(),
            measured,
            target: bound,
            tolerance: 0.0,
            pass: measured >= bound,
            diagnostic: false,
        }
    }

    pub fn diagnostic(mut self) -> Self {
        self.diagnostic = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: String,
    pub checks: Vec<Check>,
    /// Calibrated constants of the bound reports behind the criterion.
    pub constants: Vec<(String, f64)>,
}

impl CriterionResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().filter(|c| !c.diagnostic).all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| !c.diagnostic && !c.pass)
            .collect()
    }

    /// One summary line, `criterion N (title): PASS|FAIL [...]`.
    pub fn line(&self) -> String {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let required = self.checks.iter().filter(|c| !c.diagnostic).count();
        let failing = self.failing();
        let mut s = format!(
            "criterion {} ({}): {verdict} [{}/{} checks]",
            self.id,
            self.title,
            required - failing.len(),
            required
        );
        for c in failing {
            s.push_str(&format!(
                "; {} = {:.6e} vs {:.6e}",
                c.label, c.measured, c.target
            ));
        }
        s
    }
}

/// `(t, n_max, l_max)` for every profile the suite needs.
const PROFILE_PLAN: [(f64, usize, usize); 7] = [
    (0.5, 2, 0),
    (1.0, 2, 6),
    (2.0, 2, 6),
    (4.0, 2, 6),
    (6.0, 5, 0),
    (8.0, 2, 6),
    (10.0, 2, 0),
];

/// Runs criteria, sharing Laplace profiles between them.
pub struct Suite {
    pub settings: MomentSettings,
    profiles: Mutex<HashMap<u64, Arc<LaplaceProfile>>>,
}

impl Default for Suite {
    fn default() -> Self {
        Suite::new(MomentSettings::default())
    }
}

impl Suite {
    pub fn new(settings: MomentSettings) -> Self {
        Suite {
            settings,
            profiles: Mutex::new(HashMap::new()),
        }
    }

    pub fn profile(&self, t: f64) -> Result<Arc<LaplaceProfile>> {
        let (n_max, l_max) = PROFILE_PLAN
            .iter()
            .find(|e| e.0 == t)
            .map(|e| (e.1, e.2))
            .unwrap_or((2, 0));
        let mut cache = self.profiles.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(p) = cache.get(&t.to_bits()) {
            return Ok(p.clone());
        }
        let p = Arc::new(LaplaceProfile::build(t, n_max, l_max, self.settings)?);
        cache.insert(t.to_bits(), p.clone());
        Ok(p)
    }

    pub fn run(&self, id: usize) -> Result<CriterionResult> {
        let title = CRITERIA
            .iter()
            .find(|c| c.0 == id)
            .ok_or_else(|| KpzError::Parameter(format!("no criterion {id}")))?
            .1;
        let (checks, constants) = match id {
            1 => (trace_identity(self.settings.nodes.max(400))?, Vec::new()),
            2 => (determinant_series(self.settings.nodes)?, Vec::new()),
            3 => (self.first_moment()?, Vec::new()),
            4 => (complete_monotonicity(self.settings.nodes)?, Vec::new()),
            5 => (self.lyapunov()?, Vec::new()),
            6 => (leading_sandwich()?, Vec::new()),
            7 => airy_sandwich()?,
            8 => self.remainders()?,
            9 => (self.rate()?, Vec::new()),
            10 => (nonuniqueness()?, Vec::new()),
            _ => (tracy_widom(self.settings.nodes)?, Vec::new()),
        };
        Ok(CriterionResult {
            id,
            title: title.to_string(),
            checks,
            constants,
        })
    }

    pub fn run_all(&self) -> Result<Vec<CriterionResult>> {
        CRITERIA.iter().map(|c| self.run(c.0)).collect()
    }

    fn first_moment(&self) -> Result<Vec<Check>> {
        [0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&t| {
                let m = self.profile(t)?.moment(1.0)?;
                Ok(Check::rel(
                    format!("E[U] t={t}"),
                    m,
                    first_moment_oracle(t)?,
                    1e-3,
                ))
            })
            .collect()
    }

    fn lyapunov(&self) -> Result<Vec<Check>> {
        let ts = [100.0, 150.0, 200.0];
        let log_ts: Vec<f64> = ts.iter().map(|t: &f64| t.ln()).collect();
        let log_slope = ls_slope(&ts, &log_ts);
        let mut out = Vec::new();
        for p in [0.5, 1.0, 2.0, 3.0] {
            let ys = ts
                .iter()
                .map(|&t| leading_term(p, t).map(|a| a.log_abs))
                .collect::<Result<Vec<_>>>()?;
            let slope = ls_slope(&ts, &ys);
            let target = p * p * p / 12.0;
            out.push(Check::rel(format!("slope p={p}"), slope, target, 1e-2));
            out.push(
                Check::rel(
                    format!("slope p={p} vs p^3/12 - slope(log t)/2"),
                    slope,
                    target - 0.5 * log_slope,
                    1e-3,
                )
                .diagnostic(),
            );
        }
        for t in [1.0, 2.0] {
            let prof = self.profile(t)?;
            for p in [0.5, 1.3] {
                let d = prof.decompose(p)?;
                out.push(Check::rel(
                    format!("decomposition p={p} t={t}"),
                    d.recombined(),
                    d.total,
                    1e-6,
                ));
            }
        }
        Ok(out)
    }

    fn remainders(&self) -> Result<Parts> {
        let p = 1.0;
        let n = 2.0f64;
        let env = n.powf(n) / p;
        let mut b1 = Vec::new();
        for t in [1.0, 4.0, 10.0] {
            b1.push(self.profile(t)?.tail_term(p)?.abs());
        }
        let ll: Vec<f64> = b1.iter().map(|b| b.ln()).collect();
        let lr = vec![env.ln(); 3];
        let grid = vec![vec![p, 1.0], vec![p, 4.0], vec![p, 10.0]];
        let report = BoundReport::from_logs("tail_term_uniform", grid, &ll, &lr, false);
        let growth = b1[1].max(b1[2]) / b1[0];
        let mut gaps = Vec::new();
        for t in [4.0, 8.0] {
            let d = self.profile(t)?.decompose(p)?;
            let sum: f64 = d.higher.iter().sum();
            gaps.push(d.leading.ln() - sum.abs().ln());
        }
        let gap = (gaps[1] - gaps[0]) / 4.0;
        let checks = vec![
            Check::at_most("|B_1| growth over t in {4,10} relative to t=1", growth, 1.0),
            Check::at_least("exponent gap per unit t", gap, 0.03),
        ];
        Ok((checks, vec![(report.name, report.calibrated_constant)]))
    }

    fn rate(&self) -> Result<Vec<Check>> {
        let mut worst = 0.0f64;
        for i in 0..51 {
            let y = 0.05 + i as f64 * (3.0 - 0.05) / 50.0;
            let exact = -(4.0 / 3.0) * y * y.sqrt();
            worst = worst.max((chernoff_rate(y)? - exact).abs());
        }
        let (y, t) = (0.5, 6.0);
        let target = -(4.0 / 3.0) * y * f64::sqrt(y);
        let prof = self.profile(t)?;
        let est = tail_estimate(y, t, |p| Ok(prof.moment(p)?.ln()))?;
        let lead = tail_estimate(y, t, |p| Ok(leading_term(p, t)?.log_abs))?;
        let lead_far = tail_estimate(y, 2000.0, |p| Ok(leading_term(p, 2000.0)?.log_abs))?;
        Ok(vec![
            Check::at_most("max |chernoff + (4/3) y^{3/2}|", worst, 1e-8),
            Check::abs("tail estimate t=6 y=0.5", est, target, 0.1),
            Check::abs("tail estimate from leading term only, t=6", lead, est, 1e-2).diagnostic(),
            Check::abs(
                "tail estimate from leading term only, t=2000",
                lead_far,
                target,
                1e-2,
            )
            .diagnostic(),
        ])
    }
}

fn trace_identity(nodes: usize) -> Result<Vec<Check>> {
    let mut pts = Vec::new();
    for s in [0.1, 1.0, 10.0] {
        for t in [1.0, 4.0] {
            for n in 0..=3 {
                pts.push((s, t, n));
            }
        }
    }
    pts.par_iter()
        .map(|&(s, t, n)| {
            let params = KernelParams::new(s, t, n)?;
            let disc = discretization_for(t, s.max(1.0), nodes)?;
            let tr = nystrom_matrix(params, &disc)?.trace();
            Ok(Check::rel(
                format!("tr M s={s} t={t} order={n}"),
                tr,
                trace_exact(params)?,
                1e-6,
            ))
        })
        .collect()
}

fn determinant_series(nodes: usize) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (s, t) in [(1.0, 1.0), ((-3.0f64).exp(), 6.0)] {
        let params = KernelParams::new(s, t, 0)?;
        let disc = discretization_for(t, s.max(1.0), nodes)?;
        let det = laplace_transform_value(params, &disc)?;
        let e = exterior_traces(params, &disc, disc.node_count)?;
        let series = |l: usize| {
            1.0 + e[..l]
                .iter()
                .enumerate()
                .map(|(i, v)| if i % 2 == 0 { -v } else { *v })
                .sum::<f64>()
        };
        out.push(Check::abs(
            format!("full series s={s:.6} t={t}"),
            series(e.len()),
            det,
            1e-12,
        ));
        if t == 6.0 {
            out.push(Check::abs(
                format!("series to L=6 s={s:.6} t={t}"),
                series(6),
                det,
                1e-8,
            ));
        }
    }
    Ok(out)
}

fn complete_monotonicity(nodes: usize) -> Result<Vec<Check>> {
    let mut pts = Vec::new();
    for s in [0.01, 0.1, 1.0, 10.0, 100.0] {
        for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
            pts.push((s, t));
        }
    }
    pts.par_iter()
        .map(|&(s, t)| {
            let params = KernelParams::new(s, t, 0)?;
            let disc = discretization_for(t, s.max(1.0), nodes)?;
            let d0 = laplace_transform_value(params, &disc)?;
            let ds = det_s_derivatives(params, &disc, 4)?;
            let worst = std::iter::once(d0)
                .chain(
                    ds.iter()
                        .enumerate()
                        .map(|(i, d)| if i % 2 == 0 { -d } else { *d }),
                )
                .fold(f64::INFINITY, f64::min);
            Ok(Check::at_least(
                format!("min_k (-1)^k D^(k) s={s} t={t}"),
                worst,
                -1e-10,
            ))
        })
        .collect()
}

/// `A_p(t) / (p^{-3/2} Gamma(p+1) t^{-1/2} e^{p^3 t/12})`.
pub fn leading_ratio(p: f64, t: f64) -> Result<f64> {
    let log_env = -1.5 * p.ln() + gamma(p + 1.0).ln() - 0.5 * t.ln() + p * p * p * t / 12.0;
    Ok((leading_term(p, t)?.log_abs - log_env).exp())
}

fn leading_sandwich() -> Result<Vec<Check>> {
    let limit = 1.0 / (2.0 * PI.sqrt());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    let mut dev = 0.0f64;
    for p in [0.5, 1.0, 2.0, 3.0] {
        for t in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0] {
            let r = leading_ratio(p, t)?;
            lo = lo.min(r);
            hi = hi.max(r);
            dev = dev.max((r / limit - 1.0).abs());
        }
    }
    Ok(vec![
        Check::at_least("min ratio over grid", lo, 1.0 / 3.0),
        Check::at_most("max ratio over grid", hi, 3.0),
        Check::rel("ratio p=1 t=500", leading_ratio(1.0, 500.0)?, limit, 2e-2),
        Check::at_most("max |ratio / (1/(2 sqrt(pi))) - 1| over grid", dev, 1e-6).diagnostic(),
    ])
}

/// Grid of the Airy-integral sandwich.
pub fn sandwich_grid() -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for q in [0.5, 1.0, 2.0] {
        for t in [1.0, 5.0, 20.0, 100.0] {
            pts.push((q, t));
        }
    }
    pts
}

/// Grid of the partial bound; `y` runs through the case boundary `q^2/16`.
pub fn partial_grid() -> Vec<(f64, f64, Option<f64>)> {
    let mut pts = Vec::new();
    for (q, t) in sandwich_grid() {
        for f in [1.0 / 64.0, 1.0 / 16.0, 0.25, 1.0] {
            pts.push((q, t, Some(f * q * q)));
        }
        pts.push((q, t, None));
    }
    pts
}

fn airy_sandwich() -> Result<Parts> {
    let sw = sandwich_report(&sandwich_grid())?;
    let pr = partial_report(&partial_grid())?;
    let checks = vec![
        Check::at_most("sandwich constant", sw.calibrated_constant, 3.0),
        Check::at_most("partial-bound constant", pr.calibrated_constant, 5.0),
        Check::rel(
            "sandwich constant vs 2 sqrt(pi)",
            sw.calibrated_constant,
            2.0 * PI.sqrt(),
            1e-3,
        )
        .diagnostic(),
    ];
    Ok((
        checks,
        vec![
            (sw.name, sw.calibrated_constant),
            (pr.name, pr.calibrated_constant),
        ],
    ))
}

fn nonuniqueness() -> Result<Vec<Check>> {
    let ys = [0.05, 0.2, 0.5, 1.0, 3.0];
    let mut out = Vec::new();
    for blend in [0.0, 0.25, 0.5, 0.75] {
        for row in nonuniqueness_demo(&ys, blend)? {
            out.push(Check::abs(
                format!("blend={blend} y={}", row.y),
                row.value_blend,
                row.value_phi_plus,
                1e-6,
            ));
            out.push(Check::abs(
                format!("blend={blend} y={} vs target", row.y),
                row.value_blend,
                row.target,
                1e-6,
            ));
        }
    }
    for row in nonuniqueness_demo(&ys, 1.0)? {
        out.push(Check::abs(
            format!("phi_plus y={} vs target", row.y),
            row.value_phi_plus,
            row.target,
            1e-6,
        ));
    }
    Ok(out)
}

fn tracy_widom(nodes: usize) -> Result<Vec<Check>> {
    let sigmas = [-1.0, 0.0, 1.0, 2.0];
    let cmp = sigmas
        .par_iter()
        .map(|&sg| tw_limit_compare(sg, 1000.0, nodes))
        .collect::<Result<Vec<_>>>()?;
    let mut out: Vec<Check> = cmp
        .iter()
        .zip(sigmas)
        .map(|(c, sg)| {
            Check::abs(
                format!("laplace vs F2 sigma={sg}"),
                c.pipeline_value,
                c.oracle_value,
                1e-2,
            )
        })
        .collect();
    let steps = cmp
        .windows(2)
        .map(|w| w[1].pipeline_value - w[0].pipeline_value)
        .fold(f64::INFINITY, f64::min);
    out.push(Check::at_least("min increment in sigma", steps, 0.0));
    out.push(Check::at_most("F2(-6)", airy_kernel_det(-6.0, 120)?, 1e-3).diagnostic());
    out.push(Check::abs("F2(6)", airy_kernel_det(6.0, 120)?, 1.0, 1e-6).diagnostic());
    Ok(out)
}
