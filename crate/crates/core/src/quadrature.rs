//! Gauss-Legendre rules and composite integration.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};

pub const MAX_ORDER: usize = 2000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }
}

fn legendre_rule(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-angle seed, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_pd(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule {
        order: n,
        nodes,
        weights,
    }
}

fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn cache() -> &'static RwLock<HashMap<usize, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn disk_path(order: usize) -> Option<PathBuf> {
    let dir = std::env::var_os("KPZLAB_CACHE_DIR")?;
    Some(PathBuf::from(dir).join(format!("gauss_legendre_{order}.json")))
}

fn load_or_build(order: usize) -> QuadratureRule {
    if let Some(path) = disk_path(order) {
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(rule) = serde_json::from_str::<QuadratureRule>(&text) {
                if rule.order == order && rule.nodes.len() == order {
                    return rule;
                }
            }
        }
        let rule = legendre_rule(order);
        if let Some(parent) = path.parent() {
            let _ = std::fs::create_dir_all(parent);
        }
        if let Ok(text) = serde_json::to_string(&rule) {
            let _ = std::fs::write(&path, text);
        }
        return rule;
    }
    legendre_rule(order)
}

/// Shared cached rule.
pub fn rule(order: usize) -> Result<Arc<QuadratureRule>> {
    if order == 0 || order > MAX_ORDER {
        return Err(KpzError::Parameter(format!(
            "Gauss-Legendre order {order} outside 1..={MAX_ORDER}"
        )));
    }
    if let Some(r) = cache().read().expect("rule cache poisoned").get(&order) {
        return Ok(r.clone());
    }
    let built = Arc::new(load_or_build(order));
    let mut w = cache().write().expect("rule cache poisoned");
    Ok(w.entry(order).or_insert(built).clone())
}

pub fn gauss_legendre_rule(order: usize) -> Result<QuadratureRule> {
    rule(order).map(|r| (*r).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn composite<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    panels: usize,
    r: &QuadratureRule,
) -> Result<f64> {
    let h = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let hi = if p + 1 == panels { b } else { lo + h };
        let mut part = 0.0;
        for (x, w) in r.mapped(lo, hi) {
            let v = f(x);
            if !v.is_finite() {
                return Err(KpzError::Evaluation { node: x, value: v });
            }
            part += w * v;
        }
        sum += part;
    }
    Ok(sum)
}

/// Composite Gauss-Legendre with `panels` equal panels. The error estimate is
/// the change from `panels` to `2 * panels`; the returned value is the finer one.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    panels: usize,
    order: usize,
) -> Result<Estimate> {
    if !(a < b) || panels == 0 {
        return Err(KpzError::Parameter(format!(
            "integrate needs a < b and panels > 0 (a={a}, b={b}, panels={panels})"
        )));
    }
    let r = rule(order)?;
    let coarse = composite(&mut f, a, b, panels, &r)?;
    let fine = composite(&mut f, a, b, 2 * panels, &r)?;
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// Integrate over explicit panel edges with a fixed rule.
pub fn integrate_edges<F: FnMut(f64) -> f64>(mut f: F, edges: &[f64], order: usize) -> Result<f64> {
    let r = rule(order)?;
    let mut sum = 0.0;
    for e in edges.windows(2) {
        for (x, w) in r.mapped(e[0], e[1]) {
            let v = f(x);
            if !v.is_finite() {
                return Err(KpzError::Evaluation { node: x, value: v });
            }
            sum += w * v;
        }
    }
    Ok(sum)
}

/// Integrate `f` over `[a, inf)` where `|f(x)| <= M e^{-decay_rate (x - a)}`
/// eventually. Panels of width `~1/decay_rate` (capped at 1) are appended
/// until the geometric tail bound falls below `tol`.
pub fn integrate_decaying<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    decay_rate: f64,
    tol: f64,
) -> Result<f64> {
    let width = (1.0 / decay_rate).min(1.0);
    integrate_decaying_width(f, a, decay_rate, tol, width)
}

/// As [`integrate_decaying`] with a caller-chosen panel width.
pub fn integrate_decaying_width<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    decay_rate: f64,
    tol: f64,
    width: f64,
) -> Result<f64> {
    if !(decay_rate > 0.0) || !(tol > 0.0) || !(width > 0.0) {
        return Err(KpzError::Parameter(
            "integrate_decaying needs positive decay_rate, tol and width".into(),
        ));
    }
    let r = rule(20)?;
    let ratio = (-decay_rate * width).exp();
    let max_extent = 1000.0 / decay_rate + 200.0;
    let mut sum = 0.0;
    let mut lo = a;
    let mut quiet = 0;
    while lo - a < max_extent {
        let hi = lo + width;
        let mut part = 0.0;
        let mut peak: f64 = 0.0;
        for (x, w) in r.mapped(lo, hi) {
            let v = f(x);
            if !v.is_finite() {
                return Err(KpzError::Evaluation { node: x, value: v });
            }
            part += w * v;
            peak = peak.max(v.abs());
        }
        sum += part;
        let tail = peak * width * ratio / (1.0 - ratio);
        if tail < tol {
            quiet += 1;
            if quiet >= 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
    }
    Err(KpzError::Convergence(format!(
        "integrand not decaying at rate {decay_rate} from a={a}"
    )))
}

/// Panel edges on `[lo, hi]` with widths at most `max_width`, shrunk to a
/// fraction of the local Airy wavelength `2 pi / sqrt(|x + shift|)` where the
/// Airy argument `x + shift` is negative.
pub fn airy_panels(lo: f64, hi: f64, shift: f64, max_width: f64, per_wavelength: f64) -> Vec<f64> {
    let mut edges = vec![lo];
    let mut x = lo;
    while x < hi {
        let arg = x + shift;
        let mut w = max_width;
        if arg < -1.0 {
            let wave = 2.0 * std::f64::consts::PI / (-arg).sqrt();
            w = w.min(wave / per_wavelength);
        }
        x = (x + w).min(hi);
        if hi - x < 1e-3 * w {
            x = hi;
        }
        edges.push(x);
    }
    edges
}

/// Scan window and panel controls for [`log_integral_unimodal`].
#[derive(Clone, Copy, Debug)]
pub struct LogIntegralSpec {
    pub scan_lo: f64,
    pub scan_hi: f64,
    pub width: f64,
    pub left_rate: f64,
    pub right_rate: f64,
    pub upper: Option<f64>,
}

/// `log int_{-inf}^{upper} exp(logf(r)) dr` for a unimodal log-integrand:
/// the peak is located on a scan of `[scan_lo, scan_hi]`, the integrand is
/// shifted by its maximum and both flanks are integrated outward.
pub fn log_integral_unimodal<F: Fn(f64) -> f64>(logf: F, spec: &LogIntegralSpec) -> Result<f64> {
    let hi = match spec.upper {
        Some(y) => spec.scan_hi.min(y),
        None => spec.scan_hi,
    };
    let lo = spec.scan_lo.min(hi);
    let steps = 4000;
    let mut peak = hi;
    let mut best = logf(hi);
    for i in 0..steps {
        let r = lo + (hi - lo) * i as f64 / steps as f64;
        let v = logf(r);
        if v > best {
            best = v;
            peak = r;
        }
    }
    if !best.is_finite() {
        return Err(KpzError::Evaluation {
            node: peak,
            value: best,
        });
    }
    let tol = 1e-18;
    let f = |r: f64| (logf(r) - best).exp();
    let right = match spec.upper {
        None => integrate_decaying_width(f, peak, spec.right_rate, tol, spec.width)?,
        Some(y) if y > peak => {
            let panels = ((y - peak) / spec.width).ceil().max(1.0) as usize;
            let edges: Vec<f64> = (0..=panels)
                .map(|i| peak + (y - peak) * i as f64 / panels as f64)
                .collect();
            integrate_edges(f, &edges, 20)?
        }
        Some(_) => 0.0,
    };
    let left = integrate_decaying_width(|u| f(peak - u), 0.0, spec.left_rate, tol, spec.width)?;
    Ok(best + (left + right).ln())
}
