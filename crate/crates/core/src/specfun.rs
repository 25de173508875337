//! Airy functions on the real line, the integrated square `aisq`, its tail
//! integral, and log-gamma.
//!
//! Three evaluation schemes are provided:
//!
//! * [`airy_series`]: Maclaurin series summed in double-double arithmetic.
//!   Slow but accurate to ~1e-16 relative on `-12 <= x <= 9`.
//! * [`airy_asymptotic`]: Poincare expansions, used for `x > 9` and `x < -12`.
//! * a tabulated fast path (nodes every 1/8 built by the series, then a local
//!   Taylor expansion from the Airy equation `y'' = x y`), used by [`airy`].

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};

/// `Ai(0)` as a double-double pair.
const AI0: Dd = Dd {
    hi: 0.3550280538878172,
    lo: 2.05233632436212e-17,
};
/// `-Ai'(0)` as a double-double pair.
const AIP0_NEG: Dd = Dd {
    hi: 0.2588194037928068,
    lo: -2.522243111610832e-17,
};

const TABLE_LO: f64 = -12.0;
const TABLE_HI: f64 = 9.0;
const TABLE_STEP: f64 = 0.125;

/// Beyond this the Maclaurin sum cancels too much even in double-double.
pub const SERIES_RANGE: (f64, f64) = (TABLE_LO, TABLE_HI);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AiryValue {
    pub x: f64,
    pub ai: f64,
    pub ai_prime: f64,
}

/// `Ai(x)` and `Ai'(x)`.
pub fn airy_pair(x: f64) -> Result<AiryValue> {
    if !x.is_finite() || x.abs() > 1e4 {
        return Err(KpzError::Domain {
            func: "airy_pair",
            value: x,
        });
    }
    let (ai, ai_prime) = airy(x);
    Ok(AiryValue { x, ai, ai_prime })
}

/// Unchecked `(Ai(x), Ai'(x))`. Underflows to zero for `x > ~104`.
#[inline]
pub fn airy(x: f64) -> (f64, f64) {
    if !(TABLE_LO..=TABLE_HI).contains(&x) {
        airy_asymptotic(x)
    } else {
        airy_table(x)
    }
}

#[inline]
pub fn ai(x: f64) -> f64 {
    airy(x).0
}

// ---------------------------------------------------------------------------
// double-double helpers

#[derive(Clone, Copy, Debug)]
struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

impl Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        quick_two_sum(s, e + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        quick_two_sum(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let p = q1 * d;
        let pe = q1.mul_add(d, -p);
        let (s, se) = two_sum(self.hi, -p);
        let q2 = (s + (se - pe + self.lo)) / d;
        quick_two_sum(q1, q2)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Maclaurin series for `(Ai(x), Ai'(x))` in double-double arithmetic.
pub fn airy_series(x: f64) -> (f64, f64) {
    let xd = Dd::from(x);
    let x3 = xd.mul(xd).mul(xd);

    // f = sum a_k x^{3k}, g = sum b_k x^{3k+1}, and their derivatives
    let mut f = Dd::from(1.0);
    let mut g = xd;
    let mut fp = Dd::from(0.0);
    let mut gp = Dd::from(1.0);
    let mut tf = Dd::from(1.0);
    let mut tg = xd;
    let mut tfp = xd.mul(xd).div_f64(2.0);
    let mut tgp = Dd::from(1.0);
    fp = fp.add(tfp);
    let mut peak: f64 = 1.0;
    for k in 1..400 {
        let kf = k as f64;
        tf = x3.mul(tf).div_f64((3.0 * kf - 1.0) * (3.0 * kf));
        tg = x3.mul(tg).div_f64((3.0 * kf) * (3.0 * kf + 1.0));
        tgp = x3.mul(tgp).div_f64((3.0 * kf - 2.0) * (3.0 * kf));
        f = f.add(tf);
        g = g.add(tg);
        gp = gp.add(tgp);
        if k >= 2 {
            tfp = x3.mul(tfp).div_f64((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp = fp.add(tfp);
        }
        let m = tf
            .hi
            .abs()
            .max(tg.hi.abs())
            .max(tgp.hi.abs())
            .max(tfp.hi.abs());
        peak = peak.max(m);
        if k > 3 && m < 1e-40 * peak {
            break;
        }
    }
    let ai = AI0.mul(f).add(AIP0_NEG.mul(g).neg());
    let aip = AI0.mul(fp).add(AIP0_NEG.mul(gp).neg());
    (ai.to_f64(), aip.to_f64())
}

// ---------------------------------------------------------------------------
// asymptotic expansions

/// Coefficients `u_k`, `v_k` of the Airy asymptotic series.
fn uv_coefficients() -> &'static (Vec<f64>, Vec<f64>) {
    static UV: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    UV.get_or_init(|| {
        let kmax = 80;
        let mut u = vec![1.0; kmax];
        let mut v = vec![1.0; kmax];
        for k in 1..kmax {
            let kf = k as f64;
            u[k] = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
                / ((2.0 * kf - 1.0) * 216.0 * kf);
            v[k] = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u[k];
        }
        (u, v)
    })
}

/// Sum `sum_k sign^k c_k w^k` with optimal truncation.
fn asym_sum(c: &[f64], w: f64, alternate: bool, start: usize, step: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = start;
    while k < c.len() {
        let sign = if alternate && (k / step) % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        let term = sign * c[k] * w.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        prev = term.abs();
        k += step;
    }
    sum
}

/// Poincare expansions of `(Ai(x), Ai'(x))`. Intended for `|x| >= 9`.
pub fn airy_asymptotic(x: f64) -> (f64, f64) {
    let (u, v) = uv_coefficients();
    if x > 0.0 {
        let zeta = 2.0 / 3.0 * x * x.sqrt();
        let e = (-zeta).exp();
        if e == 0.0 {
            return (0.0, 0.0);
        }
        let w = 1.0 / zeta;
        let su = asym_sum(u, w, true, 0, 1);
        let sv = asym_sum(v, w, true, 0, 1);
        let x4 = x.sqrt().sqrt();
        let c = e / (2.0 * PI.sqrt());
        (c * su / x4, -c * x4 * sv)
    } else {
        let z = -x;
        let zeta = 2.0 / 3.0 * z * z.sqrt();
        let w = 1.0 / zeta;
        // even / odd parts carry (-1)^k in index k/2
        let ue = asym_sum(u, w, true, 0, 2);
        let uo = asym_sum(u, w, true, 1, 2);
        let ve = asym_sum(v, w, true, 0, 2);
        let vo = asym_sum(v, w, true, 1, 2);
        let theta = zeta - PI / 4.0;
        let (s, c) = theta.sin_cos();
        let z4 = z.sqrt().sqrt();
        let pre = 1.0 / PI.sqrt();
        let ai = pre / z4 * (c * ue + s * uo);
        let aip = pre * z4 * (s * ve - c * vo);
        (ai, aip)
    }
}

// ---------------------------------------------------------------------------
// table + local Taylor

fn table() -> &'static Vec<(f64, f64)> {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
        (0..n)
            .map(|j| airy_series(TABLE_LO + j as f64 * TABLE_STEP))
            .collect()
    })
}

#[inline]
fn airy_table(x: f64) -> (f64, f64) {
    let tab = table();
    let j = ((x - TABLE_LO) / TABLE_STEP).round() as usize;
    let j = j.min(tab.len() - 1);
    let x0 = TABLE_LO + j as f64 * TABLE_STEP;
    let h = x - x0;
    let (a0, a1) = tab[j];
    if h == 0.0 {
        return (a0, a1);
    }
    // a_{k+2} = (x0 a_k + a_{k-1}) / ((k+1)(k+2))
    let scale = a0.abs() + a1.abs();
    let mut am1 = 0.0;
    let mut ak = a0;
    let mut ak1 = a1;
    let mut hk = 1.0;
    let mut val = a0;
    let mut der = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        // add term k+1
        let hk1 = hk * h;
        val += ak1 * hk1;
        der += (kf + 1.0) * ak1 * hk;
        let ak2 = (x0 * ak + am1) / ((kf + 1.0) * (kf + 2.0));
        am1 = ak;
        ak = ak1;
        ak1 = ak2;
        hk = hk1;
        if k > 3 && (ak1 * hk * h).abs() < 1e-18 * scale && (ak * hk).abs() < 1e-18 * scale {
            break;
        }
    }
    (val, der)
}

// ---------------------------------------------------------------------------
// aisq and its tail integral

/// Coefficient series for `B^2 - A^2` and `AB - 3 zeta (B^2 - A^2)` in powers
/// of `1/zeta`, where `A`, `B` are the `u`/`v` sums for positive argument.
fn product_coefficients() -> &'static (Vec<f64>, Vec<f64>) {
    static PC: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    PC.get_or_init(|| {
        let (u, v) = uv_coefficients();
        let m = 60;
        let a: Vec<f64> = (0..=m + 1)
            .map(|k| if k % 2 == 0 { u[k] } else { -u[k] })
            .collect();
        let b: Vec<f64> = (0..=m + 1)
            .map(|k| if k % 2 == 0 { v[k] } else { -v[k] })
            .collect();
        let mut d = vec![0.0; m + 2];
        let mut c = vec![0.0; m + 2];
        for s in 0..=m + 1 {
            for i in 0..=s {
                d[s] += b[i] * b[s - i] - a[i] * a[s - i];
                c[s] += a[i] * b[s - i];
            }
        }
        let p: Vec<f64> = (0..=m).map(|s| c[s] - 3.0 * d[s + 1]).collect();
        (d, p)
    })
}

fn positive_series(coef: &[f64], w: f64) -> f64 {
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for (k, &ck) in coef.iter().enumerate().skip(1) {
        let term = ck * w.powi(k as i32);
        if term.abs() > prev {
            break;
        }
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        prev = term.abs();
    }
    sum
}

/// `log(aisq(y))`, finite for all finite `y`.
pub fn log_aisq(y: f64) -> f64 {
    if y > TABLE_HI {
        let zeta = 2.0 / 3.0 * y * y.sqrt();
        let (d, _) = product_coefficients();
        let s = positive_series(d, 1.0 / zeta);
        -2.0 * zeta + 0.5 * y.ln() - (4.0 * PI).ln() + s.ln()
    } else {
        aisq_value(y).ln()
    }
}

/// Unchecked `Ai'(y)^2 - y Ai(y)^2`.
#[inline]
pub fn aisq_value(y: f64) -> f64 {
    if y > TABLE_HI {
        log_aisq(y).exp()
    } else {
        let (a, ap) = airy(y);
        ap * ap - y * a * a
    }
}

/// `aisq(y) = Ai'(y)^2 - y Ai(y)^2 = int_y^inf Ai(x)^2 dx`.
pub fn aisq(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(KpzError::Domain {
            func: "aisq",
            value: y,
        });
    }
    Ok(aisq_value(y))
}

/// Unchecked tail integral `int_y^inf aisq(r) dr`.
pub fn aisq_tail_value(y: f64) -> f64 {
    if y > TABLE_HI {
        let zeta = 2.0 / 3.0 * y * y.sqrt();
        let (_, p) = product_coefficients();
        let s = positive_series(p, 1.0 / zeta);
        (-2.0 * zeta).exp() / (12.0 * PI) * s
    } else {
        let (a, ap) = airy(y);
        (2.0 * y * y * a * a - 2.0 * y * ap * ap - a * ap) / 3.0
    }
}

/// `g(y) = (2y^2 Ai^2 - 2y Ai'^2 - Ai Ai') / 3 = int_y^inf aisq(r) dr`.
pub fn aisq_tail_integral(y: f64) -> Result<f64> {
    if !y.is_finite() {
        return Err(KpzError::Domain {
            func: "aisq_tail_integral",
            value: y,
        });
    }
    Ok(aisq_tail_value(y))
}

/// Smallest `y >= 0` on a 1/64 grid with `aisq(y) < level`.
pub fn aisq_threshold(level: f64) -> f64 {
    let target = level.ln();
    let mut y = 0.0;
    while log_aisq(y) >= target {
        y += 1.0 / 64.0;
    }
    y
}

// ---------------------------------------------------------------------------
// gamma

const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

/// Unchecked `log Gamma(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut z = x;
    let mut prod = 1.0;
    while z < 15.0 {
        prod *= z;
        z += 1.0;
    }
    let z2 = 1.0 / (z * z);
    let mut series = 0.0;
    let mut zp = 1.0 / z;
    for c in STIRLING {
        series += c * zp;
        zp *= z2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series - prod.ln()
}

/// `log Gamma(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(KpzError::Domain {
            func: "log_gamma",
            value: x,
        });
    }
    Ok(ln_gamma(x))
}

/// `Gamma(x)` for `x > 0`.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_matches_origin_constants() {
        let (a, ap) = airy_series(0.0);
        assert_eq!(a, 0.3550280538878172);
        assert_eq!(ap, -0.2588194037928068);
    }

    #[test]
    fn table_and_series_agree() {
        let mut x = -12.0;
        while x <= 9.0 {
            let (a, ap) = airy_table(x);
            let (b, bp) = airy_series(x);
            let scale = b.abs().max(bp.abs());
            assert!((a - b).abs() <= 2e-15 * scale, "x={x}");
            assert!((ap - bp).abs() <= 2e-15 * scale, "x={x}");
            x += 0.0371;
        }
    }

    #[test]
    fn stirling_shift_is_consistent() {
        for &x in &[0.3, 1.7, 4.2, 14.9, 15.1, 40.0] {
            let lhs = ln_gamma(x + 1.0) - ln_gamma(x);
            assert!((lhs - x.ln()).abs() < 1e-13, "x={x}");
        }
    }
}
