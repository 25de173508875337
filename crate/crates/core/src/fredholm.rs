//! Nystrom discretization of `K_{s,t}` on `L^2(R>=0)`.
//!
//! The symmetrized matrix is assembled in factored form
//! `M^{(j)}(s) = A diag(d_j(s)) A^T` with `A[i,k] = sqrt(w_i omega_k) Ai(x_i + r_k)`,
//! so `A` depends on `t` and the grids only and every `s`-derivative of the
//! discretized operator is exact.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KpzError, Result};
use crate::kernel::{r_grid, weight_taylor, Kernel, KernelParams, RGrid, RGridSpec};
use crate::quadrature::{log_integral_unimodal, rule, LogIntegralSpec};
use crate::specfun::{airy, aisq_threshold, ln_gamma, log_aisq};

pub const DEFAULT_NODES: usize = 300;
/// `aisq(x_max - shift) < TRUNCATION_LEVEL`.
pub const TRUNCATION_LEVEL: f64 = 1e-28;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub x_max: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub node_count: usize,
}

fn split_even(total: usize, parts: usize) -> Vec<usize> {
    let base = total / parts;
    let extra = total % parts;
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

fn append_region(
    lo: f64,
    hi: f64,
    count: usize,
    nodes: &mut Vec<f64>,
    weights: &mut Vec<f64>,
) -> Result<()> {
    if count == 0 {
        return Ok(());
    }
    let panels = count.div_ceil(20);
    let h = (hi - lo) / panels as f64;
    for (p, q) in split_even(count, panels).into_iter().enumerate() {
        let a = lo + p as f64 * h;
        let b = if p + 1 == panels { hi } else { a + h };
        let r = rule(q)?;
        for (x, w) in r.mapped(a, b) {
            nodes.push(x);
            weights.push(w);
        }
    }
    Ok(())
}

/// Composite Gauss-Legendre nodes on `[0, x_max]`.
///
/// The core region `[0, x_a]`, `x_a = x_* + max(shift_hint, 0)` with
/// `aisq(x_*) < 1e-28`, carries `node_count` nodes with doubled density on
/// `[0, 4]`. For small `t` the diagonal `K(x,x)` decays only like
/// `s e^{-c x + c^3/12}`, `c = t^{1/3}`, so a coarse tail region `[x_a, x_b]`
/// of GL-20 panels is appended, with `x_b` where that envelope is `e^{-37}`.
pub fn build_discretization(t: f64, shift_hint: f64, node_count: usize) -> Result<Discretization> {
    if !(20..=2000).contains(&node_count) {
        return Err(KpzError::Parameter(format!(
            "node_count {node_count} outside 20..=2000"
        )));
    }
    if !(t > 0.0) {
        return Err(KpzError::Parameter(format!("t must be positive, got {t}")));
    }
    let c = t.cbrt();
    let shift = shift_hint.max(0.0);
    let x_a = aisq_threshold(TRUNCATION_LEVEL) + shift;
    let x_b = shift + (c * c * c / 12.0 + 37.0) / c;
    let dense = x_a.min(4.0);
    let n_dense = ((2.0 * dense * node_count as f64) / (dense + x_a)).round() as usize;
    let n_dense = n_dense.clamp(1, node_count - 1);
    let mut nodes = Vec::with_capacity(node_count);
    let mut weights = Vec::with_capacity(node_count);
    append_region(0.0, dense, n_dense, &mut nodes, &mut weights)?;
    append_region(dense, x_a, node_count - n_dense, &mut nodes, &mut weights)?;
    let mut x_max = x_a;
    if x_b > x_a {
        let panels = ((x_b - x_a) * c / 8.0).ceil() as usize;
        append_region(x_a, x_b, 20 * panels, &mut nodes, &mut weights)?;
        x_max = x_b;
    }
    let node_count = nodes.len();
    Ok(Discretization {
        x_max,
        nodes,
        weights,
        node_count,
    })
}

/// Discretization sized for Laplace variables up to `s_max`: the domain is
/// extended by `log(s_max)/t^{1/3}`; the node count grows with the domain
/// once the shift exceeds 8.
pub fn discretization_for(t: f64, s_max: f64, base_nodes: usize) -> Result<Discretization> {
    let shift = s_max.ln().max(0.0) / t.cbrt();
    let base = aisq_threshold(TRUNCATION_LEVEL) + 8.0;
    let nodes = ((base_nodes as f64) * ((base + shift) / base).max(1.0)).round() as usize;
    build_discretization(t, shift, nodes.min(2000))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub matrix_trace: f64,
    pub params: KernelParams,
}

/// Derivatives of `D(s) = det(I - M(s))` at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetJet {
    pub s: f64,
    pub log_det: f64,
    /// `D^{(k)}(s) / D(s)` for `k = 0..=n`.
    pub scaled: Vec<f64>,
}

impl DetJet {
    /// `D^{(k)}(s)`.
    pub fn derivative(&self, k: usize) -> f64 {
        self.scaled[k] * self.log_det.exp()
    }

    pub fn derivatives(&self) -> Vec<f64> {
        (0..self.scaled.len()).map(|k| self.derivative(k)).collect()
    }
}

/// Factored Nystrom engine for one `t`, one spatial discretization and a
/// fixed range of `s` and derivative orders.
pub struct Engine {
    pub t: f64,
    pub disc: Discretization,
    pub grid: RGrid,
    pub s_min: f64,
    pub s_max: f64,
    pub max_order: usize,
    a: DMatrix<f64>,
    at: DMatrix<f64>,
}

impl Engine {
    pub fn new(
        t: f64,
        disc: Discretization,
        s_min: f64,
        s_max: f64,
        max_order: usize,
    ) -> Result<Self> {
        if !(s_min > 0.0) || !(s_max >= s_min) {
            return Err(KpzError::Parameter(format!(
                "invalid s-range [{s_min}, {s_max}]"
            )));
        }
        let spec = RGridSpec::new(t, s_min, s_max, max_order);
        let grid = r_grid(&spec)?;
        let n = disc.node_count;
        let m = grid.r.len();
        let mut data = vec![0.0; n * m];
        data.par_chunks_mut(n).enumerate().for_each(|(k, col)| {
            let r = grid.r[k];
            let sw = grid.w[k].sqrt();
            for (i, c) in col.iter_mut().enumerate() {
                *c = disc.weights[i].sqrt() * sw * airy(disc.nodes[i] + r).0;
            }
        });
        let a = DMatrix::from_vec(n, m, data);
        let at = a.transpose();
        Ok(Engine {
            t,
            disc,
            grid,
            s_min,
            s_max,
            max_order,
            a,
            at,
        })
    }

    /// Engine sized for a single parameter point.
    pub fn for_params(
        params: &KernelParams,
        disc: &Discretization,
        max_order: usize,
    ) -> Result<Self> {
        Engine::new(params.t, disc.clone(), params.s, params.s, max_order)
    }

    pub fn node_count(&self) -> usize {
        self.disc.node_count
    }

    pub fn r_count(&self) -> usize {
        self.grid.r.len()
    }

    fn check_s(&self, s: f64, order: usize) -> Result<()> {
        if !(s > 0.0) {
            return Err(KpzError::Parameter(format!("s must be positive, got {s}")));
        }
        let tol = 1e-9;
        if s < self.s_min * (1.0 - tol) || s > self.s_max * (1.0 + tol) || order > self.max_order {
            return Err(KpzError::Parameter(format!(
                "s={s}, order={order} outside engine range [{}, {}] x 0..={}",
                self.s_min, self.s_max, self.max_order
            )));
        }
        Ok(())
    }

    /// `M^{(j)}(s) / j!`.
    pub fn taylor_matrix(&self, s: f64, j: usize) -> Result<DMatrix<f64>> {
        self.check_s(s, j)?;
        let d: Vec<f64> = self
            .grid
            .tau
            .iter()
            .map(|&tau| weight_taylor(s, tau, j))
            .collect();
        let mut b = self.a.clone();
        for (k, mut col) in b.column_iter_mut().enumerate() {
            col *= d[k];
        }
        let mut m = &b * &self.at;
        symmetrize(&mut m);
        Ok(m)
    }

    /// `M^{(j)}(s)`.
    pub fn matrix(&self, s: f64, j: usize) -> Result<DMatrix<f64>> {
        let f = ln_gamma(j as f64 + 1.0).exp();
        Ok(self.taylor_matrix(s, j)? * f)
    }

    pub fn determinant(&self, s: f64) -> Result<f64> {
        Ok(self.log_determinant(s)?.exp())
    }

    pub fn log_determinant(&self, s: f64) -> Result<f64> {
        let m = self.taylor_matrix(s, 0)?;
        let g = identity_minus(&m);
        log_det_lu(g)
    }

    /// Derivatives `D^{(k)}(s)`, `k = 0..=n`, by exact differentiation of the
    /// discretized log-determinant.
    pub fn det_jet(&self, s: f64, n: usize) -> Result<DetJet> {
        self.check_s(s, n)?;
        let mats: Vec<DMatrix<f64>> = (0..=n)
            .map(|j| self.taylor_matrix(s, j))
            .collect::<Result<_>>()?;
        det_jet_from_taylor(s, &mats)
    }

    pub fn spectrum(&self, s: f64, order: usize) -> Result<SpectralData> {
        let m = self.matrix(s, order)?;
        let trace = m.trace();
        let eig = SymmetricEigen::try_new(m, 1e-15, 10_000)
            .ok_or_else(|| KpzError::Numerical("symmetric eigensolver did not converge".into()))?;
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(SpectralData {
            eigenvalues: ev,
            matrix_trace: trace,
            params: KernelParams {
                s,
                t: self.t,
                order,
            },
        })
    }

    /// `d^m/ds^m e_L(lambda(s))` for `m = 0..=n`, `L = 0..=l_max`, returned as
    /// `out[m][L]`.
    pub fn exterior_jets(&self, s: f64, n: usize, l_max: usize) -> Result<Vec<Vec<f64>>> {
        self.check_s(s, n)?;
        let m0 = self.taylor_matrix(s, 0)?;
        let eig = SymmetricEigen::try_new(m0, 1e-15, 10_000)
            .ok_or_else(|| KpzError::Numerical("symmetric eigensolver did not converge".into()))?;
        let q = eig.eigenvectors;
        let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let qt = q.transpose();
        let bs: Vec<DMatrix<f64>> = (1..=n)
            .map(|j| {
                let mj = self.taylor_matrix(s, j)?;
                let mut b = &qt * (&mj * &q);
                symmetrize(&mut b);
                Ok(b)
            })
            .collect::<Result<_>>()?;
        Ok(exterior_jets_from_eigen(&lambda, &bs, n, l_max))
    }

    /// Both the determinant jet and the exterior-trace jets from one
    /// eigendecomposition.
    pub fn full_jet(&self, s: f64, n: usize, l_max: usize) -> Result<(DetJet, Vec<Vec<f64>>)> {
        self.check_s(s, n)?;
        let mats: Vec<DMatrix<f64>> = (0..=n)
            .map(|j| self.taylor_matrix(s, j))
            .collect::<Result<_>>()?;
        let eig = SymmetricEigen::try_new(mats[0].clone(), 1e-15, 10_000)
            .ok_or_else(|| KpzError::Numerical("symmetric eigensolver did not converge".into()))?;
        let q = &eig.eigenvectors;
        let lambda: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let qt = q.transpose();
        let bs: Vec<DMatrix<f64>> = mats[1..]
            .iter()
            .map(|mj| {
                let mut b = &qt * (mj * q);
                symmetrize(&mut b);
                b
            })
            .collect();
        // resolvent in the eigenbasis: Y_j = diag(1/(1-lambda)) B_j
        let mut log_det = 0.0;
        for &l in &lambda {
            if !(l < 1.0) {
                return Err(KpzError::Numerical(format!(
                    "eigenvalue {l} >= 1 at s={s}; I - M is singular"
                )));
            }
            log_det += (-l).ln_1p();
        }
        let ys: Vec<DMatrix<f64>> = bs
            .iter()
            .map(|b| {
                let mut y = b.clone();
                for (i, mut row) in y.row_iter_mut().enumerate() {
                    row *= 1.0 / (1.0 - lambda[i]);
                }
                y
            })
            .collect();
        let scaled = scaled_derivatives_from_y(&ys, n);
        let ext = exterior_jets_from_eigen(&lambda, &bs, n, l_max);
        Ok((DetJet { s, log_det, scaled }, ext))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

fn identity_minus(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut g = -m;
    for i in 0..g.nrows() {
        g[(i, i)] += 1.0;
    }
    g
}

fn log_det_lu(g: DMatrix<f64>) -> Result<f64> {
    let lu = g.lu();
    let u = lu.u();
    let mut log = 0.0;
    let mut sign = if lu.p().determinant::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            return Err(KpzError::Numerical("singular I - M in LU".into()));
        }
        if d < 0.0 {
            sign = -sign;
        }
        log += d.abs().ln();
    }
    if sign < 0.0 {
        return Err(KpzError::Numerical(
            "det(I - M) is negative; largest eigenvalue exceeds 1".into(),
        ));
    }
    Ok(log)
}

/// `sum_ij x_ij y_ji`.
fn pair_trace(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut sum = 0.0;
    for j in 0..n {
        let xc = x.column(j);
        for i in 0..n {
            sum += xc[i] * y[(j, i)];
        }
    }
    sum
}

/// Derivative jet from Taylor matrices `mats[j] = M^{(j)}(s)/j!`.
pub fn det_jet_from_taylor(s: f64, mats: &[DMatrix<f64>]) -> Result<DetJet> {
    let n = mats.len() - 1;
    let g = identity_minus(&mats[0]);
    let lu = g.clone().lu();
    let log_det = log_det_lu(g)?;
    let ys: Vec<DMatrix<f64>> = mats[1..]
        .iter()
        .map(|m| {
            lu.solve(m)
                .ok_or_else(|| KpzError::Numerical(format!("singular I - M at s={s}")))
        })
        .collect::<Result<_>>()?;
    let scaled = scaled_derivatives_from_y(&ys, n);
    Ok(DetJet { s, log_det, scaled })
}

/// Given `ys[j-1] = (I - M_0)^{-1} M_j`, returns `D^{(k)}/D` for `k = 0..=n`
/// using `log det(I - M(s+e)) - log det(I - M_0) = -sum_k tr(Y(e)^k)/k`.
fn scaled_derivatives_from_y(ys: &[DMatrix<f64>], n: usize) -> Vec<f64> {
    // powers[k][m] = coefficient of e^m in Y(e)^k, for k <= ceil(n/2)
    let half = n.div_ceil(2);
    let mut powers: Vec<Vec<Option<DMatrix<f64>>>> = vec![vec![None; n + 1]; half + 1];
    for m in 1..=n {
        powers[1][m] = Some(ys[m - 1].clone());
    }
    for k in 2..=half {
        // a partner factor has degree >= 1, so m <= n - 1 suffices
        for m in k..n {
            let mut acc: Option<DMatrix<f64>> = None;
            for j in 1..=(m + 1 - k) {
                if let Some(prev) = &powers[k - 1][m - j] {
                    let prod = &ys[j - 1] * prev;
                    acc = Some(match acc {
                        None => prod,
                        Some(a) => a + prod,
                    });
                }
            }
            powers[k][m] = acc;
        }
    }
    // traces of Y^k at degree m via pairings of lower powers
    let mut c = vec![0.0; n + 1];
    for k in 1..=n {
        for m in k..=n {
            let tr = if k == 1 {
                ys[m - 1].trace()
            } else {
                let k1 = k.div_ceil(2);
                let k2 = k - k1;
                let mut sum = 0.0;
                for m1 in k1..=(m - k2) {
                    let m2 = m - m1;
                    if let (Some(x), Some(y)) = (&powers[k1][m1], &powers[k2][m2]) {
                        sum += pair_trace(x, y);
                    }
                }
                sum
            };
            c[m] -= tr / k as f64;
        }
    }
    // exp of the log-det series: d_m = (1/m) sum_k k c_k d_{m-k}
    let mut d = vec![0.0; n + 1];
    d[0] = 1.0;
    for m in 1..=n {
        let mut acc = 0.0;
        for k in 1..=m {
            acc += k as f64 * c[k] * d[m - k];
        }
        d[m] = acc / m as f64;
    }
    let mut fact = 1.0;
    for (m, v) in d.iter_mut().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        *v *= fact;
    }
    d
}

/// Coefficients of `prod_i (1 + lambda_i z)` up to `z^{l_max}`.
pub fn elementary_symmetric(lambda: &[f64], l_max: usize) -> Vec<f64> {
    let mut e = vec![0.0; l_max + 1];
    e[0] = 1.0;
    for &l in lambda {
        for k in (1..=l_max).rev() {
            e[k] += l * e[k - 1];
        }
    }
    e
}

fn poly_mul(a: &[f64], b: &[f64], deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j > deg {
                break;
            }
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Bivariate expansion of `log det(I + z M(s+e))` in the eigenbasis of `M(s)`.
/// `bs[m-1]` is `Q^T (M^{(m)}/m!) Q`. Returns `out[m][L] = d^m/ds^m e_L`.
pub fn exterior_jets_from_eigen(
    lambda: &[f64],
    bs: &[DMatrix<f64>],
    n: usize,
    l_max: usize,
) -> Vec<Vec<f64>> {
    let nn = lambda.len();
    let kmax = n.min(l_max);
    // phi[a][i] = (-lambda_i)^{a-1}, a = 1..=l_max
    let mut phi = vec![vec![1.0; nn]; l_max + 1];
    for a in 2..=l_max {
        for i in 0..nn {
            phi[a][i] = phi[a - 1][i] * -lambda[i];
        }
    }
    let row_scaled = |v: &[f64], b: &DMatrix<f64>| {
        let mut x = b.clone();
        for (i, mut row) in x.row_iter_mut().enumerate() {
            row *= v[i];
        }
        x
    };
    // power jets P[k][(c, m)] for k <= ceil(kmax/2)
    type Jet = std::collections::BTreeMap<(usize, usize), DMatrix<f64>>;
    let half = kmax.div_ceil(2).max(1);
    let mut powers: Vec<Jet> = vec![Jet::new(); half + 1];
    if kmax >= 2 {
        for a in 1..=l_max {
            for m in 1..=n {
                powers[1].insert((a, m), row_scaled(&phi[a], &bs[m - 1]));
            }
        }
    }
    for k in 2..=half {
        let mut next = Jet::new();
        // S[(c', m)] = sum_j B_j P[k-1][(c', m - j)]
        let mut smap = Jet::new();
        for cp in (k - 1)..l_max.saturating_sub(1) {
            for m in k..n {
                let mut acc: Option<DMatrix<f64>> = None;
                for j in 1..=(m + 1 - k) {
                    if let Some(prev) = powers[k - 1].get(&(cp, m - j)) {
                        let prod = &bs[j - 1] * prev;
                        acc = Some(match acc {
                            None => prod,
                            Some(x) => x + prod,
                        });
                    }
                }
                if let Some(x) = acc {
                    smap.insert((cp, m), x);
                }
            }
        }
        for c in k..l_max {
            for m in k..n {
                let mut acc: Option<DMatrix<f64>> = None;
                for a in 1..=(c + 1 - k) {
                    if let Some(sx) = smap.get(&(c - a, m)) {
                        let term = row_scaled(&phi[a], sx);
                        acc = Some(match acc {
                            None => term,
                            Some(x) => x + term,
                        });
                    }
                }
                if let Some(x) = acc {
                    next.insert((c, m), x);
                }
            }
        }
        powers[k] = next;
    }
    // h[c][m] = sum_k (-1)^{k-1}/k tr(X^k)[c][m]
    let mut h = vec![vec![0.0; n + 1]; l_max + 1];
    for k in 1..=kmax {
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        for c in k..=l_max {
            for m in k..=n {
                let tr = if k == 1 {
                    let b = &bs[m - 1];
                    (0..nn).map(|i| phi[c][i] * b[(i, i)]).sum::<f64>()
                } else {
                    let k1 = k.div_ceil(2);
                    let k2 = k - k1;
                    let mut sum = 0.0;
                    for c1 in k1..=(c - k2) {
                        for m1 in k1..=(m - k2) {
                            if let (Some(x), Some(y)) =
                                (powers[k1].get(&(c1, m1)), powers[k2].get(&(c - c1, m - m1)))
                            {
                                sum += pair_trace(x, y);
                            }
                        }
                    }
                    sum
                };
                h[c][m] += sign * tr;
            }
        }
    }
    // E_m(z): exp of H in e, polynomial coefficients in z
    let hz: Vec<Vec<f64>> = (0..=n)
        .map(|m| (0..=l_max).map(|c| h[c][m]).collect())
        .collect();
    let mut em: Vec<Vec<f64>> = vec![vec![0.0; l_max + 1]; n + 1];
    em[0][0] = 1.0;
    for m in 1..=n {
        let mut acc = vec![0.0; l_max + 1];
        for j in 1..=m {
            let prod = poly_mul(&hz[j], &em[m - j], l_max);
            for (a, p) in acc.iter_mut().zip(prod) {
                *a += j as f64 * p;
            }
        }
        em[m] = acc.into_iter().map(|v| v / m as f64).collect();
    }
    let e = elementary_symmetric(lambda, l_max);
    let mut out = Vec::with_capacity(n + 1);
    let mut fact = 1.0;
    for (m, poly) in em.iter().enumerate() {
        if m > 0 {
            fact *= m as f64;
        }
        let total = poly_mul(&e, poly, l_max);
        out.push(total.into_iter().map(|v| v * fact).collect());
    }
    out
}

// ---------------------------------------------------------------------------
// operation-level API

pub fn nystrom_matrix(params: KernelParams, disc: &Discretization) -> Result<DMatrix<f64>> {
    params.validate()?;
    let eng = Engine::for_params(&params, disc, params.order)?;
    eng.matrix(params.s, params.order)
}

/// `det(I - M)`, the discretized `E[exp(-s Z(2t,0) e^{t/12})]`.
pub fn laplace_transform_value(params: KernelParams, disc: &Discretization) -> Result<f64> {
    params.validate()?;
    if params.order != 0 {
        return Err(KpzError::Parameter(
            "laplace_transform_value needs order 0".into(),
        ));
    }
    let eng = Engine::for_params(&params, disc, 0)?;
    eng.determinant(params.s)
}

pub fn spectrum(params: KernelParams, disc: &Discretization) -> Result<SpectralData> {
    params.validate()?;
    let eng = Engine::for_params(&params, disc, params.order)?;
    eng.spectrum(params.s, params.order)
}

/// `tr(K^{wedge L})` for `L = 1..=l_max` as elementary symmetric polynomials
/// of the Nystrom eigenvalues.
pub fn exterior_traces(
    params: KernelParams,
    disc: &Discretization,
    l_max: usize,
) -> Result<Vec<f64>> {
    if params.order != 0 {
        return Err(KpzError::Parameter("exterior_traces needs order 0".into()));
    }
    if l_max == 0 || l_max > disc.node_count {
        return Err(KpzError::Parameter(format!(
            "l_max {l_max} outside 1..={}",
            disc.node_count
        )));
    }
    let sd = spectrum(params, disc)?;
    Ok(elementary_symmetric(&sd.eigenvalues, l_max)[1..].to_vec())
}

/// `d^k/ds^k det(I - M(s))` for `k = 1..=n`.
pub fn det_s_derivatives(
    params: KernelParams,
    disc: &Discretization,
    n: usize,
) -> Result<Vec<f64>> {
    params.validate()?;
    if n == 0 || n > 8 {
        return Err(KpzError::Parameter(format!(
            "derivative count {n} outside 1..=8"
        )));
    }
    let eng = Engine::for_params(&params, disc, n)?;
    let jet = eng.det_jet(params.s, n)?;
    Ok(jet.derivatives()[1..].to_vec())
}

/// Log of the weight `|d^n_s v(s,t,r)|` in the `e^{-rt}` normalization.
fn log_abs_weight(s: f64, t: f64, r: f64, n: usize) -> f64 {
    let ls = s.ln();
    let x = -r * t;
    let m = ls.max(x);
    let lden = m + ((ls - m).exp() + (x - m).exp()).ln();
    if n == 0 {
        ls - lden
    } else {
        ln_gamma(n as f64 + 1.0) + x - (n as f64 + 1.0) * lden
    }
}

/// `log |tr K^{(n)}_{s,t}|` from the single integral against `aisq`.
pub fn log_trace_exact(params: KernelParams) -> Result<f64> {
    params.validate()?;
    let (s, t, n) = (params.s, params.t, params.order);
    let c2 = t.powf(2.0 / 3.0);
    let centre = -s.ln() / t;
    let guess = centre.min(((n * n) as f64 / 4.0).max(0.25));
    let span = 6.0 + 40.0 / t;
    let spec = LogIntegralSpec {
        scan_lo: guess - span,
        scan_hi: guess + span,
        width: (2.0 / t).min(1.0).min(0.5 / c2),
        left_rate: n.max(1) as f64 * t,
        right_rate: t.max(1.0),
        upper: None,
    };
    let li = log_integral_unimodal(|r| log_abs_weight(s, t, r, n) + log_aisq(c2 * r), &spec)?;
    Ok(li + c2.ln())
}

/// `tr K^{(n)}_{s,t} = t^{2/3} int d^n_s v(s,t,r) aisq(t^{2/3} r) dr`.
pub fn trace_exact(params: KernelParams) -> Result<f64> {
    let sign = if params.order == 0 || params.order % 2 == 1 {
        1.0
    } else {
        -1.0
    };
    Ok(sign * log_trace_exact(params)?.exp())
}

/// Pointwise kernel bound to the engine grid (values coincide with the matrix
/// entries divided by `sqrt(w_i w_j)`).
pub fn engine_kernel(engine: &Engine, s: f64, order: usize) -> Result<Kernel> {
    Kernel::new(KernelParams::new(s, engine.t, order)?, engine.grid.clone())
}
