//! Matrix-free coefficient operator and majorization constants.
//!
//! Stacked variables are `x1 = [p_1^s; c_1^s; ...; p_M^s; c_M^s]` and
//! `x2 = [p_1^r; c_1^r; ...]`, every block of length `L`. For a (transmit `l`,
//! receive `k`) pair and a zone cell the block matrix `B` satisfies
//! `x2^H B x1 = ` masked term, and
//!
//! `Omega = sum_t w_t conj(x2t^H B_t x1t) B_t + beta' sum_i conj(p_i^r^H p_i^s) M_i`.
//!
//! Each sum `sum_{tau,omega} b(tau, omega) J_tau Diag(h_omega)` is applied as
//! `sum_tau J_tau (g_tau o v)` with `g_tau` obtained from one inverse FFT.

use crate::error::{param, Result};
use crate::fft;
use crate::objective::{dot, Model};
use crate::seqcore::CaseKind;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

type C = Complex64;

/// Stacked `[p_1; c_1; ...; p_M; c_M]`, each block of length `len`.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    pub m: usize,
    pub len: usize,
    pub data: Vec<C>,
}

impl Stack {
    pub fn zeros(m: usize, len: usize) -> Self {
        Self { m, len, data: vec![C::new(0.0, 0.0); 2 * m * len] }
    }

    pub fn from_parts(p: &[Vec<C>], c: &[Vec<C>]) -> Self {
        let (m, len) = (p.len(), p[0].len());
        let mut s = Self::zeros(m, len);
        for i in 0..m {
            s.p_mut(i).copy_from_slice(&p[i]);
            s.c_mut(i).copy_from_slice(&c[i]);
        }
        s
    }

    /// `x1` built from transmit peaks and the model's transmit curtains.
    pub fn tx(model: &Model, ps: &[Vec<C>]) -> Self {
        let c: Vec<Vec<C>> = (0..model.cfg.m).map(|i| model.curtain_tx(i).to_vec()).collect();
        Self::from_parts(ps, &c)
    }

    /// `x2` built from receive peaks and the model's receive curtains.
    pub fn rx(model: &Model, pr: &[Vec<C>]) -> Self {
        let c: Vec<Vec<C>> = (0..model.cfg.m).map(|i| model.curtain_rx(i).to_vec()).collect();
        Self::from_parts(pr, &c)
    }

    pub fn p(&self, i: usize) -> &[C] {
        &self.data[2 * i * self.len..(2 * i + 1) * self.len]
    }

    pub fn c(&self, i: usize) -> &[C] {
        &self.data[(2 * i + 1) * self.len..(2 * i + 2) * self.len]
    }

    pub fn p_mut(&mut self, i: usize) -> &mut [C] {
        &mut self.data[2 * i * self.len..(2 * i + 1) * self.len]
    }

    pub fn c_mut(&mut self, i: usize) -> &mut [C] {
        &mut self.data[(2 * i + 1) * self.len..(2 * i + 2) * self.len]
    }

    pub fn peaks(&self) -> Vec<Vec<C>> {
        (0..self.m).map(|i| self.p(i).to_vec()).collect()
    }

    pub fn curtains(&self) -> Vec<Vec<C>> {
        (0..self.m).map(|i| self.c(i).to_vec()).collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// `sum_{tau,omega} b(tau, omega) J_tau Diag(h_omega)` held as its delay
/// diagonals `g_tau`.
#[derive(Debug, Clone)]
pub struct QOp {
    tau_max: i64,
    periodic: bool,
    /// `g[tau + tau_max][i]`, local sample index `i`.
    g: Vec<Vec<C>>,
}

impl QOp {
    /// `b` is a zone grid in row-major order (delay outer).
    pub fn new(model: &Model, b: &[C]) -> Self {
        let zone = model.zone();
        let (n, len, start) = (model.n, model.len, model.start);
        let (t, w) = (zone.tau_max as i64, zone.omega_max as i64);
        let nw = zone.n_omega();
        let g = (0..zone.n_tau())
            .map(|row| {
                let mut buf = vec![C::new(0.0, 0.0); n];
                for (j, om) in (-w..=w).enumerate() {
                    buf[om.rem_euclid(n as i64) as usize] += b[row * nw + j];
                }
                fft::inverse(&mut buf);
                (0..len).map(|i| buf[(start + i as i64 + 1).rem_euclid(n as i64) as usize]).collect()
            })
            .collect();
        Self { tau_max: t, periodic: zone.case == CaseKind::Periodic, g }
    }

    fn target(&self, i: usize, tau: i64, len: usize) -> Option<usize> {
        let j = i as i64 + tau;
        if self.periodic {
            Some(j.rem_euclid(len as i64) as usize)
        } else if j >= 0 && j < len as i64 {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Accumulates `Q v` into `out`.
    pub fn apply_into(&self, v: &[C], out: &mut [C]) {
        let len = v.len();
        for (row, g) in self.g.iter().enumerate() {
            let tau = row as i64 - self.tau_max;
            for i in 0..len {
                if let Some(j) = self.target(i, tau, len) {
                    out[j] += g[i] * v[i];
                }
            }
        }
    }

    /// Accumulates `Q^H v` into `out`.
    pub fn adjoint_into(&self, v: &[C], out: &mut [C]) {
        let len = v.len();
        for (row, g) in self.g.iter().enumerate() {
            let tau = row as i64 - self.tau_max;
            for i in 0..len {
                if let Some(j) = self.target(i, tau, len) {
                    out[i] += g[i].conj() * v[j];
                }
            }
        }
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); v.len()];
        self.apply_into(v, &mut out);
        out
    }

    pub fn adjoint(&self, v: &[C]) -> Vec<C> {
        let mut out = vec![C::new(0.0, 0.0); v.len()];
        self.adjoint_into(v, &mut out);
        out
    }

    /// `sum_tau max_{i in S, i + tau in S} |g_tau[i]|`, a bound on the
    /// spectral norm of the operator restricted to the index set `S`.
    pub fn norm_bound(&self, support: std::ops::Range<usize>, len: usize) -> f64 {
        self.g
            .iter()
            .enumerate()
            .map(|(row, g)| {
                let tau = row as i64 - self.tau_max;
                support
                    .clone()
                    .filter(|&i| self.target(i, tau, len).is_some_and(|j| support.contains(&j)))
                    .map(|i| g[i].norm())
                    .fold(0.0, f64::max)
            })
            .sum()
    }

    /// Largest entry magnitude.
    pub fn max_entry(&self) -> f64 {
        self.g.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `Omega` at a fixed expansion point, stored per block.
#[derive(Debug, Clone)]
pub struct OmegaOps {
    m: usize,
    /// Auto pairs: coefficient `alpha W conj(a)` (zero at the origin).
    auto: Vec<QOp>,
    /// `alpha varrho conj(a(0, 0))`: the extra origin weight of the
    /// peak-curtain blocks, applied as a multiple of the identity.
    origin: Vec<C>,
    /// Cross pairs at `l * M + k`: coefficient `(1 - alpha) conj(a)`.
    cross: Vec<Option<QOp>>,
    /// `beta' conj(p_i^r^H p_i^s)`.
    pen: Vec<C>,
}

impl OmegaOps {
    /// Coefficients from masked terms at the expansion point `(x1t, x2t)`.
    pub fn new(model: &Model, x1t: &Stack, x2t: &Stack) -> Self {
        let (ps, cs, pr, cr) = (x1t.peaks(), x1t.curtains(), x2t.peaks(), x2t.curtains());
        let terms = model.terms_with(&ps, &cs, &pr, &cr, None);
        Self::from_terms(model, &terms, &ps, &pr)
    }

    /// As [`OmegaOps::new`] from already computed terms.
    pub fn from_terms(model: &Model, terms: &[Vec<C>], ps: &[Vec<C>], pr: &[Vec<C>]) -> Self {
        let m = model.cfg.m;
        let alpha = model.cfg.alpha;
        let o = model.origin();
        let built: Vec<(Option<QOp>, C)> = (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (l, k) = (idx / m, idx % m);
                if l == k {
                    let mut b: Vec<C> = terms[idx].iter().map(|a| alpha * a.conj()).collect();
                    let extra = model.cfg.varrho * b[o];
                    b[o] = C::new(0.0, 0.0);
                    (Some(QOp::new(model, &b)), extra)
                } else if alpha < 1.0 {
                    let b: Vec<C> = terms[idx].iter().map(|a| (1.0 - alpha) * a.conj()).collect();
                    (Some(QOp::new(model, &b)), C::new(0.0, 0.0))
                } else {
                    (None, C::new(0.0, 0.0))
                }
            })
            .collect();
        let mut auto = Vec::with_capacity(m);
        let mut origin = Vec::with_capacity(m);
        let mut cross = Vec::with_capacity(m * m);
        for (idx, (q, extra)) in built.into_iter().enumerate() {
            if idx / m == idx % m {
                auto.push(q.expect("auto block"));
                origin.push(extra);
                cross.push(None);
            } else {
                cross.push(q);
            }
        }
        let bp = if model.cfg.symmetric { 0.0 } else { model.cfg.beta_prime() };
        let pen = (0..m).map(|i| bp * dot(&ps[i], &pr[i])).collect();
        Self { m, auto, origin, cross, pen }
    }

    /// Rows `p_k` of `Omega v`.
    pub fn p_rows(&self, v: &Stack) -> Vec<Vec<C>> {
        (0..self.m).into_par_iter().map(|k| self.p_row(v, k)).collect()
    }

    fn p_row(&self, v: &Stack, k: usize) -> Vec<C> {
        let len = v.len;
        let mut out = vec![C::new(0.0, 0.0); len];
        let sum: Vec<C> = v.p(k).iter().zip(v.c(k)).map(|(a, b)| a + b).collect();
        self.auto[k].apply_into(&sum, &mut out);
        for i in 0..len {
            out[i] += self.origin[k] * v.c(k)[i] + self.pen[k] * v.p(k)[i];
        }
        self.add_cross(v, k, &mut out);
        out
    }

    fn add_cross(&self, v: &Stack, k: usize, out: &mut [C]) {
        for l in 0..self.m {
            if let Some(q) = &self.cross[l * self.m + k] {
                let s: Vec<C> = v.p(l).iter().zip(v.c(l)).map(|(a, b)| a + b).collect();
                q.apply_into(&s, out);
            }
        }
    }

    fn add_cross_adj(&self, v: &Stack, l: usize, out: &mut [C]) {
        for k in 0..self.m {
            if let Some(q) = &self.cross[l * self.m + k] {
                let s: Vec<C> = v.p(k).iter().zip(v.c(k)).map(|(a, b)| a + b).collect();
                q.adjoint_into(&s, out);
            }
        }
    }

    /// Rows `p_l` of `Omega^H v`.
    pub fn p_rows_adjoint(&self, v: &Stack) -> Vec<Vec<C>> {
        (0..self.m).into_par_iter().map(|l| self.p_row_adj(v, l)).collect()
    }

    fn p_row_adj(&self, v: &Stack, l: usize) -> Vec<C> {
        let len = v.len;
        let mut out = vec![C::new(0.0, 0.0); len];
        let sum: Vec<C> = v.p(l).iter().zip(v.c(l)).map(|(a, b)| a + b).collect();
        self.auto[l].adjoint_into(&sum, &mut out);
        for i in 0..len {
            out[i] += self.origin[l].conj() * v.c(l)[i] + self.pen[l].conj() * v.p(l)[i];
        }
        self.add_cross_adj(v, l, &mut out);
        out
    }

    /// Full `Omega v`.
    pub fn apply(&self, v: &Stack) -> Stack {
        let mut out = Stack::zeros(self.m, v.len);
        let rows: Vec<(Vec<C>, Vec<C>)> = (0..self.m)
            .into_par_iter()
            .map(|k| {
                let mut c_row = self.auto[k].apply(v.p(k));
                for (x, y) in c_row.iter_mut().zip(v.p(k)) {
                    *x += self.origin[k] * y;
                }
                self.add_cross(v, k, &mut c_row);
                (self.p_row(v, k), c_row)
            })
            .collect();
        for (k, (p, c)) in rows.into_iter().enumerate() {
            out.p_mut(k).copy_from_slice(&p);
            out.c_mut(k).copy_from_slice(&c);
        }
        out
    }

    /// Full `Omega^H v`.
    pub fn apply_adjoint(&self, v: &Stack) -> Stack {
        let mut out = Stack::zeros(self.m, v.len);
        let rows: Vec<(Vec<C>, Vec<C>)> = (0..self.m)
            .into_par_iter()
            .map(|l| {
                let mut c_row = self.auto[l].adjoint(v.p(l));
                for (x, y) in c_row.iter_mut().zip(v.p(l)) {
                    *x += self.origin[l].conj() * y;
                }
                self.add_cross_adj(v, l, &mut c_row);
                (self.p_row_adj(v, l), c_row)
            })
            .collect();
        for (l, (p, c)) in rows.into_iter().enumerate() {
            out.p_mut(l).copy_from_slice(&p);
            out.c_mut(l).copy_from_slice(&c);
        }
        out
    }

    /// Bound on `lambda_max(Omega_pp + Omega_pp^H)` over the free samples:
    /// block norms bounded by [`QOp::norm_bound`], then the largest row sum
    /// of the symmetric matrix of block bounds.
    pub fn pp_hermitian_bound(&self, model: &Model) -> f64 {
        let m = self.m;
        let sup = model.support();
        let len = model.len;
        let nb: Vec<f64> = (0..m * m)
            .map(|idx| {
                let (l, k) = (idx / m, idx % m);
                if l == k {
                    self.auto[l].norm_bound(sup.clone(), len) + self.pen[l].norm()
                } else {
                    self.cross[idx].as_ref().map_or(0.0, |q| q.norm_bound(sup.clone(), len))
                }
            })
            .collect();
        // block (row k, col l) of Omega_pp is the (tx l -> rx k) operator
        (0..m)
            .map(|k| (0..m).map(|l| nb[l * m + k] + nb[k * m + l]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Upper bound on the largest entry magnitude of `Omega + Omega^H`.
    pub fn max_entry_bound(&self) -> f64 {
        let mut e: f64 = 0.0;
        for k in 0..self.m {
            e = e.max(self.auto[k].max_entry() + self.origin[k].norm() + self.pen[k].norm());
        }
        for q in self.cross.iter().flatten() {
            e = e.max(q.max_entry());
        }
        2.0 * e
    }
}

/// Matrix-free `Omega_{x1t, x2t} v`.
pub fn apply_omega(model: &Model, x1t: &Stack, x2t: &Stack, probe: &Stack) -> Stack {
    OmegaOps::new(model, x1t, x2t).apply(probe)
}

/// Matrix-free `Omega_{x1t, x2t}^H v`.
pub fn apply_omega_adjoint(model: &Model, x1t: &Stack, x2t: &Stack, probe: &Stack) -> Stack {
    OmegaOps::new(model, x1t, x2t).apply_adjoint(probe)
}

/// `max{alpha 2L, (1 - alpha) 2L, beta' L} (1 + 1e-6)`; the penalty term is
/// absent for symmetric configurations.
pub fn lambda_bound(cfg: &crate::objective::DesignConfig, len: usize) -> f64 {
    let l = len as f64;
    let mut v = (cfg.alpha * 2.0 * l).max((1.0 - cfg.alpha) * 2.0 * l);
    if !cfg.symmetric {
        v = v.max(cfg.beta_prime() * l);
    }
    v * (1.0 + 1e-6)
}

/// `4 M L max|(Omega + Omega^H)[a, b]|`, with the entry magnitude bounded
/// from the coefficient diagonals.
pub fn lambda_tilde(ops: &OmegaOps, m: usize, len: usize) -> f64 {
    4.0 * (m * len) as f64 * ops.max_entry_bound()
}

fn hermitian_max_eig(h: DMatrix<C>) -> f64 {
    h.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `T_tau(w1, w2) = sum_n exp(j 2 pi (w2 - w1)(n + 1) / N)` over the local
/// indices `n` with `n` and `n + tau` inside the stored window.
fn overlap_kernel(model: &Model, tau: i64, d: i64) -> C {
    let (n, len, start) = (model.n as f64, model.len as i64, model.start);
    let (lo, hi) = match model.case() {
        CaseKind::Periodic => (0, len),
        CaseKind::Aperiodic => ((-tau).max(0), (len - tau).min(len)),
    };
    (lo..hi).map(|i| C::from_polar(1.0, 2.0 * PI * d as f64 * (start + i + 1) as f64 / n)).sum()
}

/// Exact `lambda_max` of the lifted quadratic form `sum_t w_t |tr(B_t X)|^2`
/// (plus the penalty form), from the per-delay weighted Gram matrices of
/// the coefficient matrices. Multiply by a small margin before use.
pub fn lifted_lambda_max(model: &Model) -> f64 {
    let cfg = &model.cfg;
    let zone = model.zone();
    let (t, w) = (zone.tau_max as i64, zone.omega_max as i64);
    let nw = zone.n_omega();
    let omegas: Vec<i64> = (-w..=w).collect();
    let penalty = !cfg.symmetric && cfg.beta_prime() > 0.0;
    let l = model.len as f64;
    let per_tau: Vec<f64> = (-t..=t)
        .into_par_iter()
        .map(|tau| {
            let kern: Vec<C> = (-2 * w..=2 * w).map(|d| overlap_kernel(model, tau, d)).collect();
            let tk = |a: usize, b: usize| kern[(omegas[b] - omegas[a] + 2 * w) as usize];
            let wts = |om: i64| {
                let mk = crate::objective::masks(0, 0, tau, om, cfg.varrho);
                (mk.w, mk.w_bar)
            };
            let with_pen = penalty && tau == 0;
            let dim = nw + usize::from(with_pen);
            let mut g = DMatrix::<C>::zeros(dim, dim);
            for a in 0..nw {
                let (wa, ba) = wts(omegas[a]);
                for b in 0..nw {
                    let (wb, bb) = wts(omegas[b]);
                    g[(a, b)] = cfg.alpha * (wa * wb + 2.0 * ba * bb) * tk(a, b);
                }
            }
            if with_pen {
                let bp = cfg.beta_prime();
                g[(nw, nw)] = C::new(bp * l, 0.0);
                for a in 0..nw {
                    let (wa, _) = wts(omegas[a]);
                    // tr(M B_{0,omega}) = W tr(U_{0,omega})
                    let tr_u = kern[(omegas[a] + 2 * w) as usize];
                    let v = (cfg.alpha * bp).sqrt() * wa * tr_u;
                    g[(nw, a)] = v;
                    g[(a, nw)] = v.conj();
                }
            }
            let mut best = hermitian_max_eig(g);
            if cfg.m > 1 && cfg.alpha < 1.0 {
                let mut gc = DMatrix::<C>::zeros(nw, nw);
                for a in 0..nw {
                    for b in 0..nw {
                        gc[(a, b)] = 4.0 * (1.0 - cfg.alpha) * tk(a, b);
                    }
                }
                best = best.max(hermitian_max_eig(gc));
            }
            best
        })
        .collect();
    let mut lam = per_tau.into_iter().fold(0.0, f64::max);
    if penalty && lam < cfg.beta_prime() * l {
        lam = cfg.beta_prime() * l;
    }
    lam
}

/// Largest eigenvalue (or a Gershgorin bound when the Doppler count exceeds
/// 64) of `E[w1, w2] = sum_n |y_n|^2 exp(j 2 pi (w2 - w1)(n + 1) / N)`.
pub fn doppler_gram_max(model: &Model, y: &[C]) -> f64 {
    let w = model.zone().omega_max as i64;
    let nw = model.zone().n_omega();
    let n = model.n as f64;
    let wts: Vec<f64> = y.iter().map(|z| z.norm_sqr()).collect();
    let kern: Vec<C> = (-2 * w..=2 * w)
        .map(|d| {
            wts.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(i, &x)| x * C::from_polar(1.0, 2.0 * PI * d as f64 * (model.start + i as i64 + 1) as f64 / n))
                .sum()
        })
        .collect();
    if nw <= 64 {
        let e = DMatrix::<C>::from_fn(nw, nw, |a, b| kern[(b as i64 - a as i64 + 2 * w) as usize]);
        hermitian_max_eig(e).max(0.0)
    } else {
        (0..nw)
            .map(|a| (0..nw).map(|b| kern[(b as i64 - a as i64 + 2 * w) as usize].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Per-user bounds on the curvature of the objective in one block of peaks
/// with the other side fixed: `fixed[i]` are the fixed-side peaks and
/// `curt_fixed[i]` the fixed-side curtains.
pub fn block_lambdas(model: &Model, fixed: &[Vec<C>], curt_fixed: &[Vec<C>]) -> Vec<f64> {
    let cfg = &model.cfg;
    let m = cfg.m;
    let kt = model.zone().n_tau() as f64;
    let mu: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let y: Vec<C> = fixed[i].iter().zip(&curt_fixed[i]).map(|(a, b)| a + b).collect();
            doppler_gram_max(model, &y)
        })
        .collect();
    let bp = if cfg.symmetric { 0.0 } else { cfg.beta_prime() };
    let total: f64 = mu.iter().sum();
    (0..m)
        .map(|k| {
            let own_c: f64 = curt_fixed[k].iter().map(|z| z.norm_sqr()).sum();
            let pen: f64 = fixed[k].iter().map(|z| z.norm_sqr()).sum();
            let lam = cfg.alpha * (kt * mu[k] + cfg.varrho * cfg.varrho * own_c)
                + (1.0 - cfg.alpha) * kt * (total - mu[k])
                + bp * pen;
            lam * (1.0 + 1e-9)
        })
        .collect()
}

/// Checked construction for external callers: stacks must match the model.
pub fn check_stack(model: &Model, s: &Stack) -> Result<()> {
    if s.m != model.cfg.m || s.len != model.len {
        return param(format!("stack shape ({}, {}) differs from model ({}, {})", s.m, s.len, model.cfg.m, model.len));
    }
    Ok(())
}
