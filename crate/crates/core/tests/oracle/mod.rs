//! Dense brute-force reference implementations for small instances.
//!
//! Every masked term is materialized as an explicit `2L x 2L` matrix acting
//! on `[p; c]`, so objective values, `Omega`, lifted eigenvalues and the
//! block Hessians can be formed without any FFT or shortcut.

#![allow(dead_code)]

use flagseq_core::curtain::{build_near_zero_set, build_zero_set, zero_set_q_values};
use flagseq_core::objective::{masks, Model};
use flagseq_core::{CaseKind, Complex64, DesignConfig, FlagDesign, Zone};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub type C = Complex64;
pub type M = DMatrix<C>;

pub fn zero() -> C {
    C::new(0.0, 0.0)
}

/// `J_tau D_omega` on a window of `len` samples starting at absolute index `start`.
pub fn u_matrix(n: usize, start: i64, len: usize, tau: i64, omega: f64, periodic: bool) -> M {
    let mut u = M::zeros(len, len);
    for i in 0..len as i64 {
        let j = i - tau;
        let j = if periodic {
            j.rem_euclid(len as i64)
        } else if j < 0 || j >= len as i64 {
            continue;
        } else {
            j
        };
        let ph = 2.0 * PI * omega * (start + j + 1) as f64 / n as f64;
        u[(i as usize, j as usize)] = C::from_polar(1.0, ph);
    }
    u
}

pub fn af_dense(s: &[C], r: &[C], u: &M) -> C {
    let us = u * nalgebra::DVector::from_column_slice(s);
    r.iter().zip(us.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// One quadratic term `w |x2_k^H M x1_l|^2` (penalty terms subtract `epsilon`).
pub struct Term {
    pub l: usize,
    pub k: usize,
    pub w: f64,
    pub m: M,
    pub penalty: bool,
}

pub struct Dense {
    pub n: usize,
    pub len: usize,
    pub start: i64,
    pub users: usize,
    pub support: std::ops::Range<usize>,
    pub cfg: DesignConfig,
    pub c_tx: Vec<Vec<C>>,
    pub c_rx: Vec<Vec<C>>,
    pub terms: Vec<Term>,
}

fn block(a: &M, b: &M, c: &M, d: &M) -> M {
    let l = a.nrows();
    let mut m = M::zeros(2 * l, 2 * l);
    m.view_mut((0, 0), (l, l)).copy_from(a);
    m.view_mut((0, l), (l, l)).copy_from(b);
    m.view_mut((l, 0), (l, l)).copy_from(c);
    m.view_mut((l, l), (l, l)).copy_from(d);
    m
}

impl Dense {
    pub fn new(design: &FlagDesign, cfg: &DesignConfig) -> Self {
        let n = design.n();
        let len = design.len();
        let start = design.start();
        let periodic = cfg.zone.case == CaseKind::Periodic;
        let users = cfg.m;
        let mut terms = Vec::new();
        for l in 0..users {
            for k in 0..users {
                let wt = if l == k { cfg.alpha } else { 1.0 - cfg.alpha };
                if wt == 0.0 {
                    continue;
                }
                for (tau, om) in cfg.zone.lattice() {
                    let u = u_matrix(n, start, len, tau, om as f64, periodic);
                    let mk = masks(l, k, tau, om, cfg.varrho);
                    let m = block(&(&u * C::new(mk.w, 0.0)), &(&u * C::new(mk.w_bar, 0.0)), &(&u * C::new(mk.w_bar, 0.0)), &(&u * C::new(mk.w_tilde, 0.0)));
                    terms.push(Term { l, k, w: wt, m, penalty: false });
                }
            }
        }
        if !cfg.symmetric {
            for i in 0..users {
                let id = M::identity(len, len);
                let z = M::zeros(len, len);
                terms.push(Term { l: i, k: i, w: cfg.beta_prime(), m: block(&id, &z, &z, &z), penalty: true });
            }
        }
        let off = (-start) as usize;
        Self {
            n,
            len,
            start,
            users,
            support: off..off + n,
            cfg: *cfg,
            c_tx: (0..users).map(|i| design.c_tx(i).into_samples()).collect(),
            c_rx: (0..users).map(|i| design.c_rx(i).into_samples()).collect(),
            terms,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.users * self.len
    }

    /// `[p_1; c_1; ...]` with the given peaks and curtains.
    pub fn stack(&self, p: &[Vec<C>], c: &[Vec<C>]) -> Vec<C> {
        let mut v = Vec::with_capacity(self.dim());
        for i in 0..self.users {
            v.extend_from_slice(&p[i]);
            v.extend_from_slice(&c[i]);
        }
        v
    }

    pub fn x1(&self, ps: &[Vec<C>]) -> Vec<C> {
        self.stack(ps, &self.c_tx)
    }

    pub fn x2(&self, pr: &[Vec<C>]) -> Vec<C> {
        self.stack(pr, &self.c_rx)
    }

    fn seg<'a>(&self, v: &'a [C], i: usize) -> &'a [C] {
        &v[2 * i * self.len..2 * (i + 1) * self.len]
    }

    pub fn term_value(&self, t: &Term, x1: &[C], x2: &[C]) -> C {
        let a = &t.m * nalgebra::DVector::from_column_slice(self.seg(x1, t.l));
        self.seg(x2, t.k).iter().zip(a.iter()).map(|(y, z)| y.conj() * z).sum()
    }

    /// `(G, beta' P)`.
    pub fn objective_parts(&self, x1: &[C], x2: &[C]) -> (f64, f64) {
        let eps = self.cfg.epsilon;
        let (mut g, mut p) = (0.0, 0.0);
        for t in &self.terms {
            let a = self.term_value(t, x1, x2);
            if t.penalty {
                p += t.w * (a - eps).norm_sqr();
            } else {
                g += t.w * a.norm_sqr();
            }
        }
        (g, p)
    }

    pub fn objective(&self, x1: &[C], x2: &[C]) -> f64 {
        let (g, p) = self.objective_parts(x1, x2);
        g + p
    }

    /// Full `Omega(x1t, x2t) = sum w conj(a) M`, rows on the receive stack.
    pub fn omega(&self, x1t: &[C], x2t: &[C]) -> M {
        let d = self.dim();
        let l2 = 2 * self.len;
        let mut om = M::zeros(d, d);
        for t in &self.terms {
            let a = self.term_value(t, x1t, x2t);
            let blk = &t.m * (a.conj() * t.w);
            let mut v = om.view_mut((t.k * l2, t.l * l2), (l2, l2));
            v += blk;
        }
        om
    }

    /// `lambda_max` of the lifted form `sum w vec(M) vec(M)^H` via its Gram matrix.
    pub fn lifted_lambda_max(&self) -> f64 {
        let nt = self.terms.len();
        let mut g = M::zeros(nt, nt);
        for i in 0..nt {
            for j in i..nt {
                let (a, b) = (&self.terms[i], &self.terms[j]);
                if (a.l, a.k) != (b.l, b.k) {
                    continue;
                }
                let ip: C = a.m.iter().zip(b.m.iter()).map(|(x, y)| x * y.conj()).sum();
                let v = ip * (a.w * b.w).sqrt();
                g[(i, j)] = v;
                g[(j, i)] = v.conj();
            }
        }
        max_eig(g)
    }

    /// Hessian of the objective in the receive peak `k` (transmit side fixed),
    /// restricted to the support.
    pub fn rx_hessian(&self, x1: &[C], k: usize) -> M {
        let s = self.support.clone();
        let mut r = M::zeros(s.len(), s.len());
        for t in self.terms.iter().filter(|t| t.k == k) {
            let v = &t.m * nalgebra::DVector::from_column_slice(self.seg(x1, t.l));
            let v: Vec<C> = s.clone().map(|i| v[i]).collect();
            for a in 0..v.len() {
                for b in 0..v.len() {
                    r[(a, b)] += t.w * v[a] * v[b].conj();
                }
            }
        }
        r
    }

    /// Hessian in the transmit peak `l` (receive side fixed).
    pub fn tx_hessian(&self, x2: &[C], l: usize) -> M {
        let s = self.support.clone();
        let mut r = M::zeros(s.len(), s.len());
        for t in self.terms.iter().filter(|t| t.l == l) {
            let v = t.m.adjoint() * nalgebra::DVector::from_column_slice(self.seg(x2, t.k));
            let v: Vec<C> = s.clone().map(|i| v[i]).collect();
            for a in 0..v.len() {
                for b in 0..v.len() {
                    r[(a, b)] += t.w * v[a] * v[b].conj();
                }
            }
        }
        r
    }

    /// Indices of peak entries on the support inside the stack.
    pub fn peak_indices(&self) -> Vec<usize> {
        (0..self.users).flat_map(|i| self.support.clone().map(move |j| 2 * i * self.len + j)).collect()
    }
}

pub fn max_eig(h: M) -> f64 {
    h.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn mat_vec(m: &M, v: &[C]) -> Vec<C> {
    (m * nalgebra::DVector::from_column_slice(v)).iter().copied().collect()
}

pub fn sq(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Random peaks on the design's window: constant modulus `1/sqrt(N)` for
/// transmit, unit energy for receive.
pub fn random_peaks(design: &FlagDesign, seed: u64) -> (Vec<Vec<C>>, Vec<Vec<C>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = design.n();
    let off = (-design.start()) as usize;
    let len = design.len();
    let mut ps = Vec::new();
    let mut pr = Vec::new();
    for _ in 0..design.m() {
        let mut s = vec![zero(); len];
        let mut r = vec![zero(); len];
        for j in off..off + n {
            s[j] = C::from_polar(1.0 / (n as f64).sqrt(), rng.random::<f64>() * 2.0 * PI);
            r[j] = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        }
        let e = sq(&r).sqrt();
        r.iter_mut().for_each(|z| *z /= e);
        ps.push(s);
        pr.push(r);
    }
    (ps, pr)
}

/// Random constant-modulus peaks for a symmetric design.
pub fn random_cm(design: &FlagDesign, rng: &mut ChaCha8Rng) -> Vec<Vec<C>> {
    let n = design.n();
    let off = (-design.start()) as usize;
    (0..design.m())
        .map(|_| {
            let mut s = vec![zero(); design.len()];
            for j in off..off + n {
                s[j] = C::from_polar(1.0 / (n as f64).sqrt(), rng.random::<f64>() * 2.0 * PI);
            }
            s
        })
        .collect()
}

/// Random unit-energy receive peaks.
pub fn random_ue(design: &FlagDesign, rng: &mut ChaCha8Rng) -> Vec<Vec<C>> {
    let n = design.n();
    let off = (-design.start()) as usize;
    (0..design.m())
        .map(|_| {
            let mut s = vec![zero(); design.len()];
            for j in off..off + n {
                s[j] = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            }
            let e = sq(&s).sqrt();
            s.iter_mut().for_each(|z| *z /= e);
            s
        })
        .collect()
}

pub fn model(design: &FlagDesign, cfg: &DesignConfig) -> Model {
    Model::new(&design.curtains, cfg).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Four small instances: periodic and aperiodic, one and two users. Peaks
/// are random and feasible.
pub fn cases(n: usize) -> Vec<(FlagDesign, DesignConfig)> {
    let zp = Zone::periodic(2, 2);
    let za = if n > 8 { Zone::aperiodic(2, 2) } else { Zone::aperiodic(1, 1) };
    let base = DesignConfig { m: 1, zone: zp, varrho: 1.5, alpha: 0.7, beta: 0.4, epsilon: 0.9, symmetric: false };
    let p1 = build_near_zero_set(n, &[1], &[0], zp).unwrap();
    let p2 = build_near_zero_set(n, &[1, 2], &[0, 0], zp).unwrap();
    let a2 = build_zero_set(n, 1, &zero_set_q_values(n, 1, &za, 2).unwrap(), za).unwrap();
    let a1 = build_near_zero_set(n, &[-1], &[0], za).unwrap();
    let mut out = Vec::new();
    for (set, zone, seed) in [(p1, zp, 1u64), (p2, zp, 2), (a1, za, 3), (a2, za, 4)] {
        let m = set.len();
        let (ps, pr) = random_peaks(&FlagDesign::random_init(set.clone(), seed), seed);
        let d = FlagDesign::random_init(set, seed).with_peaks(&ps, &pr);
        out.push((d, DesignConfig { m, zone, ..base }));
    }
    out
}

pub mod checks {
    use super::*;
    use flagseq_core::ambiguity::af_grid;
    use flagseq_core::apmm::{block_lambdas, lifted_lambda_max, update_rx, update_symmetric, update_tx, MajorizerRule, OmegaOps, Stack};
    use flagseq_core::objective::raw_peaks;

    /// Largest relative disagreement between the dense and fast paths.
    #[derive(Debug, Default, Clone, Copy)]
    pub struct Equivalence {
        pub af: f64,
        pub objective: f64,
        pub omega: f64,
        pub omega_adjoint: f64,
        pub lifted_lambda: f64,
    }

    impl Equivalence {
        pub fn worst(&self) -> f64 {
            [self.af, self.objective, self.omega, self.omega_adjoint, self.lifted_lambda].into_iter().fold(0.0, f64::max)
        }
    }

    fn vec_rel(a: &[C], b: &[C]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        d / sq(b).sqrt().max(1e-300)
    }

    pub fn equivalence(design: &FlagDesign, cfg: &DesignConfig, seed: u64) -> Equivalence {
        let dense = Dense::new(design, cfg);
        let model = model(design, cfg);
        let mut out = Equivalence::default();
        let periodic = cfg.zone.case == CaseKind::Periodic;

        for l in 0..design.m() {
            for k in 0..design.m() {
                let (s, r) = (design.flag_tx(l), design.flag_rx(k));
                let g = af_grid(&s, &r, &cfg.zone, design.n()).unwrap();
                let vals: Vec<f64> = cfg
                    .zone
                    .lattice()
                    .map(|(t, w)| af_dense(s.samples(), r.samples(), &u_matrix(dense.n, dense.start, dense.len, t, w as f64, periodic)).norm())
                    .collect();
                let scale = vals.iter().copied().fold(1e-300, f64::max);
                for ((t, w), v) in cfg.zone.lattice().zip(&vals) {
                    out.af = out.af.max((g.get(t, w) - v).abs() / scale);
                }
            }
        }

        let (ps, pr) = raw_peaks(design);
        let (x1, x2) = (dense.x1(&ps), dense.x2(&pr));
        let (g, p) = dense.objective_parts(&x1, &x2);
        let (gf, pf) = model.objective_parts(&ps, &pr);
        out.objective = rel(g, gf).max(rel(g + p, gf + pf));

        let om = dense.omega(&x1, &x2);
        let ops = OmegaOps::new(&model, &Stack::tx(&model, &ps), &Stack::rx(&model, &pr));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let v: Vec<C> = (0..dense.dim()).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
            let st = Stack { m: dense.users, len: dense.len, data: v.clone() };
            out.omega = out.omega.max(vec_rel(&ops.apply(&st).data, &mat_vec(&om, &v)));
            out.omega_adjoint = out.omega_adjoint.max(vec_rel(&ops.apply_adjoint(&st).data, &mat_vec(&om.adjoint(), &v)));
        }
        out.lifted_lambda = rel(lifted_lambda_max(&model), dense.lifted_lambda_max());
        out
    }

    /// Outcome of a surrogate dominance sweep; `min_gap` is
    /// `min (S(p) - OF(p)) / OF(expansion)` and should be `>= 0`.
    #[derive(Debug, Clone, Copy)]
    pub struct Dominance {
        pub min_gap: f64,
        pub touch: f64,
        /// Disagreement between the library update and the surrogate's minimizer.
        pub update: f64,
        /// `min (lambda_used - lambda_max(Hessian))`, should be `>= 0`.
        pub curvature_margin: f64,
    }

    fn grad_rx(dense: &Dense, om: &M, x1: &[C], ps: &[Vec<C>]) -> Vec<Vec<C>> {
        let ox = mat_vec(om, x1);
        let be = if dense.cfg.symmetric { 0.0 } else { dense.cfg.beta_prime() * dense.cfg.epsilon };
        (0..dense.users)
            .map(|k| {
                let base = 2 * k * dense.len;
                (0..dense.len)
                    .map(|i| if dense.support.contains(&i) { ox[base + i] - be * ps[k][i] } else { zero() })
                    .collect()
            })
            .collect()
    }

    fn grad_tx(dense: &Dense, om: &M, x2: &[C], pr: &[Vec<C>]) -> Vec<Vec<C>> {
        let ox = mat_vec(&om.adjoint(), x2);
        let be = if dense.cfg.symmetric { 0.0 } else { dense.cfg.beta_prime() * dense.cfg.epsilon };
        (0..dense.users)
            .map(|l| {
                let base = 2 * l * dense.len;
                (0..dense.len)
                    .map(|i| if dense.support.contains(&i) { ox[base + i] - be * pr[l][i] } else { zero() })
                    .collect()
            })
            .collect()
    }

    fn linear_surrogate(of0: f64, grad: &[Vec<C>], lam: &[f64], p0: &[Vec<C>], p: &[Vec<C>]) -> f64 {
        let mut s = of0;
        for k in 0..p.len() {
            let d: Vec<C> = p[k].iter().zip(&p0[k]).map(|(a, b)| a - b).collect();
            s += 2.0 * dot(&grad[k], &d).re + lam[k] * sq(&d);
        }
        s
    }

    fn max_dev(a: &[Vec<C>], b: &[Vec<C>]) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    /// Receive-block surrogate `OF(p~) + 2 Re grad^H (p - p~) + lambda ‖p - p~‖^2`.
    pub fn rx_dominance(design: &FlagDesign, cfg: &DesignConfig, rule: MajorizerRule, points: usize, seed: u64) -> Dominance {
        let dense = Dense::new(design, cfg);
        let model = model(design, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ps, pr0) = random_peaks(design, seed ^ 0x5a5a);
        let (x1, x2) = (dense.x1(&ps), dense.x2(&pr0));
        let of0 = dense.objective(&x1, &x2);
        let om = dense.omega(&x1, &x2);
        let grad = grad_rx(&dense, &om, &x1, &ps);
        let lam_lift = lifted_lambda_max(&model) * (1.0 + 1e-6);
        let lam: Vec<f64> = match rule {
            MajorizerRule::Block => block_lambdas(&model, &ps, &dense.c_tx),
            MajorizerRule::Lifted => vec![lam_lift * sq(&x1); dense.users],
        };
        let margin = (0..dense.users).map(|k| lam[k] - max_eig(dense.rx_hessian(&x1, k))).fold(f64::INFINITY, f64::min);
        let mut gap = f64::INFINITY;
        for _ in 0..points {
            let p = random_ue(design, &mut rng);
            let s = linear_surrogate(of0, &grad, &lam, &pr0, &p);
            gap = gap.min((s - dense.objective(&x1, &dense.x2(&p))) / of0);
        }
        let touch = (linear_surrogate(of0, &grad, &lam, &pr0, &pr0) - of0).abs() / of0;
        let expected: Vec<Vec<C>> = (0..dense.users)
            .map(|k| {
                let kap: Vec<C> = (0..dense.len).map(|i| if dense.support.contains(&i) { grad[k][i] - lam[k] * pr0[k][i] } else { zero() }).collect();
                let nrm = sq(&kap).sqrt();
                kap.iter().map(|z| -z / nrm).collect()
            })
            .collect();
        let got = update_rx(&model, &ps, &pr0, rule, lam_lift);
        Dominance { min_gap: gap, touch, update: max_dev(&got, &expected), curvature_margin: margin }
    }

    /// Transmit-block surrogate over constant-modulus peaks.
    pub fn tx_dominance(design: &FlagDesign, cfg: &DesignConfig, rule: MajorizerRule, points: usize, seed: u64) -> Dominance {
        let dense = Dense::new(design, cfg);
        let model = model(design, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ps0, pr) = random_peaks(design, seed ^ 0xa5a5);
        let (x1, x2) = (dense.x1(&ps0), dense.x2(&pr));
        let of0 = dense.objective(&x1, &x2);
        let om = dense.omega(&x1, &x2);
        let grad = grad_tx(&dense, &om, &x2, &pr);
        let lam_lift = lifted_lambda_max(&model) * (1.0 + 1e-6);
        let lam: Vec<f64> = match rule {
            MajorizerRule::Block => block_lambdas(&model, &pr, &dense.c_rx),
            MajorizerRule::Lifted => vec![lam_lift * sq(&x2); dense.users],
        };
        let margin = (0..dense.users).map(|l| lam[l] - max_eig(dense.tx_hessian(&x2, l))).fold(f64::INFINITY, f64::min);
        let mut gap = f64::INFINITY;
        for _ in 0..points {
            let p = random_cm(design, &mut rng);
            let s = linear_surrogate(of0, &grad, &lam, &ps0, &p);
            gap = gap.min((s - dense.objective(&dense.x1(&p), &x2)) / of0);
        }
        let touch = (linear_surrogate(of0, &grad, &lam, &ps0, &ps0) - of0).abs() / of0;
        let amp = 1.0 / (dense.n as f64).sqrt();
        let expected: Vec<Vec<C>> = (0..dense.users)
            .map(|l| {
                (0..dense.len)
                    .map(|i| {
                        if dense.support.contains(&i) {
                            let g = grad[l][i] - lam[l] * ps0[l][i];
                            -g / g.norm() * amp
                        } else {
                            zero()
                        }
                    })
                    .collect()
            })
            .collect();
        let got = update_tx(&model, &ps0, &pr, rule, lam_lift);
        Dominance { min_gap: gap, touch, update: max_dev(&got, &expected), curvature_margin: margin }
    }

    /// Doubly majorized symmetric surrogate: the lifted step with
    /// `lambda = lifted max`, then the peak quadratic with `lambda~`.
    pub fn symmetric_dominance(design: &FlagDesign, cfg: &DesignConfig, points: usize, seed: u64) -> Dominance {
        assert!(cfg.symmetric);
        let dense = Dense::new(design, cfg);
        let model = model(design, cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p0 = random_cm(design, &mut rng);
        let (x1t, x2t) = (dense.x1(&p0), dense.x2(&p0));
        let g0 = dense.objective(&x1t, &x2t);
        let lam = lifted_lambda_max(&model) * (1.0 + 1e-6);
        let mut omp = dense.omega(&x1t, &x2t);
        // Omega' = Omega - lambda x2t x1t^H
        for i in 0..dense.dim() {
            for j in 0..dense.dim() {
                omp[(i, j)] -= lam * x2t[i] * x1t[j].conj();
            }
        }
        let idx = dense.peak_indices();
        let h = {
            let mut h = M::zeros(idx.len(), idx.len());
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    h[(a, b)] = omp[(i, j)] + omp[(j, i)].conj();
                }
            }
            h
        };
        let ops = OmegaOps::new(&model, &Stack::tx(&model, &p0), &Stack::rx(&model, &p0));
        let lt = ops.pp_hermitian_bound(&model) * (1.0 + 1e-9);
        let margin = lt - max_eig(h.clone());
        let flat = |p: &[Vec<C>]| -> Vec<C> {
            let x = dense.x1(p);
            idx.iter().map(|&i| x[i]).collect()
        };
        let pt = flat(&p0);
        let s2 = |p: &[Vec<C>]| -> f64 {
            let (x1, x2) = (dense.x1(p), dense.x2(p));
            let s1 = lam * sq(&x1) * sq(&x2) + 2.0 * dot(&x2, &mat_vec(&omp, &x1)).re + lam * sq(&x1t) * sq(&x2t) - g0;
            let v = flat(p);
            let quad = dot(&v, &mat_vec(&h, &v)).re;
            let d: Vec<C> = v.iter().zip(&pt).map(|(a, b)| a - b).collect();
            let hd = mat_vec(&h, &d);
            // lambda~ ‖v‖^2 + 2 Re v~^H (H - lambda~) v + v~^H (lambda~ - H) v~, written around v~
            let inner = quad - dot(&d, &hd).re + lt * sq(&d);
            s1 - quad + inner
        };
        let mut gap = f64::INFINITY;
        for _ in 0..points {
            let p = random_cm(design, &mut rng);
            gap = gap.min((s2(&p) - dense.objective(&dense.x1(&p), &dense.x2(&p))) / g0);
        }
        let touch = (s2(&p0) - g0).abs() / g0;
        let (got, _) = update_symmetric(&model, &p0, lam);
        // the update must not be beaten by random feasible points on the surrogate
        let s_got = s2(&got);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let p = random_cm(design, &mut rng);
            worst = worst.max((s_got - s2(&p)) / g0);
        }
        Dominance { min_gap: gap, touch, update: worst.max(0.0), curvature_margin: margin }
    }
}

/// Tied constant-modulus peaks for symmetric instances.
pub fn checks_peaks(design: &FlagDesign) -> Vec<Vec<C>> {
    random_peaks(design, 99).0
}
