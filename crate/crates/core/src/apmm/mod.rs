//! Accelerated parallel majorization-minimization (AP-MM) for Flag sequence
//! design.
//!
//! The asymmetric solver alternates a receive block (unit-energy peaks) and
//! a transmit block (constant-modulus peaks). With the other side fixed the
//! objective is a convex quadratic in each user's peak and the users
//! decouple, so every block update is `M` independent closed-form steps.
//! The symmetric solver ties both sides and majorizes twice: once through
//! the lifted quadratic form and once more in the stacked peak vector.
//! Both are wrapped in a squared-extrapolation step with backtracking.

pub mod omega;

pub use omega::{
    apply_omega, apply_omega_adjoint, block_lambdas, doppler_gram_max, lambda_bound, lambda_tilde,
    lifted_lambda_max, OmegaOps, QOp, Stack,
};

use crate::error::{Error, Result};
use crate::objective::{raw_peaks, DesignConfig, FlagDesign, Model};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::ops::Range;
use std::time::Instant;

type C = Complex64;

/// How the curvature constant of the asymmetric block updates is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorizerRule {
    /// Per-user bound on the block quadratic (tight).
    Block,
    /// Largest eigenvalue of the lifted quadratic form times `‖x‖^2`.
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub t_max: usize,
    /// Stop when `|OF(t) - OF(t-1)| / OF(t-1)` drops below this.
    pub rel_tol: f64,
    pub accelerate: bool,
    pub majorizer: MajorizerRule,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { t_max: 500, rel_tol: 1e-8, accelerate: true, majorizer: MajorizerRule::Block, max_backtracks: 10 }
    }
}

/// Feasible set used when projecting an extrapolated point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    UnitEnergy,
    ConstModulus,
}

/// Projects `v` onto the constraint over `support`; samples outside are
/// zeroed. A zero vector (unit energy) or a zero sample (constant modulus)
/// falls back to `prev`.
pub fn project(v: &mut [Vec<C>], prev: &[Vec<C>], constraint: Constraint, support: std::ops::Range<usize>) {
    let n = support.len();
    for (x, p) in v.iter_mut().zip(prev) {
        for (i, z) in x.iter_mut().enumerate() {
            if !support.contains(&i) {
                *z = C::new(0.0, 0.0);
            }
        }
        match constraint {
            Constraint::UnitEnergy => {
                let nrm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if nrm > 0.0 && nrm.is_finite() {
                    x.iter_mut().for_each(|z| *z /= nrm);
                } else {
                    x.copy_from_slice(p);
                }
            }
            Constraint::ConstModulus => {
                let amp = 1.0 / (n as f64).sqrt();
                for i in support.clone() {
                    let a = x[i].norm();
                    x[i] = if a > 0.0 && a.is_finite() { x[i] * (amp / a) } else { p[i] };
                }
            }
        }
    }
}

/// Result of one extrapolation step.
#[derive(Debug, Clone)]
pub struct Accelerated {
    pub x: Vec<Vec<C>>,
    pub of: f64,
    /// Accepted step; `-1` is the plain double MM step.
    pub alpha: f64,
    pub backtracks: usize,
    /// The double MM step increased the objective (should not happen).
    pub mm_violation: bool,
}

fn sq_norm(v: &[Vec<C>]) -> f64 {
    v.iter().flatten().map(|z| z.norm_sqr()).sum()
}

/// Squared extrapolation from `prev` through the MM images `ya`, `yb`.
///
/// `alpha = -sum‖v_a‖^2 / sum‖v_b‖^2` (clamped to `<= -1`); the candidate
/// `project(prev - 2 alpha v_a + alpha^2 v_b)` is accepted once its objective
/// does not exceed `of_prev`, otherwise `alpha <- (alpha - 1) / 2`. After
/// `max_backtracks` failures the plain step `yb` is taken.
#[allow(clippy::too_many_arguments)]
pub fn accelerate<F: Fn(&[Vec<C>]) -> f64>(
    prev: &[Vec<C>],
    of_prev: f64,
    ya: &[Vec<C>],
    yb: &[Vec<C>],
    of_yb: f64,
    constraint: Constraint,
    support: std::ops::Range<usize>,
    max_backtracks: usize,
    eval: F,
) -> Accelerated {
    let va: Vec<Vec<C>> = ya.iter().zip(prev).map(|(a, p)| a.iter().zip(p).map(|(x, y)| x - y).collect()).collect();
    let vb: Vec<Vec<C>> = yb
        .iter()
        .zip(ya)
        .zip(&va)
        .map(|((b, a), d)| b.iter().zip(a).zip(d).map(|((x, y), z)| x - y - z).collect())
        .collect();
    let (sa, sb) = (sq_norm(&va), sq_norm(&vb));
    let plain = |bt: usize| {
        let violation = !(of_yb <= of_prev);
        if violation {
            Accelerated { x: prev.to_vec(), of: of_prev, alpha: -1.0, backtracks: bt, mm_violation: true }
        } else {
            Accelerated { x: yb.to_vec(), of: of_yb, alpha: -1.0, backtracks: bt, mm_violation: false }
        }
    };
    if sb == 0.0 || sa == 0.0 || !(sa / sb).is_finite() {
        return plain(0);
    }
    let mut alpha = (-sa / sb).min(-1.0);
    for bt in 0..=max_backtracks {
        if alpha >= -1.0 {
            return plain(bt);
        }
        let mut cand: Vec<Vec<C>> = prev
            .iter()
            .zip(&va)
            .zip(&vb)
            .map(|((p, a), b)| p.iter().zip(a).zip(b).map(|((x, y), z)| x - 2.0 * alpha * y + alpha * alpha * z).collect())
            .collect();
        project(&mut cand, prev, constraint, support.clone());
        let of = eval(&cand);
        if of <= of_prev {
            return Accelerated { x: cand, of, alpha, backtracks: bt, mm_violation: false };
        }
        alpha = (alpha - 1.0) / 2.0;
    }
    plain(max_backtracks + 1)
}

fn curvature(model: &Model, rule: MajorizerRule, lam_lift: f64, fixed: &[Vec<C>], curt: &[Vec<C>]) -> Vec<f64> {
    match rule {
        MajorizerRule::Block => block_lambdas(model, fixed, curt),
        MajorizerRule::Lifted => {
            let x: f64 = sq_norm(fixed) + sq_norm(curt);
            vec![lam_lift * x; model.cfg.m]
        }
    }
}

/// One MM step on all receive peaks:
/// `p_k^r = -kappa / ‖kappa‖`, `kappa = [Omega x1]_{p_k} - lambda_k p_k^r - beta' epsilon p_k^s`.
pub fn update_rx(model: &Model, ps: &[Vec<C>], pr: &[Vec<C>], rule: MajorizerRule, lam_lift: f64) -> Vec<Vec<C>> {
    let terms = model.terms(ps, pr);
    let ops = OmegaOps::from_terms(model, &terms, ps, pr);
    let x1 = Stack::tx(model, ps);
    let rows = ops.p_rows(&x1);
    let c_tx: Vec<Vec<C>> = (0..model.cfg.m).map(|i| model.curtain_tx(i).to_vec()).collect();
    let lam = curvature(model, rule, lam_lift, ps, &c_tx);
    let be = if model.cfg.symmetric { 0.0 } else { model.cfg.beta_prime() * model.cfg.epsilon };
    let sup = model.support();
    (0..model.cfg.m)
        .into_par_iter()
        .map(|k| {
            let mut kap = vec![C::new(0.0, 0.0); model.len];
            for i in sup.clone() {
                kap[i] = rows[k][i] - lam[k] * pr[k][i] - be * ps[k][i];
            }
            let nrm = kap.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if nrm > 0.0 && nrm.is_finite() {
                kap.iter().map(|z| -z / nrm).collect()
            } else {
                pr[k].clone()
            }
        })
        .collect()
}

/// `-exp(j arg g) / sqrt(N)` on the support, keeping the previous sample
/// where `g` vanishes.
fn phase_step(g: &[C], prev: &[C], support: std::ops::Range<usize>) -> Vec<C> {
    let amp = 1.0 / (support.len() as f64).sqrt();
    let mut out = vec![C::new(0.0, 0.0); g.len()];
    for i in support {
        let a = g[i].norm();
        out[i] = if a > 0.0 && a.is_finite() { -g[i] * (amp / a) } else { prev[i] };
    }
    out
}

/// One MM step on all transmit peaks:
/// `p_l^s = -exp(j arg gamma) / sqrt(N)`,
/// `gamma = [Omega^H x2]_{p_l} - lambda_l p_l^s - beta' epsilon p_l^r`.
pub fn update_tx(model: &Model, ps: &[Vec<C>], pr: &[Vec<C>], rule: MajorizerRule, lam_lift: f64) -> Vec<Vec<C>> {
    let terms = model.terms(ps, pr);
    let ops = OmegaOps::from_terms(model, &terms, ps, pr);
    let x2 = Stack::rx(model, pr);
    let rows = ops.p_rows_adjoint(&x2);
    let c_rx: Vec<Vec<C>> = (0..model.cfg.m).map(|i| model.curtain_rx(i).to_vec()).collect();
    let lam = curvature(model, rule, lam_lift, pr, &c_rx);
    let be = if model.cfg.symmetric { 0.0 } else { model.cfg.beta_prime() * model.cfg.epsilon };
    let sup = model.support();
    (0..model.cfg.m)
        .into_par_iter()
        .map(|l| {
            let g: Vec<C> = (0..model.len).map(|i| rows[l][i] - lam[l] * ps[l][i] - be * pr[l][i]).collect();
            phase_step(&g, &ps[l], sup.clone())
        })
        .collect()
}

/// One doubly-majorized step of the symmetric problem; returns the new
/// peaks and the inner constant `lambda~` used.
pub fn update_symmetric(model: &Model, p: &[Vec<C>], lam_lift: f64) -> (Vec<Vec<C>>, f64) {
    let terms = model.terms(p, p);
    let ops = OmegaOps::from_terms(model, &terms, p, p);
    let (x1, x2) = (Stack::tx(model, p), Stack::rx(model, p));
    let a = ops.p_rows(&x1);
    let b = ops.p_rows_adjoint(&x2);
    let lt = ops.pp_hermitian_bound(model) * (1.0 + 1e-9);
    let shift = lam_lift * (x1.norm_sqr() + x2.norm_sqr()) + lt;
    let sup = model.support();
    let out = (0..model.cfg.m)
        .into_par_iter()
        .map(|m| {
            let s: Vec<C> = (0..model.len).map(|i| a[m][i] + b[m][i] - shift * p[m][i]).collect();
            phase_step(&s, &p[m], sup.clone())
        })
        .collect();
    (out, lt)
}

/// One line of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    #[serde(rename = "OF")]
    pub of: f64,
    #[serde(rename = "NWImSL_dB")]
    pub nwimsl_db: f64,
    /// Extrapolation step of the receive block (or the single symmetric block).
    pub step_alpha: Option<f64>,
    /// Extrapolation step of the transmit block (asymmetric only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_alpha_tx: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub design: FlagDesign,
    pub history: Vec<IterRecord>,
    pub converged: bool,
    pub iterations: usize,
    pub wimsl_initial: f64,
    pub wimsl_final: f64,
    /// Largest eigenvalue of the lifted form (before margin).
    pub lambda_lift: f64,
    /// Inner constant of the last symmetric step.
    pub lambda_tilde: Option<f64>,
    /// Double MM steps that failed to descend (expected zero).
    pub mm_violations: usize,
    /// Largest `(transmit, receive)` constraint drift seen over all iterates.
    pub max_drift: (f64, f64),
}

impl SolveOutcome {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.history {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn nwimsl_db(g: f64, g0: f64) -> f64 {
    if g0 > 0.0 && g > 0.0 {
        10.0 * (g / g0).log10()
    } else {
        0.0
    }
}

fn drift(ps: &[Vec<C>], pr: &[Vec<C>], sup: Range<usize>, n: usize) -> (f64, f64) {
    let sq = (n as f64).sqrt();
    let tx = ps.iter().flat_map(|p| p[sup.clone()].iter().map(|v| (v.norm() * sq - 1.0).abs())).fold(0.0, f64::max);
    let rx = pr.iter().map(|p| (p.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs()).fold(0.0, f64::max);
    (tx, rx)
}

fn worse(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.max(b.0), a.1.max(b.1))
}

fn converged(prev: f64, cur: f64, tol: f64) -> bool {
    (cur - prev).abs() / prev.max(1e-300) < tol
}

fn diverged(t: usize, of: f64, alpha: f64) -> Error {
    Error::Diverged { iteration: t, detail: format!("OF = {of}, last step alpha = {alpha}") }
}

/// Dispatches on `cfg.symmetric`.
pub fn solve(init: &FlagDesign, cfg: &DesignConfig, solver: &SolverConfig) -> Result<SolveOutcome> {
    if cfg.symmetric {
        solve_symmetric(init, cfg, solver)
    } else {
        solve_asymmetric(init, cfg, solver)
    }
}

fn check_init(model: &Model, d: &FlagDesign) -> Result<()> {
    let (tx, rx) = d.constraint_drift();
    if tx > 1e-9 || rx > 1e-9 {
        return Err(Error::Param(format!("initial peaks violate the constraints (drift {tx:.3e}, {rx:.3e})")));
    }
    if d.m() != model.cfg.m {
        return Err(Error::Param("design and config disagree on m".into()));
    }
    Ok(())
}

/// Alternating receive/transmit AP-MM for independent transmit and receive peaks.
pub fn solve_asymmetric(init: &FlagDesign, cfg: &DesignConfig, solver: &SolverConfig) -> Result<SolveOutcome> {
    if cfg.symmetric {
        return Err(Error::Param("solve_asymmetric needs symmetric = false".into()));
    }
    let model = Model::new(&init.curtains, cfg)?;
    check_init(&model, init)?;
    let clock = Instant::now();
    let lam_lift = lifted_lambda_max(&model);
    let lam_use = lam_lift * (1.0 + 1e-6);
    let rule = solver.majorizer;
    let sup = model.support();
    let (mut ps, mut pr) = raw_peaks(init);
    let (g0, pen0) = model.objective_parts(&ps, &pr);
    let mut of = g0 + pen0;
    let mut history = vec![IterRecord { t: 0, of, nwimsl_db: 0.0, step_alpha: None, step_alpha_tx: None, wall_ms: 0.0 }];
    let mut violations = 0;
    let mut max_drift = (0.0, 0.0);
    let mut done = false;
    let mut g_last = g0;
    let mut t = 0;
    while t < solver.t_max {
        t += 1;
        let prev_of = of;
        // receive block
        let (next_r, alpha_r) = {
            let ya = update_rx(&model, &ps, &pr, rule, lam_use);
            if solver.accelerate {
                let yb = update_rx(&model, &ps, &ya, rule, lam_use);
                let of_yb = model.objective(&ps, &yb);
                let acc = accelerate(&pr, of, &ya, &yb, of_yb, Constraint::UnitEnergy, sup.clone(), solver.max_backtracks, |x| {
                    model.objective(&ps, x)
                });
                violations += usize::from(acc.mm_violation);
                of = acc.of;
                (acc.x, acc.alpha)
            } else {
                let of_a = model.objective(&ps, &ya);
                if of_a <= of {
                    of = of_a;
                    (ya, -1.0)
                } else {
                    violations += 1;
                    (pr.clone(), -1.0)
                }
            }
        };
        pr = next_r;
        // transmit block
        let (next_s, alpha_s) = {
            let ya = update_tx(&model, &ps, &pr, rule, lam_use);
            if solver.accelerate {
                let yb = update_tx(&model, &ya, &pr, rule, lam_use);
                let of_yb = model.objective(&yb, &pr);
                let acc = accelerate(&ps, of, &ya, &yb, of_yb, Constraint::ConstModulus, sup.clone(), solver.max_backtracks, |x| {
                    model.objective(x, &pr)
                });
                violations += usize::from(acc.mm_violation);
                of = acc.of;
                (acc.x, acc.alpha)
            } else {
                let of_a = model.objective(&ya, &pr);
                if of_a <= of {
                    of = of_a;
                    (ya, -1.0)
                } else {
                    violations += 1;
                    (ps.clone(), -1.0)
                }
            }
        };
        ps = next_s;
        max_drift = worse(max_drift, drift(&ps, &pr, sup.clone(), model.n));
        if !of.is_finite() {
            return Err(diverged(t, of, alpha_s));
        }
        g_last = model.wimsl(&ps, &pr);
        history.push(IterRecord {
            t,
            of,
            nwimsl_db: nwimsl_db(g_last, g0),
            step_alpha: Some(alpha_r),
            step_alpha_tx: Some(alpha_s),
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        if converged(prev_of, of, solver.rel_tol) {
            done = true;
            break;
        }
    }
    Ok(SolveOutcome {
        design: init.with_peaks(&ps, &pr),
        history,
        converged: done,
        iterations: t,
        wimsl_initial: g0,
        wimsl_final: g_last,
        lambda_lift: lam_lift,
        lambda_tilde: None,
        mm_violations: violations,
        max_drift,
    })
}

/// AP-MM with tied peaks `p_m^s = p_m^r` under the constant-modulus constraint.
pub fn solve_symmetric(init: &FlagDesign, cfg: &DesignConfig, solver: &SolverConfig) -> Result<SolveOutcome> {
    if !cfg.symmetric {
        return Err(Error::Param("solve_symmetric needs symmetric = true".into()));
    }
    let model = Model::new(&init.curtains, cfg)?;
    check_init(&model, init)?;
    if init.peaks_tx != init.peaks_rx {
        return Err(Error::Param("symmetric design needs identical transmit and receive peaks".into()));
    }
    let clock = Instant::now();
    let lam_lift = lifted_lambda_max(&model);
    let lam_use = lam_lift * (1.0 + 1e-6);
    let sup = model.support();
    let (mut p, _) = raw_peaks(init);
    let g0 = model.wimsl(&p, &p);
    let mut of = g0;
    let mut history = vec![IterRecord { t: 0, of, nwimsl_db: 0.0, step_alpha: None, step_alpha_tx: None, wall_ms: 0.0 }];
    let mut violations = 0;
    let mut max_drift = (0.0, 0.0);
    let mut done = false;
    let mut lt_last = None;
    let mut t = 0;
    while t < solver.t_max {
        t += 1;
        let prev_of = of;
        let (ya, lt) = update_symmetric(&model, &p, lam_use);
        lt_last = Some(lt);
        let (next, alpha) = if solver.accelerate {
            let (yb, _) = update_symmetric(&model, &ya, lam_use);
            let of_yb = model.wimsl(&yb, &yb);
            let acc = accelerate(&p, of, &ya, &yb, of_yb, Constraint::ConstModulus, sup.clone(), solver.max_backtracks, |x| {
                model.wimsl(x, x)
            });
            violations += usize::from(acc.mm_violation);
            of = acc.of;
            (acc.x, acc.alpha)
        } else {
            let of_a = model.wimsl(&ya, &ya);
            if of_a <= of {
                of = of_a;
                (ya, -1.0)
            } else {
                violations += 1;
                (p.clone(), -1.0)
            }
        };
        p = next;
        max_drift = worse(max_drift, drift(&p, &p, sup.clone(), model.n));
        if !of.is_finite() {
            return Err(diverged(t, of, alpha));
        }
        history.push(IterRecord {
            t,
            of,
            nwimsl_db: nwimsl_db(of, g0),
            step_alpha: Some(alpha),
            step_alpha_tx: None,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        if converged(prev_of, of, solver.rel_tol) {
            done = true;
            break;
        }
    }
    Ok(SolveOutcome {
        design: init.with_peaks(&p, &p),
        history,
        converged: done,
        iterations: t,
        wimsl_initial: g0,
        wimsl_final: of,
        lambda_lift: lam_lift,
        lambda_tilde: lt_last,
        mm_violations: violations,
        max_drift,
    })
}
