//! Band-limited echo synthesis, Cramér-Rao and sampling bounds, and a
//! seeded Monte Carlo harness around the Flag-method estimator.
//!
//! Delays are in samples (`1/B` seconds) and Doppler in bins of `B/N` Hz.
//! A target at `(tau0, omega0)` contributes
//! `rho s(m - tau0) exp(j 2 pi omega0 (m - tau0) / N)` to sample `m`, where
//! `s(t)` is the sinc-interpolated transmit sequence.

use crate::error::{param, Error, Result};
use crate::estimator::{flag_search, refine_fractional, CfarConfig, Detection, SearchInput};
use crate::fft;
use crate::objective::FlagDesign;
use crate::seqcore::{CaseKind, ComplexSeq, Zone};
use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

type C = Complex64;

/// Speed of light used for range/velocity conversion (m/s).
pub const SPEED_OF_LIGHT: f64 = 3e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub range_m: f64,
    pub velocity_mps: f64,
    /// Complex amplitude as `[re, im]`.
    pub amplitude: C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub f_cr: f64,
    pub bandwidth: f64,
    pub targets: Vec<Target>,
    pub snr_db: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_cr > 0.0 && self.bandwidth > 0.0) {
            return param("carrier and bandwidth must be positive");
        }
        if !self.snr_db.is_finite() {
            return param("snr_db must be finite");
        }
        Ok(())
    }

    /// `(tau, omega)` in bins for each target: `tau = 2 R B / c`,
    /// `omega = 2 v f_cr N / (c B)`.
    pub fn target_bins(&self, n: usize) -> Vec<(f64, f64, C)> {
        self.targets
            .iter()
            .map(|t| {
                let tau = 2.0 * t.range_m * self.bandwidth / SPEED_OF_LIGHT;
                let om = 2.0 * t.velocity_mps * self.f_cr * n as f64 / (SPEED_OF_LIGHT * self.bandwidth);
                (tau, om, t.amplitude)
            })
            .collect()
    }

    /// Targets whose bins fall outside `zone`.
    pub fn outside_zone(&self, n: usize, zone: &Zone) -> Vec<usize> {
        self.target_bins(n)
            .iter()
            .enumerate()
            .filter(|(_, (t, w, _))| t.abs() > zone.tau_max as f64 || w.abs() > zone.omega_max as f64)
            .map(|(i, _)| i)
            .collect()
    }

    /// Complex noise power `max|rho|^2 / SNR`.
    pub fn noise_power(&self) -> f64 {
        let rho2 = self.targets.iter().map(|t| t.amplitude.norm_sqr()).fold(0.0, f64::max);
        let rho2 = if self.targets.is_empty() { 1.0 } else { rho2 };
        rho2 / 10f64.powf(self.snr_db / 10.0)
    }
}

/// Receive window of an echo: the transmit support for periodic operation,
/// widened by `tau_ext + tau_max` on each side otherwise.
pub fn echo_window(n: usize, zone: &Zone, tau_ext: usize) -> (i64, usize) {
    match zone.case {
        CaseKind::Periodic => (0, n),
        CaseKind::Aperiodic => {
            let w = (tau_ext + zone.tau_max) as i64;
            (-w, n + 2 * w as usize)
        }
    }
}

/// Band-limited delayed copy of `s` on `window`. Periodic operation uses the
/// circular (DFT) interpolator; aperiodic uses the sinc sum over the
/// nonzero samples of `s`.
fn delayed(s: &ComplexSeq, tau: f64, kind: CaseKind, window: (i64, usize)) -> Vec<C> {
    match kind {
        CaseKind::Periodic => {
            let n = s.len();
            let mut buf = s.samples().to_vec();
            fft::forward(&mut buf);
            for (k, z) in buf.iter_mut().enumerate() {
                let f = if 2 * k < n { k as f64 } else { k as f64 - n as f64 };
                *z *= if 2 * k == n {
                    C::new((PI * tau).cos(), 0.0)
                } else {
                    C::from_polar(1.0, -2.0 * PI * f * tau / n as f64)
                };
            }
            fft::inverse(&mut buf);
            buf.iter().map(|z| z / n as f64).collect()
        }
        CaseKind::Aperiodic => {
            let frac = tau - tau.round();
            let (w0, wl) = window;
            (0..wl as i64)
                .map(|i| {
                    let m = w0 + i;
                    if frac.abs() < 1e-12 {
                        return s.at(m - tau.round() as i64);
                    }
                    s.samples()
                        .iter()
                        .enumerate()
                        .map(|(j, v)| {
                            let x = PI * (m as f64 - tau - (s.start_index() + j as i64) as f64);
                            v * (x.sin() / x)
                        })
                        .sum()
                })
                .collect()
        }
    }
}

/// Noise-free echo from targets given in bins.
pub fn synthesize_clean(s: &ComplexSeq, targets: &[(f64, f64, C)], n: usize, zone: &Zone, tau_ext: usize) -> Result<ComplexSeq> {
    let window = echo_window(n, zone, tau_ext);
    if zone.case == CaseKind::Periodic && (s.len() != n || s.start_index() != 0) {
        return param("periodic synthesis needs a length-N transmit sequence starting at 0");
    }
    let mut g = vec![C::new(0.0, 0.0); window.1];
    for &(tau, om, rho) in targets {
        let d = delayed(s, tau, zone.case, window);
        for (i, (gv, dv)) in g.iter_mut().zip(&d).enumerate() {
            let m = (window.0 + i as i64) as f64;
            *gv += rho * dv * C::from_polar(1.0, 2.0 * PI * om * (m - tau) / n as f64);
        }
    }
    ComplexSeq::new(window.0, g)
}

/// Adds circular complex Gaussian noise of total power `noise_power`.
pub fn add_noise<R: Rng>(g: &mut ComplexSeq, noise_power: f64, rng: &mut R) {
    let sd = (noise_power / 2.0).sqrt();
    let s: Vec<C> = g
        .samples()
        .iter()
        .map(|v| {
            let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
            v + C::new(sd * a, sd * b)
        })
        .collect();
    *g = ComplexSeq::new(g.start_index(), s).expect("same length");
}

/// Echo for a physical scenario, seeded by `scenario.seed`.
pub fn synthesize_rx(s: &ComplexSeq, scenario: &ScenarioConfig, n: usize, zone: &Zone, tau_ext: usize) -> Result<ComplexSeq> {
    scenario.validate()?;
    let mut g = synthesize_clean(s, &scenario.target_bins(n), n, zone, tau_ext)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    add_noise(&mut g, scenario.noise_power(), &mut rng);
    Ok(g)
}

/// Fisher information blocks and the resulting bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimResult {
    /// `Re{Phi}`.
    pub phi: Matrix2<f64>,
    /// `Re{Phi}^-1 / (2 SNR)`.
    pub crlb: Matrix2<f64>,
}

/// `H[m, n]`: `pi^2/3` on the diagonal, `(-1)^|m-n| 2/(m-n)^2` elsewhere.
pub fn h_matrix(len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(len, len, |i, j| {
        if i == j {
            PI * PI / 3.0
        } else {
            let d = i as f64 - j as f64;
            sign(i, j) * 2.0 / (d * d)
        }
    })
}

/// `T[m, n]`: zero on the diagonal, `(-1)^|m-n| / (m-n)` elsewhere.
pub fn t_matrix(len: usize) -> DMatrix<f64> {
    DMatrix::from_fn(len, len, |i, j| if i == j { 0.0 } else { sign(i, j) / (i as f64 - j as f64) })
}

fn sign(i: usize, j: usize) -> f64 {
    if i.abs_diff(j) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct Quad {
    ss: f64,
    shs: f64,
    sts: C,
    sds: f64,
    sd2s: f64,
    sdts: C,
}

fn quad_forms(s: &ComplexSeq, n1: i64, n2: i64) -> Quad {
    let idx: Vec<i64> = (n1..=n2).collect();
    let v: Vec<C> = idx.iter().map(|&i| s.at(i)).collect();
    let len = v.len();
    let (h, t) = (h_matrix(len), t_matrix(len));
    let mut shs = C::new(0.0, 0.0);
    let mut sts = C::new(0.0, 0.0);
    let mut sdts = C::new(0.0, 0.0);
    for i in 0..len {
        if v[i] == C::new(0.0, 0.0) {
            continue;
        }
        let (mut hv, mut tv) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        for j in 0..len {
            hv += h[(i, j)] * v[j];
            tv += t[(i, j)] * v[j];
        }
        shs += v[i].conj() * hv;
        sts += v[i].conj() * tv;
        sdts += v[i].conj() * idx[i] as f64 * tv;
    }
    Quad {
        ss: v.iter().map(|z| z.norm_sqr()).sum(),
        shs: shs.re,
        sts,
        sds: v.iter().zip(&idx).map(|(z, &i)| z.norm_sqr() * i as f64).sum(),
        sd2s: v.iter().zip(&idx).map(|(z, &i)| z.norm_sqr() * (i * i) as f64).sum(),
        sdts,
    }
}

fn check_support(s: &ComplexSeq, n1: i64, n2: i64) -> Result<()> {
    if n1 > 0 || n2 < s.end_index() || n2 < n1 {
        return param(format!("sample support [{n1}, {n2}] must satisfy N1 <= 0 and N2 >= N"));
    }
    if s.energy() == 0.0 {
        return param("zero-energy sequence");
    }
    Ok(())
}

fn finish(phi: Matrix2<f64>, snr: f64) -> Result<FimResult> {
    let inv = phi.try_inverse().filter(|m| m.iter().all(|x| x.is_finite()));
    match inv {
        Some(m) => Ok(FimResult { phi, crlb: m / (2.0 * snr) }),
        None => {
            let dir = if phi[(0, 0)].abs() < 1e-12 { "delay" } else { "Doppler" };
            Err(Error::Domain(format!("singular Fisher information (degenerate {dir} direction)")))
        }
    }
}

/// Fisher information and CRLB for `eta = [tau (s), omega]` with carrier
/// `f_cr`, bandwidth `b` and samples `n1..=n2` of `s`.
pub fn fim_crlb(s: &ComplexSeq, b: f64, f_cr: f64, snr: f64, n1: i64, n2: i64) -> Result<FimResult> {
    check_support(s, n1, n2)?;
    if !(snr > 0.0) {
        return param("SNR must be positive");
    }
    let q = quad_forms(s, n1, n2);
    let ec = 2.0 * PI * f_cr;
    let p11 = b * b * (q.shs - q.sts.norm_sqr() / q.ss);
    let p12 = ec * (q.sdts - q.sds * q.sts / q.ss).im;
    let p22 = ec * ec / (b * b) * (q.sd2s - q.sds * q.sds / q.ss);
    finish(Matrix2::new(p11, p12, p12, p22), snr)
}

/// The same bound with delay in samples and Doppler in bins of `B/N`, so
/// the phase ramp is `2 pi omega m / N`. Returns the two CRLB diagonals.
pub fn crlb_bins(s: &ComplexSeq, n: usize, snr: f64, n1: i64, n2: i64) -> Result<[f64; 2]> {
    check_support(s, n1, n2)?;
    if !(snr > 0.0) {
        return param("SNR must be positive");
    }
    let q = quad_forms(s, n1, n2);
    let k = 2.0 * PI / n as f64;
    let p11 = q.shs - q.sts.norm_sqr() / q.ss;
    let p12 = k * (q.sdts - q.sds * q.sts / q.ss).im;
    let p22 = k * k * (q.sd2s - q.sds * q.sds / q.ss);
    let r = finish(Matrix2::new(p11, p12, p12, p22), snr)?;
    Ok([r.crlb[(0, 0)], r.crlb[(1, 1)]])
}

/// `(c^2 / (48 B^2 k_tau^2), c^2 B^2 / (48 f_cr^2 N^2 k_omega^2))` in m^2 and (m/s)^2.
pub fn sampling_bounds(b: f64, f_cr: f64, n: usize, k_tau: usize, k_omega: usize) -> (f64, f64) {
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    let kt = k_tau as f64;
    let kw = k_omega as f64;
    (c2 / (48.0 * b * b * kt * kt), c2 * b * b / (48.0 * f_cr * f_cr * (n * n) as f64 * kw * kw))
}

/// Sampling bounds in squared bins: `1 / (12 k^2)` per axis.
pub fn sampling_bounds_bins(k_tau: usize, k_omega: usize) -> (f64, f64) {
    (1.0 / (12.0 * (k_tau * k_tau) as f64), 1.0 / (12.0 * (k_omega * k_omega) as f64))
}

/// Monte Carlo sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub user: usize,
    /// Sequence energy (unity) over per-sample noise power, in dB.
    pub snr_db: Vec<f64>,
    pub p_fa: Vec<f64>,
    pub trials: usize,
    pub targets: usize,
    pub k_tau: usize,
    pub k_omega: usize,
    /// Draw fractional target offsets (for MSE) instead of integer ones.
    pub fractional: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub snr_db: f64,
    pub p_fa: f64,
    pub p_d: f64,
    /// Step-1 cell exceedance rate on noise-only trials.
    pub f_a_rate: f64,
    /// Number of noise-only cells behind `f_a_rate`.
    #[serde(skip)]
    pub null_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmseRow {
    pub snr_db: f64,
    pub nmse_range: f64,
    pub nmse_speed: f64,
    pub crlb_range: f64,
    pub crlb_speed: f64,
    pub sb_range: f64,
    pub sb_speed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloTables {
    pub roc: Vec<RocRow>,
    pub nmse: Vec<NmseRow>,
}

impl MonteCarloTables {
    pub fn write_roc_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.roc {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_nmse_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.nmse {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Per-trial RNG: stream `trial` of a ChaCha8 generator keyed by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(trial);
    r
}

/// Everything a trial needs about one user of a design.
#[derive(Debug, Clone)]
pub struct Link {
    pub tx: ComplexSeq,
    pub rx: ComplexSeq,
    pub xi: i64,
    pub n: usize,
    pub zone: Zone,
    pub tau_ext: usize,
}

impl Link {
    pub fn from_design(d: &FlagDesign, user: usize) -> Result<Self> {
        if user >= d.m() {
            return param(format!("user {user} out of range (M = {})", d.m()));
        }
        let spec = &d.curtains.members[user];
        let zone = d.curtains.zone;
        let n = d.n();
        let tx = d.flag_tx(user);
        // periodic echoes are synthesized on the base support
        let tx = if zone.case == CaseKind::Periodic { tx.window(0, n) } else { tx };
        let rx = d.flag_rx(user);
        let rx = if zone.case == CaseKind::Periodic { rx.window(0, n) } else { rx };
        Ok(Self { tx, rx, xi: spec.line_slope, n, zone, tau_ext: spec.tau_ext() })
    }

    pub fn search_input<'a>(&'a self, echo: &'a ComplexSeq) -> SearchInput<'a> {
        SearchInput { echo, reference: &self.rx, xi: self.xi, n: self.n, zone: self.zone }
    }

    /// Noisy echo of `targets` (bins) with complex noise power `noise`.
    pub fn echo<R: Rng>(&self, targets: &[(f64, f64, C)], noise: f64, rng: &mut R) -> Result<ComplexSeq> {
        let mut g = synthesize_clean(&self.tx, targets, self.n, &self.zone, self.tau_ext)?;
        if noise > 0.0 {
            add_noise(&mut g, noise, rng);
        }
        Ok(g)
    }
}

/// All targets matched within one bin per axis and no spurious detections.
pub fn detection_success(dets: &[Detection], targets: &[(f64, f64, C)]) -> bool {
    let near = |d: &Detection, t: &(f64, f64, C)| (d.tau_hat - t.0).abs() <= 1.0 && (d.omega_hat - t.1).abs() <= 1.0;
    targets.iter().all(|t| dets.iter().any(|d| near(d, t))) && dets.iter().all(|d| targets.iter().any(|t| near(d, t)))
}

fn draw_targets<R: Rng>(rng: &mut R, count: usize, zone: &Zone, fractional: bool) -> Vec<(f64, f64, C)> {
    let (tm, wm) = (zone.tau_max as i64, zone.omega_max as i64);
    let mut out: Vec<(f64, f64, C)> = Vec::new();
    while out.len() < count {
        let (t, w) = if fractional {
            (rng.random_range(-(tm as f64) + 1.0..=tm as f64 - 1.0), rng.random_range(-(wm as f64) + 1.0..=wm as f64 - 1.0))
        } else {
            (rng.random_range(-tm..=tm) as f64, rng.random_range(-wm..=wm) as f64)
        };
        if out.iter().all(|o| (o.0 - t).abs() > 2.0 || (o.1 - w).abs() > 2.0) {
            out.push((t, w, C::new(1.0, 0.0)));
        }
    }
    out
}

/// ROC and bin-normalized MSE tables for one user of a design. Trials run
/// in parallel with per-trial RNG streams, so results do not depend on the
/// thread count.
pub fn monte_carlo(design: &FlagDesign, mc: &MonteCarloConfig) -> Result<MonteCarloTables> {
    let link = Link::from_design(design, mc.user)?;
    if mc.trials == 0 {
        return param("trials must be positive");
    }
    let (sbr, sbw) = sampling_bounds_bins(mc.k_tau, mc.k_omega);
    let span = (-(link.tau_ext as i64) - 1, link.n as i64 + link.tau_ext as i64 + 1);
    let span = match link.zone.case {
        CaseKind::Periodic => (-(link.n as i64), 2 * link.n as i64),
        CaseKind::Aperiodic => span,
    };
    let mut out = MonteCarloTables::default();
    for (si, &snr_db) in mc.snr_db.iter().enumerate() {
        let noise = 10f64.powf(-snr_db / 10.0);
        for (pi, &p_fa) in mc.p_fa.iter().enumerate() {
            let cfar = CfarConfig::from_complex_noise(p_fa, noise);
            let key = ((si * 1000 + pi) as u64) << 32;
            let res: Vec<(bool, usize, usize, Option<(f64, f64)>)> = (0..mc.trials as u64)
                .into_par_iter()
                .map(|t| -> Result<_> {
                    let mut rng = trial_rng(mc.seed, key | t);
                    let targets = draw_targets(&mut rng, mc.targets, &link.zone, mc.fractional);
                    let echo = link.echo(&targets, noise, &mut rng)?;
                    let inp = link.search_input(&echo);
                    let (dets, _) = flag_search(&inp, &cfar)?;
                    let ok = detection_success(&dets, &targets);
                    let err = if ok && mc.targets == 1 {
                        let r = refine_fractional(&dets[0], &inp, mc.k_tau, mc.k_omega)?;
                        Some(((r.tau_hat - targets[0].0).powi(2), (r.omega_hat - targets[0].1).powi(2)))
                    } else {
                        None
                    };
                    let null = link.echo(&[], noise, &mut rng)?;
                    let (_, st) = flag_search(&link.search_input(&null), &cfar)?;
                    Ok((ok, st.exceedances, st.cells_tested, err))
                })
                .collect::<Result<_>>()?;
            let p_d = res.iter().filter(|r| r.0).count() as f64 / res.len() as f64;
            let (ex, cells) = res.iter().fold((0, 0), |a, r| (a.0 + r.1, a.1 + r.2));
            out.roc.push(RocRow { snr_db, p_fa, p_d, f_a_rate: ex as f64 / cells.max(1) as f64, null_cells: cells });
            if pi == 0 && mc.targets == 1 {
                let errs: Vec<(f64, f64)> = res.iter().filter_map(|r| r.3).collect();
                // NaN when no trial succeeded
                let cnt = errs.len() as f64;
                let mean = |f: fn(&(f64, f64)) -> f64| if errs.is_empty() { f64::NAN } else { errs.iter().map(f).sum::<f64>() / cnt };
                let [cr, cw] = crlb_bins(&link.tx, link.n, 10f64.powf(snr_db / 10.0), span.0, span.1)?;
                out.nmse.push(NmseRow {
                    snr_db,
                    nmse_range: mean(|e| e.0),
                    nmse_speed: mean(|e| e.1),
                    crlb_range: cr,
                    crlb_speed: cw,
                    sb_range: sbr,
                    sb_speed: sbw,
                });
            }
        }
    }
    Ok(out)
}
