//! Weighted integrated masked sidelobe level (WImSL) of a Flag sequence set,
//! the peak-correlation penalty, and the loss-in-processing-gain bookkeeping.
//!
//! For transmit user `l` and receive user `k` the masked term at `(tau, omega)` is
//!
//! `W B(p_l, p_k) + Wbar (B(c_l, p_k) + B(p_l, c_k)) + Wtilde B(c_l, c_k)`
//!
//! where `B(s, r) = r^H J_tau Diag(h_omega) s` is the complex ambiguity value.

use crate::ambiguity::grid_raw;
use crate::curtain::CurtainSet;
use crate::error::{param, Error, Result};
use crate::seqcore::{CaseKind, ComplexSeq, Zone};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

type C = Complex64;

/// Weights and sizes of a design problem. Every field must be present in
/// the JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    /// Number of users.
    pub m: usize,
    pub zone: Zone,
    /// Origin weight, `>= 1`.
    pub varrho: f64,
    /// Auto versus cross weight in `[0, 1]`.
    pub alpha: f64,
    /// WImSL versus penalty weight in `(0, 1]`.
    pub beta: f64,
    /// Target peak correlation in `(0, 1]`.
    pub epsilon: f64,
    /// Transmit and receive peaks are tied.
    pub symmetric: bool,
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return param("m must be at least 1");
        }
        if !(self.varrho >= 1.0 && self.varrho.is_finite()) {
            return param(format!("varrho = {} must be >= 1", self.varrho));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return param(format!("alpha = {} outside [0, 1]", self.alpha));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return param(format!("beta = {} outside (0, 1]", self.beta));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return param(format!("epsilon = {} outside (0, 1]", self.epsilon));
        }
        Ok(())
    }

    /// `(1 - beta) / beta`.
    pub fn beta_prime(&self) -> f64 {
        (1.0 - self.beta) / self.beta
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `(W, Wbar, Wtilde)` for a (transmit user, receive user, delay, Doppler) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Masks {
    pub w: f64,
    pub w_bar: f64,
    pub w_tilde: f64,
}

pub fn masks(m1: usize, m2: usize, tau: i64, omega: i64, varrho: f64) -> Masks {
    let same = m1 == m2;
    let origin = same && tau == 0 && omega == 0;
    Masks {
        w: if origin { 0.0 } else { 1.0 },
        w_bar: if origin { varrho } else { 1.0 },
        w_tilde: if same { 0.0 } else { 1.0 },
    }
}

/// Fixed curtains plus free transmit and receive peaks, all stored on the
/// same index range as the curtain set's transmit sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlagDesign {
    pub curtains: CurtainSet,
    pub peaks_tx: Vec<ComplexSeq>,
    pub peaks_rx: Vec<ComplexSeq>,
}

fn peak_from(start: i64, len: usize, n: usize, v: impl Iterator<Item = C>) -> ComplexSeq {
    let mut s = vec![C::new(0.0, 0.0); len];
    let off = (-start) as usize;
    for (i, z) in v.take(n).enumerate() {
        s[off + i] = z;
    }
    ComplexSeq::from_parts_unchecked(start, s)
}

impl FlagDesign {
    pub fn new(curtains: CurtainSet, peaks_tx: Vec<ComplexSeq>, peaks_rx: Vec<ComplexSeq>) -> Result<Self> {
        let d = Self { curtains, peaks_tx, peaks_rx };
        d.check_layout()?;
        Ok(d)
    }

    fn check_layout(&self) -> Result<()> {
        let m = self.curtains.len();
        if self.peaks_tx.len() != m || self.peaks_rx.len() != m {
            return param(format!(
                "expected {m} peaks per side, got {} and {}",
                self.peaks_tx.len(),
                self.peaks_rx.len()
            ));
        }
        let (start, len, n) = (self.start(), self.len(), self.n());
        for p in self.peaks_tx.iter().chain(&self.peaks_rx) {
            if p.start_index() != start || p.len() != len {
                return param(format!("peak support must be [{start}, {})", start + len as i64));
            }
            let outside = (start..0).chain(n as i64..start + len as i64).any(|i| p.at(i).norm() != 0.0);
            if outside {
                return param("peaks must vanish outside 0..N");
            }
        }
        Ok(())
    }

    /// Uniform random phases at modulus `1/sqrt(N)`, identical on both sides.
    pub fn random_init(curtains: CurtainSet, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m) = (curtains.n(), curtains.len());
        let start = curtains.transmit(0).start_index();
        let len = curtains.members[0].stored_len();
        let amp = 1.0 / (n as f64).sqrt();
        let peaks: Vec<ComplexSeq> = (0..m)
            .map(|_| {
                let it = (0..n).map(|_| C::from_polar(amp, 2.0 * PI * rng.random::<f64>()));
                peak_from(start, len, n, it)
            })
            .collect();
        Self { curtains, peaks_tx: peaks.clone(), peaks_rx: peaks }
    }

    pub fn m(&self) -> usize {
        self.curtains.len()
    }

    pub fn n(&self) -> usize {
        self.curtains.n()
    }

    pub fn start(&self) -> i64 {
        self.curtains.transmit(0).start_index()
    }

    /// Stored length `L`.
    pub fn len(&self) -> usize {
        self.curtains.members[0].stored_len()
    }

    pub fn is_empty(&self) -> bool {
        self.curtains.is_empty()
    }

    pub fn c_tx(&self, m: usize) -> ComplexSeq {
        self.curtains.transmit(m)
    }

    pub fn c_rx(&self, m: usize) -> ComplexSeq {
        self.curtains.reference(m)
    }

    /// `(c + p) / sqrt(2)` on the transmit side.
    pub fn flag_tx(&self, m: usize) -> ComplexSeq {
        self.c_tx(m).add(&self.peaks_tx[m]).scale(C::new(0.5f64.sqrt(), 0.0))
    }

    /// `(c + p) / sqrt(2)` on the receive side.
    pub fn flag_rx(&self, m: usize) -> ComplexSeq {
        self.c_rx(m).add(&self.peaks_rx[m]).scale(C::new(0.5f64.sqrt(), 0.0))
    }

    /// Replace the free samples `0..N` of every peak.
    pub fn with_peaks(&self, tx: &[Vec<C>], rx: &[Vec<C>]) -> Self {
        let (start, len, n) = (self.start(), self.len(), self.n());
        let off = (-start) as usize;
        let mk = |v: &Vec<C>| peak_from(start, len, n, v[off..off + n].iter().copied());
        Self {
            curtains: self.curtains.clone(),
            peaks_tx: tx.iter().map(mk).collect(),
            peaks_rx: rx.iter().map(mk).collect(),
        }
    }

    /// Largest violation of `|p^s[n]| = 1/sqrt(N)` and `||p^r|| = 1`, as
    /// `(max_n ||p^s[n]| sqrt(N) - 1|, max_m |‖p^r‖ - 1|)`.
    pub fn constraint_drift(&self) -> (f64, f64) {
        let n = self.n();
        let sq = (n as f64).sqrt();
        let tx = self
            .peaks_tx
            .iter()
            .flat_map(|p| (0..n as i64).map(move |i| (p.at(i).norm() * sq - 1.0).abs()))
            .fold(0.0, f64::max);
        let rx = self.peaks_rx.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
        (tx, rx)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(s)?;
        d.check_layout()?;
        Ok(d)
    }
}

/// `a^H b`.
pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Precomputed fixed parts of a design problem working on raw sample
/// vectors of length `L` that start at absolute index `start`.
#[derive(Debug, Clone)]
pub struct Model {
    pub cfg: DesignConfig,
    pub n: usize,
    pub len: usize,
    pub start: i64,
    pub(crate) c_tx: Vec<Vec<C>>,
    pub(crate) c_rx: Vec<Vec<C>>,
    /// Auto curtain-curtain grids, removed by the `Wtilde = 0` mask.
    pub(crate) cc: Vec<Vec<C>>,
}

impl Model {
    pub fn new(curtains: &CurtainSet, cfg: &DesignConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.m != curtains.len() {
            return param(format!("config m = {} but curtain set has {} members", cfg.m, curtains.len()));
        }
        if cfg.zone != curtains.zone {
            return param("config zone differs from the curtain set zone");
        }
        let n = curtains.n();
        if cfg.zone.tau_max >= n || cfg.zone.omega_max >= n {
            return param("zone must be smaller than N");
        }
        let c_tx: Vec<Vec<C>> = (0..cfg.m).map(|i| curtains.transmit(i).into_samples()).collect();
        let c_rx: Vec<Vec<C>> = (0..cfg.m).map(|i| curtains.reference(i).into_samples()).collect();
        let start = curtains.transmit(0).start_index();
        let len = c_tx[0].len();
        let mut model = Self { cfg: *cfg, n, len, start, c_tx, c_rx, cc: Vec::new() };
        model.cc = (0..cfg.m).map(|i| model.grid(&model.c_tx[i], &model.c_rx[i])).collect();
        Ok(model)
    }

    pub fn zone(&self) -> &Zone {
        &self.cfg.zone
    }

    pub fn case(&self) -> CaseKind {
        self.cfg.zone.case
    }

    /// Local index range of the free peak samples.
    pub fn support(&self) -> std::ops::Range<usize> {
        let off = (-self.start) as usize;
        off..off + self.n
    }

    pub(crate) fn grid(&self, s: &[C], r: &[C]) -> Vec<C> {
        grid_raw(s, self.start, r, self.start, &self.cfg.zone, self.n)
    }

    pub fn origin(&self) -> usize {
        self.cfg.zone.index(0, 0)
    }

    /// Masked terms for every (transmit `l`, receive `k`) pair, stored at `l * M + k`.
    pub fn terms(&self, ps: &[Vec<C>], pr: &[Vec<C>]) -> Vec<Vec<C>> {
        self.terms_with(ps, &self.c_tx, pr, &self.c_rx, Some(&self.cc))
    }

    /// As [`Model::terms`] with explicit curtain vectors; `cc` caches the
    /// auto curtain-curtain grids when the curtains are the model's own.
    pub(crate) fn terms_with(
        &self,
        ps: &[Vec<C>],
        cs: &[Vec<C>],
        pr: &[Vec<C>],
        cr: &[Vec<C>],
        cc: Option<&[Vec<C>]>,
    ) -> Vec<Vec<C>> {
        let m = self.cfg.m;
        let o = self.origin();
        (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (l, k) = (idx / m, idx % m);
                let s: Vec<C> = ps[l].iter().zip(&cs[l]).map(|(a, b)| a + b).collect();
                let r: Vec<C> = pr[k].iter().zip(&cr[k]).map(|(a, b)| a + b).collect();
                let mut g = self.grid(&s, &r);
                if l == k {
                    let fresh;
                    let base: &[C] = match cc {
                        Some(c) => &c[l],
                        None => {
                            fresh = self.grid(&cs[l], &cr[k]);
                            &fresh
                        }
                    };
                    for (x, c) in g.iter_mut().zip(base) {
                        *x -= c;
                    }
                    g[o] = self.cfg.varrho * (dot(&pr[k], &cs[l]) + dot(&cr[k], &ps[l]));
                }
                g
            })
            .collect()
    }

    /// `alpha * sum_auto + (1 - alpha) * sum_cross` of squared terms.
    pub fn wimsl_from_terms(&self, terms: &[Vec<C>]) -> f64 {
        let m = self.cfg.m;
        let mut auto = 0.0;
        let mut cross = 0.0;
        for (idx, g) in terms.iter().enumerate() {
            let e: f64 = g.iter().map(|z| z.norm_sqr()).sum();
            if idx / m == idx % m {
                auto += e;
            } else {
                cross += e;
            }
        }
        self.cfg.alpha * auto + (1.0 - self.cfg.alpha) * cross
    }

    pub fn wimsl(&self, ps: &[Vec<C>], pr: &[Vec<C>]) -> f64 {
        self.wimsl_from_terms(&self.terms(ps, pr))
    }

    /// `sum_m |p_m^s^H p_m^r - epsilon|^2`.
    pub fn penalty(&self, ps: &[Vec<C>], pr: &[Vec<C>]) -> f64 {
        ps.iter().zip(pr).map(|(s, r)| (dot(s, r) - self.cfg.epsilon).norm_sqr()).sum()
    }

    /// Design objective: `G + beta' P` (asymmetric) or `G` (symmetric).
    pub fn objective(&self, ps: &[Vec<C>], pr: &[Vec<C>]) -> f64 {
        let (g, p) = self.objective_parts(ps, pr);
        g + p
    }

    /// `(G, beta' P)`; the second part is zero for symmetric configurations.
    pub fn objective_parts(&self, ps: &[Vec<C>], pr: &[Vec<C>]) -> (f64, f64) {
        let g = self.wimsl(ps, pr);
        if self.cfg.symmetric {
            (g, 0.0)
        } else {
            (g, self.cfg.beta_prime() * self.penalty(ps, pr))
        }
    }

    /// Transmit curtain of user `m` as a raw vector.
    pub fn curtain_tx(&self, m: usize) -> &[C] {
        &self.c_tx[m]
    }

    /// Receive curtain of user `m` as a raw vector.
    pub fn curtain_rx(&self, m: usize) -> &[C] {
        &self.c_rx[m]
    }
}

/// Raw transmit and receive peak vectors of a design.
pub fn raw_peaks(d: &FlagDesign) -> (Vec<Vec<C>>, Vec<Vec<C>>) {
    (
        d.peaks_tx.iter().map(|p| p.samples().to_vec()).collect(),
        d.peaks_rx.iter().map(|p| p.samples().to_vec()).collect(),
    )
}

/// Tagged (peak, curtain) decomposition of one side of a Flag sequence.
#[derive(Debug, Clone, Copy)]
pub struct Parts<'a> {
    pub peak: &'a ComplexSeq,
    pub curtain: &'a ComplexSeq,
}

/// `S(f_tx, f_rx)`: masked squared terms summed over the zone. `auto`
/// selects the same-user masks.
pub fn wimsl_pair(tx: Parts, rx: Parts, zone: &Zone, n: usize, auto: bool, varrho: f64) -> Result<f64> {
    let seqs = [tx.peak, tx.curtain, rx.peak, rx.curtain];
    let start = tx.peak.start_index();
    let len = tx.peak.len();
    if seqs.iter().any(|s| s.start_index() != start || s.len() != len) {
        return Err(Error::Param("peak and curtain parts must share one support".into()));
    }
    if zone.tau_max >= n || zone.omega_max >= n {
        return param("zone must be smaller than N");
    }
    let g = |s: &ComplexSeq, r: &ComplexSeq| grid_raw(s.samples(), start, r.samples(), start, zone, n);
    let pp = g(tx.peak, rx.peak);
    let cp = g(tx.curtain, rx.peak);
    let pc = g(tx.peak, rx.curtain);
    let cc = g(tx.curtain, rx.curtain);
    let (a, b) = if auto { (0, 0) } else { (0, 1) };
    Ok(zone
        .lattice()
        .enumerate()
        .map(|(i, (tau, om))| {
            let mk = masks(a, b, tau, om, varrho);
            (mk.w * pp[i] + mk.w_bar * (cp[i] + pc[i]) + mk.w_tilde * cc[i]).norm_sqr()
        })
        .sum())
}

/// `G = alpha sum_m S(m, m) + (1 - alpha) sum_{l != k} S(l, k)`.
pub fn wimsl_total(design: &FlagDesign, cfg: &DesignConfig) -> Result<f64> {
    let model = Model::new(&design.curtains, cfg)?;
    let (ps, pr) = raw_peaks(design);
    Ok(model.wimsl(&ps, &pr))
}

/// `sum_m |p_m^s^H p_m^r - epsilon|^2`.
pub fn penalty(design: &FlagDesign, epsilon: f64) -> f64 {
    design
        .peaks_tx
        .iter()
        .zip(&design.peaks_rx)
        .map(|(s, r)| (s.inner(r) - epsilon).norm_sqr())
        .sum()
}

/// `G + beta' P`, or `G` for symmetric configurations.
pub fn objective_value(design: &FlagDesign, cfg: &DesignConfig) -> Result<f64> {
    let model = Model::new(&design.curtains, cfg)?;
    let (ps, pr) = raw_peaks(design);
    Ok(model.objective(&ps, &pr))
}

/// `10 log10(|f_r^H f_s|^2 / (‖f_s‖^2 ‖f_r‖^2))`.
pub fn lpg(f_s: &ComplexSeq, f_r: &ComplexSeq) -> Result<f64> {
    let (es, er) = (f_s.energy(), f_r.energy());
    if es == 0.0 || er == 0.0 {
        return Err(Error::Domain("LPG of a zero-energy sequence".into()));
    }
    Ok(10.0 * (f_r.inner(f_s).norm_sqr() / (es * er)).log10())
}

/// Lower clamp for dB values of vanishing quantities.
pub const DB_FLOOR: f64 = -300.0;

/// `max_m max(|p_m^s^H c_m^s|, |c_m^r^H p_m^r|)` in dB (`20 log10`), floored.
pub fn orthogonality_delta(design: &FlagDesign) -> f64 {
    let v = (0..design.m())
        .map(|m| {
            let a = design.peaks_tx[m].inner(&design.c_tx(m)).norm();
            let b = design.c_rx(m).inner(&design.peaks_rx[m]).norm();
            a.max(b)
        })
        .fold(0.0, f64::max);
    if v > 0.0 {
        (20.0 * v.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}
