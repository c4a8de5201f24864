//! Discrete periodic and aperiodic ambiguity functions.
//!
//! `A_{s,r}(tau, omega) = |r^H J_tau s_omega|` with `s_omega[n] = s[n] h_omega[n]`,
//! `h_omega[n] = exp(j 2 pi omega (n + 1) / N)` and `(J_tau x)[m] = x[m - tau]`
//! (cyclically in the periodic case). With this shift direction the curtain of
//! a chirp `c_{xi,q}` lies on `omega = xi * tau` in both cases.

use crate::error::{param, Result};
use crate::fft;
use crate::seqcore::{CaseKind, ComplexSeq, Zone};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// How delays wrap and which length normalizes Doppler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AfCase {
    /// Cyclic shifts; Doppler normalized by the common sequence length.
    Periodic,
    /// Linear shifts aligned by absolute index; Doppler normalized by `n`,
    /// the length of the underlying (unextended) sequence.
    Aperiodic { n: usize },
}

impl AfCase {
    pub fn for_zone(zone: &Zone, n: usize) -> Self {
        match zone.case {
            CaseKind::Periodic => AfCase::Periodic,
            CaseKind::Aperiodic => AfCase::Aperiodic { n },
        }
    }

    pub fn kind(&self) -> CaseKind {
        match self {
            AfCase::Periodic => CaseKind::Periodic,
            AfCase::Aperiodic { .. } => CaseKind::Aperiodic,
        }
    }

    fn doppler_len(&self, s: &ComplexSeq) -> usize {
        match *self {
            AfCase::Periodic => s.len(),
            AfCase::Aperiodic { n } => n,
        }
    }
}

fn check_pair(s: &ComplexSeq, r: &ComplexSeq, case: AfCase) -> Result<usize> {
    if s.len() != r.len() {
        return param(format!("sequence lengths differ: {} vs {}", s.len(), r.len()));
    }
    match case {
        AfCase::Periodic => {
            if s.start_index() != r.start_index() {
                return param("periodic AF needs identical supports");
            }
        }
        AfCase::Aperiodic { n } => {
            if n == 0 {
                return param("Doppler normalization length must be positive");
            }
        }
    }
    Ok(case.doppler_len(s))
}

/// Complex value `r^H J_tau s_omega`; `omega` may be fractional.
pub fn af_complex(s: &ComplexSeq, r: &ComplexSeq, tau: i64, omega: f64, case: AfCase) -> Result<Complex64> {
    let n = check_pair(s, r, case)?;
    Ok(af_complex_unchecked(s, r, tau, omega, n, case.kind()))
}

pub(crate) fn af_complex_unchecked(
    s: &ComplexSeq,
    r: &ComplexSeq,
    tau: i64,
    omega: f64,
    n: usize,
    kind: CaseKind,
) -> Complex64 {
    let w = 2.0 * PI * omega / n as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    match kind {
        CaseKind::Periodic => {
            let len = s.len() as i64;
            let s0 = s.start_index();
            for k in 0..len {
                let m = (k + tau).rem_euclid(len);
                let ph = Complex64::from_polar(1.0, w * (s0 + k + 1) as f64);
                acc += r.samples()[m as usize].conj() * s.samples()[k as usize] * ph;
            }
        }
        CaseKind::Aperiodic => {
            for (i, sv) in s.samples().iter().enumerate() {
                let k = s.start_index() + i as i64;
                let rv = r.at(k + tau);
                if rv.re != 0.0 || rv.im != 0.0 {
                    acc += rv.conj() * sv * Complex64::from_polar(1.0, w * (k + 1) as f64);
                }
            }
        }
    }
    acc
}

/// `|r^H J_tau s_omega|`.
pub fn af_point(s: &ComplexSeq, r: &ComplexSeq, tau: i64, omega: f64, case: AfCase) -> Result<f64> {
    af_complex(s, r, tau, omega, case).map(|z| z.norm())
}

/// Complex Doppler cut at fixed integer delay: entry `j` holds the value at
/// every `omega` congruent to `j` modulo `N`. One FFT of length `N`.
pub fn doppler_cut(s: &ComplexSeq, r: &ComplexSeq, tau: i64, case: AfCase) -> Result<Vec<Complex64>> {
    let n = check_pair(s, r, case)?;
    fft::bump_line_counter();
    Ok(cut_raw(s.samples(), s.start_index(), r.samples(), r.start_index(), tau, n, case.kind()))
}

/// Doppler cut on raw slices with explicit start indices (no validation, no counting).
pub(crate) fn cut_raw(
    s: &[Complex64],
    s0: i64,
    r: &[Complex64],
    r0: i64,
    tau: i64,
    n: usize,
    kind: CaseKind,
) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let ni = n as i64;
    match kind {
        CaseKind::Periodic => {
            let len = s.len() as i64;
            for k in 0..len {
                let m = (k + tau).rem_euclid(len) as usize;
                let j = (s0 + k + 1).rem_euclid(ni) as usize;
                buf[j] += r[m].conj() * s[k as usize];
            }
        }
        CaseKind::Aperiodic => {
            let rl = r.len() as i64;
            for (i, sv) in s.iter().enumerate() {
                if sv.re == 0.0 && sv.im == 0.0 {
                    continue;
                }
                let k = s0 + i as i64;
                let m = k + tau - r0;
                if m < 0 || m >= rl {
                    continue;
                }
                let j = (k + 1).rem_euclid(ni) as usize;
                buf[j] += r[m as usize].conj() * sv;
            }
        }
    }
    fft::inverse(&mut buf);
    buf
}

/// A lattice line in the delay-Doppler plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineSpec {
    /// Constant delay, Doppler from `omega_lo` to `omega_hi` inclusive. One FFT.
    Doppler { tau: i64, omega_lo: i64, omega_hi: i64 },
    /// `count` points `anchor + k * step`, evaluated pointwise.
    Walk { anchor: (i64, i64), step: (i64, i64), count: usize },
}

/// AF magnitudes along a line; identical to mapping [`af_point`] over its points.
pub fn af_line(s: &ComplexSeq, r: &ComplexSeq, line: &LineSpec, case: AfCase) -> Result<Vec<f64>> {
    match *line {
        LineSpec::Doppler { tau, omega_lo, omega_hi } => {
            if omega_hi < omega_lo {
                return param("empty Doppler range");
            }
            let cut = doppler_cut(s, r, tau, case)?;
            let n = cut.len() as i64;
            Ok((omega_lo..=omega_hi).map(|w| cut[w.rem_euclid(n) as usize].norm()).collect())
        }
        LineSpec::Walk { anchor, step, count } => {
            if step == (0, 0) {
                return param("line direction must be nonzero");
            }
            let n = check_pair(s, r, case)?;
            fft::bump_line_counter();
            Ok((0..count as i64)
                .map(|k| {
                    let (t, w) = (anchor.0 + k * step.0, anchor.1 + k * step.1);
                    af_complex_unchecked(s, r, t, w as f64, n, case.kind()).norm()
                })
                .collect())
        }
    }
}

/// Complex AF over the zone in row-major order (delay outer).
pub fn af_grid_complex(s: &ComplexSeq, r: &ComplexSeq, zone: &Zone, n: usize) -> Result<Vec<Complex64>> {
    let case = AfCase::for_zone(zone, n);
    let nd = check_pair(s, r, case)?;
    if zone.tau_max >= nd || zone.omega_max >= nd {
        return param(format!(
            "zone ({}, {}) exceeds N - 1 = {}",
            zone.tau_max,
            zone.omega_max,
            nd.saturating_sub(1)
        ));
    }
    Ok(grid_raw(s.samples(), s.start_index(), r.samples(), r.start_index(), zone, nd))
}

pub(crate) fn grid_raw(
    s: &[Complex64],
    s0: i64,
    r: &[Complex64],
    r0: i64,
    zone: &Zone,
    n: usize,
) -> Vec<Complex64> {
    let t = zone.tau_max as i64;
    let w = zone.omega_max as i64;
    let ni = n as i64;
    let rows: Vec<Vec<Complex64>> = (-t..=t)
        .into_par_iter()
        .map(|tau| {
            let cut = cut_raw(s, s0, r, r0, tau, n, zone.case);
            (-w..=w).map(|om| cut[om.rem_euclid(ni) as usize]).collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Dense `|AF|` over a zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AfGrid {
    pub tau_max: usize,
    pub omega_max: usize,
    pub case: CaseKind,
    /// Identifies the (transmit, reference) pair.
    pub meta: String,
    /// Row-major, delay outer.
    pub values: Vec<f64>,
}

impl AfGrid {
    pub fn zone(&self) -> Zone {
        Zone::new(self.tau_max, self.omega_max, self.case)
    }

    pub fn get(&self, tau: i64, omega: i64) -> f64 {
        self.values[self.zone().index(tau, omega)]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Rows `tau,omega,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau", "omega", "value"])?;
        for ((t, o), v) in self.zone().lattice().zip(&self.values) {
            wr.write_record([t.to_string(), o.to_string(), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Dense AF magnitudes over `zone`, one FFT Doppler cut per delay.
pub fn af_grid(s: &ComplexSeq, r: &ComplexSeq, zone: &Zone, n: usize) -> Result<AfGrid> {
    let vals = af_grid_complex(s, r, zone, n)?;
    Ok(AfGrid {
        tau_max: zone.tau_max,
        omega_max: zone.omega_max,
        case: zone.case,
        meta: String::new(),
        values: vals.into_iter().map(|z| z.norm()).collect(),
    })
}
