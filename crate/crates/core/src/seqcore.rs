//! Complex sequences with an explicit signed start index, chirp generation,
//! and energy bookkeeping.
//!
//! No constructor normalizes silently: [`make_chirp`] has unit energy,
//! [`extend_chirp`] has energy `L/N`, and [`zero_pad`] preserves energy.

use crate::error::{param, Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{Read, Write};

/// Periodic or aperiodic ambiguity-function setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseKind {
    Periodic,
    Aperiodic,
}

/// Delay-Doppler zone of operation `|tau| <= tau_max`, `|omega| <= omega_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub tau_max: usize,
    pub omega_max: usize,
    pub case: CaseKind,
}

impl Zone {
    pub fn new(tau_max: usize, omega_max: usize, case: CaseKind) -> Self {
        Self { tau_max, omega_max, case }
    }

    pub fn periodic(tau_max: usize, omega_max: usize) -> Self {
        Self::new(tau_max, omega_max, CaseKind::Periodic)
    }

    pub fn aperiodic(tau_max: usize, omega_max: usize) -> Self {
        Self::new(tau_max, omega_max, CaseKind::Aperiodic)
    }

    pub fn contains(&self, tau: i64, omega: i64) -> bool {
        tau.unsigned_abs() as usize <= self.tau_max && omega.unsigned_abs() as usize <= self.omega_max
    }

    pub fn n_tau(&self) -> usize {
        2 * self.tau_max + 1
    }

    pub fn n_omega(&self) -> usize {
        2 * self.omega_max + 1
    }

    /// Number of lattice cells in the zone.
    pub fn cells(&self) -> usize {
        self.n_tau() * self.n_omega()
    }

    /// Lattice points in row-major order (delay outer, Doppler inner).
    pub fn lattice(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let t = self.tau_max as i64;
        let w = self.omega_max as i64;
        (-t..=t).flat_map(move |tau| (-w..=w).map(move |om| (tau, om)))
    }

    /// Row-major index of `(tau, omega)`; caller guarantees membership.
    pub fn index(&self, tau: i64, omega: i64) -> usize {
        let r = (tau + self.tau_max as i64) as usize;
        let c = (omega + self.omega_max as i64) as usize;
        r * self.n_omega() + c
    }
}

/// Discrete chirp parameters: length `n`, rate `xi`, phase index `q`, and the
/// extension width used for aperiodic receive references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChirpParams {
    pub n: usize,
    pub xi: i64,
    pub q: i64,
    #[serde(default)]
    pub tau_ext: usize,
}

impl ChirpParams {
    pub fn new(n: usize, xi: i64, q: i64) -> Self {
        Self { n, xi, q, tau_ext: 0 }
    }

    pub fn with_ext(mut self, tau_ext: usize) -> Self {
        self.tau_ext = tau_ext;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return param("chirp length must be positive");
        }
        let lim = self.n as i64 - 1;
        if self.xi < -lim || self.xi > lim {
            return param(format!("xi = {} outside [{}, {}]", self.xi, -lim, lim));
        }
        if self.q < -lim || self.q > lim {
            return param(format!("q = {} outside [{}, {}]", self.q, -lim, lim));
        }
        Ok(())
    }

    /// `[xi*N - q] mod 2 == 0`.
    pub fn parity_ok(&self) -> bool {
        (self.xi * self.n as i64 - self.q).rem_euclid(2) == 0
    }

    /// Sample at signed index `idx` of the (possibly extended) chirp.
    pub fn sample(&self, idx: i64) -> Complex64 {
        chirp_sample(self.n, self.xi, self.q, idx)
    }
}

/// `exp(j pi idx (xi idx + q) / N) / sqrt(N)`, with the phase reduced exactly
/// modulo `2N` in integer arithmetic.
pub fn chirp_sample(n: usize, xi: i64, q: i64, idx: i64) -> Complex64 {
    let two_n = 2 * n as i128;
    let k = (idx as i128 * (xi as i128 * idx as i128 + q as i128)).rem_euclid(two_n);
    let phase = PI * k as f64 / n as f64;
    Complex64::from_polar(1.0 / (n as f64).sqrt(), phase)
}

/// Complex samples on the index range `[start_index, start_index + len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq {
    start: i64,
    samples: Vec<Complex64>,
}

impl ComplexSeq {
    pub fn new(start_index: i64, samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return param("sequence must have at least one sample");
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return param("sequence contains non-finite samples");
        }
        Ok(Self { start: start_index, samples })
    }

    /// Periodic-style sequence starting at index 0.
    pub fn from_vec(samples: Vec<Complex64>) -> Result<Self> {
        Self::new(0, samples)
    }

    pub(crate) fn from_parts_unchecked(start: i64, samples: Vec<Complex64>) -> Self {
        Self { start, samples }
    }

    pub fn start_index(&self) -> i64 {
        self.start
    }

    /// One past the last stored index.
    pub fn end_index(&self) -> i64 {
        self.start + self.samples.len() as i64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Sample at absolute index `n`, zero outside the stored support.
    pub fn at(&self, n: i64) -> Complex64 {
        if n < self.start || n >= self.end_index() {
            Complex64::new(0.0, 0.0)
        } else {
            self.samples[(n - self.start) as usize]
        }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn max_abs2(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }

    /// `self^H other`, aligned by absolute index.
    pub fn inner(&self, other: &ComplexSeq) -> Complex64 {
        let lo = self.start.max(other.start);
        let hi = self.end_index().min(other.end_index());
        (lo..hi).map(|n| self.at(n).conj() * other.at(n)).sum()
    }

    pub fn scale(&self, a: Complex64) -> ComplexSeq {
        Self::from_parts_unchecked(self.start, self.samples.iter().map(|z| z * a).collect())
    }

    /// Elementwise sum over the union of supports.
    pub fn add(&self, other: &ComplexSeq) -> ComplexSeq {
        let lo = self.start.min(other.start);
        let hi = self.end_index().max(other.end_index());
        let v = (lo..hi).map(|n| self.at(n) + other.at(n)).collect();
        Self::from_parts_unchecked(lo, v)
    }

    /// Copy of the samples on `[start, start + len)`, zero where not stored.
    pub fn window(&self, start: i64, len: usize) -> ComplexSeq {
        let v = (start..start + len as i64).map(|n| self.at(n)).collect();
        Self::from_parts_unchecked(start, v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// CSV rows `n,re,im` with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "re", "im"])?;
        for (k, z) in self.samples.iter().enumerate() {
            let n = self.start + k as i64;
            wr.write_record([n.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut start = None;
        let mut samples = Vec::new();
        for rec in rd.deserialize() {
            let (n, re, im): (i64, f64, f64) = rec?;
            let expected = start.map(|s: i64| s + samples.len() as i64);
            match expected {
                None => start = Some(n),
                Some(e) if e != n => {
                    return Err(Error::Param(format!("csv index {n} not contiguous (expected {e})")))
                }
                _ => {}
            }
            samples.push(Complex64::new(re, im));
        }
        Self::new(start.unwrap_or(0), samples)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeqWire {
    start_index: i64,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for ComplexSeq {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqWire {
            start_index: self.start,
            re: self.samples.iter().map(|z| z.re).collect(),
            im: self.samples.iter().map(|z| z.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexSeq {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = SeqWire::deserialize(d)?;
        if w.re.len() != w.im.len() {
            return Err(serde::de::Error::custom("re and im lengths differ"));
        }
        let v = w.re.into_iter().zip(w.im).map(|(a, b)| Complex64::new(a, b)).collect();
        ComplexSeq::new(w.start_index, v).map_err(serde::de::Error::custom)
    }
}

/// Chirp `c[n]`, `n = 0..N-1`; unit energy.
pub fn make_chirp(p: &ChirpParams) -> Result<ComplexSeq> {
    p.validate()?;
    let v = (0..p.n as i64).map(|k| p.sample(k)).collect();
    Ok(ComplexSeq::from_parts_unchecked(0, v))
}

/// Chirp evaluated on `n = -tau_ext .. N-1+tau_ext`; energy `L/N`.
pub fn extend_chirp(p: &ChirpParams) -> Result<ComplexSeq> {
    p.validate()?;
    if p.tau_ext == 0 {
        return param("tau_ext = 0: use make_chirp for the unextended sequence");
    }
    let t = p.tau_ext as i64;
    let v = (-t..p.n as i64 + t).map(|k| p.sample(k)).collect();
    Ok(ComplexSeq::from_parts_unchecked(-t, v))
}

/// `[0_{tau_ext}, c, 0_{tau_ext}]` with start index shifted by `-tau_ext`.
pub fn zero_pad(c: &ComplexSeq, tau_ext: usize) -> ComplexSeq {
    let t = tau_ext as i64;
    c.window(c.start_index() - t, c.len() + 2 * tau_ext)
}

/// Peak-to-average power ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Papr {
    pub linear: f64,
    pub db: f64,
}

/// `len * max|s|^2 / ||s||^2`.
pub fn papr(s: &ComplexSeq) -> Result<Papr> {
    papr_over(s, s.len())
}

/// PAPR with an explicit averaging length, for zero-padded sequences whose
/// active duration is shorter than their stored support.
pub fn papr_over(s: &ComplexSeq, active_len: usize) -> Result<Papr> {
    let e = s.energy();
    if e <= 0.0 {
        return Err(Error::Domain("PAPR of a zero-energy sequence".into()));
    }
    let linear = active_len as f64 * s.max_abs2() / e;
    Ok(Papr { linear, db: 10.0 * linear.log10() })
}
