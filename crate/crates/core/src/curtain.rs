//! Curtain sequences and curtain sequence sets built from discrete chirps.
//!
//! A chirp `c_{xi,q}` has an ambiguity function equal to one on the line
//! `omega = xi * tau` and zero elsewhere inside a small enough zone. Sets of
//! chirps either have flat cross-ambiguity `1/sqrt(N)` (distinct slopes) or
//! zero cross-ambiguity inside the zone (shared slope, spaced offsets).

use crate::ambiguity::AfCase;
use crate::error::{param, CurtainViolation, Error, Result};
use crate::seqcore::{extend_chirp, make_chirp, zero_pad, CaseKind, ChirpParams, ComplexSeq, Zone};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn zone_lhs(xi: i64, zone: &Zone) -> u64 {
    xi.unsigned_abs() * zone.tau_max as u64 + zone.omega_max as u64
}

/// A validated chirp together with the zone it serves.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CurtainSpec {
    pub params: ChirpParams,
    /// The curtain lies on `omega = line_slope * tau`.
    pub line_slope: i64,
    pub zone: Zone,
}

impl CurtainSpec {
    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn tau_ext(&self) -> usize {
        self.params.tau_ext
    }

    /// Length of the stored sequences: `N` (periodic) or `N + 2 tau_ext`.
    pub fn stored_len(&self) -> usize {
        match self.zone.case {
            CaseKind::Periodic => self.params.n,
            CaseKind::Aperiodic => self.params.n + 2 * self.params.tau_ext,
        }
    }

    pub fn af_case(&self) -> AfCase {
        AfCase::for_zone(&self.zone, self.params.n)
    }

    /// Plain chirp on `0..N`.
    pub fn chirp(&self) -> ComplexSeq {
        make_chirp(&self.params).expect("validated at construction")
    }

    /// Transmit curtain: the chirp, zero-padded by `tau_ext` on both sides in
    /// the aperiodic case.
    pub fn transmit(&self) -> ComplexSeq {
        let c = self.chirp();
        match self.zone.case {
            CaseKind::Periodic => c,
            CaseKind::Aperiodic => zero_pad(&c, self.params.tau_ext),
        }
    }

    /// Receive curtain: the chirp, or its extension to `-tau_ext..N+tau_ext`.
    pub fn reference(&self) -> ComplexSeq {
        match self.zone.case {
            CaseKind::Periodic => self.chirp(),
            CaseKind::Aperiodic if self.params.tau_ext == 0 => self.chirp(),
            CaseKind::Aperiodic => extend_chirp(&self.params).expect("validated at construction"),
        }
    }

    /// `10 log10(N / L)`, the gain lost by correlating against the extension.
    pub fn extension_lpg_db(&self) -> f64 {
        10.0 * (self.params.n as f64 / self.stored_len() as f64).log10()
    }
}

/// Curtain with `tau_ext = zone.tau_max` in the aperiodic case.
pub fn build_curtain(n: usize, xi: i64, q: i64, zone: Zone) -> Result<CurtainSpec> {
    build_curtain_ext(n, xi, q, zone, zone.tau_max)
}

/// Curtain with an explicit extension width (ignored for periodic zones).
pub fn build_curtain_ext(n: usize, xi: i64, q: i64, zone: Zone, tau_ext: usize) -> Result<CurtainSpec> {
    let mut params = ChirpParams::new(n, xi, q);
    params.validate()?;
    if zone.tau_max >= n {
        return param(format!("tau_max = {} must be < N = {}", zone.tau_max, n));
    }
    let lhs = zone_lhs(xi, &zone);
    if lhs >= n as u64 {
        return Err(CurtainViolation::ZoneSize { lhs, n }.into());
    }
    match zone.case {
        CaseKind::Periodic => {
            if !params.parity_ok() {
                return Err(CurtainViolation::Parity { n, xi, q }.into());
            }
        }
        CaseKind::Aperiodic => {
            if zone.tau_max > tau_ext {
                return Err(CurtainViolation::ExtensionShort { tau_max: zone.tau_max, tau_ext }.into());
            }
            if xi != 0 {
                let bound = n / xi.unsigned_abs() as usize;
                if tau_ext >= bound {
                    return Err(CurtainViolation::ExtensionLong { tau_ext, bound, rule: "tau_ext < floor(N/|xi|)" }.into());
                }
            } else if tau_ext >= n {
                return Err(CurtainViolation::ExtensionLong { tau_ext, bound: n, rule: "tau_ext < N" }.into());
            }
            params = params.with_ext(tau_ext);
        }
    }
    Ok(CurtainSpec { params, line_slope: xi, zone })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetKind {
    /// Distinct slopes with pairwise differences coprime to `N`.
    NearZeroCAF,
    /// One shared slope, offsets spaced far enough to keep cross terms out of the zone.
    ZeroCAF,
}

/// A validated family of curtains sharing one zone. Serializes as the
/// member chirp parameters plus the zone and is re-validated on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetWire", into = "SetWire")]
pub struct CurtainSet {
    pub members: Vec<CurtainSpec>,
    pub kind: SetKind,
    pub zone: Zone,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetWire {
    kind: SetKind,
    zone: Zone,
    members: Vec<ChirpParams>,
}

impl From<CurtainSet> for SetWire {
    fn from(s: CurtainSet) -> Self {
        SetWire { kind: s.kind, zone: s.zone, members: s.members.iter().map(|m| m.params).collect() }
    }
}

impl TryFrom<SetWire> for CurtainSet {
    type Error = Error;

    fn try_from(w: SetWire) -> Result<Self> {
        if w.members.is_empty() {
            return param("curtain set has no members");
        }
        let n = w.members[0].n;
        if w.members.iter().any(|m| m.n != n) {
            return param("curtain set members differ in length");
        }
        let tau_ext = w.members[0].tau_ext;
        let xis: Vec<i64> = w.members.iter().map(|m| m.xi).collect();
        let qs: Vec<i64> = w.members.iter().map(|m| m.q).collect();
        match w.kind {
            SetKind::NearZeroCAF => build_near_zero_set_ext(n, &xis, &qs, w.zone, tau_ext),
            SetKind::ZeroCAF => {
                if let Some(&x) = xis.iter().find(|&&x| x != xis[0]) {
                    return Err(CurtainViolation::SlopeMismatch { xi_a: xis[0], xi_b: x }.into());
                }
                build_zero_set_ext(n, xis[0], &qs, w.zone, tau_ext)
            }
        }
    }
}

impl CurtainSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn n(&self) -> usize {
        self.members[0].params.n
    }

    pub fn af_case(&self) -> AfCase {
        AfCase::for_zone(&self.zone, self.n())
    }

    pub fn transmit(&self, m: usize) -> ComplexSeq {
        self.members[m].transmit()
    }

    pub fn reference(&self, m: usize) -> ComplexSeq {
        self.members[m].reference()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and re-validates a set.
    pub fn from_json(s: &str) -> Result<Self> {
        let w: SetWire = serde_json::from_str(s)?;
        CurtainSet::try_from(w)
    }
}

/// Distinct-slope set; see [`build_near_zero_set_ext`].
pub fn build_near_zero_set(n: usize, xis: &[i64], qs: &[i64], zone: Zone) -> Result<CurtainSet> {
    build_near_zero_set_ext(n, xis, qs, zone, zone.tau_max)
}

/// Distinct-slope set with pairwise cross-ambiguity `1/sqrt(N)`.
///
/// Every member must satisfy the chirp parity condition even in the
/// aperiodic case, and the aperiodic extension must also satisfy
/// `tau_ext <= floor(N / (2 max|xi|))`.
pub fn build_near_zero_set_ext(n: usize, xis: &[i64], qs: &[i64], zone: Zone, tau_ext: usize) -> Result<CurtainSet> {
    if xis.is_empty() || xis.len() != qs.len() {
        return param(format!("need matching non-empty xi/q lists, got {} and {}", xis.len(), qs.len()));
    }
    let mut members = Vec::with_capacity(xis.len());
    for (&xi, &q) in xis.iter().zip(qs) {
        let m = build_curtain_ext(n, xi, q, zone, tau_ext)?;
        if !m.params.parity_ok() {
            return Err(CurtainViolation::Parity { n, xi, q }.into());
        }
        members.push(m);
    }
    for a in 0..xis.len() {
        for b in a + 1..xis.len() {
            let g = gcd(xis[a].abs_diff(xis[b]), n as u64);
            if g != 1 {
                return Err(CurtainViolation::NotCoprime { xi_a: xis[a], xi_b: xis[b], gcd: g, n }.into());
            }
        }
    }
    if zone.case == CaseKind::Aperiodic {
        let max_xi = xis.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        if max_xi > 0 {
            let bound = n / (2 * max_xi as usize);
            if tau_ext > bound {
                return Err(CurtainViolation::ExtensionLong { tau_ext, bound, rule: "tau_ext <= floor(N/(2 max|xi|))" }.into());
            }
        }
    }
    Ok(CurtainSet { members, kind: SetKind::NearZeroCAF, zone })
}

/// Shared-slope set; see [`build_zero_set_ext`].
pub fn build_zero_set(n: usize, xi: i64, qs: &[i64], zone: Zone) -> Result<CurtainSet> {
    build_zero_set_ext(n, xi, qs, zone, zone.tau_max)
}

/// Shared-slope set whose cross-ambiguity vanishes inside the zone.
///
/// With `D = (q_a - q_b) / 2` the cross term of a pair lives on
/// `omega = xi * tau - D (mod N)`; it stays outside the zone when the
/// circular distance of `D` from zero exceeds `|xi| tau_max + omega_max`.
pub fn build_zero_set_ext(n: usize, xi: i64, qs: &[i64], zone: Zone, tau_ext: usize) -> Result<CurtainSet> {
    if qs.is_empty() {
        return param("zero-CAF set needs at least one offset");
    }
    let mut members = Vec::with_capacity(qs.len());
    for &q in qs {
        members.push(build_curtain_ext(n, xi, q, zone, tau_ext)?);
    }
    let bound = zone_lhs(xi, &zone);
    for a in 0..qs.len() {
        for b in a + 1..qs.len() {
            let (qa, qb) = (qs[a], qs[b]);
            if (qa - qb).rem_euclid(2) != 0 {
                return Err(CurtainViolation::ParityMix { qa, qb }.into());
            }
            let dm = ((qa - qb) / 2).rem_euclid(n as i64) as u64;
            let d = dm.min(n as u64 - dm);
            if d <= bound {
                return Err(CurtainViolation::GapTooSmall { qa, qb, d, bound }.into());
            }
        }
    }
    Ok(CurtainSet { members, kind: SetKind::ZeroCAF, zone })
}

/// `min{floor(N / (|xi| (tau_max + 1))), floor(N / (omega_max + 1))}`.
///
/// This is the published upper bound; [`zero_set_q_values`] realizes
/// `floor(N / d)` members with `d = |xi| tau_max + omega_max + 1`, which is
/// smaller whenever both zone terms are non-zero.
pub fn capacity(n: usize, xi: i64, zone: &Zone) -> usize {
    let by_omega = n / (zone.omega_max + 1);
    if xi == 0 {
        return by_omega;
    }
    let by_tau = n / (xi.unsigned_abs() as usize * (zone.tau_max + 1));
    by_tau.min(by_omega)
}

/// Parity-feasible offsets `q_k = q_0 + 2 d k` for a zero-CAF set, with
/// `d = |xi| tau_max + omega_max + 1` and `q_0` the smallest admissible value.
pub fn zero_set_q_values(n: usize, xi: i64, zone: &Zone, count: usize) -> Result<Vec<i64>> {
    let d = zone_lhs(xi, zone) + 1;
    let max = n as u64 / d;
    if count == 0 || count as u64 > max {
        return param(format!("count = {count} must be in 1..={max} (floor(N/d), d = {d})"));
    }
    let ni = n as i64;
    let want = (xi * ni).rem_euclid(2);
    let q0 = if (1 - ni).rem_euclid(2) == want { 1 - ni } else { 2 - ni };
    let qs: Vec<i64> = (0..count as i64).map(|k| q0 + 2 * d as i64 * k).collect();
    if let Some(&q) = qs.iter().find(|&&q| q > ni - 1) {
        return param(format!("offset q = {q} leaves [1-N, N-1]"));
    }
    Ok(qs)
}

/// Smallest-magnitude `q` satisfying the parity condition for `xi`.
pub fn default_q(n: usize, xi: i64) -> i64 {
    (xi * n as i64).rem_euclid(2)
}

/// Greedy choice of up to `count` slopes `1, -1, 2, -2, ...` whose pairwise
/// differences are coprime to `N` and whose curtains fit the zone. Heuristic:
/// the result is not guaranteed to be a largest such set.
pub fn greedy_coprime_xis(n: usize, zone: &Zone, count: usize) -> Vec<i64> {
    let mut out: Vec<i64> = Vec::new();
    let lim = n as i64 - 1;
    for k in 1..=lim {
        for xi in [k, -k] {
            if out.len() == count {
                return out;
            }
            if zone_lhs(xi, zone) >= n as u64 {
                continue;
            }
            if out.iter().all(|&o| gcd(o.abs_diff(xi), n as u64) == 1) {
                out.push(xi);
            }
        }
    }
    out
}

/// Categories of length-`N` Heisenberg sequences for prime `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeisenbergClass {
    Delta { u: usize },
    NonIdealChirp { xi: i64, q: i64 },
    IdealChirp { xi: i64, q: i64 },
}

fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// Recovers `(xi, q)` from phase second differences and sorts the sequence
/// into delta, non-ideal chirp or ideal chirp. A common complex factor is
/// allowed.
pub fn classify_heisenberg(n: usize, seq: &ComplexSeq) -> Result<HeisenbergClass> {
    if !is_prime(n) {
        return param(format!("N = {n} is not prime"));
    }
    if seq.len() != n {
        return param(format!("sequence length {} differs from N = {}", seq.len(), n));
    }
    let x = seq.samples();
    let peak = seq.max_abs2().sqrt();
    if peak == 0.0 {
        return Err(Error::Classification("all-zero sequence".into()));
    }
    let tol = 1e-8 * peak;
    let nz: Vec<usize> = (0..n).filter(|&i| x[i].norm() > tol).collect();
    if nz.len() == 1 {
        return Ok(HeisenbergClass::Delta { u: nz[0] });
    }
    if x.iter().any(|v| (v.norm() - peak).abs() > tol) {
        return Err(Error::Classification("neither a delta nor constant modulus".into()));
    }
    if n < 3 {
        return Err(Error::Classification("chirp recovery needs N >= 3".into()));
    }
    let nf = n as f64;
    let second = x[2] * x[0] * (x[1] * x[1]).conj();
    let xi_mod = (second.arg() * nf / (2.0 * PI)).round() as i64;
    let mut xi = xi_mod.rem_euclid(n as i64);
    let first = x[1] * x[0].conj();
    let s = (first.arg() * nf / PI).round() as i64;
    let mut q = (s - xi).rem_euclid(2 * n as i64);
    if q >= n as i64 {
        q -= 2 * n as i64;
    }
    if q == -(n as i64) {
        // c_{xi, q} == c_{xi - N, q + N}
        if xi == 0 {
            return Err(Error::Classification("alternating sign sequence has no in-range chirp form".into()));
        }
        xi -= n as i64;
        q += n as i64;
    }
    let p = ChirpParams::new(n, xi, q);
    let g = x[0] / x[0].norm() * peak * (n as f64).sqrt();
    let ok = (0..n).all(|i| (p.sample(i as i64) * g - x[i]).norm() <= 1e-6 * peak);
    if !ok {
        return Err(Error::Classification("phase is not quadratic".into()));
    }
    Ok(if p.parity_ok() {
        HeisenbergClass::IdealChirp { xi, q }
    } else {
        HeisenbergClass::NonIdealChirp { xi, q }
    })
}

/// Delta `delta_u` of length `n`.
pub fn delta(n: usize, u: usize) -> Result<ComplexSeq> {
    if u >= n {
        return param(format!("delta position {u} outside 0..{n}"));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[u] = Complex64::new(1.0, 0.0);
    ComplexSeq::from_vec(v)
}
