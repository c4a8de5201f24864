//! Two-step Flag-method delay-Doppler search with a fixed CFAR threshold
//! and oversampled refinement.
//!
//! For an echo `g` and reference `r` the search statistic is
//!
//! `T(tau, omega) = |sum_m conj(r[m - tau]) g[m] exp(-j 2 pi omega (m + 1) / N)|^2 / ‖r‖^2`,
//!
//! so a target at `(tau0, omega0)` shows up as the reference/transmit AF
//! translated to `(tau0, omega0)`: a peak there and a curtain on
//! `omega - omega0 = xi (tau - tau0)`. Step 1 evaluates one Doppler cut at
//! `tau = 0`, which crosses every curtain, and step 2 walks each crossing
//! along its curtain.

use crate::error::{param, Result};
use crate::fft;
use crate::seqcore::{CaseKind, ComplexSeq, Zone};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

type C = Complex64;

/// Fixed-threshold CFAR settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    pub p_fa: f64,
    /// Noise variance per quadrature component.
    pub sigma_z2: f64,
}

impl CfarConfig {
    /// From the total (complex) noise power `E|z|^2`.
    pub fn from_complex_noise(p_fa: f64, noise_power: f64) -> Self {
        Self { p_fa, sigma_z2: noise_power / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_fa > 0.0 && self.p_fa <= 1.0) {
            return param(format!("p_fa must lie in (0, 1], got {}", self.p_fa));
        }
        if !(self.sigma_z2 >= 0.0 && self.sigma_z2.is_finite()) {
            return param(format!("sigma_z2 must be finite and nonnegative, got {}", self.sigma_z2));
        }
        Ok(())
    }
}

/// `-2 sigma^2 ln(P_FA)`.
pub fn cfar_threshold(cfg: &CfarConfig) -> f64 {
    -2.0 * cfg.sigma_z2 * cfg.p_fa.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub tau_hat: f64,
    pub omega_hat: f64,
    /// Statistic `T` at the estimate.
    pub peak_value: f64,
    /// Cell of the step-1 cut that led to this detection.
    pub curtain_tau: i64,
    pub curtain_omega: i64,
}

/// Counters from one [`flag_search`] call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// AF line evaluations (one cut plus one walk per hit).
    pub line_evals: usize,
    pub curtain_hits: usize,
    /// Step-1 cells compared against the threshold.
    pub cells_tested: usize,
    /// Step-1 cells above the threshold.
    pub exceedances: usize,
}

/// Echo, reference and geometry for one search.
#[derive(Debug, Clone, Copy)]
pub struct SearchInput<'a> {
    pub echo: &'a ComplexSeq,
    pub reference: &'a ComplexSeq,
    /// Curtain slope of the reference's user.
    pub xi: i64,
    /// Sequence length (Doppler normalization).
    pub n: usize,
    /// Region searched for targets.
    pub zone: Zone,
}

impl SearchInput<'_> {
    fn check(&self) -> Result<()> {
        if self.n == 0 {
            return param("sequence length must be positive");
        }
        if self.reference.energy() == 0.0 {
            return param("reference has zero energy");
        }
        if self.zone.tau_max >= self.n || 2 * self.zone.omega_max >= self.n {
            return param("search zone must satisfy tau_max < N and 2 omega_max < N");
        }
        if self.zone.case == CaseKind::Periodic
            && (self.echo.len() != self.n || self.reference.len() != self.n || self.echo.start_index() != self.reference.start_index())
        {
            return param("periodic search needs echo and reference on one length-N support");
        }
        Ok(())
    }

    fn ref_at(&self, idx: i64) -> C {
        match self.zone.case {
            CaseKind::Periodic => {
                let r = self.reference;
                r.samples()[(idx - r.start_index()).rem_euclid(r.len() as i64) as usize]
            }
            CaseKind::Aperiodic => self.reference.at(idx),
        }
    }

    fn products(&self, tau: i64) -> impl Iterator<Item = (i64, C)> + '_ {
        let g0 = self.echo.start_index();
        self.echo.samples().iter().enumerate().filter_map(move |(i, &g)| {
            let m = g0 + i as i64;
            let r = self.ref_at(m - tau);
            (r != C::new(0.0, 0.0) && g != C::new(0.0, 0.0)).then(|| (m, r.conj() * g))
        })
    }
}

/// Unnormalized complex statistic at one (possibly fractional-Doppler) cell.
fn stat_complex(inp: &SearchInput, tau: i64, omega: f64) -> C {
    let w = -2.0 * PI * omega / inp.n as f64;
    let step = C::from_polar(1.0, w);
    let mut acc = C::new(0.0, 0.0);
    // phasor recurrence; resynchronized on gaps in the product support
    let mut cur: Option<(i64, C)> = None;
    for (m, v) in inp.products(tau) {
        let ph = match cur {
            Some((pm, p)) if pm + 1 == m => p * step,
            _ => C::from_polar(1.0, w * (m + 1) as f64),
        };
        acc += v * ph;
        cur = Some((m, ph));
    }
    acc
}

/// Doppler cut of the complex statistic at integer delay `tau`; entry `j`
/// holds every `omega ≡ j (mod N)`.
fn stat_cut(inp: &SearchInput, tau: i64) -> Vec<C> {
    let n = inp.n as i64;
    let mut buf = vec![C::new(0.0, 0.0); inp.n];
    for (m, v) in inp.products(tau) {
        buf[(m + 1).rem_euclid(n) as usize] += v;
    }
    fft::forward(&mut buf);
    buf
}

/// Statistic `T(tau, omega)` at integer cells.
pub fn statistic(inp: &SearchInput, tau: i64, omega: i64) -> Result<f64> {
    inp.check()?;
    Ok(stat_complex(inp, tau, omega as f64).norm_sqr() / inp.reference.energy())
}

fn wrap_omega(w: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = w.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

/// Two-step Flag-method search. Detections come back in descending
/// `peak_value`, with candidates within one bin of a stronger one merged.
pub fn flag_search(inp: &SearchInput, cfg: &CfarConfig) -> Result<(Vec<Detection>, SearchStats)> {
    inp.check()?;
    cfg.validate()?;
    let thr = cfar_threshold(cfg);
    let energy = inp.reference.energy();
    let (tmax, wmax) = (inp.zone.tau_max as i64, inp.zone.omega_max as i64);
    let n = inp.n as i64;
    let mut stats = SearchStats::default();

    // Step 1: curtains through targets in the zone cross tau = 0 within
    // |omega| <= omega_max + |xi| tau_max.
    let cut: Vec<f64> = stat_cut(inp, 0).iter().map(|z| z.norm_sqr() / energy).collect();
    fft::bump_line_counter();
    stats.line_evals += 1;
    let reach = wmax + inp.xi.abs() * tmax;
    let cells: Vec<i64> = if 2 * reach + 1 >= n { (0..n).collect() } else { (-reach..=reach).map(|w| w.rem_euclid(n)).collect() };
    let full = cells.len() as i64 == n;
    stats.cells_tested = cells.len();
    let above: Vec<bool> = {
        let mut a = vec![false; inp.n];
        for &c in &cells {
            a[c as usize] = cut[c as usize] > thr;
        }
        a
    };
    stats.exceedances = above.iter().filter(|&&b| b).count();

    // cluster adjacent exceedances (cyclically when the whole cut is used)
    let mut hits = Vec::new();
    let order: Vec<i64> = if full { (0..n).collect() } else { (-reach..=reach).collect() };
    let mut cluster: Vec<i64> = Vec::new();
    let flush = |cl: &mut Vec<i64>, hits: &mut Vec<Vec<i64>>| {
        if !cl.is_empty() {
            hits.push(std::mem::take(cl));
        }
    };
    for &w in &order {
        if above[w.rem_euclid(n) as usize] {
            cluster.push(w);
        } else {
            flush(&mut cluster, &mut hits);
        }
    }
    flush(&mut cluster, &mut hits);
    if full && hits.len() > 1 && above[0] && above[(n - 1) as usize] {
        let last = hits.pop().unwrap();
        hits[0].extend(last);
    }
    let hits: Vec<i64> = hits
        .into_iter()
        .map(|cl| *cl.iter().max_by(|a, b| cut[a.rem_euclid(n) as usize].total_cmp(&cut[b.rem_euclid(n) as usize])).unwrap())
        .collect();
    stats.curtain_hits = hits.len();

    // Step 2: walk each crossing along its curtain.
    let mut cands = Vec::new();
    for &wh in &hits {
        fft::bump_line_counter();
        stats.line_evals += 1;
        let line: Vec<(i64, i64, f64)> = (-tmax..=tmax)
            .map(|t| {
                let w = wh + inp.xi * t;
                (t, w, stat_complex(inp, t, w as f64).norm_sqr() / energy)
            })
            .collect();
        let total: f64 = line.iter().map(|x| x.2).sum();
        for (i, &(t, w, v)) in line.iter().enumerate() {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(line.len() - 1);
            let excl: f64 = line[lo..=hi].iter().map(|x| x.2).sum();
            let cnt = line.len() - (hi - lo + 1);
            let mean = if cnt > 0 { (total - excl) / cnt as f64 } else { 0.0 };
            let local_max = (lo..=hi).all(|j| line[j].2 <= v);
            let ww = wrap_omega(w, inp.n);
            if v > thr + mean && local_max && ww.abs() <= wmax {
                cands.push(Detection {
                    tau_hat: t as f64,
                    omega_hat: ww as f64,
                    peak_value: v,
                    curtain_tau: 0,
                    curtain_omega: wrap_omega(wh, inp.n),
                });
            }
        }
    }
    cands.sort_by(|a, b| b.peak_value.total_cmp(&a.peak_value));
    let mut out: Vec<Detection> = Vec::new();
    for c in cands {
        if !out.iter().any(|d| (d.tau_hat - c.tau_hat).abs() <= 1.0 && (d.omega_hat - c.omega_hat).abs() <= 1.0) {
            out.push(c);
        }
    }
    Ok((out, stats))
}

/// Band-limited fractional shift `x(m - delta)`, circular for periodic
/// sequences and zero-padded otherwise.
pub fn fractional_shift(x: &ComplexSeq, delta: f64, kind: CaseKind) -> ComplexSeq {
    if delta == 0.0 {
        return x.clone();
    }
    let len = x.len();
    let size = match kind {
        CaseKind::Periodic => len,
        CaseKind::Aperiodic => (2 * len).next_power_of_two(),
    };
    let mut buf = vec![C::new(0.0, 0.0); size];
    buf[..len].copy_from_slice(x.samples());
    fft::forward(&mut buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let f = if 2 * k < size { k as f64 } else { k as f64 - size as f64 };
        *z *= if 2 * k == size {
            C::new((PI * delta).cos(), 0.0)
        } else {
            C::from_polar(1.0, -2.0 * PI * f * delta / size as f64)
        };
    }
    fft::inverse(&mut buf);
    let s = 1.0 / size as f64;
    let out: Vec<C> = buf[..len].iter().map(|z| z * s).collect();
    ComplexSeq::new(x.start_index(), out).expect("same length as input")
}

/// Grid search of `T` over `[tau-1, tau+1] x [omega-1, omega+1]` at spacing
/// `1/k_tau`, `1/k_omega`. Fractional delays shift the reference; fractional
/// Doppler is evaluated directly. Estimates are clamped to the zone.
pub fn refine_fractional(det: &Detection, inp: &SearchInput, k_tau: usize, k_omega: usize) -> Result<Detection> {
    inp.check()?;
    if k_tau == 0 || k_omega == 0 {
        return param("oversampling factors must be positive");
    }
    if k_tau == 1 && k_omega == 1 {
        return Ok(*det);
    }
    let energy = inp.reference.energy();
    let (t0, w0) = (det.tau_hat.round() as i64, det.omega_hat);
    let kt = k_tau as i64;
    let kw = k_omega as i64;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for a in -kt..=kt {
        let d = a as f64 / k_tau as f64;
        let shifted = fractional_shift(inp.reference, d, inp.zone.case);
        let sub = SearchInput { reference: &shifted, ..*inp };
        let prods: Vec<(i64, C)> = sub.products(t0).collect();
        for b in -kw..=kw {
            let om = w0 + b as f64 / k_omega as f64;
            let w = -2.0 * PI * om / inp.n as f64;
            let v: C = prods.iter().map(|&(m, p)| p * C::from_polar(1.0, w * (m + 1) as f64)).sum();
            let t = v.norm_sqr() / energy;
            if t > best.0 {
                best = (t, t0 as f64 + d, om);
            }
        }
    }
    let (tm, wm) = (inp.zone.tau_max as f64, inp.zone.omega_max as f64);
    Ok(Detection { tau_hat: best.1.clamp(-tm, tm), omega_hat: best.2.clamp(-wm, wm), peak_value: best.0, ..*det })
}

/// Writes `tau_hat,omega_hat,peak,curtain_tau,curtain_omega` rows.
pub fn write_detections_csv<W: Write>(dets: &[Detection], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["tau_hat", "omega_hat", "peak", "curtain_tau", "curtain_omega"])?;
    for d in dets {
        wr.write_record(&[
            d.tau_hat.to_string(),
            d.omega_hat.to_string(),
            d.peak_value.to_string(),
            d.curtain_tau.to_string(),
            d.curtain_omega.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Exhaustive reference search: one Doppler cut per delay in the zone.
/// Returns the strongest cell and the number of line evaluations.
pub fn exhaustive_search(inp: &SearchInput) -> Result<((i64, i64, f64), usize)> {
    inp.check()?;
    let energy = inp.reference.energy();
    let (tmax, wmax) = (inp.zone.tau_max as i64, inp.zone.omega_max as i64);
    let mut best = (0, 0, f64::NEG_INFINITY);
    let mut evals = 0;
    for t in -tmax..=tmax {
        let cut = stat_cut(inp, t);
        fft::bump_line_counter();
        evals += 1;
        for w in -wmax..=wmax {
            let v = cut[w.rem_euclid(inp.n as i64) as usize].norm_sqr() / energy;
            if v > best.2 {
                best = (t, w, v);
            }
        }
    }
    Ok((best, evals))
}
