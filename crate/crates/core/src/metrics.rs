//! Scalar quality metrics of designs: NWImSL, PMmSR, PAPR, LPG and the
//! peak/curtain orthogonality, plus a table row for comparisons.
//!
//! Amplitude ratios use `20 log10`, power ratios `10 log10`.

use crate::ambiguity::{af_grid, AfGrid};
use crate::error::{Error, Result};
use crate::objective::{lpg, orthogonality_delta, FlagDesign, DB_FLOOR};
use crate::seqcore::{papr_over, ComplexSeq};
use serde::{Deserialize, Serialize};

/// Cap for ratios whose denominator vanishes.
pub const DB_CAP: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NwimslMode {
    /// Relative to the first entry of the history.
    Initial,
    /// Relative to a supplied reference design's WImSL.
    Reference,
}

/// `10 log10(g / g_ref)`.
pub fn nwimsl_db(g: f64, g_ref: f64) -> Result<f64> {
    if !(g_ref > 0.0) {
        return Err(Error::Domain(format!("NWImSL needs a positive reference, got {g_ref}")));
    }
    if g <= 0.0 {
        return Ok(DB_FLOOR);
    }
    Ok(10.0 * (g / g_ref).log10())
}

/// NWImSL along a history of `G` values.
pub fn nwimsl_series(history: &[f64], g_ref: Option<f64>) -> Result<(NwimslMode, Vec<f64>)> {
    let (mode, r) = match g_ref {
        Some(r) => (NwimslMode::Reference, r),
        None => (NwimslMode::Initial, *history.first().ok_or_else(|| Error::Domain("empty history".into()))?),
    };
    Ok((mode, history.iter().map(|&g| nwimsl_db(g, r)).collect::<Result<_>>()?))
}

/// `20 log10(|A(0,0)| / max |A - A_flag|)` over the zone without the
/// origin, where the template is `0.5` on `omega = xi tau` and `0` elsewhere.
pub fn pmmsr_from_grid(grid: &AfGrid, xi: i64) -> Result<f64> {
    let peak = grid.get(0, 0);
    if !(peak > 0.0) {
        return Err(Error::Domain("PMmSR of an AF with zero peak".into()));
    }
    let zone = grid.zone();
    let dev = zone
        .lattice()
        .filter(|&c| c != (0, 0))
        .map(|(t, w)| {
            let tmpl = if w == xi * t { 0.5 } else { 0.0 };
            (grid.get(t, w) - tmpl).abs()
        })
        .fold(0.0, f64::max);
    if dev == 0.0 {
        return Ok(DB_CAP);
    }
    Ok((20.0 * (peak / dev).log10()).min(DB_CAP))
}

/// PMmSR of one member's AAF.
pub fn pmmsr_member(design: &FlagDesign, m: usize) -> Result<f64> {
    let zone = design.curtains.zone;
    let g = af_grid(&design.flag_tx(m), &design.flag_rx(m), &zone, design.n())?;
    pmmsr_from_grid(&g, design.curtains.members[m].line_slope)
}

/// Minimum PMmSR over the set.
pub fn pmmsr(design: &FlagDesign) -> Result<f64> {
    (0..design.m()).map(|m| pmmsr_member(design, m)).try_fold(f64::INFINITY, |a, v| Ok(a.min(v?)))
}

/// PAPR of the transmit sequence over its `N` active samples.
pub fn papr_db(s: &ComplexSeq, n: usize) -> Result<f64> {
    Ok(papr_over(s, n)?.db)
}

/// `10 log10(epsilon)` plus the extension loss `10 log10(N / L)`.
pub fn lpg_theory_db(epsilon: f64, ext_db: f64) -> f64 {
    10.0 * epsilon.log10() + ext_db
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    /// Final WImSL relative to the initial one.
    pub nwimsl_db_initial: Option<f64>,
    /// Final WImSL relative to a reference design.
    pub nwimsl_db_reference: Option<f64>,
    pub pmmsr_db: f64,
    pub papr_db: Vec<f64>,
    pub lpg_db: Vec<f64>,
    pub lpg_theory_db: Vec<f64>,
    pub delta_db: f64,
    pub db_convention: String,
}

/// Optional normalizations for [`report`].
#[derive(Debug, Clone, Copy, Default)]
pub struct WimslContext {
    pub initial: Option<f64>,
    pub reference: Option<f64>,
    pub current: Option<f64>,
}

pub fn report(label: &str, design: &FlagDesign, epsilon: f64, symmetric: bool, w: WimslContext) -> Result<MetricReport> {
    let n = design.n();
    let mut papr = Vec::new();
    let mut lpgs = Vec::new();
    let mut theory = Vec::new();
    for m in 0..design.m() {
        papr.push(papr_db(&design.flag_tx(m), n)?);
        lpgs.push(lpg(&design.flag_tx(m), &design.flag_rx(m))?);
        let ext = design.curtains.members[m].extension_lpg_db();
        theory.push(if symmetric { ext } else { lpg_theory_db(epsilon, ext) });
    }
    let norm = |r: Option<f64>| match (w.current, r) {
        (Some(g), Some(r)) => nwimsl_db(g, r).ok(),
        _ => None,
    };
    Ok(MetricReport {
        label: label.to_string(),
        nwimsl_db_initial: norm(w.initial),
        nwimsl_db_reference: norm(w.reference),
        pmmsr_db: pmmsr(design)?,
        papr_db: papr,
        lpg_db: lpgs,
        lpg_theory_db: theory,
        delta_db: orthogonality_delta(design),
        db_convention: "amplitude ratios 20log10, power ratios 10log10".into(),
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" / ")
}

/// Markdown table with one row per report.
pub fn markdown_table(rows: &[MetricReport]) -> String {
    let mut s = String::from(
        "| design | NWImSL (dB, initial) | NWImSL (dB, ref) | PMmSR (dB) | PAPR (dB) | LPG theory (dB) | LPG (dB) | Delta (dB) |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for r in rows {
        s.push_str(&format!(
            "| {} | {} | {} | {:.3} | {} | {} | {} | {:.3} |\n",
            r.label,
            fmt(r.nwimsl_db_initial),
            fmt(r.nwimsl_db_reference),
            r.pmmsr_db,
            fmt_list(&r.papr_db),
            fmt_list(&r.lpg_theory_db),
            fmt_list(&r.lpg_db),
            r.delta_db
        ));
    }
    s
}
