//! Re-derives every shipped invariant from the raw design file. The curtain
//! parameters are read without going through the validating loaders so that
//! a doctored file is reported check by check instead of failing to parse.

use crate::artifacts::{read_config, resolve, sha256_hex, Out, RunManifest, MANIFEST};
use crate::error::{CliError, CliResult};
use crate::Common;
use flagseq_core::curtain::{build_curtain, build_curtain_ext, SetKind};
use flagseq_core::{af_grid, CaseKind, ChirpParams, Complex64, ComplexSeq, CurtainSet, CurtainSpec, Zone};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};

fn default_tol() -> f64 {
    1e-9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyRun {
    design: PathBuf,
    #[serde(default = "default_tol")]
    tolerance: f64,
    /// Upper bound on the orthogonality measure; reported only when absent.
    #[serde(default)]
    max_delta_db: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Deserialize)]
struct RawSet {
    kind: SetKind,
    zone: Zone,
    members: Vec<ChirpParams>,
}

#[derive(Deserialize)]
struct RawDesign {
    curtains: Value,
    peaks_tx: Vec<ComplexSeq>,
    peaks_rx: Vec<ComplexSeq>,
}

#[derive(Deserialize)]
struct RawBundle {
    design: RawDesign,
}

struct Report(Vec<Check>);

impl Report {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), passed, detail: detail.into() });
    }
}

fn usage(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

pub fn run(c: &Common) -> CliResult<()> {
    let (cfg, raw): (VerifyRun, _) = read_config(&c.config)?;
    let path = resolve(&c.config, &cfg.design);
    let text = fs::read_to_string(&path).map_err(|e| usage(&path, e))?;
    let bundle: RawBundle = serde_json::from_str(&text).map_err(|e| usage(&path, e))?;
    let set: RawSet = serde_json::from_value(bundle.design.curtains.clone()).map_err(|e| usage(&path, e))?;
    let (tx, rx) = (&bundle.design.peaks_tx, &bundle.design.peaks_rx);
    let m = set.members.len();
    if m == 0 || tx.len() != m || rx.len() != m {
        return Err(usage(&path, format!("{m} curtains but {} / {} peaks", tx.len(), rx.len())));
    }
    let tol = cfg.tolerance;
    let mut rep = Report(Vec::new());
    let n = set.members[0].n;
    let zone = set.zone;

    // Per-member feasibility, then the set as a whole.
    for (i, p) in set.members.iter().enumerate() {
        let built = match zone.case {
            CaseKind::Periodic => build_curtain(p.n, p.xi, p.q, zone),
            CaseKind::Aperiodic => build_curtain_ext(p.n, p.xi, p.q, zone, p.tau_ext),
        };
        match built {
            Ok(_) => rep.push(format!("curtain feasibility m{i}"), true, format!("xi={} q={}", p.xi, p.q)),
            Err(e) => rep.push(format!("curtain feasibility m{i}"), false, e.to_string()),
        }
    }
    match serde_json::from_value::<CurtainSet>(bundle.design.curtains.clone()) {
        Ok(_) => rep.push("set feasibility", true, format!("{:?}, M={m}", set.kind)),
        Err(e) => rep.push("set feasibility", false, e.to_string()),
    }

    // Curtain ideality on the shipped parameters, feasible or not.
    let specs: Vec<Option<CurtainSpec>> = set
        .members
        .iter()
        .map(|p| p.validate().ok().map(|_| CurtainSpec { params: *p, line_slope: p.xi, zone }))
        .collect();
    for (i, s) in specs.iter().enumerate() {
        let name = format!("curtain ideality m{i}");
        let Some(s) = s else {
            rep.push(name, false, "chirp parameters out of range");
            continue;
        };
        match af_grid(&s.transmit(), &s.reference(), &zone, n) {
            Ok(g) => {
                let mut worst: f64 = 0.0;
                for (t, w) in zone.lattice() {
                    let want = if on_line(s.line_slope, t, w, n, zone.case) { 1.0 } else { 0.0 };
                    worst = worst.max((g.get(t, w) - want).abs());
                }
                rep.push(name, worst <= tol, format!("max deviation from the ideal curtain {worst:.2e}"));
            }
            Err(e) => rep.push(name, false, e.to_string()),
        }
    }

    // Cross terms between curtains.
    if m > 1 && specs.iter().all(Option::is_some) {
        let target = match set.kind {
            SetKind::NearZeroCAF => 1.0 / (n as f64).sqrt(),
            SetKind::ZeroCAF => 0.0,
        };
        let mut worst: f64 = 0.0;
        let mut err = None;
        for a in 0..m {
            for b in (0..m).filter(|&b| b != a) {
                let (sa, sb) = (specs[a].as_ref().unwrap(), specs[b].as_ref().unwrap());
                match af_grid(&sa.transmit(), &sb.reference(), &zone, n) {
                    Ok(g) => worst = g.values.iter().fold(worst, |acc, v| acc.max((v - target).abs())),
                    Err(e) => err = Some(e.to_string()),
                }
            }
        }
        match err {
            Some(e) => rep.push("curtain CAF", false, e),
            None => rep.push("curtain CAF", worst <= tol, format!("max |CAF - {target:.6}| = {worst:.2e}")),
        }
    }

    // Peak constraints.
    let sq = (n as f64).sqrt();
    let mut tx_drift: f64 = 0.0;
    let mut outside: f64 = 0.0;
    for p in tx.iter().chain(rx) {
        for (k, z) in p.samples().iter().enumerate() {
            let idx = p.start_index() + k as i64;
            if !(0..n as i64).contains(&idx) {
                outside = outside.max(z.norm());
            }
        }
    }
    for p in tx {
        tx_drift = (0..n as i64).map(|i| (p.at(i).norm() * sq - 1.0).abs()).fold(tx_drift, f64::max);
    }
    let rx_drift = rx.iter().map(|p| (p.norm() - 1.0).abs()).fold(0.0, f64::max);
    rep.push("transmit peak modulus", tx_drift <= tol, format!("max ||p[n]| sqrt(N) - 1| = {tx_drift:.2e}"));
    rep.push("receive peak energy", rx_drift <= tol, format!("max |‖p‖ - 1| = {rx_drift:.2e}"));
    rep.push("peak support", outside == 0.0, format!("largest sample outside 0..N: {outside:.2e}"));

    // Orthogonality between peaks and curtains.
    if specs.iter().all(Option::is_some) {
        let delta = (0..m)
            .map(|i| {
                let s = specs[i].as_ref().unwrap();
                tx[i].inner(&s.transmit()).norm().max(s.reference().inner(&rx[i]).norm())
            })
            .fold(0.0, f64::max);
        let db = 20.0 * delta.max(1e-15).log10();
        match cfg.max_delta_db {
            Some(lim) => rep.push("orthogonality", db <= lim, format!("Delta = {db:.2} dB (limit {lim} dB)")),
            None => rep.push("orthogonality", true, format!("Delta = {db:.2} dB (no limit set)")),
        }
    }

    // Artifacts shipped alongside the design.
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    check_artifacts(&dir, &specs, tx, rx, tol, &mut rep);

    let failed: Vec<&Check> = rep.0.iter().filter(|c| !c.passed).collect();
    for ch in &rep.0 {
        println!("{} {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
    }
    let summary = serde_json::json!({
        "design": path.display().to_string(),
        "passed": failed.is_empty(),
        "checks": rep.0,
    });
    let names: Vec<String> = failed.iter().map(|c| c.name.clone()).collect();
    let mut out = Out::new(&c.out)?;
    out.write_json("verify.json", &summary)?;
    out.finish("verify", None, raw)?;
    if names.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("failed checks: {}", names.join(", "))))
    }
}

fn on_line(xi: i64, tau: i64, omega: i64, n: usize, case: CaseKind) -> bool {
    match case {
        CaseKind::Periodic => (omega - xi * tau).rem_euclid(n as i64) == 0,
        CaseKind::Aperiodic => omega == xi * tau,
    }
}

fn check_artifacts(dir: &Path, specs: &[Option<CurtainSpec>], tx: &[ComplexSeq], rx: &[ComplexSeq], tol: f64, rep: &mut Report) {
    let man = dir.join(MANIFEST);
    if let Ok(text) = fs::read_to_string(&man) {
        match serde_json::from_str::<RunManifest>(&text) {
            Ok(mf) => {
                let bad: Vec<String> = mf
                    .files
                    .iter()
                    .filter(|f| fs::read(dir.join(&f.path)).map(|b| sha256_hex(&b) != f.sha256).unwrap_or(true))
                    .map(|f| f.path.clone())
                    .collect();
                let detail = if bad.is_empty() { format!("{} files match", mf.files.len()) } else { format!("mismatch: {}", bad.join(", ")) };
                rep.push("artifact hashes", bad.is_empty(), detail);
            }
            Err(e) => rep.push("artifact hashes", false, format!("unreadable manifest: {e}")),
        }
    }

    let half = Complex64::new(0.5f64.sqrt(), 0.0);
    for (i, s) in specs.iter().enumerate() {
        let Some(s) = s else { continue };
        for (side, peak, curtain) in [("tx", &tx[i], s.transmit()), ("rx", &rx[i], s.reference())] {
            let file = dir.join(format!("flag_{side}_m{i}.csv"));
            let Ok(f) = fs::File::open(&file) else { continue };
            let name = format!("flag samples {side} m{i}");
            match ComplexSeq::read_csv(f) {
                Ok(got) => {
                    let want = curtain.add(peak).scale(half);
                    let same_support = got.start_index() == want.start_index() && got.len() == want.len();
                    let err = got.samples().iter().zip(want.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    rep.push(name, same_support && err <= tol, format!("max sample error {err:.2e}"));
                }
                Err(e) => rep.push(name, false, e.to_string()),
            }
        }
    }
}
