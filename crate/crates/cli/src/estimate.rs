use crate::artifacts::{read_config, resolve, Out};
use crate::design::DesignBundle;
use crate::error::{CliError, CliResult};
use crate::{gnuplot, Common};
use flagseq_core::channel::{detection_success, monte_carlo, trial_rng, Link, MonteCarloConfig, ScenarioConfig, SPEED_OF_LIGHT};
use flagseq_core::estimator::{cfar_threshold, flag_search, refine_fractional, CfarConfig};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CfarSpec {
    p_fa: f64,
    /// Complex noise power assumed by the detector; defaults to the
    /// scenario's.
    #[serde(default)]
    noise_power: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Refine {
    k_tau: usize,
    k_omega: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRun {
    design: PathBuf,
    #[serde(default)]
    user: usize,
    #[serde(default)]
    scenario: Option<ScenarioConfig>,
    /// Skip channel noise (the detector still uses `cfar.noise_power`).
    #[serde(default)]
    noiseless: bool,
    #[serde(default = "one")]
    trials: usize,
    cfar: CfarSpec,
    #[serde(default)]
    refine: Option<Refine>,
    #[serde(default)]
    monte_carlo: Option<MonteCarloConfig>,
}

#[derive(Debug, Serialize)]
struct Summary {
    trials: usize,
    targets_bins: Vec<(f64, f64)>,
    targets_outside_zone: Vec<usize>,
    noise_power: f64,
    detector_noise_power: f64,
    threshold: f64,
    p_fa: f64,
    detections: usize,
    detections_per_trial: f64,
    cells_tested: usize,
    exceedances: usize,
    /// Step-1 exceedances per tested cell; the false-alarm rate when the
    /// scenario has no targets.
    exceedance_rate: f64,
    /// Share of trials where every target was found with no extras.
    success_rate: Option<f64>,
    line_evals: usize,
}

/// Bins within this distance of an integer are snapped to it, so that unit
/// conversions do not turn an on-grid target into a fractional one.
const SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    if (x - x.round()).abs() <= SNAP {
        x.round()
    } else {
        x
    }
}

pub fn run(c: &Common) -> CliResult<()> {
    let (mut cfg, mut raw): (EstimateRun, _) = read_config(&c.config)?;
    if cfg.scenario.is_none() && cfg.monte_carlo.is_none() {
        return Err(CliError::Usage("estimate needs a scenario, a monte_carlo block, or both".into()));
    }
    if let Some(s) = c.seed {
        if let Some(sc) = cfg.scenario.as_mut() {
            sc.seed = s;
            raw["scenario"]["seed"] = s.into();
        }
        if let Some(mc) = cfg.monte_carlo.as_mut() {
            mc.seed = s;
            raw["monte_carlo"]["seed"] = s.into();
        }
    }
    let path = resolve(&c.config, &cfg.design);
    let b = DesignBundle::load(&path)?;
    let link = Link::from_design(&b.design, cfg.user)?;
    let mut out = Out::new(&c.out)?;

    let mut seed = None;
    if let Some(sc) = &cfg.scenario {
        sc.validate()?;
        seed = Some(sc.seed);
        scenario_trials(&cfg, sc, &link, &mut out)?;
    }
    if let Some(mc) = &cfg.monte_carlo {
        seed = seed.or(Some(mc.seed));
        let tables = monte_carlo(&b.design, mc)?;
        out.write_with("roc.csv", |w| tables.write_roc_csv(w))?;
        out.write_with("nmse.csv", |w| tables.write_nmse_csv(w))?;
        if c.emit_gnuplot {
            out.write("roc.gp", gnuplot::roc().as_bytes())?;
            out.write("nmse.gp", gnuplot::nmse().as_bytes())?;
        }
        println!("monte carlo: {} ROC rows, {} NMSE rows", tables.roc.len(), tables.nmse.len());
    }
    out.finish("estimate", seed, raw)?;
    Ok(())
}

fn scenario_trials(cfg: &EstimateRun, sc: &ScenarioConfig, link: &Link, out: &mut Out) -> CliResult<()> {
    let n = link.n;
    let outside = sc.outside_zone(n, &link.zone);
    for &i in &outside {
        eprintln!("warning: target {i} lies outside the zone and cannot be resolved unambiguously");
    }
    let targets: Vec<_> = sc.target_bins(n).into_iter().map(|(t, w, a)| (snap(t), snap(w), a)).collect();
    let noise = if cfg.noiseless { 0.0 } else { sc.noise_power() };
    let det_noise = cfg.cfar.noise_power.unwrap_or(sc.noise_power());
    let cfar = CfarConfig::from_complex_noise(cfg.cfar.p_fa, det_noise);
    cfar.validate()?;
    if cfg.trials == 0 {
        return Err(CliError::Usage("trials must be positive".into()));
    }

    // bin -> physical units
    let range_m = |tau: f64| tau * SPEED_OF_LIGHT / (2.0 * sc.bandwidth);
    let vel = |om: f64| om * SPEED_OF_LIGHT * sc.bandwidth / (2.0 * sc.f_cr * n as f64);

    let mut wr = csv::Writer::from_writer(Vec::new());
    wr.write_record(["trial", "tau_hat", "omega_hat", "range_m", "velocity_mps", "peak", "curtain_tau", "curtain_omega"])?;
    let (mut dets_total, mut cells, mut exceed, mut lines, mut ok) = (0, 0, 0, 0, 0);
    for t in 0..cfg.trials {
        let mut rng = trial_rng(sc.seed, t as u64);
        let echo = link.echo(&targets, noise, &mut rng)?;
        let inp = link.search_input(&echo);
        let (mut dets, stats) = flag_search(&inp, &cfar)?;
        if let Some(r) = cfg.refine {
            dets = dets.iter().map(|d| refine_fractional(d, &inp, r.k_tau, r.k_omega)).collect::<Result<_, _>>()?;
        }
        ok += usize::from(detection_success(&dets, &targets));
        dets_total += dets.len();
        cells += stats.cells_tested;
        exceed += stats.exceedances;
        lines += stats.line_evals;
        for d in &dets {
            wr.write_record(&[
                t.to_string(),
                d.tau_hat.to_string(),
                d.omega_hat.to_string(),
                range_m(d.tau_hat).to_string(),
                vel(d.omega_hat).to_string(),
                d.peak_value.to_string(),
                d.curtain_tau.to_string(),
                d.curtain_omega.to_string(),
            ])?;
        }
    }
    let csv = wr.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    out.write("detections.csv", &csv)?;

    let summary = Summary {
        trials: cfg.trials,
        targets_bins: targets.iter().map(|t| (t.0, t.1)).collect(),
        targets_outside_zone: outside,
        noise_power: noise,
        detector_noise_power: det_noise,
        threshold: cfar_threshold(&cfar),
        p_fa: cfar.p_fa,
        detections: dets_total,
        detections_per_trial: dets_total as f64 / cfg.trials as f64,
        cells_tested: cells,
        exceedances: exceed,
        exceedance_rate: if cells > 0 { exceed as f64 / cells as f64 } else { 0.0 },
        success_rate: (!targets.is_empty()).then(|| ok as f64 / cfg.trials as f64),
        line_evals: lines,
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "estimate: {} trials, {} detections, exceedance rate {:.3e} (P_FA {})",
        cfg.trials, dets_total, summary.exceedance_rate, cfar.p_fa
    );
    Ok(())
}
