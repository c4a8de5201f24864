use crate::artifacts::{read_config, Out};
use crate::error::{CliError, CliResult};
use crate::{gnuplot, Common};
use flagseq_core::channel::{trial_rng, Link};
use flagseq_core::curtain::{build_near_zero_set, default_q};
use flagseq_core::estimator::{exhaustive_search, flag_search, CfarConfig};
use flagseq_core::fft::{line_evaluations, reset_line_evaluations};
use flagseq_core::{Complex64, FlagDesign, Zone};
use rand::Rng;
use serde::Deserialize;
use std::time::Instant;

fn three() -> usize {
    3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchRun {
    sizes: Vec<usize>,
    zone: Zone,
    xi: i64,
    #[serde(default = "three")]
    reps: usize,
    #[serde(default)]
    seed: u64,
}

pub fn run(c: &Common) -> CliResult<()> {
    let (cfg, mut raw): (BenchRun, _) = read_config(&c.config)?;
    let seed = c.seed.unwrap_or(cfg.seed);
    if cfg.reps == 0 || cfg.sizes.is_empty() {
        return Err(CliError::Usage("bench needs at least one size and one repetition".into()));
    }
    let cfar = CfarConfig::from_complex_noise(1e-3, 1e-3);

    let mut rows = String::from("n,flag_us,exhaustive_us,ratio,flag_lines,exhaustive_lines,curtain_hits\n");
    for &n in &cfg.sizes {
        let q = default_q(n, cfg.xi);
        let set = build_near_zero_set(n, &[cfg.xi], &[q], cfg.zone)?;
        let design = FlagDesign::random_init(set, seed);
        let link = Link::from_design(&design, 0)?;

        let mut rng = trial_rng(seed, n as u64);
        let (tm, wm) = (cfg.zone.tau_max as i64, cfg.zone.omega_max as i64);
        let target = (rng.random_range(-tm..=tm) as f64, rng.random_range(-wm..=wm) as f64, Complex64::new(1.0, 0.0));
        let echo = link.echo(&[target], 1e-3, &mut rng)?;
        let inp = link.search_input(&echo);

        let (mut tf, mut te) = (f64::INFINITY, f64::INFINITY);
        let (mut lf, mut le, mut hits) = (0, 0, 0);
        for _ in 0..cfg.reps {
            reset_line_evaluations();
            let t0 = Instant::now();
            let (_, stats) = flag_search(&inp, &cfar)?;
            tf = tf.min(t0.elapsed().as_secs_f64() * 1e6);
            lf = line_evaluations();
            hits = stats.curtain_hits;

            let t0 = Instant::now();
            let (_, lines) = exhaustive_search(&inp)?;
            te = te.min(t0.elapsed().as_secs_f64() * 1e6);
            le = lines;
        }
        if lf != 1 + hits {
            return Err(CliError::Invariant(format!("N={n}: {lf} line evaluations for {hits} curtain hits")));
        }
        rows.push_str(&format!("{n},{tf:.1},{te:.1},{:.4},{lf},{le},{hits}\n", tf / te));
        println!("N={n:>6}  flag {tf:>10.1} us  exhaustive {te:>12.1} us  lines {lf}/{le}");
    }

    let mut out = Out::new(&c.out)?;
    out.write("bench.csv", rows.as_bytes())?;
    if c.emit_gnuplot {
        out.write("bench.gp", gnuplot::bench().as_bytes())?;
    }
    raw["seed"] = seed.into();
    out.finish("bench", Some(seed), raw)?;
    Ok(())
}
