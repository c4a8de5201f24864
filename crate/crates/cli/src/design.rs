use crate::artifacts::{read_config, Out};
use crate::error::{CliError, CliResult};
use crate::{gnuplot, Common};
use flagseq_core::apmm::{solve, SolverConfig};
use flagseq_core::{CurtainSet, DesignConfig, FlagDesign};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignRun {
    curtains: CurtainSet,
    design: DesignConfig,
    solver: SolverConfig,
    #[serde(default)]
    seed: u64,
}

/// What `design` writes to `design.json` and what the other commands load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBundle {
    pub config: DesignConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub wimsl_initial: f64,
    pub wimsl_final: f64,
    pub design: FlagDesign,
}

impl DesignBundle {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let b: DesignBundle = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let d = b.design;
        let design = FlagDesign::new(d.curtains, d.peaks_tx, d.peaks_rx)?;
        Ok(Self { design, ..b })
    }
}

pub fn run(c: &Common) -> CliResult<()> {
    let (run, mut raw): (DesignRun, _) = read_config(&c.config)?;
    let seed = c.seed.unwrap_or(run.seed);
    let cfg = run.design;
    if cfg.m != run.curtains.len() {
        return Err(CliError::Usage(format!("design.m = {} but the curtain set has {} members", cfg.m, run.curtains.len())));
    }
    if cfg.zone != run.curtains.zone {
        return Err(CliError::Usage("design.zone differs from curtains.zone".into()));
    }

    let init = FlagDesign::random_init(run.curtains, seed);
    let out = solve(&init, &cfg, &run.solver)?;
    let (tx_drift, rx_drift) = out.max_drift;
    if tx_drift > 1e-9 || rx_drift > 1e-9 {
        return Err(CliError::Invariant(format!("constraint drift {tx_drift:.2e} / {rx_drift:.2e} exceeds 1e-9")));
    }

    let mut files = Out::new(&c.out)?;
    let bundle = DesignBundle {
        config: cfg,
        solver: run.solver,
        seed,
        iterations: out.iterations,
        converged: out.converged,
        wimsl_initial: out.wimsl_initial,
        wimsl_final: out.wimsl_final,
        design: out.design.clone(),
    };
    files.write_json("design.json", &bundle)?;
    for m in 0..cfg.m {
        let d = &out.design;
        files.write_with(&format!("flag_tx_m{m}.csv"), |w| d.flag_tx(m).write_csv(w))?;
        files.write_with(&format!("flag_rx_m{m}.csv"), |w| d.flag_rx(m).write_csv(w))?;
        files.write_with(&format!("peak_tx_m{m}.csv"), |w| d.peaks_tx[m].write_csv(w))?;
        files.write_with(&format!("peak_rx_m{m}.csv"), |w| d.peaks_rx[m].write_csv(w))?;
    }
    files.write_with("convergence.jsonl", |w| out.write_jsonl(w))?;

    if c.emit_gnuplot {
        let mut s = String::from("t,of,nwimsl_db\n");
        for r in &out.history {
            s.push_str(&format!("{},{:e},{}\n", r.t, r.of, r.nwimsl_db));
        }
        files.write("convergence.csv", s.as_bytes())?;
        files.write("convergence.gp", gnuplot::convergence().as_bytes())?;
    }

    raw["seed"] = seed.into();
    files.finish("design", Some(seed), raw)?;
    println!(
        "design: M={} N={} iterations={} converged={} WImSL {:.4e} -> {:.4e}",
        cfg.m,
        out.design.n(),
        out.iterations,
        out.converged,
        out.wimsl_initial,
        out.wimsl_final
    );
    if out.mm_violations > 0 {
        eprintln!("warning: {} double MM steps failed to descend", out.mm_violations);
    }
    Ok(())
}
