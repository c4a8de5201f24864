use crate::artifacts::{read_config, resolve, Out};
use crate::design::DesignBundle;
use crate::error::{CliError, CliResult};
use crate::{gnuplot, Common};
use flagseq_core::metrics::{markdown_table, report, WimslContext};
use flagseq_core::{af_grid, Zone};
use serde::Deserialize;
use std::path::PathBuf;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvaluateRun {
    design: PathBuf,
    /// Grid extent; defaults to the design zone.
    #[serde(default)]
    zone: Option<Zone>,
    /// Final WImSL of a baseline design, for the relative column.
    #[serde(default)]
    reference_wimsl: Option<f64>,
    /// Largest admissible cross-AF magnitude between different users.
    #[serde(default)]
    caf_bound: Option<f64>,
    #[serde(default)]
    label: Option<String>,
}

pub fn run(c: &Common) -> CliResult<()> {
    let (cfg, raw): (EvaluateRun, _) = read_config(&c.config)?;
    let path = resolve(&c.config, &cfg.design);
    let b = DesignBundle::load(&path)?;
    let d = &b.design;
    let zone = cfg.zone.unwrap_or(d.curtains.zone);
    if zone.case != d.curtains.zone.case {
        return Err(CliError::Usage("evaluation zone must use the design's periodic/aperiodic case".into()));
    }
    let (m, n) = (d.m(), d.n());

    let mut out = Out::new(&c.out)?;
    let mut cross_max: f64 = 0.0;
    for a in 0..m {
        for r in 0..m {
            let mut g = af_grid(&d.flag_tx(a), &d.flag_rx(r), &zone, n)?;
            g.meta = format!("flag_tx m{a} / flag_rx m{r}");
            if a != r {
                cross_max = cross_max.max(g.max());
            }
            let name = format!("af_m{a}_m{r}.csv");
            out.write_with(&name, |w| g.write_csv(w))?;
            if c.emit_gnuplot {
                let title = if a == r { format!("AAF m{a}") } else { format!("CAF m{a}, m{r}") };
                out.write(&format!("af_m{a}_m{r}.gp"), gnuplot::af_heatmap(&name, &title).as_bytes())?;
            }
        }
    }

    let label = cfg.label.clone().unwrap_or_else(|| path.display().to_string());
    let ctx = WimslContext { initial: Some(b.wimsl_initial), reference: cfg.reference_wimsl, current: Some(b.wimsl_final) };
    let rep = report(&label, d, b.config.epsilon, b.config.symmetric, ctx)?;
    let summary = serde_json::json!({
        "report": rep,
        "zone": zone,
        "max_cross_af": cross_max,
        "caf_bound": cfg.caf_bound,
    });
    out.write_json("metrics.json", &summary)?;
    out.write("metrics.md", markdown_table(std::slice::from_ref(&rep)).as_bytes())?;
    out.finish("evaluate", None, raw)?;

    println!("evaluate: {} grids, PMmSR {:.2} dB, Delta {:.2} dB", m * m, rep.pmmsr_db, rep.delta_db);
    match cfg.caf_bound {
        Some(bound) if m > 1 && cross_max > bound => {
            Err(CliError::Invariant(format!("cross AF reaches {cross_max:.3e}, above the bound {bound:.3e}")))
        }
        _ => Ok(()),
    }
}
