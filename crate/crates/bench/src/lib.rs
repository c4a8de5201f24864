//! Fixtures shared by the benchmarks.

use flagseq_core::apmm::{solve, SolverConfig};
use flagseq_core::channel::{trial_rng, Link};
use flagseq_core::curtain::{build_near_zero_set, default_q};
use flagseq_core::{Complex64, ComplexSeq, DesignConfig, FlagDesign, Result, Zone};

pub fn config(m: usize, zone: Zone, symmetric: bool) -> DesignConfig {
    DesignConfig { m, zone, varrho: 1.0, alpha: 0.5, beta: 0.5, epsilon: 1.0, symmetric }
}

/// Randomly initialized single-user design.
pub fn random_design(n: usize, xi: i64, zone: Zone, seed: u64) -> Result<FlagDesign> {
    let set = build_near_zero_set(n, &[xi], &[default_q(n, xi)], zone)?;
    Ok(FlagDesign::random_init(set, seed))
}

/// A briefly optimized single-user design, so that step 1 of the search
/// sees few spurious crossings.
pub fn tuned_design(n: usize, xi: i64, zone: Zone, iters: usize) -> Result<FlagDesign> {
    let init = random_design(n, xi, zone, 1)?;
    let s = SolverConfig { t_max: iters, ..SolverConfig::default() };
    Ok(solve(&init, &config(1, zone, true), &s)?.design)
}

/// Link for user 0 plus a lightly noisy echo of one in-zone target.
pub fn echo_fixture(design: &FlagDesign, tau: f64, omega: f64) -> Result<(Link, ComplexSeq)> {
    let link = Link::from_design(design, 0)?;
    let mut rng = trial_rng(0, link.n as u64);
    let echo = link.echo(&[(tau, omega, Complex64::new(1.0, 0.0))], 1e-3, &mut rng)?;
    Ok((link, echo))
}
