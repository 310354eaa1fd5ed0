//! Registers a problem programmatically, solves it and prints the diagnostics.
//!
//! Track `sin(2πt)` while staying below `1/2`:
//! `min ∫ ½(x − sin 2πt)² dt` subject to `x(t) − 1/2 ≤ 0`.

use std::f64::consts::PI;

use ctp_core::{diagnose_trace, solve, AlmConfig, CqThresholds, CtpProblem};
use nalgebra::DMatrix;

fn main() -> ctp_core::Result<()> {
    let problem = CtpProblem::builder("capped_sine", 1, 1.0)
        .objective(
            |x, t| 0.5 * (x[0] - (2.0 * PI * t).sin()).powi(2),
            |x, t| vec![x[0] - (2.0 * PI * t).sin()],
        )
        .inequalities(1, |x, _| vec![x[0] - 0.5], |_, _| DMatrix::from_element(1, 1, 1.0))
        .build()?;

    let trace = solve(&problem, &AlmConfig::default())?;
    println!("status: {}", trace.status.as_str());
    for (k, it) in trace.iterates.iter().enumerate() {
        println!(
            "k={:2} rho={:8.1e} kkt={:9.3e} mult_sup={:.6}",
            k + 1,
            it.rho,
            it.report.kkt_measure(),
            it.mult.sup_norm()
        );
    }

    let cq = diagnose_trace(&problem, &trace, &CqThresholds::default())?;
    println!("promotion certified: {}", cq.promotion_certified);
    for note in &cq.notes {
        println!("  {note}");
    }
    Ok(())
}
