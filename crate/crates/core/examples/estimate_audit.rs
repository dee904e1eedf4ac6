//! Audits the a priori estimates along a disk-to-ellipse flow and prints the monitor
//! table at a coarse cadence.

use gaussflow::flow::{initialize, run_observed, Tolerances};
use gaussflow::monitors::Auditor;
use gaussflow::{ConvexDomain, GridSpec, Signature};
use nalgebra::{DMatrix, DVector};

fn main() -> gaussflow::Result<()> {
    let tol = Tolerances::default();
    let target = ConvexDomain::ellipse(DVector::zeros(2), DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 9.0])))?;
    let mut state = initialize(
        ConvexDomain::ball(DVector::zeros(2), 1.0)?,
        target,
        GridSpec::Disk { rings: 24, angles: 48 },
        Signature::Minkowski,
    )?;
    let mut auditor = Auditor::new(&state, 10, tol.tau_max);
    let mut failure = None;
    let result = run_observed(&mut state, &tol, |s, r| {
        if let Err(e) = auditor.observe(s, r) {
            failure.get_or_insert(e);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>8} {:>8} {:>8} {:>10}",
        "step", "t", "udot_min", "udot_max", "obliq", "hess_lo", "hess_hi", "evo"
    );
    for m in auditor.records() {
        let evo = m.evo_residual.map(|e| format!("{e:.2e}")).unwrap_or_else(|| "-".into());
        println!(
            "{:>5} {:>10.4e} {:>10.6} {:>10.6} {:>8.4} {:>8.4} {:>8.4} {:>10}",
            m.step, m.t, m.udot_min, m.udot_max, m.obliq_min, m.hess_min, m.hess_max, evo
        );
    }
    let s = auditor.summary();
    println!("C = {:.8} after {} steps", result.c_inf, result.steps);
    println!(
        "udot {}, obliqueness {}, hessian {}, convexity {}, sandwich {}",
        s.udot_ok(),
        s.obliqueness_ok(),
        s.hessian_ok(),
        s.convexity_ok(),
        s.sandwich_ok()
    );
    for f in &s.failures {
        println!("  failure: {f}");
    }
    Ok(())
}
