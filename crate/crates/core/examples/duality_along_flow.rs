//! Legendre duality along the one-dimensional reference flow: at sampled accepted
//! states the dual operator evaluated on the transformed field reproduces `-u_t`.

use gaussflow::flow::{initialize, run_observed, Tolerances};
use gaussflow::operators::{g_dual, legendre_transform};
use gaussflow::{ConvexDomain, GridSpec, Signature};

fn main() -> gaussflow::Result<()> {
    let intervals: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut state = initialize(
        ConvexDomain::interval(0.0, 1.0)?,
        ConvexDomain::interval(-0.5, 0.5)?,
        GridSpec::Line { intervals },
        Signature::Minkowski,
    )?;
    let mut rows = Vec::new();
    run_observed(&mut state, &Tolerances::default(), |s, rec| {
        if rec.step == 0 {
            return;
        }
        let grid = s.grid();
        let err = legendre_transform(grid, s.u()).and_then(|dual| {
            let hess = dual.dual_hessians()?;
            (0..grid.len()).filter(|&i| grid.is_regular(i, 3)).try_fold(0.0f64, |m, i| {
                Ok(m.max((g_dual(&dual.points[i], &hess[i], Signature::Minkowski)? + s.u_dot()[i]).abs()))
            })
        });
        rows.push((rec.step, rec.t, err.unwrap_or(f64::NAN)));
    })?;
    let h = 1.0 / intervals as f64;
    for (step, t, e) in rows {
        println!("step {step:>3} t={t:<10.3e} |G~ + u_t| = {e:.3e}  ({:.2} h^2)", e / (h * h));
    }
    Ok(())
}
