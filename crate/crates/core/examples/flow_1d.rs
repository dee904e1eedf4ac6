//! Runs the one-dimensional reference problems to their translators and compares the
//! speeds with the closed-form values under grid refinement.

use gaussflow::flow::{initialize, run_to_translator, Tolerances};
use gaussflow::oracles::translator_1d_closed_form;
use gaussflow::{ConvexDomain, GridSpec, Signature};

fn main() -> gaussflow::Result<()> {
    let cases = [(Signature::Minkowski, 0.5), (Signature::Euclidean, 1.0)];
    for (sig, d) in cases {
        let exact = translator_1d_closed_form(0.0, 1.0, -d, d, sig)?.speed;
        println!("{} on (0,1) -> (-{d},{d}), exact C = {exact:.10}", sig.name());
        let mut prev: Option<f64> = None;
        for intervals in [100, 200, 400, 800] {
            let mut state = initialize(
                ConvexDomain::interval(0.0, 1.0)?,
                ConvexDomain::interval(-d, d)?,
                GridSpec::Line { intervals },
                sig,
            )?;
            let r = run_to_translator(&mut state, &Tolerances::default())?;
            let err = (r.c_inf - exact).abs();
            let ratio = prev.map(|p| format!("{:.2}", p / err)).unwrap_or_default();
            println!(
                "  N={intervals:<4} C={:.10} err={err:.3e} ratio={ratio:<5} steps={} newton={} residual={:.1e} time={:.2}s",
                r.c_inf,
                r.steps,
                r.newton_total,
                r.residual,
                r.wall_clock.as_secs_f64()
            );
            prev = Some(err);
        }
    }
    Ok(())
}
