//! Reference translators: the closed-form one-dimensional solitons and the radial
//! shooting solution on a ball.

use gaussflow::oracles::{translator_1d_closed_form, translator_radial_shooting};
use gaussflow::Signature;

fn main() -> gaussflow::Result<()> {
    for (sig, d) in [(Signature::Minkowski, 0.5), (Signature::Euclidean, 1.0)] {
        let t = translator_1d_closed_form(0.0, 1.0, -d, d, sig)?;
        println!("{} interval (0,1) -> (-{d},{d}): C = {:.12}", sig.name(), t.speed);
        for x in [0.0, 0.25, 0.5, 0.75, 1.0] {
            println!("  x = {x:<4}  u = {:+.8}  u' = {:+.8}", t.value(x), t.slope(x));
        }
    }

    for (n, rho) in [(2, 0.5), (2, 0.9), (3, 0.5)] {
        let prof = translator_radial_shooting(1.0, rho, n, Signature::Minkowski, 1e-10)?;
        let (u1, du1) = prof.sample(1.0);
        println!(
            "ball B1 -> B{rho} in dimension {n}: C = {:.10}, u(1) = {u1:.8}, u'(1) = {du1:.8}, ODE defect {:.1e}",
            prof.speed,
            prof.ode_defect()
        );
    }
    Ok(())
}
