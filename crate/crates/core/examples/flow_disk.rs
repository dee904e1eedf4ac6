//! Radially symmetric flow on the unit disk with target disk of radius 0.5, compared
//! with the shooting oracle on a sequence of polar grids.

use gaussflow::cli::step_line;
use gaussflow::flow::{initialize, run_observed, Tolerances};
use gaussflow::oracles::translator_radial_shooting;
use gaussflow::{ConvexDomain, GridSpec, Signature};
use nalgebra::DVector;

fn main() -> gaussflow::Result<()> {
    let shot = translator_radial_shooting(1.0, 0.5, 2, Signature::Minkowski, 1e-10)?;
    println!("shooting speed C = {:.12}", shot.speed);
    let sizes: Vec<(usize, usize)> = match std::env::args().nth(1).as_deref() {
        Some("full") => vec![(16, 32), (32, 64), (64, 128)],
        _ => vec![(16, 32), (32, 64)],
    };
    for (rings, angles) in sizes {
        let mut state = initialize(
            ConvexDomain::ball(DVector::zeros(2), 1.0)?,
            ConvexDomain::ball(DVector::zeros(2), 0.5)?,
            GridSpec::Disk { rings, angles },
            Signature::Minkowski,
        )?;
        let verbose = std::env::var_os("VERBOSE").is_some();
        let r = run_observed(&mut state, &Tolerances::default(), |_, rec| {
            if verbose {
                println!("    {}", step_line(rec));
            }
        })?;
        // compare the profile along the first ray with the shooting profile
        let grid = state.grid();
        let profile_err = (1..=rings)
            .map(|j| {
                let i = 1 + (j - 1) * angles;
                let rad = grid.coord(i).norm();
                (r.u_inf[i] - shot.sample(rad).0).abs()
            })
            .fold(0.0, f64::max);
        println!(
            "  {rings}x{angles}: C={:.10} err={:.3e} profile err={profile_err:.2e} steps={} newton={} time={:.2}s",
            r.c_inf,
            (r.c_inf - shot.speed).abs(),
            r.steps,
            r.newton_total,
            r.wall_clock.as_secs_f64()
        );
    }
    Ok(())
}
