//! Shear layer with a strong guide field.
//!
//! Runs the Kelvin-Helmholtz setup on a 64x64 grid and tracks the transverse
//! velocity, which measures how far the layer has been displaced.

use epirk_mhd::epirk::{integrate_adaptive, StepController};
use epirk_mhd::mhd::{div_b, MhdParams, MhdSystem, MY, NVAR, RHO};
use epirk_mhd::problems::{kh_ic, KhSpec, Problem};

fn main() -> epirk_mhd::Result<()> {
    let spec = KhSpec::default();
    let grid = spec.grid(64, 64)?;
    let params = MhdParams::new(1e-4, 1e-4, 1e-4);
    let bc = Problem::KelvinHelmholtz.default_bc();
    let sys = MhdSystem::new(grid, params, bc)?;
    let mut u = kh_ic(&grid, &spec, &params)?.u;
    let ctl = StepController::new(1e-4);

    let mut t = 0.0;
    for t_next in [0.25, 0.5, 0.75, 1.0] {
        let (y, stats) = integrate_adaptive(&sys, &u, t, t_next, &ctl)?;
        u = y;
        t = t_next;
        let vy = u.chunks_exact(NVAR).map(|c| (c[MY] / c[RHO]).abs()).fold(0.0, f64::max);
        println!(
            "t = {t:.2}  max|v_y| = {vy:.3e}  max|div B| = {:.1e}  ({} steps, {} projections)",
            div_b(&u, &grid, &bc).max_abs,
            stats.accepted,
            stats.projections
        );
    }
    Ok(())
}
