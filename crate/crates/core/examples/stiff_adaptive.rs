//! Adaptive EpiRK5P1 on a stiff forced problem.
//!
//! `y' = -1000 y + sin t` with `y(0) = 0`. The time variable is appended to the
//! state so the integrator sees an autonomous system. Exponential steps are
//! not limited by the stiff eigenvalue, so the step count stays small even at
//! tight tolerances.

use epirk_mhd::epirk::{integrate_adaptive, StepController};
use epirk_mhd::ops::Autonomized;

fn exact(t: f64) -> f64 {
    let l: f64 = 1000.0;
    (l * t.sin() - t.cos() + (-l * t).exp()) / (l * l + 1.0)
}

fn main() -> epirk_mhd::Result<()> {
    let rhs = Autonomized::new(1, |t: f64, y: &[f64], o: &mut [f64]| o[0] = -1000.0 * y[0] + t.sin());
    let y0 = rhs.initial_state(0.0, &[0.0]);
    for tol in [1e-4, 1e-6, 1e-8] {
        let (y, stats) = integrate_adaptive(&rhs, &y0, 0.0, 1.0, &StepController::new(tol))?;
        println!(
            "tol {tol:.0e}: error {:.2e}, {} accepted, {} rejected, {} projections",
            (y[0] - exact(1.0)).abs(),
            stats.accepted,
            stats.rejected,
            stats.projections
        );
    }
    Ok(())
}
