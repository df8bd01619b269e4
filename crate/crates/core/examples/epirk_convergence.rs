//! Fixed-step convergence of EpiRK4 and EpiRK5P1 on `y' = y^2`.
//!
//! The exact solution `1 / (1 - t)` is known, so the observed order follows
//! from successive step halvings.

use epirk_mhd::epirk::{integrate_fixed, Method};
use epirk_mhd::krylov::KrylovConfig;
use epirk_mhd::ops::FnRhs;

fn main() -> epirk_mhd::Result<()> {
    let rhs = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0]);
    let t_end = 0.5;
    let exact = 1.0 / (1.0 - t_end);
    let cfg = KrylovConfig::default();
    for method in [Method::EpiRK4, Method::EpiRK5P1] {
        println!("{method:?}");
        let mut prev: Option<f64> = None;
        for k in 0..5 {
            let h = 0.1 / 2f64.powi(k);
            let (y, stats) = integrate_fixed(method, &rhs, &[1.0], 0.0, t_end, h, 1e-14, &cfg)?;
            let err = (y[0] - exact).abs();
            let order = prev.map(|p| (p / err).log2());
            println!(
                "  h = {h:.5}  error = {err:.3e}  projections = {:4}  order = {}",
                stats.projections,
                order.map_or("-".to_string(), |o| format!("{o:.2}"))
            );
            prev = Some(err);
        }
    }
    Ok(())
}
