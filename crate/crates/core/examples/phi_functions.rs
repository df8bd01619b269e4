//! Scalar and dense phi-function evaluation.
//!
//! Prints `phi_k(z)` for a few arguments on both sides of the series/recurrence
//! switch, then checks the dense evaluation of a diagonal matrix against the
//! scalar values on its diagonal.

use epirk_mhd::phi::{phi_dense, phi_scalar, MAX_PHI_ORDER};
use nalgebra::DMatrix;

fn main() -> epirk_mhd::Result<()> {
    println!("{:>8} {:>22} {:>22} {:>22} {:>22}", "z", "phi_1", "phi_2", "phi_3", "phi_4");
    for z in [-50.0, -5.0, -0.5, -1e-3, 0.0, 1e-3, 0.3, 2.0] {
        let row: Vec<String> = (1..=MAX_PHI_ORDER)
            .map(|k| phi_scalar(k, z).map(|v| format!("{v:22.15e}")))
            .collect::<Result<_, _>>()?;
        println!("{z:>8} {}", row.join(" "));
    }

    let diag = [-3.0, -0.2, 0.7];
    let h = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&diag));
    let phis = phi_dense(MAX_PHI_ORDER, &h)?;
    let mut worst = 0.0_f64;
    for (k, m) in phis.iter().enumerate() {
        for (i, &z) in diag.iter().enumerate() {
            worst = worst.max((m[(i, i)] - phi_scalar(k, z)?).abs());
        }
    }
    println!("dense vs scalar on a diagonal matrix: max difference {worst:.2e}");
    Ok(())
}
