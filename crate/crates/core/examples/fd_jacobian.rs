//! Finite-difference Jacobian-vector products for the Brusselator.
//!
//! Compares the matrix-free product with the analytic Jacobian for a few
//! directions of very different magnitude; the difference increment is scaled
//! to each direction, so the relative error stays near `sqrt(eps)`.

use epirk_mhd::jacobian::FdJacobianOperator;
use epirk_mhd::ops::{norm_inf, FnRhs, LinearOperator};

const A: f64 = 1.0;
const B: f64 = 3.0;

fn brusselator(y: &[f64], out: &mut [f64]) {
    let (u, v) = (y[0], y[1]);
    out[0] = A + u * u * v - (B + 1.0) * u;
    out[1] = B * u - u * u * v;
}

fn main() -> epirk_mhd::Result<()> {
    let rhs = FnRhs::new(2, brusselator);
    let base = [1.3, 2.1];
    let jac = FdJacobianOperator::new(&rhs, &base)?;
    let (u, v) = (base[0], base[1]);
    let exact = [[2.0 * u * v - (B + 1.0), u * u], [B - 2.0 * u * v, -u * u]];

    for dir in [[1.0, 0.0], [0.3, -0.7], [1e-6, 2e-6], [4e5, 1e5]] {
        let mut jv = [0.0; 2];
        jac.apply(&dir, &mut jv)?;
        let want = [
            exact[0][0] * dir[0] + exact[0][1] * dir[1],
            exact[1][0] * dir[0] + exact[1][1] * dir[1],
        ];
        let rel = norm_inf(&[jv[0] - want[0], jv[1] - want[1]]) / norm_inf(&want);
        println!("v = {dir:?}: J v = [{:.6e}, {:.6e}], relative error {rel:.1e}", jv[0], jv[1]);
    }
    println!("{} rhs evaluations for {} products", jac.applies(), 4);
    Ok(())
}
