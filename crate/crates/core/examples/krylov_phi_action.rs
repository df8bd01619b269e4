//! Matrix-free action of a phi-function combination.
//!
//! The operator is the periodic 1D diffusion stencil, applied without ever
//! forming the matrix. The Krylov result is compared with a dense evaluation.

use epirk_mhd::krylov::{phi_comb, KrylovConfig, PhiCombRequest};
use epirk_mhd::ops::LinearOperator;
use epirk_mhd::phi::phi_dense;
use nalgebra::{DMatrix, DVector};

struct Diffusion {
    n: usize,
    nu: f64,
}

impl LinearOperator for Diffusion {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) -> epirk_mhd::Result<()> {
        let n = self.n;
        let r = self.nu * (n * n) as f64;
        for i in 0..n {
            out[i] = r * (v[(i + n - 1) % n] - 2.0 * v[i] + v[(i + 1) % n]);
        }
        Ok(())
    }
}

fn main() -> epirk_mhd::Result<()> {
    let op = Diffusion { n: 200, nu: 1e-2 };
    let h = 0.5;
    let x = |i: usize| i as f64 / op.n as f64;
    let v1: Vec<f64> = (0..op.n).map(|i| (2.0 * std::f64::consts::PI * x(i)).sin()).collect();
    let v2: Vec<f64> = (0..op.n).map(|i| (-50.0 * (x(i) - 0.5).powi(2)).exp()).collect();

    let cfg = KrylovConfig::default();
    let req = PhiCombRequest { operator: &op, h, c: 1.0, vectors: vec![&v1, &v2], tol: 1e-10 };
    let (w, stats) = phi_comb(&req, &cfg)?;
    println!(
        "Krylov: {} operator applies, {} substeps, largest basis {}",
        stats.operator_applies, stats.substeps, stats.max_basis
    );

    let mut a = DMatrix::zeros(op.n, op.n);
    let mut e = vec![0.0; op.n];
    let mut col = vec![0.0; op.n];
    for j in 0..op.n {
        e.fill(0.0);
        e[j] = 1.0;
        op.apply(&e, &mut col)?;
        a.set_column(j, &DVector::from_column_slice(&col));
    }
    let phis = phi_dense(2, &(a * h))?;
    let dense = &phis[1] * DVector::from_column_slice(&v1) + &phis[2] * DVector::from_column_slice(&v2);
    let err = w.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max difference to dense evaluation: {err:.2e}");
    Ok(())
}
