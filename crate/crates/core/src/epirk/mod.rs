//! Exponential propagation iterative Runge-Kutta (EpiRK) time steppers.

mod integrate;
mod tableau;

use std::time::Duration;

pub use integrate::{integrate_adaptive, integrate_fixed, Method, StepController};
pub use tableau::{
    epirk5p1_literal, tableau_step, EpiRKTableau, Epirk5p1Coefficients, PsiTerm,
    EPIRK5P1_FINAL_SCALES, EPIRK5P1_LITERALS,
};

use crate::error::{Error, Result};
use crate::jacobian::FdJacobianOperator;
use crate::krylov::{multi_scale_eval, phi_comb, KrylovConfig, KrylovStats, PhiCombRequest};
use crate::ops::{axpy, check_dim, CountingRhs, LinearOperator, RhsFunction};

/// Work counters accumulated over steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Krylov projections, including those of rejected steps.
    pub projections: usize,
    pub rhs_evals: usize,
    pub krylov: KrylovStats,
    pub wall_time: Duration,
}

impl StepStats {
    pub(crate) fn record_projection(&mut self, k: &KrylovStats) {
        self.projections += 1;
        self.krylov.merge(k);
    }

    pub fn merge(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.projections += other.projections;
        self.rhs_evals += other.rhs_evals;
        self.krylov.merge(&other.krylov);
        self.wall_time += other.wall_time;
    }
}

/// Result of one step. `error` is the local error vector when the scheme has an estimator.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub y: Vec<f64>,
    pub error: Option<Vec<f64>>,
    pub stats: StepStats,
}

/// Counts the right-hand-side evaluations of one step.
pub(crate) struct StepWorkspace<'a, R: ?Sized> {
    pub rhs: CountingRhs<&'a R>,
    y_n: &'a [f64],
}

impl<'a, R: RhsFunction + ?Sized> StepWorkspace<'a, R> {
    pub fn new(rhs: &'a R, y_n: &'a [f64], h: f64) -> Result<Self> {
        check_dim("state", y_n.len(), rhs.dim())?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
        }
        Ok(Self {
            rhs: CountingRhs::new(rhs),
            y_n,
        })
    }

    pub fn jacobian(&self) -> Result<FdJacobianOperator<'_, CountingRhs<&'a R>>> {
        FdJacobianOperator::new(&self.rhs, self.y_n)
    }
}

/// `R(y) = F(y) - F(y_n) - J (y - y_n)`, the nonlinear remainder about `y_n`.
pub fn remainder<R: RhsFunction + ?Sized>(
    rhs: &R,
    y_n: &[f64],
    f_n: &[f64],
    jac: &dyn LinearOperator,
    y: &[f64],
) -> Result<Vec<f64>> {
    let n = y_n.len();
    check_dim("remainder point", y.len(), n)?;
    check_dim("remainder base value", f_n.len(), n)?;
    let dy: Vec<f64> = y.iter().zip(y_n).map(|(a, b)| a - b).collect();
    let mut jdy = vec![0.0; n];
    jac.apply(&dy, &mut jdy)?;
    let mut r = vec![0.0; n];
    rhs.eval(y, &mut r)?;
    for i in 0..n {
        r[i] -= f_n[i] + jdy[i];
    }
    Ok(r)
}

/// Weighted RMS norm with weights `atol + rtol * max(|a_i|, |b_i|)`.
pub fn weighted_rms(err: &[f64], a: &[f64], b: &[f64], atol: f64, rtol: f64) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let sum: f64 = err
        .iter()
        .zip(a.iter().zip(b))
        .map(|(e, (x, y))| {
            let w = atol + rtol * x.abs().max(y.abs());
            (e / w).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

/// One EpiRK5P1 step with three Krylov projections:
/// `phi_1` at scales `{g11, g21, g31}` on `h F_n`, `phi_1` at `{g22, g32}` on
/// `h R(Y_1)`, and `phi_3(g33 h J)` on `h (R(Y_2) - 2 R(Y_1))`.
///
/// The returned error vector is the `b3` correction term.
pub fn epirk5p1_step<R: RhsFunction + ?Sized>(
    rhs: &R,
    y_n: &[f64],
    h: f64,
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<StepOutput> {
    let c = Epirk5p1Coefficients::get();
    let ws = StepWorkspace::new(rhs, y_n, h)?;
    let jac = ws.jacobian()?;
    let f_n = jac.f_base().to_vec();
    let mut stats = StepStats::default();

    let (p1, k) = multi_scale_eval(&jac, h, &scaled(h, &f_n), &[c.g11, c.g21, c.g31], tol, cfg)?;
    stats.record_projection(&k);
    let mut y1 = y_n.to_vec();
    axpy(c.a11, &p1[0], &mut y1);
    let r1 = remainder(&ws.rhs, y_n, &f_n, &jac, &y1)?;

    let (p2, k) = multi_scale_eval(&jac, h, &scaled(h, &r1), &[c.g22, c.g32], tol, cfg)?;
    stats.record_projection(&k);
    let mut y2 = y_n.to_vec();
    axpy(c.a21, &p1[1], &mut y2);
    axpy(c.a22, &p2[0], &mut y2);
    let r2 = remainder(&ws.rhs, y_n, &f_n, &jac, &y2)?;

    let v3: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| h * (b - 2.0 * a)).collect();
    let zero = vec![0.0; y_n.len()];
    let req = PhiCombRequest {
        operator: &jac,
        h,
        c: c.g33,
        vectors: vec![&zero, &zero, &v3],
        tol,
    };
    let (p3, k) = phi_comb(&req, cfg)?;
    stats.record_projection(&k);

    let mut y = y_n.to_vec();
    axpy(c.b1, &p1[2], &mut y);
    axpy(c.b2, &p2[1], &mut y);
    axpy(c.b3, &p3, &mut y);
    let error = scaled(c.b3, &p3);
    stats.rhs_evals = ws.rhs.count();
    Ok(StepOutput {
        y,
        error: Some(error),
        stats,
    })
}

/// One EpiRK4 step with two Krylov projections: `phi_1` at scales `{1/2, 2/3}`
/// on `h F_n`, then `phi_1, phi_3, phi_4` at scale 1 on the final combination.
pub fn epirk4_step<R: RhsFunction + ?Sized>(
    rhs: &R,
    y_n: &[f64],
    h: f64,
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<StepOutput> {
    let ws = StepWorkspace::new(rhs, y_n, h)?;
    let jac = ws.jacobian()?;
    let f_n = jac.f_base().to_vec();
    let hf = scaled(h, &f_n);
    let mut stats = StepStats::default();

    let (p1, k) = multi_scale_eval(&jac, h, &hf, &[0.5, 2.0 / 3.0], tol, cfg)?;
    stats.record_projection(&k);
    let mut y1 = y_n.to_vec();
    axpy(0.5, &p1[0], &mut y1);
    let mut y2 = y_n.to_vec();
    axpy(2.0 / 3.0, &p1[1], &mut y2);
    let r1 = remainder(&ws.rhs, y_n, &f_n, &jac, &y1)?;
    let r2 = remainder(&ws.rhs, y_n, &f_n, &jac, &y2)?;

    let v3: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| h * (32.0 * a - 13.5 * b)).collect();
    let v4: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| h * (-144.0 * a + 81.0 * b)).collect();
    let zero = vec![0.0; y_n.len()];
    let req = PhiCombRequest {
        operator: &jac,
        h,
        c: 1.0,
        vectors: vec![&hf, &zero, &v3, &v4],
        tol,
    };
    let (p2, k) = phi_comb(&req, cfg)?;
    stats.record_projection(&k);

    let mut y = y_n.to_vec();
    axpy(1.0, &p2, &mut y);
    stats.rhs_evals = ws.rhs.count();
    Ok(StepOutput {
        y,
        error: None,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::FnRhs;
    use crate::phi::{phi_dense, DenseMatrix};
    use nalgebra::DVector;

    fn cfg() -> KrylovConfig {
        KrylovConfig::default()
    }

    #[test]
    fn remainder_vanishes_at_base_point() {
        let f = FnRhs::new(2, |y: &[f64], o: &mut [f64]| {
            o[0] = y[0] * y[1];
            o[1] = y[0].sin();
        });
        let y_n = [0.4, -1.2];
        let jac = FdJacobianOperator::new(&f, &y_n).unwrap();
        let r = remainder(&f, &y_n, jac.f_base(), &jac, &y_n).unwrap();
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn remainder_of_square() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0]);
        let jac = FdJacobianOperator::new(&f, &[1.0]).unwrap();
        let r = remainder(&f, &[1.0], jac.f_base(), &jac, &[1.1]).unwrap();
        // 1.21 - 1 - 2 * 0.1
        assert!((r[0] - 0.01).abs() < 1e-6, "{}", r[0]);
    }

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let f = FnRhs::new(3, |_: &[f64], o: &mut [f64]| o.fill(0.0));
        let y = [1.0, -2.0, 3.0];
        let out = epirk5p1_step(&f, &y, 0.5, 1e-8, &cfg()).unwrap();
        assert_eq!(out.y, y);
        assert!(out.error.unwrap().iter().all(|&e| e == 0.0));
        let out = epirk4_step(&f, &y, 0.5, 1e-8, &cfg()).unwrap();
        assert_eq!(out.y, y);
    }

    fn linear_case() -> (DenseMatrix, Vec<f64>) {
        let m = DenseMatrix::from_row_slice(
            3,
            3,
            &[-1.0, 0.3, 0.0, 0.2, -0.5, 0.1, 0.0, -0.4, -2.0],
        );
        (m, vec![0.7, -0.3, 0.5])
    }

    #[test]
    fn linear_problem_matches_matrix_exponential() {
        let (m, y0) = linear_case();
        let mm = m.clone();
        let f = FnRhs::new(3, move |y: &[f64], o: &mut [f64]| {
            mm.apply(y, o).unwrap();
        });
        let h = 0.05;
        let exact = &phi_dense(0, &(&m * h)).unwrap()[0] * DVector::from_column_slice(&y0);
        for out in [
            epirk5p1_step(&f, &y0, h, 1e-12, &cfg()).unwrap(),
            epirk4_step(&f, &y0, h, 1e-12, &cfg()).unwrap(),
        ] {
            for i in 0..3 {
                assert!((out.y[i] - exact[i]).abs() < 1e-10, "{} vs {}", out.y[i], exact[i]);
            }
        }
    }

    #[test]
    fn projection_counts() {
        let f = FnRhs::new(2, |y: &[f64], o: &mut [f64]| {
            o[0] = -y[0] + y[1] * y[1];
            o[1] = -3.0 * y[1] + y[0].sin();
        });
        let y0 = [0.3, 0.8];
        assert_eq!(epirk5p1_step(&f, &y0, 0.1, 1e-8, &cfg()).unwrap().stats.projections, 3);
        assert_eq!(epirk4_step(&f, &y0, 0.1, 1e-8, &cfg()).unwrap().stats.projections, 2);
    }

    #[test]
    fn dedicated_steppers_match_general_runner() {
        let f = FnRhs::new(2, |y: &[f64], o: &mut [f64]| {
            o[0] = -y[0] + y[1] * y[1];
            o[1] = -3.0 * y[1] + y[0].sin();
        });
        let y0 = [0.3, 0.8];
        let h = 0.2;
        let pairs = [
            (
                epirk5p1_step(&f, &y0, h, 1e-12, &cfg()).unwrap(),
                tableau_step(&EpiRKTableau::epirk5p1(), &f, &y0, h, 1e-12, &cfg()).unwrap(),
            ),
            (
                epirk4_step(&f, &y0, h, 1e-12, &cfg()).unwrap(),
                tableau_step(&EpiRKTableau::epirk4(), &f, &y0, h, 1e-12, &cfg()).unwrap(),
            ),
        ];
        // The two layouts feed different vectors through the finite-difference
        // Jacobian, so they agree to its rounding level, not to Krylov tolerance.
        for (fast, general) in pairs {
            for i in 0..2 {
                assert!((fast.y[i] - general.y[i]).abs() < 1e-9, "{} vs {}", fast.y[i], general.y[i]);
            }
        }
    }

    #[test]
    fn rhs_evaluations_counted() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = -y[0] * y[0]);
        let out = epirk4_step(&f, &[1.0], 0.1, 1e-10, &cfg()).unwrap();
        // F_n, two remainders (F and one Jacobian action each), Krylov applies.
        assert_eq!(out.stats.rhs_evals, 1 + 4 + out.stats.krylov.operator_applies);
    }

    #[test]
    fn weighted_norm() {
        let e = [0.1, -0.2];
        let a = [1.0, 0.0];
        let b = [0.0, 2.0];
        let got = weighted_rms(&e, &a, &b, 0.1, 0.1);
        let want = (((0.1 / 0.2f64).powi(2) + (0.2 / 0.3f64).powi(2)) / 2.0).sqrt();
        assert!((got - want).abs() < 1e-15);
    }
}
