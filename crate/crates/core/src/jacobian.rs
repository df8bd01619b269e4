//! Finite-difference Jacobian-vector products.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::ops::{check_dim, norm_inf, LinearOperator, RhsFunction};

/// `v -> J(a) v` by a one-sided difference of `F` around the base state `a`.
///
/// `F(a)` is evaluated once at construction; every [`apply`](LinearOperator::apply)
/// then costs exactly one right-hand-side evaluation.
pub struct FdJacobianOperator<'a, R: ?Sized> {
    rhs: &'a R,
    base: Vec<f64>,
    f_base: Vec<f64>,
    applies: Cell<usize>,
}

impl<'a, R: RhsFunction + ?Sized> FdJacobianOperator<'a, R> {
    pub fn new(rhs: &'a R, base: &[f64]) -> Result<Self> {
        check_dim("Jacobian base state", base.len(), rhs.dim())?;
        let mut f_base = vec![0.0; base.len()];
        rhs.eval(base, &mut f_base)?;
        check_finite(&f_base)?;
        Ok(Self::with_base_rhs(rhs, base.to_vec(), f_base))
    }

    /// Reuses an already computed `F(a)`.
    pub fn with_base_rhs(rhs: &'a R, base: Vec<f64>, f_base: Vec<f64>) -> Self {
        Self {
            rhs,
            base,
            f_base,
            applies: Cell::new(0),
        }
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn f_base(&self) -> &[f64] {
        &self.f_base
    }

    pub fn applies(&self) -> usize {
        self.applies.get()
    }
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl<R: RhsFunction + ?Sized> LinearOperator for FdJacobianOperator<'_, R> {
    fn dim(&self) -> usize {
        self.base.len()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("Jacobian direction", v.len(), self.base.len())?;
        check_finite(v)?;
        let eps = f64::EPSILON.sqrt();
        let vmax = norm_inf(v);
        let sigma = if vmax > eps { eps / vmax } else { 1.0 };
        let shifted: Vec<f64> = self.base.iter().zip(v).map(|(a, x)| a + sigma * x).collect();
        self.rhs.eval_difference(&self.base, &self.f_base, &shifted, out)?;
        self.applies.set(self.applies.get() + 1);
        out.iter_mut().for_each(|o| *o /= sigma);
        check_finite(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{CountingRhs, FnRhs};

    fn quadratic() -> FnRhs<impl Fn(&[f64], &mut [f64])> {
        FnRhs::new(2, |y: &[f64], out: &mut [f64]| {
            out[0] = y[0] * y[0];
            out[1] = y[0] * y[1];
        })
    }

    #[test]
    fn zero_direction_gives_zero() {
        let f = quadratic();
        let j = FdJacobianOperator::new(&f, &[1.0, 2.0]).unwrap();
        let mut out = [1.0; 2];
        j.apply(&[0.0, 0.0], &mut out).unwrap();
        assert_eq!(out, [0.0, 0.0]);
    }

    #[test]
    fn linear_rhs_is_reproduced() {
        let f = FnRhs::new(3, |y: &[f64], out: &mut [f64]| {
            out[0] = 2.0 * y[0] - y[2];
            out[1] = 0.5 * y[1];
            out[2] = -3.0 * y[0] + y[1] + 4.0 * y[2];
        });
        let j = FdJacobianOperator::new(&f, &[0.3, -1.0, 2.0]).unwrap();
        let mut out = [0.0; 3];
        j.apply(&[1.0, 2.0, -1.0], &mut out).unwrap();
        let want = [3.0, 1.0, -5.0];
        for (o, w) in out.iter().zip(want) {
            assert!((o - w).abs() < 1e-7, "{o} vs {w}");
        }
    }

    #[test]
    fn quadratic_directional_derivative() {
        let f = quadratic();
        let j = FdJacobianOperator::new(&f, &[1.0, 2.0]).unwrap();
        let mut out = [0.0; 2];
        j.apply(&[1.0, 0.0], &mut out).unwrap();
        assert!((out[0] - 2.0).abs() < 1e-7);
        assert!((out[1] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn one_evaluation_per_apply() {
        let f = CountingRhs::new(quadratic());
        let j = FdJacobianOperator::new(&f, &[1.0, 2.0]).unwrap();
        assert_eq!(f.count(), 1);
        let mut out = [0.0; 2];
        for k in 1..=5 {
            j.apply(&[k as f64, 1.0], &mut out).unwrap();
            assert_eq!(f.count(), 1 + k);
        }
        assert_eq!(j.applies(), 5);
    }

    #[test]
    fn non_finite_rhs_reported() {
        let f = FnRhs::new(2, |y: &[f64], out: &mut [f64]| {
            out[0] = y[0];
            out[1] = if y[1] > 1.0 { f64::NAN } else { y[1] };
        });
        let j = FdJacobianOperator::new(&f, &[0.0, 1.0]).unwrap();
        let mut out = [0.0; 2];
        assert!(matches!(
            j.apply(&[0.0, 1.0], &mut out),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn tiny_directions_use_unit_increment() {
        let f = quadratic();
        let j = FdJacobianOperator::new(&f, &[1.0, 2.0]).unwrap();
        let mut out = [0.0; 2];
        j.apply(&[1e-9, 0.0], &mut out).unwrap();
        // F(a + v) - F(a) for a direction below sqrt(eps).
        assert!((out[0] - 2e-9).abs() < 1e-15);
        assert!((out[1] - 2e-9).abs() < 1e-15);
    }
}
