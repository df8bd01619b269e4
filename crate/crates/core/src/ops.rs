//! Operator abstractions shared by the Krylov, Jacobian and time-stepping layers,
//! plus the handful of vector kernels they need.

use std::cell::Cell;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A square linear map `v -> J v` on `R^N`, available only through its action.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// Writes `J v` into `out`. Both slices have length [`dim`](Self::dim).
    fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Autonomous right-hand side `y' = F(y)`.
pub trait RhsFunction {
    fn dim(&self) -> usize;

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()>;

    /// Writes `F(y_shifted) - F(y)` given `f_y = F(y)`; costs one evaluation.
    ///
    /// Systems of the form `F = D G` with `D` linear can override this to
    /// subtract `G` before applying `D`, which keeps properties of `D` (such as
    /// a discrete divergence-free range) intact under cancellation.
    fn eval_difference(
        &self,
        y: &[f64],
        f_y: &[f64],
        y_shifted: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let _ = y;
        self.eval(y_shifted, out)?;
        for (o, f) in out.iter_mut().zip(f_y) {
            *o -= f;
        }
        Ok(())
    }

    /// Rejects states the system cannot be evaluated at. Adaptive drivers call
    /// this on every candidate step before accepting it.
    fn check_state(&self, y: &[f64]) -> Result<()> {
        let _ = y;
        Ok(())
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).apply(v, out)
    }
}

impl<T: RhsFunction + ?Sized> RhsFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval(y, out)
    }
    fn eval_difference(&self, y: &[f64], f_y: &[f64], y_shifted: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).eval_difference(y, f_y, y_shifted, out)
    }
}

/// Dense matrices act as operators; used by tests and small examples.
impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }
}

/// Right-hand side built from a closure.
pub struct FnRhs<F> {
    dim: usize,
    f: F,
}

impl<F> FnRhs<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> RhsFunction for FnRhs<F>
where
    F: Fn(&[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(y, out);
        Ok(())
    }
}

/// Turns `y' = f(t, y)` into an autonomous system by appending `t` as the last
/// state component (with `t' = 1`).
pub struct Autonomized<F> {
    dim: usize,
    f: F,
}

impl<F> Autonomized<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    /// `dim` is the size of the original system, without the time component.
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }

    pub fn initial_state(&self, t0: f64, y0: &[f64]) -> Vec<f64> {
        let mut s = y0.to_vec();
        s.push(t0);
        s
    }
}

impl<F> RhsFunction for Autonomized<F>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn dim(&self) -> usize {
        self.dim + 1
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim;
        (self.f)(y[n], &y[..n], &mut out[..n]);
        out[n] = 1.0;
        Ok(())
    }
}

/// Wraps a right-hand side and counts evaluations.
pub struct CountingRhs<R> {
    inner: R,
    count: Cell<usize>,
}

impl<R: RhsFunction> CountingRhs<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.get()
    }

    pub fn reset(&self) {
        self.count.set(0);
    }
}

impl<R: RhsFunction> RhsFunction for CountingRhs<R> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.count.set(self.count.get() + 1);
        self.inner.eval(y, out)
    }

    fn eval_difference(&self, y: &[f64], f_y: &[f64], y_shifted: &[f64], out: &mut [f64]) -> Result<()> {
        self.count.set(self.count.get() + 1);
        self.inner.eval_difference(y, f_y, y_shifted, out)
    }
}

pub(crate) fn check_dim(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidArgument(format!(
            "{what}: dimension {got}, expected {want}"
        )));
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v *= alpha);
}
