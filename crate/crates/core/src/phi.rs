//! The entire functions `phi_k` for scalars and small dense matrices.
//!
//! `phi_0(z) = e^z` and `phi_k(z) = int_0^1 e^{(1-s)z} s^{k-1}/(k-1)! ds`, which
//! satisfy `phi_{k+1}(z) = (phi_k(z) - 1/k!) / z` and `phi_k(0) = 1/k!`.
//!
//! Dense evaluation goes through a single matrix exponential of a block
//! augmented matrix, so all of `phi_0(H) .. phi_p(H)` share one scaling and
//! squaring pass.

use std::ops::{Add, Div, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;

/// Highest phi order supported by the crate.
pub const MAX_PHI_ORDER: usize = 4;

/// Below this modulus the scalar evaluation switches from the recurrence to a
/// truncated Taylor series.
pub const SMALL_ARGUMENT: f64 = 0.5;
const TAYLOR_TERMS: usize = 20;

/// A validated phi index `0 <= k <= 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PhiOrder(usize);

impl PhiOrder {
    pub fn new(k: usize) -> Result<Self> {
        if k > MAX_PHI_ORDER {
            return Err(Error::InvalidArgument(format!(
                "phi order {k} exceeds the supported maximum {MAX_PHI_ORDER}"
            )));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for PhiOrder {
    type Error = Error;
    fn try_from(k: usize) -> Result<Self> {
        Self::new(k)
    }
}

/// Scalar types on which the phi functions are evaluated.
pub trait PhiScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn from_real(x: f64) -> Self;
    fn exp(self) -> Self;
    fn modulus(self) -> f64;
    fn is_finite(self) -> bool;
}

impl PhiScalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl PhiScalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

pub(crate) fn inv_factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, j| acc / j as f64)
}

/// Evaluates `phi_k(z)` for a real or complex scalar.
pub fn phi_scalar<T: PhiScalar>(k: usize, z: T) -> Result<T> {
    let k = PhiOrder::new(k)?.get();
    if !z.is_finite() {
        return Err(Error::InvalidArgument("phi argument is not finite".into()));
    }
    if z.modulus() < SMALL_ARGUMENT {
        // sum_{j} z^j / (j+k)!, accumulated from the smallest term up.
        let mut coeffs = [0.0; TAYLOR_TERMS];
        for (j, c) in coeffs.iter_mut().enumerate() {
            *c = inv_factorial(j + k);
        }
        let mut acc = T::from_real(coeffs[TAYLOR_TERMS - 1]);
        for c in coeffs.iter().rev().skip(1) {
            acc = acc * z + T::from_real(*c);
        }
        return Ok(acc);
    }
    let mut phi = z.exp();
    for j in 0..k {
        phi = (phi - T::from_real(inv_factorial(j))) / z;
    }
    Ok(phi)
}

fn check_square_finite(h: &DenseMatrix) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix must be square, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn norm1(a: &DenseMatrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
// 1-norm bounds below which each diagonal Padé degree is accurate to unit roundoff.
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;
const MAX_SQUARINGS: i32 = 1000;

fn pade_low(a: &DenseMatrix, b: &[f64]) -> (DenseMatrix, DenseMatrix) {
    let n = a.nrows();
    let id = DenseMatrix::identity(n, n);
    let a2 = a * a;
    let mut u = &id * b[1];
    let mut v = &id * b[0];
    let mut pow = id.clone();
    for pair in 1..b.len() / 2 {
        pow = &pow * &a2;
        u += &pow * b[2 * pair + 1];
        v += &pow * b[2 * pair];
    }
    (a * u, v)
}

fn pade13(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = DenseMatrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3, 5, 7, 9 or 13 chosen from the 1-norm.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    check_square_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let nrm = norm1(a);
    let (u, v, squarings) = if let Some(&(deg, _)) = THETA.iter().find(|(_, t)| nrm <= *t) {
        let coeffs: &[f64] = match deg {
            3 => &PADE3,
            5 => &PADE5,
            7 => &PADE7,
            _ => &PADE9,
        };
        let (u, v) = pade_low(a, coeffs);
        (u, v, 0)
    } else {
        let s = (nrm / THETA13).log2().ceil().max(0.0);
        if !s.is_finite() || s > MAX_SQUARINGS as f64 {
            return Err(Error::Numeric(format!(
                "matrix 1-norm {nrm:.3e} too large for scaling and squaring"
            )));
        }
        let s = s as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut r = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(r)
}

/// Returns `[phi_0(H), phi_1(H), ..., phi_{k_max}(H)]`.
///
/// Builds the block matrix
/// ```text
/// [ H  I  0 .. 0 ]
/// [ 0  0  I .. 0 ]
/// [       ..   I ]
/// [ 0  0  0 .. 0 ]
/// ```
/// whose exponential carries `phi_j(H)` in block `(0, j)`.
pub fn phi_dense(k_max: usize, h: &DenseMatrix) -> Result<Vec<DenseMatrix>> {
    let p = PhiOrder::new(k_max)?.get();
    check_square_finite(h)?;
    let n = h.nrows();
    let dim = n * (p + 1);
    let mut aug = DenseMatrix::zeros(dim, dim);
    aug.view_mut((0, 0), (n, n)).copy_from(h);
    for blk in 0..p {
        for d in 0..n {
            aug[(blk * n + d, (blk + 1) * n + d)] = 1.0;
        }
    }
    let e = expm(&aug)?;
    Ok((0..=p)
        .map(|j| e.view((0, j * n), (n, n)).into_owned())
        .collect())
}

/// Computes `exp(H) e_1` and `phi_1(H) e_1` with one exponential of the
/// `(m+1) x (m+1)` matrix `[[H, e_1], [0, 0]]`.
pub(crate) fn exp_and_phi1_first_column(h: &DenseMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = h.nrows();
    let mut aug = DenseMatrix::zeros(m + 1, m + 1);
    aug.view_mut((0, 0), (m, m)).copy_from(h);
    aug[(0, m)] = 1.0;
    let e = expm(&aug)?;
    let exp_col = (0..m).map(|i| e[(i, 0)]).collect();
    let phi1_col = (0..m).map(|i| e[(i, m)]).collect();
    Ok((exp_col, phi1_col))
}

/// Direct evaluation of `sum_{j < terms} H^j / (j+k)!`. Test oracle only.
///
/// Fails if the last term is not negligible next to the sum, i.e. `terms` is too
/// small for `|H|`.
pub fn phi_series_oracle(k: usize, h: &DenseMatrix, terms: usize) -> Result<DenseMatrix> {
    let k = PhiOrder::new(k)?.get();
    check_square_finite(h)?;
    let n = h.nrows();
    let mut power = DenseMatrix::identity(n, n);
    let mut sum = DenseMatrix::zeros(n, n);
    let mut last = f64::INFINITY;
    for j in 0..terms {
        let term = &power * inv_factorial(j + k);
        last = term.norm();
        sum += term;
        power = &power * h;
    }
    if !(last <= f64::EPSILON * 1e-2 * sum.norm()) {
        return Err(Error::Numeric(format!(
            "phi series not converged after {terms} terms (last term norm {last:e})"
        )));
    }
    Ok(sum)
}
