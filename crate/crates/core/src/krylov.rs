//! Krylov projection of phi-function combinations for matrix-free operators.
//!
//! The target `w = sum_{k=1}^p phi_k(c h J) v_k` is the value at `s = 1` of
//! `w(s) = sum_k s^k phi_k(s A) u_k` with `A = c h J`. That curve solves a
//! linear ODE with polynomial forcing, so it can be advanced over substeps
//! `[s, s + tau]` by one matrix exponential of the augmented operator
//!
//! ```text
//! B = [ A   W(s) ]      seed = [ w(s) ]
//!     [ 0   K    ]             [ e_p  ]
//! ```
//!
//! where `K` is the `p x p` upward shift and the columns of `W(s)` are the
//! forcing polynomials evaluated at `s`. Each substep runs Arnoldi on `B`,
//! stops on the `h_{m+1,m}` residual surrogate, and shrinks the substep when
//! the basis grows past a soft cap. Outputs at several scales `s_i` come out
//! of the same basis whenever they fall inside the current substep.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::ops::{axpy, check_dim, dot, norm2, LinearOperator};
use crate::phi::{exp_and_phi1_first_column, inv_factorial, DenseMatrix};

/// Tuning knobs for the adaptive Krylov evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovConfig {
    /// Basis size reached before the first residual check.
    pub m_init: usize,
    /// Hard cap on the basis size.
    pub m_max: usize,
    /// Basis size at which the substep is halved instead of growing the basis.
    pub m_soft: usize,
    /// A substep converging with at most this many vectors enlarges the next one.
    pub grow_below: usize,
    pub grow_factor: f64,
    pub shrink_factor: f64,
    /// Largest substep as a fraction of the full interval.
    pub max_substep: f64,
    /// Smallest substep as a fraction of the full interval.
    pub min_substep: f64,
    /// Relative size of `h_{j+1,j}` treated as an invariant subspace.
    pub breakdown_tol: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self {
            m_init: 10,
            m_max: 100,
            m_soft: 25,
            grow_below: 10,
            grow_factor: 4.0 / 3.0,
            shrink_factor: 0.5,
            max_substep: 1.0,
            min_substep: 1e-8,
            breakdown_tol: 1e-12,
        }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.m_init >= 1
            && self.m_init <= self.m_max
            && self.m_soft >= 1
            && self.grow_factor >= 1.0
            && self.shrink_factor > 0.0
            && self.shrink_factor < 1.0
            && self.max_substep > 0.0
            && self.max_substep <= 1.0
            && self.min_substep > 0.0
            && self.min_substep <= self.max_substep
            && self.breakdown_tol > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "inconsistent Krylov configuration: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Cost counters for one or more Krylov evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KrylovStats {
    pub operator_applies: usize,
    pub substeps: usize,
    pub rejected_substeps: usize,
    pub max_basis: usize,
}

impl KrylovStats {
    pub fn merge(&mut self, other: &KrylovStats) {
        self.operator_applies += other.operator_applies;
        self.substeps += other.substeps;
        self.rejected_substeps += other.rejected_substeps;
        self.max_basis = self.max_basis.max(other.max_basis);
    }
}

/// Orthonormal Krylov basis and the Hessenberg projection of the operator.
#[derive(Debug, Clone)]
pub struct ArnoldiBasis {
    /// `m + 1` basis vectors, or `m` after a breakdown.
    pub v: Vec<Vec<f64>>,
    /// `(m + 1) x m` upper Hessenberg matrix.
    pub h: DenseMatrix,
    pub m: usize,
    pub beta: f64,
    pub breakdown: bool,
}

impl ArnoldiBasis {
    /// The square `m x m` part of the Hessenberg matrix.
    pub fn hessenberg(&self) -> DenseMatrix {
        self.h.view((0, 0), (self.m, self.m)).into_owned()
    }

    pub fn h_next(&self) -> f64 {
        self.h[(self.m, self.m - 1)]
    }
}

struct ArnoldiProcess<'a> {
    op: &'a dyn LinearOperator,
    basis: Vec<Vec<f64>>,
    h_cols: Vec<Vec<f64>>,
    beta: f64,
    breakdown: bool,
    breakdown_tol: f64,
    applies: usize,
}

impl<'a> ArnoldiProcess<'a> {
    fn new(op: &'a dyn LinearOperator, seed: &[f64], breakdown_tol: f64) -> Result<Self> {
        let beta = norm2(seed);
        if beta == 0.0 {
            return Err(Error::InvalidArgument("Arnoldi seed vector is zero".into()));
        }
        if !beta.is_finite() {
            return Err(Error::Numeric("Arnoldi seed vector is not finite".into()));
        }
        let v0 = seed.iter().map(|x| x / beta).collect();
        Ok(Self {
            op,
            basis: vec![v0],
            h_cols: Vec::new(),
            beta,
            breakdown: false,
            breakdown_tol,
            applies: 0,
        })
    }

    fn m(&self) -> usize {
        self.h_cols.len()
    }

    /// Appends one basis vector (modified Gram-Schmidt plus one re-orthogonalization).
    fn step(&mut self) -> Result<()> {
        debug_assert!(!self.breakdown);
        let j = self.h_cols.len();
        let mut w = vec![0.0; self.op.dim()];
        self.op.apply(&self.basis[j], &mut w)?;
        self.applies += 1;
        let w_norm = norm2(&w);
        if !w_norm.is_finite() {
            return Err(Error::Numeric(
                "operator produced a non-finite Krylov vector".into(),
            ));
        }
        let mut col = vec![0.0; j + 2];
        for _pass in 0..2 {
            for (i, vi) in self.basis.iter().enumerate() {
                let c = dot(&w, vi);
                axpy(-c, vi, &mut w);
                col[i] += c;
            }
        }
        let next = norm2(&w);
        col[j + 1] = next;
        self.h_cols.push(col);
        if next <= self.breakdown_tol * w_norm || next == 0.0 {
            self.breakdown = true;
        } else {
            w.iter_mut().for_each(|x| *x /= next);
            self.basis.push(w);
        }
        Ok(())
    }

    fn hessenberg(&self) -> DenseMatrix {
        let m = self.m();
        DMatrix::from_fn(m, m, |i, j| self.h_cols[j].get(i).copied().unwrap_or(0.0))
    }

    fn h_next(&self) -> f64 {
        let m = self.m();
        if self.breakdown {
            0.0
        } else {
            self.h_cols[m - 1][m]
        }
    }

    fn into_basis(self) -> ArnoldiBasis {
        let m = self.m();
        let h = DMatrix::from_fn(m + 1, m, |i, j| self.h_cols[j].get(i).copied().unwrap_or(0.0));
        let mut h = h;
        if self.breakdown && m > 0 {
            h[(m, m - 1)] = 0.0;
        }
        ArnoldiBasis {
            v: self.basis,
            h,
            m,
            beta: self.beta,
            breakdown: self.breakdown,
        }
    }
}

/// Runs up to `m` Arnoldi steps from `v`, stopping early on breakdown.
pub fn arnoldi(op: &dyn LinearOperator, v: &[f64], m: usize) -> Result<ArnoldiBasis> {
    check_dim("arnoldi seed", v.len(), op.dim())?;
    if m == 0 || m > op.dim() {
        return Err(Error::InvalidArgument(format!(
            "basis size {m} outside 1..={}",
            op.dim()
        )));
    }
    let mut process = ArnoldiProcess::new(op, v, KrylovConfig::default().breakdown_tol)?;
    while process.m() < m && !process.breakdown {
        process.step()?;
    }
    Ok(process.into_basis())
}

struct Estimate {
    relative: f64,
    coeffs: Vec<f64>,
}

fn estimate(hess: &DenseMatrix, h_next: f64, beta: f64, tau: f64) -> Result<Estimate> {
    let m = hess.nrows();
    let (coeffs, phi1) = exp_and_phi1_first_column(&(hess * tau))?;
    let approx = beta * norm2(&coeffs);
    let abs = beta * tau * h_next.abs() * phi1[m - 1].abs();
    let relative = if approx > 0.0 { abs / approx } else { abs };
    Ok(Estimate { relative, coeffs })
}

/// Relative error surrogate `beta tau h_{m+1,m} |e_m^T phi_1(tau H_m) e_1| / ||w||`
/// for approximating `exp(tau A) v` from `basis`.
pub fn residual_estimate(basis: &ArnoldiBasis, tau: f64) -> Result<f64> {
    if basis.breakdown {
        return Ok(0.0);
    }
    Ok(estimate(&basis.hessenberg(), basis.h_next(), basis.beta, tau)?.relative)
}

/// `[A x_top + W x_tail ; K x_tail]` with `A = scale * op`.
struct AugmentedOperator<'a> {
    op: &'a dyn LinearOperator,
    scale: f64,
    /// `cols[c]` multiplies tail entry `c`; `cols[0]` carries the highest phi order.
    cols: Vec<Vec<f64>>,
}

impl LinearOperator for AugmentedOperator<'_> {
    fn dim(&self) -> usize {
        self.op.dim() + self.cols.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.op.dim();
        let p = self.cols.len();
        let (top_in, tail_in) = x.split_at(n);
        let (top_out, tail_out) = out.split_at_mut(n);
        self.op.apply(top_in, top_out)?;
        if self.scale != 1.0 {
            top_out.iter_mut().for_each(|v| *v *= self.scale);
        }
        for (col, &t) in self.cols.iter().zip(tail_in) {
            if t != 0.0 {
                axpy(t, col, top_out);
            }
        }
        for i in 0..p {
            tail_out[i] = if i + 1 < p { tail_in[i + 1] } else { 0.0 };
        }
        Ok(())
    }
}

/// Evaluates `w(s_i) = sum_{k=0}^p s_i^k phi_k(s_i * scale * J) u_k` at the
/// increasing points `times` in `(0, 1]`, sharing Krylov bases across points.
///
/// `u[0]` is the `phi_0` vector; pass zeros when the combination has no
/// exponential term.
pub fn phi_march(
    op: &dyn LinearOperator,
    scale: f64,
    u: &[&[f64]],
    times: &[f64],
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<(Vec<Vec<f64>>, KrylovStats)> {
    cfg.validate()?;
    let n = op.dim();
    if u.is_empty() {
        return Err(Error::InvalidArgument("no input vectors".into()));
    }
    for (k, uk) in u.iter().enumerate() {
        check_dim(&format!("phi vector {k}"), uk.len(), n)?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if !scale.is_finite() {
        return Err(Error::InvalidArgument("operator scale is not finite".into()));
    }
    if times.is_empty()
        || times[0] <= 0.0
        || times.windows(2).any(|w| w[1] <= w[0])
        || *times.last().unwrap() > 1.0
    {
        return Err(Error::InvalidArgument(format!(
            "output points must increase within (0, 1], got {times:?}"
        )));
    }

    let p = u.len() - 1;
    let t_end = *times.last().unwrap();
    let tau_max = cfg.max_substep * t_end;
    let tau_min = cfg.min_substep * t_end;
    let mut stats = KrylovStats::default();
    let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(times.len());
    let mut w = u[0].to_vec();
    let mut s = 0.0;
    let mut tau = tau_max;

    while outputs.len() < times.len() {
        let remaining = t_end - s;
        tau = tau.min(remaining).min(tau_max);

        // Forcing polynomials at s: w_k(s) = sum_j s^j / j! u_{k+j}.
        let forcing: Vec<Vec<f64>> = (1..=p)
            .map(|k| {
                let mut wk = u[k].to_vec();
                for j in 1..=(p - k) {
                    axpy(s.powi(j as i32) * inv_factorial(j), u[k + j], &mut wk);
                }
                wk
            })
            .collect();
        let nrm = forcing.iter().map(|f| norm2(f)).fold(norm2(&w), f64::max);
        if nrm == 0.0 {
            while outputs.len() < times.len() {
                outputs.push(vec![0.0; n]);
            }
            break;
        }
        let cols = forcing.iter().rev().map(|f| f.iter().map(|x| x / nrm).collect()).collect();
        let aug = AugmentedOperator { op, scale, cols };
        let mut seed = w.clone();
        seed.extend(std::iter::repeat(0.0).take(p));
        if p > 0 {
            seed[n + p - 1] = nrm;
        }

        let dim = n + p;
        let m_max = cfg.m_max.min(dim);
        let m_soft = cfg.m_soft.min(m_max);
        let m_check = cfg.m_init.min(m_max);
        let mut process = ArnoldiProcess::new(&aug, &seed, cfg.breakdown_tol)?;

        let (m, coeffs) = loop {
            process.step()?;
            let m = process.m();
            if process.breakdown {
                // Invariant subspace: the projection is exact for every substep length.
                tau = remaining.min(tau_max);
                let est = estimate(&process.hessenberg(), 0.0, process.beta, tau)?;
                break (m, est.coeffs);
            }
            if m < m_check {
                continue;
            }
            let hess = process.hessenberg();
            let h_next = process.h_next();
            let mut last;
            let mut accepted = None;
            loop {
                let est = estimate(&hess, h_next, process.beta, tau)?;
                last = est.relative;
                if est.relative <= tol * tau / t_end {
                    accepted = Some(est.coeffs);
                    break;
                }
                if m >= m_soft && tau * cfg.shrink_factor >= tau_min {
                    tau *= cfg.shrink_factor;
                    stats.rejected_substeps += 1;
                    continue;
                }
                break;
            }
            if let Some(c) = accepted {
                break (m, c);
            }
            if m >= m_max {
                return Err(Error::KrylovConvergence { residual: last, tol });
            }
        };

        stats.operator_applies += process.applies;
        stats.substeps += 1;
        stats.max_basis = stats.max_basis.max(m);

        let hess = process.hessenberg();
        let beta = process.beta;
        let combine = |c: &[f64]| {
            let mut out = vec![0.0; n];
            for (ci, vi) in c.iter().zip(&process.basis) {
                axpy(beta * ci, &vi[..n], &mut out);
            }
            out
        };
        let end = s + tau;
        let slack = 1e-13 * t_end;
        while let Some(&t) = times.get(outputs.len()) {
            if t > end + slack {
                break;
            }
            if (t - end).abs() <= slack {
                outputs.push(combine(&coeffs));
            } else {
                let (c, _) = exp_and_phi1_first_column(&(&hess * (t - s)))?;
                outputs.push(combine(&c));
            }
        }
        w = combine(&coeffs);
        s = if (t_end - end).abs() <= slack { t_end } else { end };
        if m <= cfg.grow_below {
            tau *= cfg.grow_factor;
        }
    }
    Ok((outputs, stats))
}

/// A query for `sum_{k=1}^p phi_k(c h J) v_k`.
pub struct PhiCombRequest<'a> {
    pub operator: &'a dyn LinearOperator,
    pub h: f64,
    pub c: f64,
    /// `vectors[k-1]` multiplies `phi_k`.
    pub vectors: Vec<&'a [f64]>,
    pub tol: f64,
}

/// Largest number of phi terms accepted by [`phi_comb`].
pub const MAX_COMBINATION: usize = 5;

pub fn phi_comb(req: &PhiCombRequest<'_>, cfg: &KrylovConfig) -> Result<(Vec<f64>, KrylovStats)> {
    let p = req.vectors.len();
    if p == 0 || p > MAX_COMBINATION {
        return Err(Error::InvalidArgument(format!(
            "combination length {p} outside 1..={MAX_COMBINATION}"
        )));
    }
    if !(req.c > 0.0 && req.c <= 1.0) {
        return Err(Error::InvalidArgument(format!("scale c = {} outside (0, 1]", req.c)));
    }
    if !(req.h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size h = {} must be positive", req.h)));
    }
    let zero = vec![0.0; req.operator.dim()];
    let mut u: Vec<&[f64]> = Vec::with_capacity(p + 1);
    u.push(&zero);
    u.extend(req.vectors.iter().copied());
    let (mut out, stats) = phi_march(req.operator, req.c * req.h, &u, &[1.0], req.tol, cfg)?;
    Ok((out.pop().unwrap(), stats))
}

/// Returns `phi_1(c_i h J) v` for each scale from a single projection.
pub fn multi_scale_eval(
    op: &dyn LinearOperator,
    h: f64,
    v: &[f64],
    scales: &[f64],
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<(Vec<Vec<f64>>, KrylovStats)> {
    if scales.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return Err(Error::InvalidArgument(format!("scales {scales:?} outside (0, 1]")));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size h = {h} must be positive")));
    }
    let zero = vec![0.0; op.dim()];
    let (mut outs, stats) = phi_march(op, h, &[&zero, v], scales, tol, cfg)?;
    // w(c) = c phi_1(c h J) v
    for (o, &c) in outs.iter_mut().zip(scales) {
        o.iter_mut().for_each(|x| *x /= c);
    }
    Ok((outs, stats))
}
