//! Coefficient sets and the general tableau runner.

use crate::error::{Error, Result};
use crate::krylov::{phi_comb, KrylovConfig, PhiCombRequest, MAX_COMBINATION};
use crate::ops::{axpy, LinearOperator, RhsFunction};

use super::{remainder, StepOutput, StepStats, StepWorkspace};

/// EpiRK5P1 coefficients as 20-digit decimal literals, the authoritative source
/// for the `f64` values used by the stepper.
pub const EPIRK5P1_LITERALS: [(&str, &str); 10] = [
    ("a11", "0.35129592695058193092"),
    ("a21", "0.84405472011657126298"),
    ("a22", "1.6905891609568963624"),
    ("b1", "1.0"),
    ("b2", "1.2727127317356892397"),
    ("b3", "2.2714599265422622275"),
    ("g11", "0.35129592695058193092"),
    ("g21", "0.84405472011657126298"),
    ("g22", "0.5"),
    ("g31", "1.0"),
];

/// The two `g` entries of the final stage beyond `g31`.
pub const EPIRK5P1_FINAL_SCALES: [(&str, &str); 2] = [
    ("g32", "0.71111095364366870359"),
    ("g33", "0.62378111953371494809"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epirk5p1Coefficients {
    pub a11: f64,
    pub a21: f64,
    pub a22: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub g11: f64,
    pub g21: f64,
    pub g22: f64,
    pub g31: f64,
    pub g32: f64,
    pub g33: f64,
}

/// Looks up a coefficient literal by name (`"a11"`, `"g33"`, ...).
pub fn epirk5p1_literal(name: &str) -> Option<&'static str> {
    EPIRK5P1_LITERALS
        .iter()
        .chain(EPIRK5P1_FINAL_SCALES.iter())
        .find(|(n, _)| *n == name)
        .map(|(_, v)| *v)
}

impl Epirk5p1Coefficients {
    pub fn get() -> Self {
        let c = |name: &str| -> f64 {
            epirk5p1_literal(name)
                .and_then(|s| s.parse().ok())
                .expect("coefficient table is complete")
        };
        Self {
            a11: c("a11"),
            a21: c("a21"),
            a22: c("a22"),
            b1: c("b1"),
            b2: c("b2"),
            b3: c("b3"),
            g11: c("g11"),
            g21: c("g21"),
            g22: c("g22"),
            g31: c("g31"),
            g32: c("g32"),
            g33: c("g33"),
        }
    }
}

/// `coeff * psi(g h J)` with `psi(z) = sum_k p[k-1] phi_k(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTerm {
    pub coeff: f64,
    pub g: f64,
    pub p: Vec<f64>,
}

impl PsiTerm {
    pub fn new(coeff: f64, g: f64, p: &[f64]) -> Self {
        Self {
            coeff,
            g,
            p: p.to_vec(),
        }
    }

    pub fn phi1(coeff: f64, g: f64) -> Self {
        Self::new(coeff, g, &[1.0])
    }
}

/// A general EpiRK scheme
///
/// ```text
/// Y_i     = y_n + sum_{j<=i} a_ij psi_ij(g_ij h J) h D_j,   i = 1..s-1
/// y_{n+1} = y_n + sum_{j<=s} b_j  psi_sj(g_sj h J) h D_j
/// ```
///
/// with `D_1 = F(y_n)` and `D_j` the `(j-1)`-th forward difference of the
/// remainder over the nodes `y_n, Y_1, ..., Y_{j-1}`. Absent terms are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiRKTableau {
    pub name: &'static str,
    pub stages: usize,
    /// `a[i]` has `i + 1` entries for internal stage `i + 1`.
    pub a: Vec<Vec<Option<PsiTerm>>>,
    pub b: Vec<Option<PsiTerm>>,
}

impl EpiRKTableau {
    pub fn epirk4() -> Self {
        Self {
            name: "EpiRK4",
            stages: 3,
            a: vec![
                vec![Some(PsiTerm::phi1(0.5, 0.5))],
                vec![Some(PsiTerm::phi1(2.0 / 3.0, 2.0 / 3.0)), None],
            ],
            b: vec![
                Some(PsiTerm::phi1(1.0, 1.0)),
                // R(Y_1) weight 32 phi_3 - 144 phi_4 rewritten against the differences.
                Some(PsiTerm::new(1.0, 1.0, &[0.0, 0.0, 5.0, 18.0])),
                Some(PsiTerm::new(1.0, 1.0, &[0.0, 0.0, -13.5, 81.0])),
            ],
        }
    }

    pub fn epirk5p1() -> Self {
        let c = Epirk5p1Coefficients::get();
        Self {
            name: "EpiRK5P1",
            stages: 3,
            a: vec![
                vec![Some(PsiTerm::phi1(c.a11, c.g11))],
                vec![Some(PsiTerm::phi1(c.a21, c.g21)), Some(PsiTerm::phi1(c.a22, c.g22))],
            ],
            b: vec![
                Some(PsiTerm::phi1(c.b1, c.g31)),
                Some(PsiTerm::phi1(c.b2, c.g32)),
                Some(PsiTerm::new(c.b3, c.g33, &[0.0, 0.0, 1.0])),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(format!("{}: {msg}", self.name)));
        if self.stages < 1 || self.a.len() + 1 != self.stages || self.b.len() != self.stages {
            return bad("stage count does not match coefficient rows".into());
        }
        for (i, row) in self.a.iter().enumerate() {
            if row.len() != i + 1 {
                return bad(format!("row {} has {} entries", i + 1, row.len()));
            }
        }
        let terms = self.a.iter().flatten().chain(self.b.iter()).flatten();
        for t in terms {
            if !t.coeff.is_finite() || !(t.g > 0.0 && t.g <= 1.0) {
                return bad(format!("term {t:?} has a non-finite coefficient or g outside (0, 1]"));
            }
            if t.p.is_empty() || t.p.len() > MAX_COMBINATION || t.p.iter().any(|x| !x.is_finite()) {
                return bad(format!("term {t:?} has invalid phi weights"));
            }
        }
        Ok(())
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `sum_j coeff_j psi_j(g_j h J) h D_j` for one stage, one projection per term.
fn apply_terms(
    terms: &[Option<PsiTerm>],
    diffs: &[Vec<f64>],
    jac: &dyn LinearOperator,
    h: f64,
    tol: f64,
    cfg: &KrylovConfig,
    stats: &mut StepStats,
) -> Result<Vec<f64>> {
    let n = jac.dim();
    let mut sum = vec![0.0; n];
    for (term, d) in terms.iter().zip(diffs) {
        let Some(term) = term else { continue };
        if term.coeff == 0.0 {
            continue;
        }
        let weighted: Vec<Vec<f64>> = term
            .p
            .iter()
            .map(|&pk| d.iter().map(|x| pk * h * x).collect())
            .collect();
        let req = PhiCombRequest {
            operator: jac,
            h,
            c: term.g,
            vectors: weighted.iter().map(|v| v.as_slice()).collect(),
            tol,
        };
        let (w, k) = phi_comb(&req, cfg)?;
        stats.record_projection(&k);
        axpy(term.coeff, &w, &mut sum);
    }
    Ok(sum)
}

/// One step of an arbitrary tableau. Slower than the dedicated steppers
/// (every term is its own projection); meant for cross-checking them.
pub fn tableau_step<R: RhsFunction + ?Sized>(
    tab: &EpiRKTableau,
    rhs: &R,
    y_n: &[f64],
    h: f64,
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<StepOutput> {
    tab.validate()?;
    let ws = StepWorkspace::new(rhs, y_n, h)?;
    let jac = ws.jacobian()?;
    let mut stats = StepStats::default();
    let f_n = jac.f_base().to_vec();

    let mut diffs = vec![f_n.clone()];
    let mut remainders: Vec<Vec<f64>> = Vec::new();
    for row in &tab.a {
        let mut y = y_n.to_vec();
        let incr = apply_terms(row, &diffs, &jac, h, tol, cfg, &mut stats)?;
        axpy(1.0, &incr, &mut y);
        remainders.push(remainder(&ws.rhs, y_n, &f_n, &jac, &y)?);
        // Forward difference of order i over R(y_n) = 0, R(Y_1), ..., R(Y_i).
        let order = remainders.len();
        let mut d = vec![0.0; y_n.len()];
        for (l, r) in remainders.iter().enumerate() {
            let l = l + 1;
            let sign = if (order - l) % 2 == 0 { 1.0 } else { -1.0 };
            axpy(sign * binomial(order, l), r, &mut d);
        }
        diffs.push(d);
    }
    let mut y = y_n.to_vec();
    let incr = apply_terms(&tab.b, &diffs, &jac, h, tol, cfg, &mut stats)?;
    axpy(1.0, &incr, &mut y);
    stats.rhs_evals = ws.rhs.count();
    Ok(StepOutput {
        y,
        error: None,
        stats,
    })
}
