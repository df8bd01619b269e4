//! 2.5D resistive MHD on a uniform cell-centered grid.
//!
//! Fields depend on `(x, y)` only while velocity and magnetic field keep all
//! three components. The state vector stores the eight conserved variables of
//! every cell contiguously, cells in row-major order (`j` outer, `i` inner).

mod diagnostics;
mod rhs;
pub mod snapshot;

use std::fmt;
use std::str::FromStr;

pub use diagnostics::{current_j, div_b, explicit_dt_bound, total_mass, DivB};
pub use rhs::{fill_ghosts, MhdSystem, GHOST};

use crate::error::{Error, Result};

pub const NVAR: usize = 8;
pub const RHO: usize = 0;
pub const MX: usize = 1;
pub const MY: usize = 2;
pub const MZ: usize = 3;
pub const BX: usize = 4;
pub const BY: usize = 5;
pub const BZ: usize = 6;
pub const EN: usize = 7;

pub const VAR_NAMES: [&str; NVAR] = ["rho", "mx", "my", "mz", "bx", "by", "bz", "e"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        let g = Self {
            nx,
            ny,
            x_lo: x.0,
            x_hi: x.1,
            y_lo: y.0,
            y_hi: y.1,
        };
        if nx < 4 || ny < 4 {
            return Err(Error::InvalidArgument(format!("grid {nx}x{ny} below the 4x4 minimum")));
        }
        if !(g.hx() > 0.0 && g.hy() > 0.0) || !g.hx().is_finite() || !g.hy().is_finite() {
            return Err(Error::InvalidArgument(format!("degenerate domain {x:?} x {y:?}")));
        }
        if nx > u16::MAX as usize || ny > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("grid {nx}x{ny} too large")));
        }
        Ok(g)
    }

    pub fn hx(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_hi - self.y_lo) / self.ny as f64
    }

    /// Cell-center coordinate; `i` may lie outside `0..nx` for ghost cells.
    pub fn x(&self, i: isize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.hx()
    }

    pub fn y(&self, j: isize) -> f64 {
        self.y_lo + (j as f64 + 0.5) * self.hy()
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn state_len(&self) -> usize {
        self.cells() * NVAR
    }

    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn index(&self, i: usize, j: usize, var: usize) -> usize {
        self.cell(i, j) * NVAR + var
    }
}

/// How magnetic pressure enters the total energy density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnergyConvention {
    /// `e = p/(gamma-1) + rho v^2/2 + |B|^2/2`, consistent with the fluxes.
    #[default]
    HalfB2,
    /// `e = p/(gamma-1) + rho v^2/2 + |B|^2`.
    FullB2,
}

impl EnergyConvention {
    pub fn magnetic_factor(self) -> f64 {
        match self {
            EnergyConvention::HalfB2 => 0.5,
            EnergyConvention::FullB2 => 1.0,
        }
    }
}

impl FromStr for EnergyConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(Self::HalfB2),
            "full" => Ok(Self::FullB2),
            _ => Err(Error::Config(format!("energy convention must be 'half' or 'full', got '{s}'"))),
        }
    }
}

impl fmt::Display for EnergyConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HalfB2 => "half",
            Self::FullB2 => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhdParams {
    /// Viscosity (inverse Reynolds number).
    pub mu: f64,
    /// Resistivity (inverse Lundquist number).
    pub eta: f64,
    /// Thermal conductivity (inverse Prandtl number).
    pub kappa: f64,
    pub gamma: f64,
    pub energy: EnergyConvention,
}

impl Default for MhdParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            eta: 0.0,
            kappa: 0.0,
            gamma: 5.0 / 3.0,
            energy: EnergyConvention::HalfB2,
        }
    }
}

impl MhdParams {
    pub fn new(mu: f64, eta: f64, kappa: f64) -> Self {
        Self {
            mu,
            eta,
            kappa,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !(nonneg(self.mu) && nonneg(self.eta) && nonneg(self.kappa)) {
            return Err(Error::InvalidArgument(format!(
                "diffusion coefficients must be finite and non-negative: {self:?}"
            )));
        }
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Boundary treatment in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Periodic,
    /// Mirror with the normal momentum and normal field component odd.
    Reflecting,
    ZeroGradient,
}

impl BcKind {
    pub fn code(self) -> u8 {
        match self {
            BcKind::Periodic => 0,
            BcKind::Reflecting => 1,
            BcKind::ZeroGradient => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(BcKind::Periodic),
            1 => Ok(BcKind::Reflecting),
            2 => Ok(BcKind::ZeroGradient),
            _ => Err(Error::Format(format!("unknown boundary code {c}"))),
        }
    }
}

impl FromStr for BcKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BcKind::Periodic),
            "reflecting" => Ok(BcKind::Reflecting),
            "zero-gradient" => Ok(BcKind::ZeroGradient),
            _ => Err(Error::Config(format!(
                "boundary must be periodic, reflecting or zero-gradient, got '{s}'"
            ))),
        }
    }
}

impl fmt::Display for BcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BcKind::Periodic => "periodic",
            BcKind::Reflecting => "reflecting",
            BcKind::ZeroGradient => "zero-gradient",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPolicy {
    pub x: BcKind,
    pub y: BcKind,
}

impl BoundaryPolicy {
    pub fn new(x: BcKind, y: BcKind) -> Self {
        Self { x, y }
    }
}

/// Primitive variables of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Primitive {
    pub rho: f64,
    pub v: [f64; 3],
    pub b: [f64; 3],
    pub p: f64,
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Total energy density for the given primitives.
pub fn energy(prim: &Primitive, params: &MhdParams) -> f64 {
    prim.p / (params.gamma - 1.0)
        + 0.5 * prim.rho * dot3(&prim.v, &prim.v)
        + params.energy.magnetic_factor() * dot3(&prim.b, &prim.b)
}

/// Conserved cell vector from primitives.
pub fn conserved(prim: &Primitive, params: &MhdParams) -> [f64; NVAR] {
    [
        prim.rho,
        prim.rho * prim.v[0],
        prim.rho * prim.v[1],
        prim.rho * prim.v[2],
        prim.b[0],
        prim.b[1],
        prim.b[2],
        energy(prim, params),
    ]
}

/// Primitives from a conserved cell vector. No admissibility check.
pub fn primitive(u: &[f64], params: &MhdParams) -> Primitive {
    let rho = u[RHO];
    let v = [u[MX] / rho, u[MY] / rho, u[MZ] / rho];
    let b = [u[BX], u[BY], u[BZ]];
    let p = (params.gamma - 1.0)
        * (u[EN] - 0.5 * rho * dot3(&v, &v) - params.energy.magnetic_factor() * dot3(&b, &b));
    Primitive { rho, v, b, p }
}

/// Thermal pressure of a conserved cell vector.
pub fn pressure(u: &[f64], params: &MhdParams) -> f64 {
    primitive(u, params).p
}

/// Primitives of cell `(i, j)`, failing for non-positive density or pressure.
pub fn admissible_primitive(u: &[f64], params: &MhdParams, i: usize, j: usize) -> Result<Primitive> {
    if u[RHO] <= 0.0 || !u[RHO].is_finite() {
        return Err(Error::Inadmissible {
            i,
            j,
            what: "density",
            value: u[RHO],
        });
    }
    let prim = primitive(u, params);
    if prim.p <= 0.0 || !prim.p.is_finite() {
        return Err(Error::Inadmissible {
            i,
            j,
            what: "pressure",
            value: prim.p,
        });
    }
    Ok(prim)
}

/// Ideal (non-dissipative) flux columns in x and y.
pub fn hyperbolic_flux(prim: &Primitive, params: &MhdParams) -> ([f64; NVAR], [f64; NVAR]) {
    let Primitive { rho, v, b, p } = *prim;
    let pt = p + 0.5 * dot3(&b, &b);
    let e = energy(prim, params);
    let bv = dot3(&b, &v);
    let column = |d: usize| -> [f64; NVAR] {
        let mut f = [0.0; NVAR];
        f[RHO] = rho * v[d];
        for k in 0..3 {
            f[MX + k] = rho * v[k] * v[d] - b[k] * b[d] + if k == d { pt } else { 0.0 };
            f[BX + k] = v[d] * b[k] - b[d] * v[k];
        }
        f[EN] = (e + pt) * v[d] - b[d] * bv;
        f
    };
    (column(0), column(1))
}

/// In-plane gradients of the primitive fields at one cell.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Gradients {
    /// `dv[d][k] = d v_k / d x_d` for `d` in `{x, y}`.
    pub dv: [[f64; 3]; 2],
    pub db: [[f64; 3]; 2],
    pub dt: [f64; 2],
}

/// Dissipative flux columns in x and y.
pub fn diffusive_flux(
    prim: &Primitive,
    grad: &Gradients,
    params: &MhdParams,
) -> ([f64; NVAR], [f64; NVAR]) {
    let MhdParams {
        mu,
        eta,
        kappa,
        gamma,
        ..
    } = *params;
    let Primitive { v, b, .. } = *prim;
    let dv = &grad.dv;
    let db = &grad.db;
    // d/dz of every field vanishes in 2.5D.
    let d = |g: &[[f64; 3]; 2], dir: usize, k: usize| if dir < 2 { g[dir][k] } else { 0.0 };
    let div_v = dv[0][0] + dv[1][1];
    let heat = gamma * mu * kappa / (gamma - 1.0);
    let column = |dir: usize| -> [f64; NVAR] {
        let mut f = [0.0; NVAR];
        let mut tau = [0.0; 3];
        for k in 0..3 {
            tau[k] = d(dv, dir, k) + d(dv, k, dir) - if k == dir { 2.0 / 3.0 * div_v } else { 0.0 };
            f[MX + k] = mu * tau[k];
            f[BX + k] = eta * (d(db, dir, k) - d(db, k, dir));
        }
        let half_grad_b2 = b[0] * d(db, dir, 0) + b[1] * d(db, dir, 1) + b[2] * d(db, dir, 2);
        let b_dot_grad_b = b[0] * d(db, 0, dir) + b[1] * d(db, 1, dir);
        f[EN] = mu * dot3(&tau, &v) + heat * grad.dt[dir] + eta * (half_grad_b2 - b_dot_grad_b);
        f
    };
    (column(0), column(1))
}

/// A field of conserved variables on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MhdState {
    pub grid: Grid2D,
    pub u: Vec<f64>,
}

impl MhdState {
    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            u: vec![0.0; grid.state_len()],
        }
    }

    pub fn from_vec(grid: Grid2D, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.state_len() {
            return Err(Error::InvalidArgument(format!(
                "state of length {} does not fit a {}x{} grid",
                u.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(Self { grid, u })
    }

    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let k = self.grid.cell(i, j) * NVAR;
        &self.u[k..k + NVAR]
    }

    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let k = self.grid.cell(i, j) * NVAR;
        &mut self.u[k..k + NVAR]
    }

    /// One variable over the grid, row-major.
    pub fn component(&self, var: usize) -> Vec<f64> {
        self.u.iter().skip(var).step_by(NVAR).copied().collect()
    }

    /// Fails at the first cell with non-positive density or pressure.
    pub fn check_admissible(&self, params: &MhdParams) -> Result<()> {
        for j in 0..self.grid.ny {
            for i in 0..self.grid.nx {
                admissible_primitive(self.cell(i, j), params, i, j)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MhdParams {
        MhdParams::default()
    }

    #[test]
    fn pressure_of_resting_gas() {
        let u = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!((pressure(&u, &params()) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn energy_pressure_round_trip() {
        for conv in [EnergyConvention::HalfB2, EnergyConvention::FullB2] {
            let p = MhdParams {
                energy: conv,
                ..params()
            };
            let prim = Primitive {
                rho: 0.7,
                v: [0.3, -1.1, 0.4],
                b: [0.2, 1.5, -0.8],
                p: 0.45,
            };
            let u = conserved(&prim, &p);
            let back = primitive(&u, &p);
            assert!((back.p - prim.p).abs() < 1e-14);
            for k in 0..3 {
                assert!((back.v[k] - prim.v[k]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flux_of_moving_magnetized_cell() {
        let prim = Primitive {
            rho: 1.0,
            v: [1.0, 0.0, 0.0],
            b: [0.0, 1.0, 0.0],
            p: 1.0,
        };
        let (fx, fy) = hyperbolic_flux(&prim, &params());
        // e = 1.5 + 0.5 + 0.5, p + |B|^2/2 = 1.5
        assert_eq!(fx, [1.0, 2.5, 0.0, 0.0, 0.0, 1.0, 0.0, 4.0]);
        assert_eq!(fy, [0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn resting_unmagnetized_flux_is_pressure_only() {
        let prim = Primitive {
            rho: 2.0,
            v: [0.0; 3],
            b: [0.0; 3],
            p: 0.3,
        };
        let (fx, fy) = hyperbolic_flux(&prim, &params());
        assert_eq!(fx, [0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(fy, [0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn shear_viscous_stress() {
        let prim = Primitive {
            rho: 1.0,
            v: [0.0; 3],
            b: [0.0; 3],
            p: 1.0,
        };
        let mut g = Gradients::default();
        g.dv[1][0] = 2.5; // v_x = 2.5 y
        let p = MhdParams::new(0.1, 0.0, 0.0);
        let (fx, fy) = diffusive_flux(&prim, &g, &p);
        assert!((fx[MY] - 0.25).abs() < 1e-15);
        assert!((fy[MX] - 0.25).abs() < 1e-15);
        assert_eq!(fx[MX], 0.0);
    }

    #[test]
    fn resistive_flux_is_antisymmetric() {
        let prim = Primitive {
            rho: 1.0,
            v: [0.0; 3],
            b: [0.3, -0.2, 0.1],
            p: 1.0,
        };
        let mut g = Gradients::default();
        g.db = [[0.1, 0.7, -0.4], [1.3, 0.2, 0.5]];
        let p = MhdParams::new(0.0, 0.01, 0.0);
        let (fx, fy) = diffusive_flux(&prim, &g, &p);
        assert_eq!(fx[BX], 0.0);
        assert!((fx[BY] + fy[BX]).abs() < 1e-18);
        // x: B_y (dBy/dx - dBx/dy) + B_z dBz/dx
        let want = 0.01 * (-0.2 * (0.7 - 1.3) + 0.1 * -0.4);
        assert!((fx[EN] - want).abs() < 1e-16);
    }

    #[test]
    fn inadmissible_cells_named() {
        let bad_rho = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            admissible_primitive(&bad_rho, &params(), 3, 4),
            Err(Error::Inadmissible { i: 3, j: 4, what: "density", .. })
        ));
        let bad_p = [1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        assert!(matches!(
            admissible_primitive(&bad_p, &params(), 0, 1),
            Err(Error::Inadmissible { what: "pressure", .. })
        ));
    }

    #[test]
    fn grid_geometry() {
        let g = Grid2D::new(8, 4, (-1.0, 1.0), (0.0, 2.0)).unwrap();
        assert_eq!(g.hx(), 0.25);
        assert_eq!(g.x(0), -0.875);
        assert_eq!(g.y(-1), -0.25);
        assert_eq!(g.index(1, 2, BY), (2 * 8 + 1) * 8 + 5);
        assert!(Grid2D::new(3, 8, (0.0, 1.0), (0.0, 1.0)).is_err());
        assert!(Grid2D::new(8, 8, (1.0, 1.0), (0.0, 1.0)).is_err());
    }

    #[test]
    fn parse_round_trips() {
        for k in [BcKind::Periodic, BcKind::Reflecting, BcKind::ZeroGradient] {
            assert_eq!(k.to_string().parse::<BcKind>().unwrap(), k);
            assert_eq!(BcKind::from_code(k.code()).unwrap(), k);
        }
        assert!("open".parse::<BcKind>().is_err());
        assert_eq!("full".parse::<EnergyConvention>().unwrap(), EnergyConvention::FullB2);
    }
}
