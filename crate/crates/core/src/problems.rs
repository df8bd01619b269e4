//! Initial conditions and default boundaries for the benchmark problems.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mhd::{conserved, BcKind, BoundaryPolicy, Grid2D, MhdParams, MhdState, Primitive};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Problem {
    Reconnection,
    KelvinHelmholtz,
}

impl Problem {
    pub fn default_bc(self) -> BoundaryPolicy {
        match self {
            Problem::Reconnection | Problem::KelvinHelmholtz => {
                BoundaryPolicy::new(BcKind::Periodic, BcKind::Reflecting)
            }
        }
    }
}

impl FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reconnection" => Ok(Problem::Reconnection),
            "kh" | "kelvin-helmholtz" => Ok(Problem::KelvinHelmholtz),
            _ => Err(Error::Config(format!("unknown problem '{s}' (reconnection, kh)"))),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Reconnection => "reconnection",
            Problem::KelvinHelmholtz => "kh",
        })
    }
}

/// Harris-type current sheet with a flux-function perturbation on
/// `[-x_r, x_r] x [-y_r, y_r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconnectionSpec {
    pub x_r: f64,
    pub y_r: f64,
    pub psi0: f64,
}

impl Default for ReconnectionSpec {
    fn default() -> Self {
        Self {
            x_r: 12.8,
            y_r: 6.4,
            psi0: 0.1,
        }
    }
}

impl ReconnectionSpec {
    pub fn kx(&self) -> f64 {
        PI / self.x_r
    }

    pub fn ky(&self) -> f64 {
        PI / (2.0 * self.y_r)
    }

    pub fn grid(&self, nx: usize, ny: usize) -> Result<Grid2D> {
        Grid2D::new(nx, ny, (-self.x_r, self.x_r), (-self.y_r, self.y_r))
    }

    /// Analytic in-plane field `(B_x, B_y)`.
    pub fn b0(&self, x: f64, y: f64) -> (f64, f64) {
        let (kx, ky) = (self.kx(), self.ky());
        (
            (2.0 * y).tanh() - self.psi0 * ky * (kx * x).cos() * (ky * y).sin(),
            self.psi0 * kx * (kx * x).sin() * (ky * y).cos(),
        )
    }

    /// Perturbation flux function; the perturbation field is its curl.
    pub fn psi(&self, x: f64, y: f64) -> f64 {
        self.psi0 * (self.kx() * x).cos() * (self.ky() * y).cos()
    }

    pub fn density(&self, y: f64) -> f64 {
        1.2 - (2.0 * y).tanh().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_r > 0.0 && self.y_r > 0.0 && self.psi0.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid reconnection setup {self:?}")));
        }
        Ok(())
    }
}

/// Initial state for the reconnection problem.
///
/// The perturbation enters through centered differences of the flux function
/// rather than its analytic curl, so the discrete divergence vanishes to
/// round-off. The two differ by `O(h^2)`.
pub fn reconnection_ic(grid: &Grid2D, spec: &ReconnectionSpec, params: &MhdParams) -> Result<MhdState> {
    spec.validate()?;
    params.validate()?;
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut state = MhdState::zeros(*grid);
    for j in 0..grid.ny {
        let y = grid.y(j as isize);
        let (y_s, y_n) = (grid.y(j as isize - 1), grid.y(j as isize + 1));
        for i in 0..grid.nx {
            let x = grid.x(i as isize);
            let (x_w, x_e) = (grid.x(i as isize - 1), grid.x(i as isize + 1));
            let bx = (2.0 * y).tanh() + (spec.psi(x, y_n) - spec.psi(x, y_s)) / (2.0 * hy);
            let by = -(spec.psi(x_e, y) - spec.psi(x_w, y)) / (2.0 * hx);
            let rho = spec.density(y);
            let prim = Primitive {
                rho,
                v: [0.0; 3],
                b: [bx, by, 0.0],
                p: 0.5 * rho,
            };
            state.cell_mut(i, j).copy_from_slice(&conserved(&prim, params));
        }
    }
    Ok(state)
}

/// Perturbed shear layer with a strong guide field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KhSpec {
    pub v0: f64,
    pub eps_x: f64,
    pub eps_y: f64,
    pub omega_x: f64,
    pub omega_y: f64,
    pub p: f64,
    pub bx: f64,
    pub bz: f64,
    /// Shear-layer half width.
    pub lambda: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Default for KhSpec {
    fn default() -> Self {
        Self {
            v0: 0.5,
            eps_x: 0.1,
            eps_y: 0.1,
            omega_x: 2.0,
            omega_y: 2.0,
            p: 0.25,
            bx: 0.1,
            bz: 10.0,
            lambda: 0.1,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

impl KhSpec {
    pub fn grid(&self, nx: usize, ny: usize) -> Result<Grid2D> {
        Grid2D::new(nx, ny, (-0.5 * self.lx, 0.5 * self.lx), (-0.5 * self.ly, 0.5 * self.ly))
    }

    pub fn vx(&self, x: f64, y: f64) -> f64 {
        self.v0 * (y / self.lambda).tanh()
            + self.eps_x * (2.0 * PI * self.omega_x * x / self.lx).cos()
            + self.eps_y * (PI * (2.0 * self.omega_y - 1.0) * y / self.ly).sin()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lx > 0.0 && self.ly > 0.0 && self.p > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid Kelvin-Helmholtz setup {self:?}")));
        }
        Ok(())
    }
}

pub fn kh_ic(grid: &Grid2D, spec: &KhSpec, params: &MhdParams) -> Result<MhdState> {
    spec.validate()?;
    params.validate()?;
    let mut state = MhdState::zeros(*grid);
    for j in 0..grid.ny {
        let y = grid.y(j as isize);
        for i in 0..grid.nx {
            let x = grid.x(i as isize);
            let prim = Primitive {
                rho: 1.0,
                v: [spec.vx(x, y), 0.0, 0.0],
                b: [spec.bx, 0.0, spec.bz],
                p: spec.p,
            };
            state.cell_mut(i, j).copy_from_slice(&conserved(&prim, params));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhd::{div_b, pressure, BX, BY, MX, RHO};

    #[test]
    fn reconnection_formula_at_origin_and_top() {
        let s = ReconnectionSpec::default();
        assert_eq!(s.b0(0.0, 0.0), (0.0, 0.0));
        assert_eq!(s.density(0.0), 1.2);
        let x = 3.0;
        let (bx, _) = s.b0(x, s.y_r);
        let want = (2.0 * s.y_r).tanh() - s.psi0 * s.ky() * (s.kx() * x).cos();
        assert!((bx - want).abs() < 1e-15);
    }

    #[test]
    fn reconnection_ic_is_discretely_solenoidal() {
        let s = ReconnectionSpec::default();
        let params = MhdParams::default();
        for (nx, ny) in [(64, 32), (256, 128)] {
            let g = s.grid(nx, ny).unwrap();
            let st = reconnection_ic(&g, &s, &params).unwrap();
            let d = div_b(&st.u, &g, &Problem::Reconnection.default_bc());
            assert!(d.max_abs <= 1e-13, "{nx}x{ny}: {}", d.max_abs);
        }
    }

    #[test]
    fn reconnection_ic_close_to_analytic_field() {
        let s = ReconnectionSpec::default();
        let g = s.grid(128, 64).unwrap();
        let st = reconnection_ic(&g, &s, &MhdParams::default()).unwrap();
        let mut worst = 0.0_f64;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (bx, by) = s.b0(g.x(i as isize), g.y(j as isize));
                let c = st.cell(i, j);
                worst = worst.max((c[BX] - bx).abs()).max((c[BY] - by).abs());
            }
        }
        // Second-order difference of a mode with wavenumber <= 0.25.
        assert!(worst < 1e-3 * g.hx().powi(2), "{worst}");
    }

    #[test]
    fn reconnection_ic_admissible_and_symmetric() {
        let s = ReconnectionSpec::default();
        let params = MhdParams::default();
        let g = s.grid(32, 16).unwrap();
        let st = reconnection_ic(&g, &s, &params).unwrap();
        st.check_admissible(&params).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let a = st.cell(i, j);
                let b = st.cell(g.nx - 1 - i, g.ny - 1 - j);
                assert!((a[RHO] - b[RHO]).abs() < 1e-13);
                assert!((a[BX] + b[BX]).abs() < 1e-13);
                assert!((a[BY] + b[BY]).abs() < 1e-13);
                assert!((pressure(a, &params) - 0.5 * a[RHO]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn kh_ic_values() {
        let s = KhSpec::default();
        assert!((s.vx(0.0, 0.0) - 0.1).abs() < 1e-15);
        let params = MhdParams::default();
        let g = s.grid(16, 16).unwrap();
        let st = kh_ic(&g, &s, &params).unwrap();
        st.check_admissible(&params).unwrap();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = st.cell(i, j);
                assert_eq!(c[RHO], 1.0);
                assert!((pressure(c, &params) - 0.25).abs() < 1e-12);
                assert!((c[MX] - s.vx(g.x(i as isize), g.y(j as isize))).abs() < 1e-15);
            }
        }
        assert_eq!(div_b(&st.u, &g, &Problem::KelvinHelmholtz.default_bc()).max_abs, 0.0);
    }

    #[test]
    fn problem_names() {
        assert_eq!("kh".parse::<Problem>().unwrap(), Problem::KelvinHelmholtz);
        assert_eq!(Problem::Reconnection.to_string(), "reconnection");
        assert!("tearing".parse::<Problem>().is_err());
    }
}
