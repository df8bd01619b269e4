use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::ops::{check_dim, RhsFunction};

use super::{
    admissible_primitive, diffusive_flux, hyperbolic_flux, primitive, BcKind, BoundaryPolicy, Gradients,
    Grid2D, MhdParams, Primitive, BX, BY, MX, MY, NVAR,
};

/// Ghost layers on each side. Two are needed: the divergence reads fluxes one
/// cell outside the domain, and those fluxes contain centered gradients.
pub const GHOST: usize = 2;

/// Copies `u` into an array padded by [`GHOST`] cells and fills the padding
/// according to `bc`. Returns the padded array and its row width.
pub fn fill_ghosts(grid: &Grid2D, bc: &BoundaryPolicy, u: &[f64]) -> (Vec<f64>, usize) {
    let (nx, ny) = (grid.nx, grid.ny);
    let w = nx + 2 * GHOST;
    let h = ny + 2 * GHOST;
    let mut ext = vec![0.0; w * h * NVAR];
    for j in 0..ny {
        let src = j * nx * NVAR;
        let dst = ((j + GHOST) * w + GHOST) * NVAR;
        ext[dst..dst + nx * NVAR].copy_from_slice(&u[src..src + nx * NVAR]);
    }

    let copy = |ext: &mut Vec<f64>, from: usize, to: usize, flip: Option<[usize; 2]>| {
        for v in 0..NVAR {
            ext[to * NVAR + v] = ext[from * NVAR + v];
        }
        if let Some(odd) = flip {
            for v in odd {
                ext[to * NVAR + v] = -ext[to * NVAR + v];
            }
        }
    };

    // Source index (in interior coordinates) for ghost offset `g` in 1..=GHOST
    // below the low side (`low = true`) or above the high side.
    let source = |kind: BcKind, n: usize, g: usize, low: bool| -> usize {
        match (kind, low) {
            (BcKind::Periodic, true) => n - g,
            (BcKind::Periodic, false) => g - 1,
            (BcKind::Reflecting, true) => g - 1,
            (BcKind::Reflecting, false) => n - g,
            (BcKind::ZeroGradient, true) => 0,
            (BcKind::ZeroGradient, false) => n - 1,
        }
    };

    let y_flip = (bc.y == BcKind::Reflecting).then_some([MY, BY]);
    for i in GHOST..GHOST + nx {
        for g in 1..=GHOST {
            let lo_src = source(bc.y, ny, g, true) + GHOST;
            copy(&mut ext, lo_src * w + i, (GHOST - g) * w + i, y_flip);
            let hi_src = source(bc.y, ny, g, false) + GHOST;
            copy(&mut ext, hi_src * w + i, (GHOST + ny - 1 + g) * w + i, y_flip);
        }
    }
    let x_flip = (bc.x == BcKind::Reflecting).then_some([MX, BX]);
    for j in 0..h {
        for g in 1..=GHOST {
            let lo_src = source(bc.x, nx, g, true) + GHOST;
            copy(&mut ext, j * w + lo_src, j * w + GHOST - g, x_flip);
            let hi_src = source(bc.x, nx, g, false) + GHOST;
            copy(&mut ext, j * w + hi_src, j * w + GHOST + nx - 1 + g, x_flip);
        }
    }
    (ext, w)
}

/// Net flux `F_h - F_d` in x and y on the domain plus one ring of ghost cells.
#[derive(Debug, Clone)]
struct Fluxes {
    gx: Vec<[f64; NVAR]>,
    gy: Vec<[f64; NVAR]>,
}

#[derive(Debug)]
struct FluxCache {
    base: Vec<f64>,
    fluxes: Fluxes,
}

/// The semi-discrete system `dU/dt = -div F_h(U) + div F_d(U)` with centered
/// differences for both the divergence and the gradients inside `F_d`.
#[derive(Debug)]
pub struct MhdSystem {
    pub grid: Grid2D,
    pub params: MhdParams,
    pub bc: BoundaryPolicy,
    /// Fluxes of the most recent base state of a Jacobian difference.
    cache: Mutex<Option<FluxCache>>,
}

impl Clone for MhdSystem {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            params: self.params,
            bc: self.bc,
            cache: Mutex::new(None),
        }
    }
}

impl MhdSystem {
    pub fn new(grid: Grid2D, params: MhdParams, bc: BoundaryPolicy) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid,
            params,
            bc,
            cache: Mutex::new(None),
        })
    }

    fn fluxes(&self, u: &[f64]) -> Result<Fluxes> {
        let grid = &self.grid;
        check_dim("MHD state", u.len(), grid.state_len())?;
        if let Some(index) = u.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let (nx, ny) = (grid.nx, grid.ny);
        let (ext, w) = fill_ghosts(grid, &self.bc, u);
        let h = ny + 2 * GHOST;

        // Primitive variables (and temperature) on the padded grid.
        let mut prim = vec![Primitive::default(); w * h];
        let mut temp = vec![0.0; w * h];
        for jj in 0..h {
            for ii in 0..w {
                let k = jj * w + ii;
                let cell = &ext[k * NVAR..(k + 1) * NVAR];
                let interior = (GHOST..GHOST + nx).contains(&ii) && (GHOST..GHOST + ny).contains(&jj);
                // Ghost cells are (sign-flipped) copies of interior cells, which are checked.
                let p = if interior {
                    admissible_primitive(cell, &self.params, ii - GHOST, jj - GHOST)?
                } else {
                    primitive(cell, &self.params)
                };
                temp[k] = p.p / p.rho;
                prim[k] = p;
            }
        }

        let dissipative = self.params.mu > 0.0 || self.params.eta > 0.0 || self.params.kappa > 0.0;
        let (rx, ry) = (0.5 / grid.hx(), 0.5 / grid.hy());
        let mut gx = vec![[0.0; NVAR]; w * h];
        let mut gy = vec![[0.0; NVAR]; w * h];
        for jj in 1..h - 1 {
            for ii in 1..w - 1 {
                let k = jj * w + ii;
                let (mut fx, mut fy) = hyperbolic_flux(&prim[k], &self.params);
                if dissipative {
                    let (e, wst, n, s) = (k + 1, k - 1, k + w, k - w);
                    let mut g = Gradients::default();
                    for c in 0..3 {
                        g.dv[0][c] = (prim[e].v[c] - prim[wst].v[c]) * rx;
                        g.dv[1][c] = (prim[n].v[c] - prim[s].v[c]) * ry;
                        g.db[0][c] = (prim[e].b[c] - prim[wst].b[c]) * rx;
                        g.db[1][c] = (prim[n].b[c] - prim[s].b[c]) * ry;
                    }
                    g.dt = [(temp[e] - temp[wst]) * rx, (temp[n] - temp[s]) * ry];
                    let (dx, dy) = diffusive_flux(&prim[k], &g, &self.params);
                    for v in 0..NVAR {
                        fx[v] -= dx[v];
                        fy[v] -= dy[v];
                    }
                }
                gx[k] = fx;
                gy[k] = fy;
            }
        }
        Ok(Fluxes { gx, gy })
    }

    /// `out = -div G` with the centered stencil.
    fn divergence(&self, f: &Fluxes, out: &mut [f64]) {
        let grid = &self.grid;
        let (nx, ny) = (grid.nx, grid.ny);
        let w = nx + 2 * GHOST;
        let (rx, ry) = (0.5 / grid.hx(), 0.5 / grid.hy());
        let (gx, gy) = (&f.gx, &f.gy);
        for j in 0..ny {
            for i in 0..nx {
                let k = (j + GHOST) * w + i + GHOST;
                let o = (j * nx + i) * NVAR;
                for v in 0..NVAR {
                    out[o + v] = -(gx[k + 1][v] - gx[k - 1][v]) * rx - (gy[k + w][v] - gy[k - w][v]) * ry;
                }
            }
        }
    }

    /// Evaluates the right-hand side into `out`.
    pub fn rhs(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("MHD output", out.len(), self.grid.state_len())?;
        let f = self.fluxes(u)?;
        self.divergence(&f, out);
        Ok(())
    }
}

impl RhsFunction for MhdSystem {
    fn dim(&self) -> usize {
        self.grid.state_len()
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        self.rhs(y, out)
    }

    fn check_state(&self, y: &[f64]) -> Result<()> {
        for (k, cell) in y.chunks_exact(NVAR).enumerate() {
            admissible_primitive(cell, &self.params, k % self.grid.nx, k / self.grid.nx)?;
        }
        Ok(())
    }

    /// Differences the fluxes, then takes one divergence. The magnetic rows of
    /// the result then inherit the exactly curl-shaped structure of the
    /// stencil instead of the cancellation error of two separate right-hand sides.
    fn eval_difference(&self, y: &[f64], _f_y: &[f64], y_shifted: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("MHD output", out.len(), self.grid.state_len())?;
        let mut diff = self.fluxes(y_shifted)?;
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        if cache.as_ref().map_or(true, |c| c.base != y) {
            *cache = Some(FluxCache {
                base: y.to_vec(),
                fluxes: self.fluxes(y)?,
            });
        }
        let base = &cache.as_ref().expect("cache filled above").fluxes;
        for (d, b) in diff.gx.iter_mut().zip(&base.gx).chain(diff.gy.iter_mut().zip(&base.gy)) {
            for v in 0..NVAR {
                d[v] -= b[v];
            }
        }
        drop(cache);
        self.divergence(&diff, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{conserved, EnergyConvention};
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::new(6, 5, (0.0, 1.0), (0.0, 1.0)).unwrap()
    }

    fn numbered(grid: &Grid2D) -> Vec<f64> {
        (0..grid.state_len()).map(|k| k as f64 + 1.0).collect()
    }

    fn ext_at(ext: &[f64], w: usize, ii: isize, jj: isize, v: usize) -> f64 {
        let ii = (ii + GHOST as isize) as usize;
        let jj = (jj + GHOST as isize) as usize;
        ext[(jj * w + ii) * NVAR + v]
    }

    #[test]
    fn periodic_ghosts_wrap() {
        let g = grid();
        let u = numbered(&g);
        let (ext, w) = fill_ghosts(&g, &BoundaryPolicy::new(BcKind::Periodic, BcKind::Periodic), &u);
        for v in 0..NVAR {
            assert_eq!(ext_at(&ext, w, -1, 2, v), u[g.index(5, 2, v)]);
            assert_eq!(ext_at(&ext, w, -2, 2, v), u[g.index(4, 2, v)]);
            assert_eq!(ext_at(&ext, w, 6, 0, v), u[g.index(0, 0, v)]);
            assert_eq!(ext_at(&ext, w, 3, -1, v), u[g.index(3, 4, v)]);
            assert_eq!(ext_at(&ext, w, 3, 6, v), u[g.index(3, 1, v)]);
            assert_eq!(ext_at(&ext, w, -1, -1, v), u[g.index(5, 4, v)]);
        }
    }

    #[test]
    fn reflecting_ghosts_mirror_with_sign_flips() {
        let g = grid();
        let u = numbered(&g);
        let (ext, w) = fill_ghosts(&g, &BoundaryPolicy::new(BcKind::Periodic, BcKind::Reflecting), &u);
        for v in 0..NVAR {
            let s = if v == MY || v == BY { -1.0 } else { 1.0 };
            assert_eq!(ext_at(&ext, w, 2, -1, v), s * u[g.index(2, 0, v)]);
            assert_eq!(ext_at(&ext, w, 2, -2, v), s * u[g.index(2, 1, v)]);
            assert_eq!(ext_at(&ext, w, 2, 5, v), s * u[g.index(2, 4, v)]);
            assert_eq!(ext_at(&ext, w, 2, 6, v), s * u[g.index(2, 3, v)]);
        }
        let (ext, w) =
            fill_ghosts(&g, &BoundaryPolicy::new(BcKind::Reflecting, BcKind::ZeroGradient), &u);
        for v in 0..NVAR {
            let s = if v == MX || v == BX { -1.0 } else { 1.0 };
            assert_eq!(ext_at(&ext, w, -2, 1, v), s * u[g.index(1, 1, v)]);
            assert_eq!(ext_at(&ext, w, 1, -2, v), u[g.index(1, 0, v)]);
            assert_eq!(ext_at(&ext, w, 1, 6, v), u[g.index(1, 4, v)]);
        }
    }

    fn uniform_state(grid: &Grid2D, params: &MhdParams) -> Vec<f64> {
        let prim = Primitive {
            rho: 1.3,
            v: [0.2, -0.1, 0.4],
            b: [0.5, 0.3, -0.2],
            p: 0.9,
        };
        let cell = conserved(&prim, params);
        (0..grid.cells()).flat_map(|_| cell).collect()
    }

    #[test]
    fn uniform_state_is_stationary() {
        let g = grid();
        for conv in [EnergyConvention::HalfB2, EnergyConvention::FullB2] {
            let params = MhdParams {
                energy: conv,
                ..MhdParams::new(0.01, 0.02, 0.03)
            };
            let sys = MhdSystem::new(g, params, BoundaryPolicy::new(BcKind::Periodic, BcKind::Periodic))
                .unwrap();
            let u = uniform_state(&g, &params);
            let mut out = vec![1.0; u.len()];
            sys.rhs(&u, &mut out).unwrap();
            assert!(out.iter().all(|x| x.abs() < 1e-13), "{:?}", out);
        }
    }

    #[test]
    fn rhs_is_deterministic() {
        let g = grid();
        let params = MhdParams::new(0.01, 0.02, 0.03);
        let sys = MhdSystem::new(g, params, BoundaryPolicy::new(BcKind::Periodic, BcKind::Reflecting))
            .unwrap();
        let mut u = uniform_state(&g, &params);
        for (k, x) in u.iter_mut().enumerate() {
            *x *= 1.0 + 0.01 * ((k * 7919) % 13) as f64;
        }
        let mut a = vec![0.0; u.len()];
        let mut b = vec![0.0; u.len()];
        sys.rhs(&u, &mut a).unwrap();
        sys.rhs(&u, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_density_reported_with_cell() {
        let g = grid();
        let params = MhdParams::default();
        let sys = MhdSystem::new(g, params, BoundaryPolicy::new(BcKind::Periodic, BcKind::Periodic))
            .unwrap();
        let mut u = uniform_state(&g, &params);
        u[g.index(4, 3, 0)] = -0.5;
        let mut out = vec![0.0; u.len()];
        assert!(matches!(
            sys.rhs(&u, &mut out),
            Err(Error::Inadmissible { i: 4, j: 3, what: "density", .. })
        ));
        u[g.index(4, 3, 0)] = f64::NAN;
        assert!(matches!(sys.rhs(&u, &mut out), Err(Error::NonFinite { .. })));
    }
}
