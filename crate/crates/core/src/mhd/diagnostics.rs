use super::{fill_ghosts, primitive, BoundaryPolicy, Grid2D, MhdParams, GHOST, BX, BY, BZ, NVAR, RHO};

/// Centered-difference divergence of the in-plane magnetic field.
#[derive(Debug, Clone, PartialEq)]
pub struct DivB {
    /// Row-major, one value per cell.
    pub field: Vec<f64>,
    pub max_abs: f64,
}

pub fn div_b(u: &[f64], grid: &Grid2D, bc: &BoundaryPolicy) -> DivB {
    let (ext, w) = fill_ghosts(grid, bc, u);
    let (rx, ry) = (0.5 / grid.hx(), 0.5 / grid.hy());
    let at = |k: usize, v: usize| ext[k * NVAR + v];
    let mut field = Vec::with_capacity(grid.cells());
    let mut max_abs = 0.0_f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = (j + GHOST) * w + i + GHOST;
            let d = (at(k + 1, BX) - at(k - 1, BX)) * rx + (at(k + w, BY) - at(k - w, BY)) * ry;
            max_abs = max_abs.max(d.abs());
            field.push(d);
        }
    }
    DivB { field, max_abs }
}

/// Centered-difference current `J = curl B`, one `[J_x, J_y, J_z]` per cell.
pub fn current_j(u: &[f64], grid: &Grid2D, bc: &BoundaryPolicy) -> Vec<[f64; 3]> {
    let (ext, w) = fill_ghosts(grid, bc, u);
    let (rx, ry) = (0.5 / grid.hx(), 0.5 / grid.hy());
    let at = |k: usize, v: usize| ext[k * NVAR + v];
    let mut out = Vec::with_capacity(grid.cells());
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = (j + GHOST) * w + i + GHOST;
            let dbz_dx = (at(k + 1, BZ) - at(k - 1, BZ)) * rx;
            let dbz_dy = (at(k + w, BZ) - at(k - w, BZ)) * ry;
            let dby_dx = (at(k + 1, BY) - at(k - 1, BY)) * rx;
            let dbx_dy = (at(k + w, BX) - at(k - w, BX)) * ry;
            out.push([dbz_dy, -dbz_dx, dby_dx - dbx_dy]);
        }
    }
    out
}

/// Integral of the density over the domain.
pub fn total_mass(u: &[f64], grid: &Grid2D) -> f64 {
    u.iter().skip(RHO).step_by(NVAR).sum::<f64>() * grid.hx() * grid.hy()
}

/// Conservative upper bound on a stable classical RK4 step for the centered discretization.
///
/// Uses `|v| + sqrt((gamma p + 2 m |B|^2) / rho)` as the signal speed, with `m` the
/// magnetic energy factor, and `max(mu, eta, gamma kappa) / rho` as the diffusivity.
pub fn explicit_dt_bound(u: &[f64], grid: &Grid2D, params: &MhdParams) -> f64 {
    let mut speed = 0.0_f64;
    let mut nu = 0.0_f64;
    let m = params.energy.magnetic_factor();
    for cell in u.chunks_exact(NVAR) {
        let p = primitive(cell, params);
        let v2: f64 = p.v.iter().map(|x| x * x).sum();
        let b2: f64 = p.b.iter().map(|x| x * x).sum();
        let c = v2.sqrt() + ((params.gamma * p.p.max(0.0) + 2.0 * m * b2) / p.rho).sqrt();
        speed = speed.max(c);
        nu = nu.max(params.mu.max(params.eta).max(params.gamma * params.kappa) / p.rho);
    }
    let (ix, iy) = (1.0 / grid.hx(), 1.0 / grid.hy());
    // RK4 reaches about 2.8 along both the imaginary and the negative real axis.
    let rate = speed * (ix + iy) / 2.8 + 4.0 * nu * (ix * ix + iy * iy) / 2.7;
    if rate > 0.0 {
        0.5 / rate
    } else {
        f64::INFINITY
    }
}
