//! Current-sheet evolution in the reconnection setup.
//!
//! Integrates a 64x32 grid with adaptive EpiRK5P1 and reports where the
//! current peaks, the divergence of B and the total mass. The final state is
//! written as a binary snapshot plus a CSV of the derived current, to the
//! directory given as the first argument (default: the system temp dir).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use epirk_mhd::epirk::{integrate_adaptive, StepController};
use epirk_mhd::mhd::snapshot::Snapshot;
use epirk_mhd::mhd::{current_j, div_b, total_mass, MhdParams, MhdState, MhdSystem};
use epirk_mhd::problems::{reconnection_ic, Problem, ReconnectionSpec};

fn main() -> epirk_mhd::Result<()> {
    let out_dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let spec = ReconnectionSpec::default();
    let grid = spec.grid(64, 32)?;
    let params = MhdParams::new(5e-2, 5e-3, 4e-2);
    let bc = Problem::Reconnection.default_bc();
    let sys = MhdSystem::new(grid, params, bc)?;
    let mut u = reconnection_ic(&grid, &spec, &params)?.u;
    let ctl = StepController::new(1e-5);

    let mut t = 0.0;
    for t_next in [0.0, 5.0, 10.0, 15.0, 20.0] {
        if t_next > t {
            let (y, stats) = integrate_adaptive(&sys, &u, t, t_next, &ctl)?;
            log_steps(t_next, stats.accepted, stats.rejected);
            u = y;
            t = t_next;
        }
        let cur = current_j(&u, &grid, &bc);
        let (k, jz) = cur
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c[2].abs()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        println!(
            "t = {t:5.1}  peak |Jz| = {jz:.4} at ({:6.2}, {:5.2})  max|div B| = {:.1e}  mass = {:.12}",
            grid.x((k % grid.nx) as isize),
            grid.y((k / grid.nx) as isize),
            div_b(&u, &grid, &bc).max_abs,
            total_mass(&u, &grid)
        );
    }

    let snap = Snapshot { state: MhdState::from_vec(grid, u)?, time: t, params, bc };
    let bin = out_dir.join("reconnection.mhd");
    snap.save(&bin)?;
    let derived = out_dir.join("reconnection_current.csv");
    snap.write_derived_csv(BufWriter::new(File::create(&derived)?))?;
    println!("wrote {} and {}", bin.display(), derived.display());
    Ok(())
}

fn log_steps(t: f64, accepted: usize, rejected: usize) {
    println!("  reached t = {t}: {accepted} steps accepted, {rejected} rejected");
}
