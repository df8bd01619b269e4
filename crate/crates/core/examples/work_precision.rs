//! A small tolerance sweep through the experiment harness.
//!
//! Builds the reference (EpiRK5P1 at tight tolerance, cross-checked against
//! classical RK4), runs the sweep and prints the resulting CSV. Output goes to
//! the directory given as the first argument (default: a fresh temp dir).

use std::path::PathBuf;

use epirk_mhd::harness::{run_experiment, ExperimentConfig};
use epirk_mhd::problems::Problem;

fn main() -> epirk_mhd::Result<()> {
    let out_dir = std::env::args().nth(1).map_or_else(
        || std::env::temp_dir().join(format!("work-precision-{}", std::process::id())),
        PathBuf::from,
    );
    let mut cfg = ExperimentConfig::defaults(Problem::Reconnection);
    cfg.nx = 32;
    cfg.ny = 16;
    cfg.t_end = 2.0;
    cfg.controls = vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    cfg.out_dir = out_dir;

    let outcome = run_experiment(&cfg)?;
    println!("reference difference (EpiRK5P1 vs RK4): {:.2e}", outcome.reference.difference);
    print!("{}", std::fs::read_to_string(&outcome.csv_path)?);
    Ok(())
}
