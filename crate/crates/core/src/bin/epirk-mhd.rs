use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use epirk_mhd::harness::{reference_solution, run_experiment, ExperimentConfig};
use epirk_mhd::mhd::div_b;
use epirk_mhd::mhd::snapshot::Snapshot;
use epirk_mhd::Error;

#[derive(Parser)]
#[command(version, about = "EpiRK integrators on 2.5D resistive MHD benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep in a config file and write the records CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated snapshot times; overrides `snapshots`.
        #[arg(long, value_delimiter = ',')]
        snapshots: Option<Vec<f64>>,
    },
    /// Compute (or load) the reference solution and check the two references agree.
    Reference {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report max |div B| of a snapshot file (binary, or CSV by extension).
    CheckDivb {
        #[arg(long)]
        snapshot: PathBuf,
        /// Also write the derived current and divergence fields as CSV.
        #[arg(long)]
        derived: Option<PathBuf>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::ReferenceDisagreement { .. } => 3,
        _ => 1,
    }
}

fn load_snapshot(path: &Path) -> epirk_mhd::Result<Snapshot> {
    if path.extension().is_some_and(|e| e == "csv") {
        Snapshot::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    } else {
        Snapshot::load(path)
    }
}

fn run(cmd: Command) -> epirk_mhd::Result<u8> {
    match cmd {
        Command::Run { config, out, snapshots } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(times) = snapshots {
                cfg.snapshots = times;
            }
            cfg.validate()?;
            let outcome = run_experiment(&cfg)?;
            for r in &outcome.records {
                println!("{}", r.csv_row());
            }
            println!("wrote {}", outcome.csv_path.display());
            if outcome.all_failed() {
                eprintln!("every sweep point failed");
                return Ok(4);
            }
            Ok(0)
        }
        Command::Reference { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let r = reference_solution(&cfg)?;
            let threshold = cfg.reference_threshold();
            println!(
                "reference {} ({}): EpiRK5P1 vs RK4 (dt {:e}) difference {:e}, threshold {:e}",
                r.key,
                if r.from_cache { "cached" } else { "computed" },
                r.rk4_dt,
                r.difference,
                threshold
            );
            r.check(threshold)?;
            Ok(0)
        }
        Command::CheckDivb { snapshot, derived } => {
            let snap = load_snapshot(&snapshot)?;
            let d = div_b(&snap.state.u, snap.grid(), &snap.bc);
            println!("t = {} max|div B| = {:e}", snap.time, d.max_abs);
            if let Some(path) = derived {
                snap.write_derived_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
