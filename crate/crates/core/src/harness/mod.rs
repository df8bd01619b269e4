//! Experiment orchestration: reference solutions, error norms, parameter sweeps,
//! CSV records and snapshots.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use sha2::{Digest, Sha256};

pub use config::{parse_pairs, ExperimentConfig, ReferenceSettings, SnapshotFormat, SweepMethod};

use crate::epirk::{integrate_adaptive, integrate_fixed, Method, StepController, StepStats};
use crate::error::{Error, Result};
use crate::explicit::rk4_fixed;
use crate::krylov::KrylovConfig;
use crate::mhd::snapshot::Snapshot;
use crate::mhd::{div_b, explicit_dt_bound, Grid2D, MhdState, MhdSystem, NVAR};
use crate::ops::RhsFunction;
use crate::problems::{kh_ic, reconnection_ic, Problem};

/// Record columns, in order.
pub const CSV_COLUMNS: [&str; 11] = [
    "method",
    "control",
    "error",
    "seconds",
    "steps_accepted",
    "steps_rejected",
    "krylov_projections",
    "operator_applies",
    "max_divB",
    "status",
    "concurrent",
];

/// Bumped whenever a change alters the reference computation, so stale cache entries miss.
const CACHE_VERSION: u32 = 1;

/// Largest RK4 step the automatic choice will take, for accuracy rather than stability.
const RK4_DT_CAP: f64 = 2.5e-3;

/// Maximum over the eight components of `sqrt(sum |a - b|^2 hx hy)`.
pub fn error_norm(a: &MhdState, b: &MhdState) -> Result<f64> {
    if a.grid != b.grid || a.u.len() != b.u.len() {
        return Err(Error::InvalidArgument("error norm of states on different grids".into()));
    }
    let area = a.grid.hx() * a.grid.hy();
    let mut sums = [0.0_f64; NVAR];
    for (ca, cb) in a.u.chunks_exact(NVAR).zip(b.u.chunks_exact(NVAR)) {
        for v in 0..NVAR {
            let d = ca[v] - cb[v];
            sums[v] += d * d;
        }
    }
    Ok(sums.iter().map(|s| (s * area).sqrt()).fold(0.0, f64::max))
}

/// Initial state and right-hand side described by a config.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(MhdSystem, MhdState)> {
    let grid = cfg.grid()?;
    let u0 = match cfg.problem {
        Problem::Reconnection => reconnection_ic(&grid, &cfg.reconnection, &cfg.params)?,
        Problem::KelvinHelmholtz => kh_ic(&grid, &cfg.kh, &cfg.params)?,
    };
    Ok((MhdSystem::new(grid, cfg.params, cfg.bc)?, u0))
}

/// The two independent reference solutions at `t_end`.
#[derive(Debug, Clone)]
pub struct DualReference {
    /// Adaptive EpiRK5P1 at the reference tolerance.
    pub epirk: Vec<f64>,
    /// Constant-step classical RK4.
    pub rk4: Vec<f64>,
}

pub fn dual_reference<R: RhsFunction + ?Sized>(
    rhs: &R,
    y0: &[f64],
    t_end: f64,
    tol: f64,
    rk4_dt: f64,
) -> Result<DualReference> {
    let (epirk, stats) = integrate_adaptive(rhs, y0, 0.0, t_end, &StepController::new(tol))?;
    info!(
        "EpiRK5P1 reference: {} steps ({} rejected), {:.2?}",
        stats.accepted, stats.rejected, stats.wall_time
    );
    let (rk4, stats) = rk4_fixed(rhs, y0, 0.0, t_end, rk4_dt)?;
    info!("RK4 reference: {} steps of {rk4_dt:e}, {:.2?}", stats.accepted, stats.wall_time);
    Ok(DualReference { epirk, rk4 })
}

/// Reference state used for every error in a sweep.
#[derive(Debug, Clone)]
pub struct Reference {
    pub state: MhdState,
    /// Error norm between the EpiRK5P1 and RK4 references.
    pub difference: f64,
    pub rk4_dt: f64,
    pub key: String,
    pub from_cache: bool,
}

impl Reference {
    pub fn check(&self, threshold: f64) -> Result<()> {
        if !(self.difference <= threshold) {
            return Err(Error::ReferenceDisagreement {
                difference: self.difference,
                threshold,
            });
        }
        Ok(())
    }
}

fn rk4_dt_for(cfg: &ExperimentConfig, u0: &MhdState) -> f64 {
    cfg.reference.rk4_dt.unwrap_or_else(|| {
        let bound = explicit_dt_bound(&u0.u, &u0.grid, &cfg.params);
        // Whole number of steps.
        let dt = bound.min(RK4_DT_CAP);
        cfg.t_end / (cfg.t_end / dt).ceil()
    })
}

/// Content hash of everything the reference depends on.
pub fn reference_key(cfg: &ExperimentConfig) -> String {
    let mut s = cfg.problem_string();
    let _ = writeln!(s, "reference_tol = {:?}", cfg.reference.tol);
    let rk4 = cfg.reference.rk4_dt.map_or("auto".into(), |d| format!("{d:?}"));
    let _ = writeln!(s, "reference_rk4_dt = {rk4}");
    let _ = writeln!(s, "cache_version = {CACHE_VERSION}");
    let digest = Sha256::digest(s.as_bytes());
    hex::encode(&digest[..16])
}

fn cache_paths(dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{key}.mhd")), dir.join(format!("{key}.txt")))
}

fn load_cached(cfg: &ExperimentConfig, grid: &Grid2D, key: &str) -> Option<Reference> {
    let dir = cfg.cache_dir()?;
    let (data, meta) = cache_paths(&dir, key);
    let snap = Snapshot::load(&data).ok()?;
    let text = fs::read_to_string(&meta).ok()?;
    let pairs: Vec<(&str, &str)> = text
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.trim(), v.trim())))
        .collect();
    let get = |k: &str| pairs.iter().find(|(n, _)| *n == k).and_then(|(_, v)| v.parse::<f64>().ok());
    if snap.state.grid != *grid {
        warn!("ignoring reference cache entry {key}: grid mismatch");
        return None;
    }
    Some(Reference {
        state: snap.state,
        difference: get("difference")?,
        rk4_dt: get("rk4_dt")?,
        key: key.to_string(),
        from_cache: true,
    })
}

fn store_cached(cfg: &ExperimentConfig, r: &Reference) -> Result<()> {
    let Some(dir) = cfg.cache_dir() else {
        return Ok(());
    };
    fs::create_dir_all(&dir)?;
    let (data, meta) = cache_paths(&dir, &r.key);
    Snapshot {
        state: r.state.clone(),
        time: cfg.t_end,
        params: cfg.params,
        bc: cfg.bc,
    }
    .save(&data)?;
    let text = format!(
        "difference = {:?}\nrk4_dt = {:?}\n{}",
        r.difference,
        r.rk4_dt,
        cfg.problem_string()
    );
    fs::write(meta, text)?;
    Ok(())
}

/// Reference at `t_end`, from the cache when possible. Does not apply the agreement threshold.
pub fn reference_solution(cfg: &ExperimentConfig) -> Result<Reference> {
    let (sys, u0) = build_problem(cfg)?;
    let key = reference_key(cfg);
    if let Some(r) = load_cached(cfg, &u0.grid, &key) {
        info!("reference cache hit {key}");
        return Ok(r);
    }
    let rk4_dt = rk4_dt_for(cfg, &u0);
    let dual = dual_reference(&sys, &u0.u, cfg.t_end, cfg.reference.tol, rk4_dt)?;
    let state = MhdState::from_vec(u0.grid, dual.epirk)?;
    let rk4 = MhdState::from_vec(u0.grid, dual.rk4)?;
    let r = Reference {
        difference: error_norm(&state, &rk4)?,
        state,
        rk4_dt,
        key,
        from_cache: false,
    };
    store_cached(cfg, &r)?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed(&'static str),
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            RunStatus::Ok => "ok".into(),
            RunStatus::Failed(tag) => format!("failed:{tag}"),
        }
    }
}

pub fn failure_tag(e: &Error) -> &'static str {
    match e {
        Error::StepSizeUnderflow { .. } => "step-underflow",
        Error::KrylovConvergence { .. } => "krylov",
        Error::Inadmissible { .. } => "inadmissible",
        Error::NonFinite { .. } => "non-finite",
        Error::Numeric(_) => "numeric",
        _ => "error",
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: SweepMethod,
    /// Tolerance or step size.
    pub control: f64,
    /// Error norm against the reference; NaN for failed runs.
    pub error: f64,
    /// Wall time of the integration alone.
    pub seconds: f64,
    pub stats: StepStats,
    pub max_div_b: f64,
    pub status: RunStatus,
    pub concurrent: bool,
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{},{},{},{},{:?},{},{}",
            self.method,
            self.control,
            self.error,
            self.seconds,
            self.stats.accepted,
            self.stats.rejected,
            self.stats.projections,
            self.stats.krylov.operator_applies,
            self.max_div_b,
            self.status.label(),
            u8::from(self.concurrent)
        )
    }
}

/// Integrates one sweep point, stopping at each snapshot time.
struct PointRun {
    y: Vec<f64>,
    stats: StepStats,
    seconds: f64,
    snapshots: Vec<(f64, Vec<f64>)>,
}

fn integrate_segment(
    cfg: &ExperimentConfig,
    sys: &MhdSystem,
    y: &[f64],
    t0: f64,
    t1: f64,
    control: f64,
) -> Result<(Vec<f64>, StepStats)> {
    let cfg_k = KrylovConfig::default();
    match cfg.method {
        SweepMethod::Epirk5p1 => {
            let mut ctl = StepController::new(control);
            ctl.h0 = cfg.initial_step;
            integrate_adaptive(sys, y, t0, t1, &ctl)
        }
        SweepMethod::Epirk4Fixed => integrate_fixed(Method::EpiRK4, sys, y, t0, t1, control, cfg.krylov_tol, &cfg_k),
        SweepMethod::Epirk5p1Fixed => {
            integrate_fixed(Method::EpiRK5P1, sys, y, t0, t1, control, cfg.krylov_tol, &cfg_k)
        }
        SweepMethod::Rk4ExplicitReference => rk4_fixed(sys, y, t0, t1, control),
    }
}

fn run_point(cfg: &ExperimentConfig, sys: &MhdSystem, u0: &[f64], control: f64) -> (Result<PointRun>, f64) {
    let mut stops: Vec<f64> = cfg.snapshots.clone();
    stops.sort_by(f64::total_cmp);
    stops.dedup();
    let mut run = PointRun {
        y: u0.to_vec(),
        stats: StepStats::default(),
        seconds: 0.0,
        snapshots: Vec::new(),
    };
    let mut t = 0.0;
    let mut marks = stops.clone();
    if marks.last() != Some(&cfg.t_end) {
        marks.push(cfg.t_end);
    }
    for &stop in &marks {
        if stop > t {
            let start = Instant::now();
            let res = integrate_segment(cfg, sys, &run.y, t, stop, control);
            run.seconds += start.elapsed().as_secs_f64();
            match res {
                Ok((y, s)) => {
                    run.y = y;
                    run.stats.merge(&s);
                }
                Err(e) => return (Err(e), run.seconds),
            }
            t = stop;
        }
        if stops.contains(&stop) {
            run.snapshots.push((stop, run.y.clone()));
        }
    }
    let seconds = run.seconds;
    (Ok(run), seconds)
}

fn snapshot_path(cfg: &ExperimentConfig, control: f64, time: f64) -> PathBuf {
    cfg.out_dir.join(format!(
        "{}_{control:e}_t{time:?}.{}",
        cfg.method,
        cfg.snapshot_format.extension()
    ))
}

fn write_snapshot(cfg: &ExperimentConfig, snap: &Snapshot, path: &Path) -> Result<()> {
    match cfg.snapshot_format {
        SnapshotFormat::Binary => snap.save(path),
        SnapshotFormat::Csv => snap.write_csv(BufWriter::new(fs::File::create(path)?)),
    }
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub csv_path: PathBuf,
    pub snapshot_paths: Vec<PathBuf>,
    pub reference: Reference,
}

impl ExperimentOutcome {
    pub fn all_failed(&self) -> bool {
        self.records.iter().all(|r| r.status != RunStatus::Ok)
    }
}

/// CSV text: the resolved config and reference summary as `#` comments, then the records.
pub fn records_csv(cfg: &ExperimentConfig, reference: &Reference, records: &[RunRecord]) -> String {
    let mut s = String::new();
    for line in cfg.to_config_string().lines() {
        let _ = writeln!(s, "# {line}");
    }
    let _ = writeln!(s, "# reference_key = {}", reference.key);
    let _ = writeln!(s, "# reference_difference = {:?}", reference.difference);
    let _ = writeln!(s, "# reference_rk4_dt_used = {:?}", reference.rk4_dt);
    let _ = writeln!(s, "{}", CSV_COLUMNS.join(","));
    for r in records {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

/// Runs the sweep described by `cfg`.
///
/// Fails with [`Error::ReferenceDisagreement`] before any sweep point runs if the
/// two references disagree. Failed sweep points become NaN rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let reference = reference_solution(cfg)?;
    reference.check(cfg.reference_threshold())?;
    let (sys, u0) = build_problem(cfg)?;
    let grid = u0.grid;

    let mut records = Vec::with_capacity(cfg.controls.len());
    let mut snapshot_paths = Vec::new();
    for &control in &cfg.controls {
        let (res, seconds) = run_point(cfg, &sys, &u0.u, control);
        let seconds = seconds.max(1e-9);
        let record = match res {
            Ok(run) => {
                let mut max_div_b = div_b(&run.y, &grid, &cfg.bc).max_abs;
                for (time, y) in run.snapshots {
                    max_div_b = max_div_b.max(div_b(&y, &grid, &cfg.bc).max_abs);
                    let snap = Snapshot {
                        state: MhdState::from_vec(grid, y)?,
                        time,
                        params: cfg.params,
                        bc: cfg.bc,
                    };
                    let path = snapshot_path(cfg, control, time);
                    write_snapshot(cfg, &snap, &path)?;
                    snapshot_paths.push(path);
                }
                let state = MhdState::from_vec(grid, run.y)?;
                RunRecord {
                    method: cfg.method,
                    control,
                    error: error_norm(&state, &reference.state)?,
                    seconds,
                    stats: run.stats,
                    max_div_b,
                    status: RunStatus::Ok,
                    concurrent: cfg.concurrent,
                }
            }
            Err(e) => {
                warn!("{} at control {control:e} failed: {e}", cfg.method);
                RunRecord {
                    method: cfg.method,
                    control,
                    error: f64::NAN,
                    seconds,
                    stats: StepStats::default(),
                    max_div_b: f64::NAN,
                    status: RunStatus::Failed(failure_tag(&e)),
                    concurrent: cfg.concurrent,
                }
            }
        };
        info!("{}", record.csv_row());
        records.push(record);
    }

    let csv_path = cfg.out_dir.join(&cfg.csv);
    let mut w = BufWriter::new(fs::File::create(&csv_path)?);
    w.write_all(records_csv(cfg, &reference, &records).as_bytes())?;
    w.flush()?;
    Ok(ExperimentOutcome {
        records,
        csv_path,
        snapshot_paths,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mhd::RHO;
    use crate::ops::FnRhs;

    fn state(grid: Grid2D, fill: f64) -> MhdState {
        MhdState::from_vec(grid, vec![fill; grid.state_len()]).unwrap()
    }

    #[test]
    fn error_norm_of_equal_states_is_zero() {
        let g = Grid2D::new(6, 4, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let a = state(g, 0.7);
        assert_eq!(error_norm(&a, &a.clone()).unwrap(), 0.0);
    }

    #[test]
    fn error_norm_of_single_cell_perturbation() {
        let g = Grid2D::new(6, 4, (0.0, 1.0), (0.0, 2.0)).unwrap();
        let a = state(g, 1.0);
        let mut b = a.clone();
        b.cell_mut(2, 3)[RHO] += 1e-3;
        let want = 1e-3 * (g.hx() * g.hy()).sqrt();
        // The perturbation itself is rounded when added to 1.
        assert!((error_norm(&a, &b).unwrap() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn error_norm_rejects_grid_mismatch() {
        let a = state(Grid2D::new(6, 4, (0.0, 1.0), (0.0, 2.0)).unwrap(), 1.0);
        let b = state(Grid2D::new(6, 4, (0.0, 1.0), (0.0, 3.0)).unwrap(), 1.0);
        assert!(matches!(error_norm(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_rhs_reference_is_the_initial_state() {
        let f = FnRhs::new(3, |_: &[f64], o: &mut [f64]| o.fill(0.0));
        let y0 = [1.0, -2.0, 0.5];
        let r = dual_reference(&f, &y0, 2.0, 1e-11, 0.01).unwrap();
        assert_eq!(r.epirk, y0);
        assert_eq!(r.rk4, y0);
    }

    #[test]
    fn reference_key_ignores_sweep_settings() {
        let a = ExperimentConfig::parse("controls = 1e-2").unwrap();
        let b = ExperimentConfig::parse("controls = 1e-3\nmethod = epirk5p1\ncsv = other.csv").unwrap();
        let c = ExperimentConfig::parse("controls = 1e-3\nnx = 32").unwrap();
        assert_eq!(reference_key(&a), reference_key(&b));
        assert_ne!(reference_key(&a), reference_key(&c));
        assert_eq!(reference_key(&a).len(), 32);
    }

    #[test]
    fn failed_row_formatting() {
        let r = RunRecord {
            method: SweepMethod::Epirk4Fixed,
            control: 0.5,
            error: f64::NAN,
            seconds: 0.25,
            stats: StepStats::default(),
            max_div_b: f64::NAN,
            status: RunStatus::Failed("krylov"),
            concurrent: true,
        };
        assert_eq!(r.csv_row(), "epirk4-fixed,0.5,NaN,0.25,0,0,0,0,NaN,failed:krylov,1");
        assert_eq!(r.csv_row().split(',').count(), CSV_COLUMNS.len());
    }
}
