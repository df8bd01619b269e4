//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mhd::{BcKind, BoundaryPolicy, EnergyConvention, Grid2D, MhdParams};
use crate::problems::{KhSpec, Problem, ReconnectionSpec};

/// Integration method swept by an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMethod {
    /// Adaptive EpiRK5P1; controls are tolerances.
    Epirk5p1,
    /// Constant-step EpiRK4; controls are step sizes.
    Epirk4Fixed,
    /// Constant-step EpiRK5P1; controls are step sizes.
    Epirk5p1Fixed,
    /// Constant-step classical RK4; controls are step sizes.
    Rk4ExplicitReference,
}

impl SweepMethod {
    pub fn is_adaptive(self) -> bool {
        matches!(self, SweepMethod::Epirk5p1)
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Epirk5p1 => "epirk5p1",
            SweepMethod::Epirk4Fixed => "epirk4-fixed",
            SweepMethod::Epirk5p1Fixed => "epirk5p1-fixed",
            SweepMethod::Rk4ExplicitReference => "rk4-explicit-reference",
        }
    }
}

impl FromStr for SweepMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epirk5p1" => Ok(SweepMethod::Epirk5p1),
            "epirk4-fixed" => Ok(SweepMethod::Epirk4Fixed),
            "epirk5p1-fixed" => Ok(SweepMethod::Epirk5p1Fixed),
            "rk4-explicit-reference" => Ok(SweepMethod::Rk4ExplicitReference),
            _ => Err(Error::Config(format!(
                "unknown method '{s}' (epirk5p1, epirk4-fixed, epirk5p1-fixed, rk4-explicit-reference)"
            ))),
        }
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnapshotFormat {
    #[default]
    Binary,
    Csv,
}

impl SnapshotFormat {
    pub fn extension(self) -> &'static str {
        match self {
            SnapshotFormat::Binary => "mhd",
            SnapshotFormat::Csv => "csv",
        }
    }
}

impl FromStr for SnapshotFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(SnapshotFormat::Binary),
            "csv" => Ok(SnapshotFormat::Csv),
            _ => Err(Error::Config(format!("snapshot_format must be 'binary' or 'csv', got '{s}'"))),
        }
    }
}

impl fmt::Display for SnapshotFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnapshotFormat::Binary => "binary",
            SnapshotFormat::Csv => "csv",
        })
    }
}

/// How the reference solution is computed and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSettings {
    /// Tolerance of the adaptive EpiRK5P1 reference.
    pub tol: f64,
    /// Step of the RK4 cross-check; `None` picks one from the stability bound.
    pub rk4_dt: Option<f64>,
    /// Largest accepted disagreement; `None` derives it from the sweep.
    pub threshold: Option<f64>,
    /// Cache directory; `None` means `<out_dir>/reference-cache`.
    pub cache_dir: Option<PathBuf>,
    pub use_cache: bool,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            rk4_dt: None,
            threshold: None,
            cache_dir: None,
            use_cache: true,
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub nx: usize,
    pub ny: usize,
    pub params: MhdParams,
    pub bc: BoundaryPolicy,
    pub method: SweepMethod,
    /// Tolerances for adaptive methods, step sizes otherwise.
    pub controls: Vec<f64>,
    pub t_end: f64,
    /// Krylov tolerance of the constant-step EpiRK methods.
    pub krylov_tol: f64,
    /// First trial step of the adaptive controller.
    pub initial_step: Option<f64>,
    pub out_dir: PathBuf,
    pub csv: String,
    pub snapshots: Vec<f64>,
    pub snapshot_format: SnapshotFormat,
    /// Reserved; nothing in the integration is random.
    pub seed: u64,
    pub reference: ReferenceSettings,
    pub reconnection: ReconnectionSpec,
    pub kh: KhSpec,
    /// Set when sweep points run in parallel processes, so timings are not comparable.
    pub concurrent: bool,
}

const KEYS: &[&str] = &[
    "problem",
    "nx",
    "ny",
    "mu",
    "eta",
    "kappa",
    "gamma",
    "energy",
    "bc_x",
    "bc_y",
    "method",
    "controls",
    "t_end",
    "krylov_tol",
    "initial_step",
    "out_dir",
    "csv",
    "snapshots",
    "snapshot_format",
    "seed",
    "reference_tol",
    "reference_rk4_dt",
    "reference_threshold",
    "reference_cache",
    "psi0",
    "x_r",
    "y_r",
    "kh_v0",
    "kh_eps_x",
    "kh_eps_y",
    "kh_omega_x",
    "kh_omega_y",
    "kh_p",
    "kh_bx",
    "kh_bz",
    "kh_lambda",
    "kh_lx",
    "kh_ly",
    "concurrent",
];

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = '{raw}'")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|t| parse_value(key, t.trim())).collect()
}

/// `auto`/`none` or a number.
fn parse_optional(key: &str, raw: &str) -> Result<Option<f64>> {
    match raw {
        "auto" | "none" => Ok(None),
        _ => parse_value(key, raw).map(Some),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

fn fmt_optional(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"))
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", n + 1)));
        }
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Defaults for a problem: the desk-scale grids and parameters used in the benchmarks.
    pub fn defaults(problem: Problem) -> Self {
        let (nx, ny, params, t_end) = match problem {
            Problem::Reconnection => (64, 32, MhdParams::new(1e-2, 1e-3, 1e-2), 10.0),
            Problem::KelvinHelmholtz => (64, 64, MhdParams::new(1e-4, 1e-4, 1e-4), 2.0),
        };
        Self {
            problem,
            nx,
            ny,
            params,
            bc: problem.default_bc(),
            method: SweepMethod::Epirk5p1,
            controls: vec![1e-2, 1e-4, 1e-6],
            t_end,
            krylov_tol: 1e-10,
            initial_step: None,
            out_dir: PathBuf::from("."),
            csv: "records.csv".into(),
            snapshots: Vec::new(),
            snapshot_format: SnapshotFormat::Binary,
            seed: 0,
            reference: ReferenceSettings::default(),
            reconnection: ReconnectionSpec::default(),
            kh: KhSpec::default(),
            concurrent: false,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_pairs(text)?;
        let get = |k: &str| map.get(k).map(String::as_str);
        let problem = match get("problem") {
            Some(p) => p.parse()?,
            None => Problem::Reconnection,
        };
        let mut c = Self::defaults(problem);
        if get("method").is_some_and(|m| m != "epirk5p1") {
            c.controls = vec![0.1, 0.05, 0.025];
        }
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "problem" => {}
                "nx" => c.nx = parse_value(k, v)?,
                "ny" => c.ny = parse_value(k, v)?,
                "mu" => c.params.mu = parse_value(k, v)?,
                "eta" => c.params.eta = parse_value(k, v)?,
                "kappa" => c.params.kappa = parse_value(k, v)?,
                "gamma" => c.params.gamma = parse_value(k, v)?,
                "energy" => c.params.energy = v.parse::<EnergyConvention>()?,
                "bc_x" => c.bc.x = v.parse::<BcKind>()?,
                "bc_y" => c.bc.y = v.parse::<BcKind>()?,
                "method" => c.method = v.parse()?,
                "controls" => c.controls = parse_list(k, v)?,
                "t_end" => c.t_end = parse_value(k, v)?,
                "krylov_tol" => c.krylov_tol = parse_value(k, v)?,
                "initial_step" => c.initial_step = parse_optional(k, v)?,
                "out_dir" => c.out_dir = PathBuf::from(v),
                "csv" => c.csv = v.to_string(),
                "snapshots" => c.snapshots = parse_list(k, v)?,
                "snapshot_format" => c.snapshot_format = v.parse()?,
                "seed" => c.seed = parse_value(k, v)?,
                "reference_tol" => c.reference.tol = parse_value(k, v)?,
                "reference_rk4_dt" => c.reference.rk4_dt = parse_optional(k, v)?,
                "reference_threshold" => c.reference.threshold = parse_optional(k, v)?,
                "reference_cache" => match v {
                    "none" => c.reference.use_cache = false,
                    "auto" => {}
                    _ => c.reference.cache_dir = Some(PathBuf::from(v)),
                },
                "psi0" => c.reconnection.psi0 = parse_value(k, v)?,
                "x_r" => c.reconnection.x_r = parse_value(k, v)?,
                "y_r" => c.reconnection.y_r = parse_value(k, v)?,
                "kh_v0" => c.kh.v0 = parse_value(k, v)?,
                "kh_eps_x" => c.kh.eps_x = parse_value(k, v)?,
                "kh_eps_y" => c.kh.eps_y = parse_value(k, v)?,
                "kh_omega_x" => c.kh.omega_x = parse_value(k, v)?,
                "kh_omega_y" => c.kh.omega_y = parse_value(k, v)?,
                "kh_p" => c.kh.p = parse_value(k, v)?,
                "kh_bx" => c.kh.bx = parse_value(k, v)?,
                "kh_bz" => c.kh.bz = parse_value(k, v)?,
                "kh_lambda" => c.kh.lambda = parse_value(k, v)?,
                "kh_lx" => c.kh.lx = parse_value(k, v)?,
                "kh_ly" => c.kh.ly = parse_value(k, v)?,
                "concurrent" => c.concurrent = parse_value(k, v)?,
                _ => unreachable!("keys are checked while parsing"),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Every failure is reported as [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.controls.is_empty() {
            return Err(Error::Config("controls must not be empty".into()));
        }
        if let Some(c) = self.controls.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("controls must be positive, got {c}")));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end)) {
            return Err(Error::Config(format!("snapshot time {t} outside [0, {}]", self.t_end)));
        }
        if !(self.krylov_tol > 0.0) || !(self.reference.tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        for (name, v) in [
            ("initial_step", self.initial_step),
            ("reference_rk4_dt", self.reference.rk4_dt),
            ("reference_threshold", self.reference.threshold),
        ] {
            if v.is_some_and(|x| !(x > 0.0)) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.csv.is_empty() {
            return Err(Error::Config("csv file name must not be empty".into()));
        }
        self.params.validate().map_err(cfg_err)?;
        self.reconnection.validate().map_err(cfg_err)?;
        self.kh.validate().map_err(cfg_err)?;
        self.grid().map_err(cfg_err)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        match self.problem {
            Problem::Reconnection => self.reconnection.grid(self.nx, self.ny),
            Problem::KelvinHelmholtz => self.kh.grid(self.nx, self.ny),
        }
    }

    pub fn cache_dir(&self) -> Option<PathBuf> {
        if !self.reference.use_cache {
            return None;
        }
        Some(
            self.reference
                .cache_dir
                .clone()
                .unwrap_or_else(|| self.out_dir.join("reference-cache")),
        )
    }

    /// Largest accepted disagreement between the two reference solutions.
    pub fn reference_threshold(&self) -> f64 {
        if let Some(t) = self.reference.threshold {
            return t;
        }
        if self.method.is_adaptive() {
            10.0 * self.controls.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            1e-8
        }
    }

    fn write_reconnection(&self, s: &mut String) {
        let r = &self.reconnection;
        for (name, v) in [("psi0", r.psi0), ("x_r", r.x_r), ("y_r", r.y_r)] {
            let _ = writeln!(s, "{name} = {v:?}");
        }
    }

    fn write_kh(&self, s: &mut String) {
        let k = &self.kh;
        for (name, v) in [
            ("kh_v0", k.v0),
            ("kh_eps_x", k.eps_x),
            ("kh_eps_y", k.eps_y),
            ("kh_omega_x", k.omega_x),
            ("kh_omega_y", k.omega_y),
            ("kh_p", k.p),
            ("kh_bx", k.bx),
            ("kh_bz", k.bz),
            ("kh_lambda", k.lambda),
            ("kh_lx", k.lx),
            ("kh_ly", k.ly),
        ] {
            let _ = writeln!(s, "{name} = {v:?}");
        }
    }

    /// The physical problem only: everything the reference solution depends on.
    pub fn problem_string(&self) -> String {
        let p = &self.params;
        let mut s = String::new();
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(s, "nx = {}", self.nx);
        let _ = writeln!(s, "ny = {}", self.ny);
        let _ = writeln!(s, "mu = {:?}", p.mu);
        let _ = writeln!(s, "eta = {:?}", p.eta);
        let _ = writeln!(s, "kappa = {:?}", p.kappa);
        let _ = writeln!(s, "gamma = {:?}", p.gamma);
        let _ = writeln!(s, "energy = {}", p.energy);
        let _ = writeln!(s, "bc_x = {}", self.bc.x);
        let _ = writeln!(s, "bc_y = {}", self.bc.y);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        match self.problem {
            Problem::Reconnection => self.write_reconnection(&mut s),
            Problem::KelvinHelmholtz => self.write_kh(&mut s),
        }
        s
    }

    /// All settings with defaults expanded; parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = self.problem_string();
        // The other problem's overrides are kept so the round trip is exact.
        match self.problem {
            Problem::Reconnection => self.write_kh(&mut s),
            Problem::KelvinHelmholtz => self.write_reconnection(&mut s),
        }
        let r = &self.reference;
        let _ = writeln!(s, "method = {}", self.method);
        let _ = writeln!(s, "controls = {}", fmt_list(&self.controls));
        let _ = writeln!(s, "krylov_tol = {:?}", self.krylov_tol);
        let _ = writeln!(s, "initial_step = {}", fmt_optional(self.initial_step));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "csv = {}", self.csv);
        let _ = writeln!(s, "snapshots = {}", fmt_list(&self.snapshots));
        let _ = writeln!(s, "snapshot_format = {}", self.snapshot_format);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "reference_tol = {:?}", r.tol);
        let _ = writeln!(s, "reference_rk4_dt = {}", fmt_optional(r.rk4_dt));
        let _ = writeln!(s, "reference_threshold = {}", fmt_optional(r.threshold));
        let cache = match (&r.cache_dir, r.use_cache) {
            (_, false) => "none".to_string(),
            (None, true) => "auto".to_string(),
            (Some(p), true) => p.display().to_string(),
        };
        let _ = writeln!(s, "reference_cache = {cache}");
        let _ = writeln!(s, "concurrent = {}", self.concurrent);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_problem() {
        let c = ExperimentConfig::parse("problem = kh\n").unwrap();
        assert_eq!((c.nx, c.ny, c.t_end), (64, 64, 2.0));
        assert_eq!(c.params.mu, 1e-4);
        let r = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(r.problem, Problem::Reconnection);
        assert_eq!(r.controls, vec![1e-2, 1e-4, 1e-6]);
        let f = ExperimentConfig::parse("method = epirk4-fixed").unwrap();
        assert_eq!(f.controls, vec![0.1, 0.05, 0.025]);
    }

    #[test]
    fn resolved_string_round_trips() {
        let text = "problem = reconnection\nnx = 32\nny = 16\nmu = 5e-2\ncontrols = 1e-1, 1e-3\n\
                    snapshots = 0.5,1\nreference_cache = none\nreference_rk4_dt = 0.01\nenergy = full\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.nx, 32);
        assert_eq!(c.controls, vec![0.1, 1e-3]);
        assert!(!c.reference.use_cache);
        let back = ExperimentConfig::parse(&c.to_config_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn bad_input_is_a_config_error() {
        for text in [
            "nx = ten",
            "foo = 1",
            "nx = 4\nnx = 5",
            "controls =",
            "t_end = -1",
            "snapshots = 100",
            "method = cvode",
            "mu = -1",
            "nx = 1",
            "just a line",
            "bc_x = open",
        ] {
            let e = ExperimentConfig::parse(text).unwrap_err();
            assert!(matches!(e, Error::Config(_)), "{text}: {e}");
        }
    }

    #[test]
    fn reference_threshold_tracks_tightest_tolerance() {
        let c = ExperimentConfig::parse("controls = 1e-2,1e-6,1e-4").unwrap();
        assert!((c.reference_threshold() - 1e-5).abs() < 1e-20);
        let f = ExperimentConfig::parse("method = epirk4-fixed").unwrap();
        assert_eq!(f.reference_threshold(), 1e-8);
        let o = ExperimentConfig::parse("reference_threshold = 3e-9").unwrap();
        assert_eq!(o.reference_threshold(), 3e-9);
    }
}
