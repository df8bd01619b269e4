use std::str::FromStr;
use std::time::Instant;

use log::debug;

use crate::error::{Error, Result};
use crate::krylov::KrylovConfig;
use crate::ops::RhsFunction;

use super::{epirk4_step, epirk5p1_step, weighted_rms, StepOutput, StepStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    EpiRK4,
    EpiRK5P1,
}

impl Method {
    pub fn step<R: RhsFunction + ?Sized>(
        self,
        rhs: &R,
        y: &[f64],
        h: f64,
        tol: f64,
        cfg: &KrylovConfig,
    ) -> Result<StepOutput> {
        match self {
            Method::EpiRK4 => epirk4_step(rhs, y, h, tol, cfg),
            Method::EpiRK5P1 => epirk5p1_step(rhs, y, h, tol, cfg),
        }
    }

    pub fn projections_per_step(self) -> usize {
        match self {
            Method::EpiRK4 => 2,
            Method::EpiRK5P1 => 3,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epirk4" => Ok(Method::EpiRK4),
            "epirk5p1" => Ok(Method::EpiRK5P1),
            _ => Err(Error::Config(format!("unknown EpiRK method '{s}'"))),
        }
    }
}

/// Accept/reject step-size control for EpiRK5P1.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    /// Shared absolute, relative and Krylov tolerance.
    pub tol: f64,
    pub safety: f64,
    /// Order of the error estimate; the update exponent is `1 / (order + 1)`.
    pub order: u32,
    pub h_min: f64,
    pub h_max: f64,
    /// First trial step; defaults to a hundredth of the interval.
    pub h0: Option<f64>,
    pub min_factor: f64,
    pub max_factor: f64,
    /// Factor applied after a step fails outright (Krylov or admissibility failure).
    pub failure_factor: f64,
    pub max_steps: usize,
    pub krylov: KrylovConfig,
}

impl StepController {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            safety: 0.9,
            order: 4,
            h_min: 1e-12,
            h_max: f64::INFINITY,
            h0: None,
            min_factor: 0.2,
            max_factor: 5.0,
            failure_factor: 0.5,
            max_steps: 1_000_000,
            krylov: KrylovConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tol)));
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_max) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < h_min < h_max, got {} and {}",
                self.h_min, self.h_max
            )));
        }
        if !(0.0 < self.min_factor && self.min_factor <= 1.0 && self.max_factor >= 1.0) {
            return Err(Error::InvalidArgument("step growth clamp must bracket 1".into()));
        }
        if let Some(h0) = self.h0 {
            if !(h0 > 0.0) {
                return Err(Error::InvalidArgument(format!("initial step must be positive, got {h0}")));
            }
        }
        self.krylov.validate()
    }

    fn factor(&self, err: f64) -> f64 {
        let raw = if err > 0.0 {
            self.safety * err.powf(-1.0 / (self.order as f64 + 1.0))
        } else {
            self.max_factor
        };
        raw.clamp(self.min_factor, self.max_factor)
    }
}

fn retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::KrylovConvergence { .. } | Error::Inadmissible { .. } | Error::NonFinite { .. } | Error::Numeric(_)
    )
}

fn check_interval(y0_len: usize, dim: usize, t0: f64, t_end: f64) -> Result<()> {
    if y0_len != dim {
        return Err(Error::InvalidArgument(format!(
            "initial state has dimension {y0_len}, expected {dim}"
        )));
    }
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("need t_end > t0, got [{t0}, {t_end}]")));
    }
    Ok(())
}

/// Adaptive EpiRK5P1 integration from `t0` to `t_end`.
pub fn integrate_adaptive<R: RhsFunction + ?Sized>(
    rhs: &R,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    ctl: &StepController,
) -> Result<(Vec<f64>, StepStats)> {
    check_interval(y0.len(), rhs.dim(), t0, t_end)?;
    ctl.validate()?;
    let start = Instant::now();
    let span = t_end - t0;
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut h = ctl.h0.unwrap_or(span / 100.0).min(ctl.h_max);
    let mut last_rejected = false;

    while t < t_end {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(Error::Numeric(format!(
                "step budget of {} exhausted at t = {t:e}",
                ctl.max_steps
            )));
        }
        if h < ctl.h_min {
            return Err(Error::StepSizeUnderflow {
                t,
                h,
                h_min: ctl.h_min,
                accepted: stats.accepted,
                rejected: stats.rejected,
            });
        }
        let clipped = t + h >= t_end - 1e-12 * span;
        let h_step = if clipped { t_end - t } else { h };

        match epirk5p1_step(rhs, &y, h_step, ctl.tol, &ctl.krylov) {
            Ok(out) => {
                stats.merge(&out.stats);
                let err_vec = out.error.as_deref().expect("EpiRK5P1 provides an error estimate");
                let err = weighted_rms(err_vec, &y, &out.y, ctl.tol, ctl.tol);
                let admissible = out.y.iter().all(|v| v.is_finite()) && rhs.check_state(&out.y).is_ok();
                if err <= 1.0 && admissible {
                    stats.accepted += 1;
                    t = if clipped { t_end } else { t + h_step };
                    y = out.y;
                    let mut f = ctl.factor(err);
                    if last_rejected {
                        f = f.min(1.0);
                    }
                    // A clipped final step says nothing about the natural step size.
                    let base = if clipped { h } else { h_step };
                    h = (base * f).min(ctl.h_max);
                    last_rejected = false;
                } else {
                    stats.rejected += 1;
                    debug!("rejected step at t = {t:e}, h = {h_step:e}, err = {err:e}");
                    h = if admissible {
                        h_step * ctl.factor(err).min(1.0 - 1e-3)
                    } else {
                        h_step * ctl.failure_factor
                    };
                    last_rejected = true;
                }
            }
            Err(e) if retryable(&e) => {
                stats.rejected += 1;
                debug!("step failed at t = {t:e}, h = {h_step:e}: {e}");
                h = h_step * ctl.failure_factor;
                last_rejected = true;
            }
            Err(e) => return Err(e),
        }
    }
    stats.wall_time = start.elapsed();
    Ok((y, stats))
}

/// Constant-step integration; the last step is clipped to land on `t_end`.
pub fn integrate_fixed<R: RhsFunction + ?Sized>(
    method: Method,
    rhs: &R,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    h: f64,
    tol: f64,
    cfg: &KrylovConfig,
) -> Result<(Vec<f64>, StepStats)> {
    check_interval(y0.len(), rhs.dim(), t0, t_end)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
    }
    let start = Instant::now();
    let span = t_end - t0;
    let steps = ((span / h) - 1e-9).ceil().max(1.0) as usize;
    let mut stats = StepStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    for k in 0..steps {
        let h_step = if k + 1 == steps { t_end - t } else { h };
        let out = method.step(rhs, &y, h_step, tol, cfg)?;
        stats.merge(&out.stats);
        stats.accepted += 1;
        y = out.y;
        t += h_step;
    }
    stats.wall_time = start.elapsed();
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::FnRhs;

    #[test]
    fn zero_rhs_takes_one_clipped_step() {
        let f = FnRhs::new(2, |_: &[f64], o: &mut [f64]| o.fill(0.0));
        for tol in [1e-2, 1e-8] {
            let mut ctl = StepController::new(tol);
            ctl.h0 = Some(10.0);
            let (y, stats) = integrate_adaptive(&f, &[1.0, 2.0], 0.0, 3.0, &ctl).unwrap();
            assert_eq!(y, vec![1.0, 2.0]);
            assert_eq!(stats.accepted, 1);
            assert_eq!(stats.rejected, 0);
        }
    }

    #[test]
    fn fixed_step_count_and_clipping() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = -y[0]);
        let (y, stats) =
            integrate_fixed(Method::EpiRK4, &f, &[1.0], 0.0, 1.0, 0.3, 1e-10, &KrylovConfig::default())
                .unwrap();
        assert_eq!(stats.accepted, 4);
        assert_eq!(stats.projections, 8);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn underflow_reported() {
        // Finite-time blow-up at t = 1.
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0]);
        let mut ctl = StepController::new(1e-6);
        ctl.h_min = 1e-6;
        match integrate_adaptive(&f, &[1.0], 0.0, 2.0, &ctl) {
            Err(Error::StepSizeUnderflow { t, .. }) => assert!(t < 1.0),
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    struct Picky {
        checks: std::cell::Cell<usize>,
    }

    impl RhsFunction for Picky {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, _: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = -1.0;
            Ok(())
        }
        fn check_state(&self, y: &[f64]) -> Result<()> {
            let n = self.checks.get();
            self.checks.set(n + 1);
            if n == 0 {
                return Err(Error::Inadmissible { i: 0, j: 0, what: "density", value: y[0] });
            }
            Ok(())
        }
    }

    #[test]
    fn inadmissible_candidate_rejected() {
        let f = Picky { checks: std::cell::Cell::new(0) };
        let mut ctl = StepController::new(1e-6);
        ctl.h0 = Some(1.0);
        let (y, stats) = integrate_adaptive(&f, &[1.0], 0.0, 0.5, &ctl).unwrap();
        assert_eq!(stats.rejected, 1);
        // The retry uses the failure factor: two quarter-length steps.
        assert_eq!(stats.accepted, 2);
        assert!((y[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bad_arguments() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = y[0]);
        let ctl = StepController::new(1e-6);
        assert!(integrate_adaptive(&f, &[1.0], 1.0, 0.0, &ctl).is_err());
        assert!(integrate_adaptive(&f, &[1.0, 2.0], 0.0, 1.0, &ctl).is_err());
        assert!(integrate_adaptive(&f, &[1.0], 0.0, 1.0, &StepController::new(0.0)).is_err());
        assert!("rk45".parse::<Method>().is_err());
        assert_eq!("EpiRK4".parse::<Method>().unwrap(), Method::EpiRK4);
    }
}
