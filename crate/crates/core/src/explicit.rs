//! Classical fourth-order Runge-Kutta, used as an independent reference integrator.

use std::time::Instant;

use crate::epirk::StepStats;
use crate::error::{Error, Result};
use crate::ops::{check_dim, RhsFunction};

/// One classical RK4 step of size `h`.
pub fn rk4_step<R: RhsFunction + ?Sized>(rhs: &R, y: &[f64], h: f64) -> Result<Vec<f64>> {
    check_dim("state", y.len(), rhs.dim())?;
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    rhs.eval(y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs.eval(&tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs.eval(&tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs.eval(&tmp, &mut k4)?;
    for i in 0..n {
        tmp[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
    }
    if let Some(index) = tmp.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(tmp)
}

/// Fixed-step RK4 from `t0` to `t_end`; the last step is shortened to land on `t_end`.
pub fn rk4_fixed<R: RhsFunction + ?Sized>(
    rhs: &R,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    h: f64,
) -> Result<(Vec<f64>, StepStats)> {
    check_dim("initial state", y0.len(), rhs.dim())?;
    if !(h > 0.0) || !(t_end > t0) {
        return Err(Error::InvalidArgument(format!(
            "need h > 0 and t_end > t0, got h = {h}, [{t0}, {t_end}]"
        )));
    }
    let start = Instant::now();
    let steps = ((t_end - t0) / h - 1e-9).ceil().max(1.0) as usize;
    let mut y = y0.to_vec();
    let mut t = t0;
    for k in 0..steps {
        let h_step = if k + 1 == steps { t_end - t } else { h };
        y = rk4_step(rhs, &y, h_step)?;
        t += h_step;
    }
    let stats = StepStats {
        accepted: steps,
        rhs_evals: 4 * steps,
        wall_time: start.elapsed(),
        ..StepStats::default()
    };
    Ok((y, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::FnRhs;

    #[test]
    fn exponential_decay_is_fourth_order() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = -y[0]);
        let err = |h: f64| (rk4_fixed(&f, &[1.0], 0.0, 1.0, h).unwrap().0[0] - (-1.0_f64).exp()).abs();
        let ratios: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| err(h) / err(h / 2.0)).collect();
        for r in ratios {
            assert!((r - 16.0).abs() < 1.0, "{r}");
        }
    }

    #[test]
    fn single_step_matches_taylor_polynomial() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = 2.0 * y[0]);
        let z: f64 = 0.3 * 2.0;
        let want = 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0;
        assert!((rk4_step(&f, &[1.0], 0.3).unwrap()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = FnRhs::new(1, |y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0]);
        assert!(matches!(rk4_fixed(&f, &[1e200], 0.0, 1.0, 0.5), Err(Error::NonFinite { .. })));
    }
}
