//! Explicit Runge-Kutta integrators for linear complex ODEs `ẏ = f(t, y)`.

use ndarray::{Array1, Zip};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    FixedRk4,
    Adaptive,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    /// Fixed step. `None` picks `0.01 / rate_scale` for the problem at hand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { scheme: Scheme::FixedRk4, dt: None, rel_tol: 1e-8, abs_tol: 1e-10 }
    }
}

impl IntegratorConfig {
    pub fn adaptive() -> Self {
        Self { scheme: Scheme::Adaptive, ..Self::default() }
    }

    pub fn fixed(dt: f64) -> Self {
        Self { scheme: Scheme::FixedRk4, dt: Some(dt), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
            }
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Step used by the fixed scheme for a generator whose spectral radius is
    /// bounded by `rate_scale`.
    pub fn step_for(&self, rate_scale: f64) -> f64 {
        self.dt.unwrap_or_else(|| 0.01 / rate_scale.max(1e-12))
    }
}

pub(crate) fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] >= w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("time grid must be finite and non-decreasing".into()));
    }
    Ok(())
}

fn axpy(out: &mut Array1<C64>, y: &Array1<C64>, h: f64, k: &Array1<C64>) {
    Zip::from(out).and(y).and(k).for_each(|o, &a, &b| *o = a + b * h);
}

/// Classic RK4 on a grid; returns y at every grid point (the first is `y0`).
pub fn integrate_fixed<F>(mut f: F, y0: Array1<C64>, t_grid: &[f64], dt: f64) -> Result<Vec<Array1<C64>>>
where
    F: FnMut(f64, &Array1<C64>, &mut Array1<C64>),
{
    check_grid(t_grid)?;
    let n = y0.len();
    let mut out = Vec::with_capacity(t_grid.len());
    let (mut k1, mut k2, mut k3, mut k4) =
        (Array1::zeros(n), Array1::zeros(n), Array1::zeros(n), Array1::zeros(n));
    let mut tmp = Array1::zeros(n);
    let mut y = y0;
    out.push(y.clone());
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        if span == 0.0 {
            out.push(y.clone());
            continue;
        }
        let steps = (span / dt).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for s in 0..steps {
            let t = w[0] + s as f64 * h;
            f(t, &y, &mut k1);
            axpy(&mut tmp, &y, 0.5 * h, &k1);
            f(t + 0.5 * h, &tmp, &mut k2);
            axpy(&mut tmp, &y, 0.5 * h, &k2);
            f(t + 0.5 * h, &tmp, &mut k3);
            axpy(&mut tmp, &y, h, &k3);
            f(t + h, &tmp, &mut k4);
            Zip::from(&mut y)
                .and(&k1)
                .and(&k2)
                .and(&k3)
                .and(&k4)
                .for_each(|y, &a, &b, &c, &d| *y += (a + (b + c) * 2.0 + d) * (h / 6.0));
        }
        out.push(y.clone());
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 50_000_000;

/// Adaptive Dormand–Prince 5(4) with an RMS mixed error norm.
pub fn integrate_adaptive<F>(
    mut f: F,
    y0: Array1<C64>,
    t_grid: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Vec<Array1<C64>>>
where
    F: FnMut(f64, &Array1<C64>, &mut Array1<C64>),
{
    check_grid(t_grid)?;
    let n = y0.len();
    let mut k: Vec<Array1<C64>> = (0..7).map(|_| Array1::zeros(n)).collect();
    let mut stage = Array1::<C64>::zeros(n);
    let mut y_new = Array1::<C64>::zeros(n);
    let mut y = y0;
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y.clone());

    let mut t = t_grid[0];
    let mut h = {
        f(t, &y, &mut k[0]);
        let ny = y.iter().map(|z| z.norm()).fold(0.0, f64::max).max(abs_tol);
        let nf = k[0].iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        (0.01 * ny / nf).min(t_grid.last().unwrap() - t).max(1e-12)
    };
    let mut fsal_valid = true;
    let mut steps = 0usize;

    for &target in &t_grid[1..] {
        while t < target {
            if steps > MAX_STEPS {
                return Err(Error::SolverFailure("adaptive integrator exceeded step budget".into()));
            }
            steps += 1;
            let last = t + h >= target;
            let hs = if last { target - t } else { h };
            if !fsal_valid {
                f(t, &y, &mut k[0]);
            }
            for s in 1..7 {
                stage.assign(&y);
                for (j, a) in A[s].iter().enumerate().take(s) {
                    if *a != 0.0 {
                        stage.scaled_add(C64::new(a * hs, 0.0), &k[j]);
                    }
                }
                f(t + C[s] * hs, &stage, &mut k[s]);
            }
            // Stage 7 is evaluated at the 5th-order solution (FSAL).
            y_new.assign(&stage);
            let mut err_acc = 0.0;
            for i in 0..n {
                let mut e = C64::new(0.0, 0.0);
                for s in 0..7 {
                    e += k[s][i] * (B5[s] - B4[s]);
                }
                let e = e * hs;
                let sc = abs_tol + rel_tol * y[i].norm().max(y_new[i].norm());
                err_acc += (e.norm() / sc).powi(2);
            }
            let err = (err_acc / n as f64).sqrt();
            if err <= 1.0 || hs < 1e-14 * (1.0 + t.abs()) {
                t = if last { target } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = k.split_at_mut(6);
                std::mem::swap(&mut first[0], &mut rest[0]);
                fsal_valid = true;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                if !last {
                    h = hs * fac;
                } else {
                    h = h.max(hs * fac.min(1.0));
                }
            } else {
                fsal_valid = true;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            if !h.is_finite() || y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::SolverFailure("non-finite state in adaptive integrator".into()));
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// Dispatch on the configured scheme.
pub fn integrate<F>(
    f: F,
    y0: Array1<C64>,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
    rate_scale: f64,
) -> Result<Vec<Array1<C64>>>
where
    F: FnMut(f64, &Array1<C64>, &mut Array1<C64>),
{
    cfg.validate()?;
    match cfg.scheme {
        Scheme::FixedRk4 => integrate_fixed(f, y0, t_grid, cfg.step_for(rate_scale)),
        Scheme::Adaptive => integrate_adaptive(f, y0, t_grid, cfg.rel_tol, cfg.abs_tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_osc(t_grid: &[f64], cfg: &IntegratorConfig) -> Vec<Array1<C64>> {
        let lam = C64::new(-0.3, 2.0);
        integrate(
            |_, y, dy| dy.assign(&y.mapv(|z| z * lam)),
            Array1::from(vec![C64::new(1.0, 0.0)]),
            t_grid,
            cfg,
            lam.norm(),
        )
        .unwrap()
    }

    #[test]
    fn both_schemes_hit_exponential() {
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.25).collect();
        let lam = C64::new(-0.3, 2.0);
        for cfg in [IntegratorConfig::fixed(1e-3), IntegratorConfig::adaptive()] {
            let ys = decay_osc(&grid, &cfg);
            for (t, y) in grid.iter().zip(ys.iter()) {
                let exact = (lam * t).exp();
                assert!((y[0] - exact).norm() < 1e-8, "{cfg:?} t={t}");
            }
        }
    }

    #[test]
    fn time_dependent_rhs() {
        // ẏ = i t y  ⇒  y = exp(i t²/2)
        let grid = [0.0, 1.0, 2.0];
        for cfg in [IntegratorConfig::fixed(1e-3), IntegratorConfig::adaptive()] {
            let ys = integrate(
                |t, y, dy| dy.assign(&y.mapv(|z| z * C64::new(0.0, t))),
                Array1::from(vec![C64::new(1.0, 0.0)]),
                &grid,
                &cfg,
                2.0,
            )
            .unwrap();
            assert!((ys[2][0] - C64::new(0.0, 2.0).exp()).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_grid_and_config() {
        let f = |_: f64, y: &Array1<C64>, dy: &mut Array1<C64>| dy.assign(y);
        let y0 = Array1::from(vec![C64::new(1.0, 0.0)]);
        assert!(integrate_fixed(f, y0.clone(), &[1.0, 0.0], 0.1).is_err());
        let cfg = IntegratorConfig { dt: Some(-1.0), ..Default::default() };
        assert!(integrate(f, y0, &[0.0, 1.0], &cfg, 1.0).is_err());
    }

    #[test]
    fn repeated_grid_points_are_allowed() {
        let ys = decay_osc(&[0.0, 0.5, 0.5, 1.0], &IntegratorConfig::adaptive());
        assert_eq!(ys.len(), 4);
        assert_eq!(ys[1], ys[2]);
    }
}
