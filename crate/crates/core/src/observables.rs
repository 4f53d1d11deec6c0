//! Photon-number and dressed-state populations, equal-time correlations and
//! delayed bundle correlations through the quantum regression theorem.

use log::warn;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::{propagate_operator, IntegratorConfig, Liouvillian, SteadyState};
use crate::error::{Error, Result};
use crate::hilbert::{fock_annihilation, DensityMatrix, SpaceDims, StateRef, Tls};
use crate::model::{dressed, Branch, ModelParams};

/// Negative values above this floor are clamped to zero.
pub const NEGATIVE_FLOOR: f64 = 1e-9;
const MEAN_PHOTON_FLOOR: f64 = 1e-12;
const BUNDLE_FLOOR: f64 = 1e-14;

fn population(state: StateRef<'_>, k: usize) -> f64 {
    match state {
        StateRef::Pure(psi) => psi.amplitudes()[k].norm_sqr(),
        StateRef::Mixed(rho) => rho.matrix()[[k, k]].re,
    }
}

/// `P_m = Tr[(|m⟩⟨m| ⊗ I₂) ρ]` for `m = 0..=n_max`.
pub fn photon_distribution<'a>(state: impl Into<StateRef<'a>>) -> Vec<f64> {
    let state = state.into();
    let dims = state.dims();
    (0..=dims.n_max())
        .map(|m| {
            population(state, dims.index(m, Tls::Ground)) + population(state, dims.index(m, Tls::Excited))
        })
        .collect()
}

/// `P_{|m⟩|±⟩}` in the laser-dressed basis of `p`.
pub fn dressed_population<'a>(
    state: impl Into<StateRef<'a>>,
    p: &ModelParams,
    m: usize,
    b: Branch,
) -> Result<f64> {
    let state = state.into();
    let phi = dressed(p)?.state(state.dims(), m, b)?;
    match state {
        StateRef::Pure(psi) => Ok(phi.inner(psi)?.norm_sqr()),
        StateRef::Mixed(rho) => {
            let v = phi.amplitudes();
            Ok(v.iter().zip(rho.matrix().dot(v).iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re)
        }
    }
}

/// `m!/(m−ℓ)!`, the diagonal of `a†ℓaℓ`.
fn falling(m: usize, l: usize) -> f64 {
    if l > m {
        0.0
    } else {
        ((m - l + 1)..=m).map(|k| k as f64).product()
    }
}

/// `⟨a†ℓaℓ⟩` from the photon distribution.
pub fn normally_ordered_moment<'a>(state: impl Into<StateRef<'a>>, l: usize) -> f64 {
    photon_distribution(state).iter().enumerate().map(|(m, p)| p * falling(m, l)).sum()
}

/// `g⁽ℓ⁾(0) = ⟨a†ℓaℓ⟩ / ⟨a†a⟩^ℓ`.
pub fn g_equal_time<'a>(state: impl Into<StateRef<'a>>, l: usize) -> Result<f64> {
    if l < 1 {
        return Err(Error::InvalidParameter("correlation order must be at least 1".into()));
    }
    let state = state.into();
    let n = normally_ordered_moment(state, 1);
    if n <= MEAN_PHOTON_FLOOR {
        return Err(Error::CorrelationUndefined(format!("mean photon number {n:e} vanishes")));
    }
    clamp(normally_ordered_moment(state, l) / n.powi(l as i32))
}

/// `τ_min^[N] = Σ_{m=1..N} 1/(mκ)`.
pub fn tau_min(bundle: usize, kappa: f64) -> Result<f64> {
    if bundle < 1 || !(kappa > 0.0) {
        return Err(Error::InvalidParameter("tau_min needs N ≥ 1 and kappa > 0".into()));
    }
    Ok((1..=bundle).map(|m| 1.0 / (m as f64 * kappa)).sum())
}

fn clamp(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -NEGATIVE_FLOOR {
        warn!("clamping correlation value {v:e} to zero");
        Ok(0.0)
    } else {
        Err(Error::ToleranceViolation(format!("negative correlation value {v:e}")))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrelationKind {
    EqualTime { order: usize },
    DelayedBundle { bundle: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationCurve {
    pub kind: CorrelationKind,
    pub abscissa: Vec<f64>,
    /// `None` marks a masked or failed point.
    pub values: Vec<Option<f64>>,
}

impl CorrelationCurve {
    pub fn value_at(&self, x: f64) -> Option<f64> {
        self.abscissa.iter().position(|a| *a == x).and_then(|k| self.values[k])
    }
}

/// Log-spaced points from `start` to `stop`, both included.
pub fn log_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..points)
        .map(|k| {
            if k + 1 == points {
                stop
            } else {
                (a + (b - a) * k as f64 / (points - 1) as f64).exp()
            }
        })
        .collect()
}

/// Default delay grid: `τ_min^[N]` to `30/κ` in 200 log-spaced points; for
/// `N = 1` zero followed by 199 log-spaced points from `0.01/κ`.
pub fn default_tau_grid(bundle: usize, kappa: f64) -> Result<Vec<f64>> {
    let end = 30.0 / kappa;
    if bundle == 1 {
        let mut g = vec![0.0];
        g.extend(log_grid(0.01 / kappa, end, 199));
        Ok(g)
    } else {
        Ok(log_grid(tau_min(bundle, kappa)?, end, 200))
    }
}

/// Two-time correlator `g_N⁽²⁾(τ)` of `N`-photon bundles for a fixed
/// stationary state.
pub struct BundleCorrelator<'a> {
    l: &'a Liouvillian,
    bundle: usize,
    kappa: f64,
    occupation: f64,
    collapsed: Array2<C64>,
}

impl<'a> BundleCorrelator<'a> {
    pub fn new(l: &'a Liouvillian, ss: &DensityMatrix, bundle: usize, kappa: f64) -> Result<Self> {
        if bundle < 1 {
            return Err(Error::InvalidParameter("bundle size must be at least 1".into()));
        }
        l.dims().check(&ss.dims())?;
        let occupation = normally_ordered_moment(ss, bundle);
        if occupation <= BUNDLE_FLOOR {
            return Err(Error::BundleOccupationTooSmall { value: occupation });
        }
        let an = fock_annihilation(l.dims()).pow(bundle as u32).into_matrix();
        let and = an.t().mapv(|z| z.conj());
        let collapsed = an.dot(ss.matrix()).dot(&and);
        Ok(Self { l, bundle, kappa, occupation, collapsed })
    }

    pub fn occupation(&self) -> f64 {
        self.occupation
    }

    pub fn bundle(&self) -> usize {
        self.bundle
    }

    pub fn tau_min(&self) -> f64 {
        tau_min(self.bundle, self.kappa).unwrap_or(0.0)
    }

    /// Raw values on an ascending grid, including points below `τ_min`.
    pub fn evaluate(&self, taus: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
        let mut grid = Vec::with_capacity(taus.len() + 1);
        let prepend = taus.first().is_none_or(|t| *t != 0.0);
        if prepend {
            grid.push(0.0);
        }
        grid.extend_from_slice(taus);
        let xs = propagate_operator(self.l, &self.collapsed, &grid, cfg)?;
        let dims = self.l.dims();
        let skip = usize::from(prepend);
        xs.iter()
            .skip(skip)
            .map(|x| clamp(bundle_moment(dims, x, self.bundle) / (self.occupation * self.occupation)))
            .collect()
    }

    /// Curve with the window below `τ_min^[N]` masked for `N ≥ 2`.
    pub fn curve(&self, taus: &[f64], cfg: &IntegratorConfig) -> Result<CorrelationCurve> {
        let raw = self.evaluate(taus, cfg)?;
        let cut = if self.bundle >= 2 { self.tau_min() * (1.0 - 1e-12) } else { f64::NEG_INFINITY };
        Ok(CorrelationCurve {
            kind: CorrelationKind::DelayedBundle { bundle: self.bundle },
            abscissa: taus.to_vec(),
            values: taus.iter().zip(raw).map(|(t, v)| (*t >= cut).then_some(v)).collect(),
        })
    }
}

/// `Tr(a†ᴺaᴺ X)` for an arbitrary operator `X`.
fn bundle_moment(dims: SpaceDims, x: &Array2<C64>, bundle: usize) -> f64 {
    (0..=dims.n_max())
        .map(|m| {
            let w = falling(m, bundle);
            w * (x[[dims.index(m, Tls::Ground), dims.index(m, Tls::Ground)]].re
                + x[[dims.index(m, Tls::Excited), dims.index(m, Tls::Excited)]].re)
        })
        .sum()
}

/// `g_N⁽²⁾(τ)` on `taus` from the stationary state of `l`.
pub fn g2_bundle_delayed(
    l: &Liouvillian,
    p: &ModelParams,
    ss: &SteadyState,
    bundle: usize,
    taus: &[f64],
    cfg: &IntegratorConfig,
) -> Result<CorrelationCurve> {
    BundleCorrelator::new(l, &ss.rho, bundle, p.kappa)?.curve(taus, cfg)
}
