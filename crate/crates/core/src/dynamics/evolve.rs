use ndarray::Array2;
use num_complex::Complex64 as C64;

use super::integrate::{integrate, IntegratorConfig};
use super::liouvillian::{unvectorize, vectorize, Liouvillian};
use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, Operator, StateVector};

pub const NORM_DRIFT_LIMIT: f64 = 1e-5;
pub const HERMITICITY_TOL: f64 = 1e-9;
pub const TRACE_TOL: f64 = 1e-7;
pub const EIGENVALUE_FLOOR: f64 = 1e-7;
/// Raw anti-Hermitian part tolerated before projection. Near stationarity the
/// adaptive stepper sits at its stability boundary and stiff modes carry
/// errors of order `rel_tol`; anything far above that is a real failure.
pub const RAW_HERMITICITY_LIMIT: f64 = 1e-6;

fn gershgorin(m: &Array2<C64>) -> f64 {
    m.rows().into_iter().map(|r| r.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// `ψ(t_k)` under `iψ̇ = Hψ`. The state is never renormalized; a norm drift
/// above [`NORM_DRIFT_LIMIT`] means the step was too coarse.
pub fn schrodinger_evolve(
    h: &Operator,
    psi0: &StateVector,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<StateVector>> {
    h.dims().check(&psi0.dims())?;
    let herm = h.hermiticity_error();
    if herm > 1e-12 {
        return Err(Error::InvalidParameter(format!("Hamiltonian not Hermitian ({herm:e})")));
    }
    if !psi0.is_normalized() {
        return Err(Error::InvalidParameter("initial state not normalized".into()));
    }
    let m = h.matrix().mapv(|z| z * C64::new(0.0, -1.0));
    let scale = gershgorin(&m);
    let ys = integrate(
        |_, y, dy| ndarray::linalg::general_mat_vec_mul(C64::new(1.0, 0.0), &m, y, C64::new(0.0, 0.0), dy),
        psi0.amplitudes().clone(),
        t_grid,
        cfg,
        scale,
    )?;
    ys.into_iter()
        .map(|y| {
            let drift = (y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() - 1.0).abs();
            if drift > NORM_DRIFT_LIMIT {
                return Err(Error::StepTooCoarse { drift });
            }
            StateVector::from_amplitudes(h.dims(), y)
        })
        .collect()
}

/// Raw propagation of an arbitrary operator `X(τ) = e^{Lτ}X(0)`, without the
/// density-matrix checks. Used by the regression theorem.
pub fn propagate_operator(
    l: &Liouvillian,
    x0: &Array2<C64>,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<Array2<C64>>> {
    let d = l.dims().total_dim();
    if x0.dim() != (d, d) {
        return Err(Error::DimensionMismatch { expected: d, found: x0.nrows() });
    }
    let x = vectorize(x0);
    let block = l.block_for(x.iter().enumerate().filter(|(_, v)| v.norm() != 0.0).map(|(k, _)| k));
    let ys = integrate(|_, y, dy| block.apply_vec(y, dy), block.gather(&x), t_grid, cfg, l.rate_scale())?;
    Ok(ys.iter().map(|y| unvectorize(&block.scatter(y, d * d), d)).collect())
}

/// `ρ(t_k)` under the master equation. Each sample is projected onto its
/// Hermitian part and checked for unit trace and positivity.
pub fn lindblad_evolve(
    l: &Liouvillian,
    rho0: &DensityMatrix,
    t_grid: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<DensityMatrix>> {
    l.dims().check(&rho0.dims())?;
    rho0.validate(HERMITICITY_TOL, TRACE_TOL, EIGENVALUE_FLOOR)?;
    let raw = propagate_operator(l, rho0.matrix(), t_grid, cfg)?;
    raw.into_iter()
        .zip(t_grid)
        .map(|(m, t)| {
            let raw_herm = hermiticity_gap(&m);
            if raw_herm > RAW_HERMITICITY_LIMIT {
                return Err(Error::ToleranceViolation(format!(
                    "t = {t}: propagated state lost Hermiticity ({raw_herm:e})"
                )));
            }
            let sym = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
            let rho = DensityMatrix::from_matrix(l.dims(), sym)?;
            rho.validate(HERMITICITY_TOL, TRACE_TOL, EIGENVALUE_FLOOR).map_err(|e| match e {
                Error::ToleranceViolation(msg) => Error::ToleranceViolation(format!("t = {t}: {msg}")),
                other => other,
            })?;
            Ok(rho)
        })
        .collect()
}

fn hermiticity_gap(m: &Array2<C64>) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// Expectation value series `Tr(O ρ(t_k))`.
pub fn expectation_series(op: &Operator, states: &[DensityMatrix]) -> Vec<f64> {
    states.iter().map(|r| crate::hilbert::trace_product(op.matrix(), r.matrix()).re).collect()
}

/// `|⟨φ|ψ(t_k)⟩|²` series.
pub fn overlap_series(phi: &StateVector, states: &[StateVector]) -> Result<Vec<f64>> {
    states.iter().map(|s| Ok(phi.inner(s)?.norm_sqr())).collect()
}
