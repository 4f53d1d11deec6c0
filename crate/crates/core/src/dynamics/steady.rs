use log::{debug, warn};
use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, ReciprocalConditionNum, Solve};
use num_complex::Complex64 as C64;
use serde::Serialize;

use super::integrate::integrate_adaptive;
use super::liouvillian::{unvectorize, vectorize, Liouvillian};
use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;

/// Below this reciprocal condition number the bordered system is treated as
/// having more than one stationary state.
pub const DEGENERACY_RCOND: f64 = 1e-13;
pub const TAIL_LIMIT: f64 = 1e-8;
const RELATIVE_RESIDUAL: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    DirectSolve,
    TimeIntegration,
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `‖L(ρ)‖_F / ‖L‖_F`.
    pub residual: f64,
    pub rcond: f64,
    /// Population of the top Fock level.
    pub tail: f64,
    pub method: SteadyMethod,
}

impl SteadyState {
    pub fn truncation_ok(&self) -> bool {
        self.tail < TAIL_LIMIT
    }
}

fn relative_residual(l: &Liouvillian, x: &Array1<C64>) -> f64 {
    let mut y = Array1::zeros(x.len());
    l.apply_vec(x, &mut y);
    let r = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    r / l.norm_fro()
}

fn finish(l: &Liouvillian, x: Array1<C64>) -> Result<DensityMatrix> {
    let d = l.dims().total_dim();
    let m = unvectorize(&x, d);
    let m = (&m + &m.t().mapv(|z| z.conj())).mapv(|z| z * 0.5);
    let tr = m.diag().sum();
    DensityMatrix::from_matrix(l.dims(), m.mapv(|z| z / tr))
}

/// Stationary state without the truncation check; the tail population is
/// reported so that scans can flag points instead of aborting.
pub fn solve_steady_state(l: &Liouvillian) -> Result<SteadyState> {
    if !l.has_dissipation() {
        return Err(Error::InvalidParameter(
            "steady state needs kappa > 0 or gamma > 0".into(),
        ));
    }
    let d = l.dims().total_dim();
    // Coherences outside the population block decouple from the trace and
    // vanish in a unique stationary state. If that block is not closed
    // under the dynamics, degeneracy still shows up in the condition number.
    let block = l.population_block();
    let block = block.indices();
    let pos = |k: usize| block.binary_search(&k).expect("populations lie in the block");
    let full = l.matrix();
    let mut a = Array2::<C64>::zeros((block.len(), block.len()));
    for (i, &bi) in block.iter().enumerate() {
        for (j, &bj) in block.iter().enumerate() {
            a[[i, j]] = full[[bi, bj]];
        }
    }
    // The trace functional replaces the first population equation, which is
    // redundant.
    let first = pos(0);
    a.row_mut(first).fill(C64::new(0.0, 0.0));
    for k in 0..d {
        a[[first, pos(k + k * d)]] = C64::new(1.0, 0.0);
    }
    let mut b = Array1::<C64>::zeros(block.len());
    b[first] = C64::new(1.0, 0.0);

    // An exactly zero pivot surfaces as a LAPACK failure rather than a tiny
    // condition number.
    let lu = match a.clone().factorize_into() {
        Ok(lu) => lu,
        Err(ndarray_linalg::error::LinalgError::Lapack(_)) => return Err(Error::DegenerateSteadyState { rcond: 0.0 }),
        Err(e) => return Err(e.into()),
    };
    let rcond = lu.rcond()?;
    debug!("steady state: block {} of {}, rcond = {rcond:e}", block.len(), d * d);
    if rcond < DEGENERACY_RCOND {
        return Err(Error::DegenerateSteadyState { rcond });
    }
    let mut y = lu.solve(&b)?;
    // Iterative refinement against the bordered system.
    for _ in 0..2 {
        let r = &b - &a.dot(&y);
        y = y + lu.solve(&r)?;
    }
    let mut x = Array1::<C64>::zeros(d * d);
    for (i, &bi) in block.iter().enumerate() {
        x[bi] = y[i];
    }
    let rho = finish(l, x)?;
    let residual = relative_residual(l, &vectorize(rho.matrix()));
    if residual < RELATIVE_RESIDUAL {
        let tail = rho.tail_population();
        return Ok(SteadyState { rho, residual, rcond, tail, method: SteadyMethod::DirectSolve });
    }

    warn!("direct steady-state solve left residual {residual:e}; integrating instead");
    let min_rate = l
        .channels()
        .iter()
        .map(|c| c.rate)
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min);
    let t_end = 50.0 / min_rate;
    let traj = integrate_adaptive(
        |_, y, dy| l.apply_vec(y, dy),
        vectorize(rho.matrix()),
        &[0.0, t_end],
        1e-10,
        1e-13,
    )?;
    let rho = finish(l, traj.into_iter().last().expect("two samples"))?;
    let residual = relative_residual(l, &vectorize(rho.matrix()));
    if residual >= RELATIVE_RESIDUAL {
        return Err(Error::SolverFailure(format!(
            "steady-state residual {residual:e} after time integration"
        )));
    }
    let tail = rho.tail_population();
    Ok(SteadyState { rho, residual, rcond, tail, method: SteadyMethod::TimeIntegration })
}

/// Stationary state with the full set of checks, including truncation.
pub fn steady_state(l: &Liouvillian) -> Result<SteadyState> {
    let ss = solve_steady_state(l)?;
    if !ss.truncation_ok() {
        return Err(Error::Truncation { tail: ss.tail, n_max: l.dims().n_max() });
    }
    ss.rho.validate(1e-12, 1e-10, 1e-8)?;
    Ok(ss)
}
