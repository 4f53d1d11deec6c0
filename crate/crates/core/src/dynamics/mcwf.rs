//! Quantum-jump unraveling of the master equation.
//!
//! Between jumps the unnormalized state evolves under
//! `H_eff = H_I − (i/2) Σ_c r_c c†c` with exact step propagators. Time is an
//! integer lattice of ticks, `dt / 2^LEVELS` each, so a jump located by
//! bisection to one tick can be followed by power-of-two steps that return
//! to the coarse grid without rounding drift.

use log::debug;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::liouvillian::{Channel, CollapseChannel, Liouvillian};
use super::propagator::expm;
use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceDims, StateVector};
use crate::model::{dressed, Branch, ModelParams};

/// Bisection depth: jump times are resolved to `dt / 128`.
pub const LEVELS: u32 = 7;
const TICKS_PER_STEP: u64 = 1 << LEVELS;
/// Smallest acceptable no-jump probability over one coarse step. Below it a
/// single step may hide several emissions.
pub const MIN_STEP_SURVIVAL: f64 = 0.5;

#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub time: f64,
    pub channel: Channel,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub times: Vec<f64>,
    /// Normalized state at each sample time.
    pub states: Vec<StateVector>,
    pub jumps: Vec<Jump>,
}

impl TrajectoryRecord {
    pub fn cavity_jump_times(&self) -> Vec<f64> {
        self.jumps.iter().filter(|j| j.channel == Channel::Cavity).map(|j| j.time).collect()
    }

    /// `P_{|m⟩|±⟩}(t)` at every sample.
    pub fn dressed_populations(&self, p: &ModelParams, m: usize, b: Branch) -> Result<Vec<f64>> {
        let phi = dressed(p)?.state(p.dims, m, b)?;
        self.states.iter().map(|s| Ok(phi.inner(s)?.norm_sqr())).collect()
    }
}

pub struct TrajectorySimulator {
    dims: SpaceDims,
    channels: Vec<CollapseChannel>,
    dt: f64,
    /// `U_k = exp(−i H_eff dt / 2^k)` for `k = 0..=LEVELS`.
    steps: Vec<Array2<C64>>,
}

impl TrajectorySimulator {
    /// `dt` is the coarse step; it must divide every requested sample interval.
    pub fn new(l: &Liouvillian, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        let dims = l.dims();
        let mut h_eff = l.hamiltonian().matrix().clone();
        for ch in l.channels() {
            let cdc = ch.op.dagger().matmul(&ch.op)?.into_matrix();
            h_eff = h_eff - cdc.mapv(|z| z * C64::new(0.0, 0.5 * ch.rate));
        }
        let steps = (0..=LEVELS)
            .map(|k| {
                let h = dt / (1u64 << k) as f64;
                expm(&h_eff.mapv(|z| z * C64::new(0.0, -h)))
            })
            .collect();
        Ok(Self { dims, channels: l.channels().to_vec(), dt, steps })
    }

    /// Default coarse step: a tenth of the fastest decay time, capped by the
    /// sample interval and rounded so that it divides it.
    pub fn default_step(l: &Liouvillian, sample_dt: f64) -> f64 {
        let n_max = l.dims().n_max() as f64;
        let max_decay = l
            .channels()
            .iter()
            .map(|c| match c.channel {
                Channel::Cavity => c.rate * n_max,
                Channel::Tls => c.rate,
            })
            .sum::<f64>();
        let target = if max_decay > 0.0 { 0.1 / max_decay } else { sample_dt };
        sample_dt / (sample_dt / target).ceil().max(1.0)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn tick_time(&self, ticks: u64) -> f64 {
        ticks as f64 * self.dt / TICKS_PER_STEP as f64
    }

    /// Propagator for `2^e` ticks, `e ≤ LEVELS`.
    fn step(&self, e: u32) -> &Array2<C64> {
        &self.steps[(LEVELS - e) as usize]
    }

    fn draw_threshold(rng: &mut ChaCha8Rng) -> f64 {
        loop {
            let r: f64 = rng.random();
            if r > 0.0 {
                return r;
            }
        }
    }

    pub fn run(&self, psi0: &StateVector, t_final: f64, sample_dt: f64, seed: u64) -> Result<TrajectoryRecord> {
        self.dims.check(&psi0.dims())?;
        if !psi0.is_normalized() {
            return Err(Error::InvalidParameter("initial state not normalized".into()));
        }
        if !(sample_dt > 0.0 && t_final >= 0.0) {
            return Err(Error::InvalidParameter("sample_dt must be positive and t_final non-negative".into()));
        }
        let ratio = sample_dt / self.dt;
        let steps_per_sample = ratio.round() as u64;
        if steps_per_sample == 0 || (ratio - steps_per_sample as f64).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "step {} does not divide the sample interval {sample_dt}",
                self.dt
            )));
        }
        let n_samples = (t_final / sample_dt + 1e-9).floor() as u64;
        let sample_ticks = steps_per_sample * TICKS_PER_STEP;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut threshold = Self::draw_threshold(&mut rng);
        let mut psi = psi0.amplitudes().clone();
        let mut tick: u64 = 0;
        let mut times = vec![0.0];
        let mut states = vec![psi0.clone()];
        let mut jumps = Vec::new();

        for k in 1..=n_samples {
            let target = k * sample_ticks;
            while tick < target {
                // Largest power-of-two step that keeps `tick` on its own
                // alignment, so a post-jump walk re-joins the coarse grid.
                let align = if tick == 0 { LEVELS } else { tick.trailing_zeros().min(LEVELS) };
                let e = align.min(63 - (target - tick).leading_zeros());
                let trial = self.step(e).dot(&psi);
                let norm_sq = norm_sqr(&trial);
                if e == LEVELS && norm_sq < MIN_STEP_SURVIVAL * norm_sqr(&psi) {
                    return Err(Error::JumpResolutionLost { time: self.tick_time(tick) });
                }
                if norm_sq > threshold {
                    psi = trial;
                    tick += 1 << e;
                    continue;
                }
                // Bisect the interval down to one tick.
                let mut width = e;
                while width > 0 {
                    width -= 1;
                    let half = self.step(width).dot(&psi);
                    if norm_sqr(&half) > threshold {
                        psi = half;
                        tick += 1 << width;
                    }
                }
                psi = self.step(0).dot(&psi);
                tick += 1;
                let channel = self.jump(&mut psi, &mut rng)?;
                jumps.push(Jump { time: self.tick_time(tick), channel });
                threshold = Self::draw_threshold(&mut rng);
            }
            let nrm = norm_sqr(&psi).sqrt();
            times.push(self.tick_time(tick));
            states.push(StateVector::from_amplitudes(self.dims, psi.mapv(|z| z / nrm))?);
        }
        debug!("trajectory seed {seed}: {} jumps", jumps.len());
        Ok(TrajectoryRecord { seed, times, states, jumps })
    }

    /// Applies a collapse chosen with weight `r_c ‖cψ‖²` and renormalizes.
    fn jump(&self, psi: &mut Array1<C64>, rng: &mut ChaCha8Rng) -> Result<Channel> {
        let candidates: Vec<(Channel, Array1<C64>, f64)> = self
            .channels
            .iter()
            .filter(|c| c.rate > 0.0)
            .map(|c| {
                let v = c.op.matrix().dot(&*psi);
                let w = c.rate * norm_sqr(&v);
                (c.channel, v, w)
            })
            .collect();
        let total: f64 = candidates.iter().map(|c| c.2).sum();
        if total <= 0.0 {
            return Err(Error::SolverFailure("jump with vanishing emission rate".into()));
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = candidates.len() - 1;
        for (i, c) in candidates.iter().enumerate() {
            if pick < c.2 {
                chosen = i;
                break;
            }
            pick -= c.2;
        }
        let (channel, v, _) = &candidates[chosen];
        let nrm = norm_sqr(v).sqrt();
        *psi = v.mapv(|z| z / nrm);
        Ok(*channel)
    }

    /// Trajectories `seed_i = base_seed + i`, in seed order whatever the
    /// thread scheduling.
    pub fn run_ensemble(
        &self,
        psi0: &StateVector,
        t_final: f64,
        sample_dt: f64,
        base_seed: u64,
        count: usize,
    ) -> Result<Vec<TrajectoryRecord>> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.run(psi0, t_final, sample_dt, base_seed.wrapping_add(i)))
            .collect()
    }
}

fn norm_sqr(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// One trajectory with the default coarse step.
pub fn mcwf_trajectory(
    p: &ModelParams,
    psi0: &StateVector,
    t_final: f64,
    seed: u64,
    sample_dt: f64,
) -> Result<TrajectoryRecord> {
    let l = super::liouvillian::build_liouvillian(p)?;
    let sim = TrajectorySimulator::new(&l, TrajectorySimulator::default_step(&l, sample_dt))?;
    sim.run(psi0, t_final, sample_dt, seed)
}

/// Ensemble statistics of an observable over trajectory records.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleAverage {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// Standard error of the mean; zero for a single record.
    pub stderr: Vec<f64>,
}

pub fn trajectory_average(records: &[TrajectoryRecord], observable: &Operator) -> Result<EnsembleAverage> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidParameter("no trajectory records".into()))?;
    if records.iter().any(|r| r.times != first.times) {
        return Err(Error::GridMismatch);
    }
    let m = records.len() as f64;
    let mut mean = vec![0.0; first.times.len()];
    let mut sq = vec![0.0; first.times.len()];
    for r in records {
        for (k, s) in r.states.iter().enumerate() {
            let amps = s.amplitudes();
            let v = amps.iter().zip(observable.matrix().dot(amps).iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re;
            mean[k] += v;
            sq[k] += v * v;
        }
    }
    let stderr = mean
        .iter_mut()
        .zip(&sq)
        .map(|(mu, s2)| {
            *mu /= m;
            if m > 1.0 {
                let var = ((s2 / m - *mu * *mu) * m / (m - 1.0)).max(0.0);
                (var / m).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(EnsembleAverage { times: first.times.clone(), mean, stderr })
}
