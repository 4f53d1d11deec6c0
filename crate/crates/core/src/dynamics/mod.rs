//! Time evolution: Schrödinger and master-equation integration, stationary
//! states and quantum-jump trajectories.

pub mod evolve;
pub mod integrate;
pub mod liouvillian;
pub mod mcwf;
pub mod propagator;
pub mod steady;

pub use evolve::{expectation_series, lindblad_evolve, overlap_series, propagate_operator, schrodinger_evolve};
pub use integrate::{IntegratorConfig, Scheme};
pub use liouvillian::{build_liouvillian, Channel, CollapseChannel, Liouvillian};
pub use mcwf::{mcwf_trajectory, trajectory_average, EnsembleAverage, Jump, TrajectoryRecord, TrajectorySimulator};
pub use propagator::expm;
pub use steady::{solve_steady_state, steady_state, SteadyMethod, SteadyState};
