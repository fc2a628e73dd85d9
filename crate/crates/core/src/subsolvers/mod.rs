//! Convex sub-problem solvers used inside the alternating loops.

pub(crate) mod barrier;
pub mod beamforming;
pub mod mrc;
pub mod psd;
pub mod split;
pub mod time_energy;

pub use beamforming::{sca_beamforming, ScaOptions, ScaState};
pub use mrc::{mrc_combiner, mrc_gain};
pub use psd::{hermitian_eigen, project_psd_trace, recover_beams, EnergyBeam};
pub use split::{energy_for_rate, evaluate_split, SplitOutcome};
pub use time_energy::{solve_time_energy, OffloadMode, Tau0, TimeEnergyOptions, TimeEnergySolution};
