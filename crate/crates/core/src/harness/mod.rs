//! Scenario generation, configuration, sweeps, traces and the validation
//! battery.

pub mod battery;
pub mod config;
pub mod scenario;
pub mod seeds;
pub mod sweep;
pub mod trace;
pub mod units;

use rand::Rng;

use crate::ao::{solve, solve_fpa, Positioning, SchemeConfig, Solution};
use crate::error::Result;

pub use battery::{run_battery, BatteryOptions, BatteryReport, CheckResult};
pub use config::{ConfigFile, PsoSection, SystemConfig};
pub use scenario::{build_scenario, Scenario};
pub use sweep::{run_sweep, SweepReport, SweepSpec, SweepVariable};

/// Dispatches to the solver of `cfg.positioning`.
pub fn run_scheme<R: Rng + ?Sized>(scenario: &Scenario, cfg: &SchemeConfig, rng: &mut R) -> Result<Solution> {
    match cfg.positioning {
        Positioning::Fpa => solve_fpa(scenario, cfg),
        _ => solve(scenario, cfg, rng),
    }
}
