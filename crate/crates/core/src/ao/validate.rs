//! Independent constraint check of a returned solution.
//!
//! Everything is recomputed from the raw scenario: channels from the path
//! parameters, harvested power from the beam, gains from the stored
//! combiners, and rates from the stored allocation.

use serde::{Deserialize, Serialize};

use super::Solution;
use crate::channel::channel_response;
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harvest::{harvested_power, received_rf_power};
use crate::rates::{combining_gain, edge_feasible, local_energy, local_rate, offload_rate, FEAS_TOL};

/// Pass/fail per constraint family plus the recomputed sum rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub energy_causality: bool,
    pub time_budget: bool,
    pub edge_capability: bool,
    pub power_budget: bool,
    pub psd: bool,
    pub region: bool,
    pub min_distance: bool,
    pub scr_consistent: bool,
    pub recomputed_scr: f64,
    /// Largest relative violation seen across the checks (0 when all pass).
    pub worst_violation: f64,
}

impl ConstraintReport {
    pub fn all_ok(&self) -> bool {
        self.failures().is_empty()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        [
            (self.energy_causality, "energy_causality"),
            (self.time_budget, "time_budget"),
            (self.edge_capability, "edge_capability"),
            (self.power_budget, "power_budget"),
            (self.psd, "psd"),
            (self.region, "region"),
            (self.min_distance, "min_distance"),
            (self.scr_consistent, "scr_consistent"),
        ]
        .into_iter()
        .filter_map(|(ok, name)| (!ok).then_some(name))
        .collect()
    }
}

/// Relative tolerance on energy, time and power budgets.
const REL_TOL: f64 = 1e-9;
/// Relative tolerance between the reported and the recomputed sum rate.
const SCR_TOL: f64 = 1e-6;

pub fn validate_solution(scenario: &Scenario, sol: &Solution) -> Result<ConstraintReport> {
    let p = &scenario.params;
    let k = scenario.k();
    let a = &sol.allocation;
    for len in [a.tau.len(), a.e.len(), a.p.len(), a.f.len(), sol.combiners.len()] {
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, got: len });
        }
    }
    let mut worst: f64 = 0.0;
    let mut note = |excess: f64| worst = worst.max(excess);

    let wpt = sol.wpt_apv();
    let mut energy_ok = true;
    let mut local = vec![0.0; k];
    let mut offload = vec![0.0; k];
    for i in 0..k {
        let ch = &scenario.wd_channels[i];
        let h0 = channel_response(wpt, ch, p.lambda);
        let xi = harvested_power(received_rf_power(&h0, &sol.q)?, &p.eh[i]);
        let harvested = a.tau0 * xi;
        let spent = local_energy(a.f[i], p.kappa, p.t_block) + a.p[i] * a.tau[i];
        let cap = harvested * (1.0 + REL_TOL) + 1e-18;
        if spent > cap || a.e[i] < 0.0 || a.p[i] < 0.0 || a.f[i] < 0.0 {
            energy_ok = false;
            note((spent - harvested) / harvested.max(1e-300));
        }
        let hu = channel_response(sol.offload_apv(i), ch, p.lambda);
        let gain = combining_gain(sol.combiners[i].as_slice(), &hu, p.noise)?;
        local[i] = local_rate(a.f[i], p.phi[i]);
        offload[i] = offload_rate(a.tau[i], a.p[i] * a.tau[i], gain, p.bandwidth, p.t_block)?;
    }

    let used = a.time_used();
    let time_ok =
        a.tau0 >= 0.0 && a.dtau >= 0.0 && a.tau.iter().all(|&t| t >= 0.0) && used <= p.t_block * (1.0 + REL_TOL);
    if !time_ok {
        note((used - p.t_block) / p.t_block);
    }

    let edge = edge_feasible(a, &offload, p);
    if !edge.feasible {
        let min_slack = edge.slack.iter().copied().fold(f64::INFINITY, f64::min);
        note(-min_slack / (p.f_edge * p.t_block) - FEAS_TOL);
    }

    let tr = sol.q.trace();
    let power_ok = tr <= p.p_max * (1.0 + REL_TOL);
    if !power_ok {
        note((tr - p.p_max) / p.p_max);
    }
    let min_eig = sol.q.min_eigenvalue();
    let psd_ok = min_eig >= -1e-9 && sol.q.hermitian_deviation() <= 1e-9;
    if !psd_ok {
        note(-min_eig);
    }

    let region_ok = sol
        .apvs
        .iter()
        .all(|apv| apv.in_region(p.region_a) && apv.len() == p.m_antennas);
    let dist_ok = sol
        .apvs
        .iter()
        .all(|apv| apv.min_pairwise_distance() >= p.min_dist * (1.0 - 1e-12));
    if !dist_ok {
        let d = sol
            .apvs
            .iter()
            .map(|a| a.min_pairwise_distance())
            .fold(f64::INFINITY, f64::min);
        note((p.min_dist - d) / p.min_dist);
    }

    let recomputed: f64 = local.iter().sum::<f64>() + offload.iter().sum::<f64>();
    let scr_ok = (recomputed - sol.scr).abs() <= SCR_TOL * recomputed.abs().max(1.0);
    if !scr_ok {
        note((recomputed - sol.scr).abs() / recomputed.abs().max(1.0));
    }

    Ok(ConstraintReport {
        energy_causality: energy_ok,
        time_budget: time_ok,
        edge_capability: edge.feasible,
        power_budget: power_ok,
        psd: psd_ok,
        region: region_ok,
        min_distance: dist_ok,
        scr_consistent: scr_ok,
        recomputed_scr: recomputed,
        worst_violation: worst,
    })
}
