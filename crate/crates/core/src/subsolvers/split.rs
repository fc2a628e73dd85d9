//! Re-evaluation of a fixed time allocation and energy split at new
//! harvested powers or offloading gains.
//!
//! Each WD offloads `β_k τ0 Ξ_k` joules unless the edge server cannot process
//! the resulting bits; then its offloading rate is cut to what the edge
//! capacity allows (later slots first) and the unsent energy is spent on
//! local computing. The result always satisfies the edge constraint.

use crate::rates::{frequency_for_energy, local_rate, offload_rate_raw, Allocation, SystemParams};

use super::time_energy::OffloadMode;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitOutcome {
    pub scr: f64,
    pub allocation: Allocation,
    pub local: Vec<f64>,
    pub offload: Vec<f64>,
    /// Whether the offloading rate was cut by the edge capacity.
    pub capped: Vec<bool>,
}

/// Energy that yields offloading rate `rate` in a slot of length `tau`.
pub fn energy_for_rate(rate: f64, tau: f64, gain: f64, bandwidth: f64, t_block: f64) -> f64 {
    if rate <= 0.0 || tau <= 0.0 || gain <= 0.0 {
        return 0.0;
    }
    tau / gain * (rate * t_block / (bandwidth * tau) * std::f64::consts::LN_2).exp_m1()
}

pub fn evaluate_split(
    params: &SystemParams,
    xi: &[f64],
    gains: &[f64],
    alloc: &Allocation,
    mode: OffloadMode,
) -> SplitOutcome {
    let p = params;
    let k = xi.len();
    let mut out = alloc.clone();
    let mut offload = vec![0.0; k];
    let mut local = vec![0.0; k];
    let mut capped = vec![false; k];
    let mut span = alloc.dtau;
    let mut work = 0.0;
    for i in (0..k).rev() {
        span += alloc.tau[i];
        let harvested = alloc.tau0 * xi[i];
        let wanted = alloc.beta[i] * harvested;
        let rate = offload_rate_raw(alloc.tau[i], wanted, gains[i], p.bandwidth, p.t_block);
        let w = p.phi[i] * p.t_block / p.f_edge;
        let allowed = ((span - work) / w).max(0.0);
        let e = if rate > allowed {
            capped[i] = true;
            energy_for_rate(allowed, alloc.tau[i], gains[i], p.bandwidth, p.t_block).min(wanted)
        } else {
            wanted
        };
        offload[i] = offload_rate_raw(alloc.tau[i], e, gains[i], p.bandwidth, p.t_block);
        work += w * offload[i];
        out.e[i] = e;
        out.p[i] = if alloc.tau[i] > 0.0 { e / alloc.tau[i] } else { 0.0 };
        out.f[i] = match mode {
            OffloadMode::Partial => frequency_for_energy(harvested - e, p.kappa, p.t_block),
            OffloadMode::OffloadingOnly => 0.0,
        };
        out.beta[i] = if harvested > 0.0 {
            (e / harvested).clamp(0.0, 1.0)
        } else {
            alloc.beta[i]
        };
        local[i] = local_rate(out.f[i], p.phi[i]);
    }
    let scr = local.iter().sum::<f64>() + offload.iter().sum::<f64>();
    SplitOutcome {
        scr,
        allocation: out,
        local,
        offload,
        capped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::edge_feasible;

    fn alloc(k: usize) -> Allocation {
        Allocation {
            tau0: 0.2,
            tau: vec![0.8 / k as f64; k],
            dtau: 0.0,
            e: vec![0.0; k],
            p: vec![0.0; k],
            f: vec![0.0; k],
            beta: vec![0.9; k],
        }
    }

    #[test]
    fn energy_inverts_rate() {
        let r = offload_rate_raw(0.3, 2e-5, 5e6, 5e4, 1.0);
        assert!((energy_for_rate(r, 0.3, 5e6, 5e4, 1.0) - 2e-5).abs() < 1e-18);
    }

    #[test]
    fn tight_edge_moves_energy_to_local() {
        let mut p = SystemParams::default().with_k(3);
        let xi = [3e-4; 3];
        let g = [6e6; 3];
        p.f_edge = 1e12;
        let loose = evaluate_split(&p, &xi, &g, &alloc(3), OffloadMode::Partial);
        assert!(loose.capped.iter().all(|c| !c));
        p.f_edge = 5e7;
        let tight = evaluate_split(&p, &xi, &g, &alloc(3), OffloadMode::Partial);
        assert!(tight.capped.iter().any(|&c| c));
        assert!(edge_feasible(&tight.allocation, &tight.offload, &p).feasible);
        for i in 0..3 {
            assert!(tight.allocation.e[i] <= loose.allocation.e[i]);
            assert!(tight.local[i] >= loose.local[i]);
        }
    }
}
