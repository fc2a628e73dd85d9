//! Local computing, task offloading and edge-capability models, plus the
//! system parameter set they share.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelVector;
use crate::error::{Error, Result};
use crate::harvest::{eh_constants, EhParams};

/// Absolute feasibility tolerance on watt/second/joule scales.
pub const FEAS_TOL: f64 = 1e-9;

/// Scalar constants of the system model. Defaults reproduce the reference
/// parameter table (T = 1 s, M = 8, K = 6, B = 50 kHz, λ = 0.1 m, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub t_block: f64,
    pub bandwidth: f64,
    pub lambda: f64,
    pub region_a: f64,
    pub min_dist: f64,
    pub m_antennas: usize,
    pub k_wds: usize,
    pub paths_per_wd: usize,
    pub p_max: f64,
    pub noise: f64,
    pub kappa: f64,
    pub f_edge: f64,
    /// Task complexity per WD, cycles/bit.
    pub phi: Vec<f64>,
    pub eh: Vec<EhParams>,
    pub c0: f64,
    pub alpha: f64,
    /// WD distances are drawn uniformly from this range (meters).
    pub distance_range: [f64; 2],
}

impl Default for SystemParams {
    fn default() -> Self {
        let lambda = 0.1;
        let k = 6;
        let eh = eh_constants(0.024, 150.0, 0.014).expect("table EH constants are positive");
        Self {
            t_block: 1.0,
            bandwidth: 50e3,
            lambda,
            region_a: 3.0 * lambda,
            min_dist: 0.5 * lambda,
            m_antennas: 8,
            k_wds: k,
            paths_per_wd: 10,
            p_max: 10.0,
            noise: 1e-11,
            kappa: 1e-26,
            f_edge: 0.4e9,
            phi: vec![1000.0; k],
            eh: vec![eh; k],
            c0: (lambda / (4.0 * PI)).powi(2),
            alpha: 2.2,
            distance_range: [7.0, 8.0],
        }
    }
}

impl SystemParams {
    /// Resizes the per-WD vectors to `k` entries, repeating the first entry.
    pub fn with_k(mut self, k: usize) -> Self {
        let phi = self.phi.first().copied().unwrap_or(1000.0);
        let eh = self.eh.first().copied();
        self.k_wds = k;
        self.phi = vec![phi; k];
        if let Some(eh) = eh {
            self.eh = vec![eh; k];
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_block", self.t_block),
            ("bandwidth", self.bandwidth),
            ("lambda", self.lambda),
            ("region_a", self.region_a),
            ("min_dist", self.min_dist),
            ("p_max", self.p_max),
            ("noise", self.noise),
            ("kappa", self.kappa),
            ("f_edge", self.f_edge),
            ("c0", self.c0),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.m_antennas == 0 || self.k_wds == 0 || self.paths_per_wd == 0 {
            return Err(Error::invalid("M, K and L_k must all be at least 1"));
        }
        if self.min_dist >= self.region_a {
            return Err(Error::invalid("minimum antenna distance must be below region size"));
        }
        if self.phi.len() != self.k_wds || self.eh.len() != self.k_wds {
            return Err(Error::DimensionMismatch {
                expected: self.k_wds,
                got: self.phi.len().min(self.eh.len()),
            });
        }
        if self.phi.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("task complexity must be positive"));
        }
        let [lo, hi] = self.distance_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid("distance range must satisfy 0 < lo <= hi"));
        }
        Ok(())
    }
}

/// Time, energy, frequency and partition decisions for one block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub tau0: f64,
    pub tau: Vec<f64>,
    pub dtau: f64,
    /// Offloading energy `e_k = p_k τ_k` (joules).
    pub e: Vec<f64>,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Allocation {
    pub fn time_used(&self) -> f64 {
        self.tau0 + self.tau.iter().sum::<f64>() + self.dtau
    }
}

pub fn local_rate(f_k: f64, phi_k: f64) -> f64 {
    f_k / phi_k
}

pub fn local_energy(f_k: f64, kappa: f64, t_block: f64) -> f64 {
    kappa * f_k.powi(3) * t_block
}

/// CPU frequency that consumes `energy` joules over the block.
pub fn frequency_for_energy(energy: f64, kappa: f64, t_block: f64) -> f64 {
    (energy.max(0.0) / (kappa * t_block)).cbrt()
}

/// Offloading rate `(B τ / T) log2(1 + gain · e / τ)`; zero for an empty slot.
pub fn offload_rate(tau_k: f64, e_k: f64, gain: f64, bandwidth: f64, t_block: f64) -> Result<f64> {
    if tau_k < 0.0 || e_k < 0.0 || gain < 0.0 {
        return Err(Error::invalid(format!(
            "offload rate needs nonnegative inputs, got tau={tau_k}, e={e_k}, gain={gain}"
        )));
    }
    Ok(offload_rate_raw(tau_k, e_k, gain, bandwidth, t_block))
}

pub(crate) fn offload_rate_raw(tau_k: f64, e_k: f64, gain: f64, bandwidth: f64, t_block: f64) -> f64 {
    if tau_k <= 0.0 || e_k <= 0.0 {
        return 0.0;
    }
    bandwidth * tau_k / t_block * (gain * e_k / tau_k).ln_1p() / std::f64::consts::LN_2
}

/// Post-combining SNR per unit transmit power, `|wᴴh|² / (‖w‖² σ0²)`.
pub fn combining_gain(w: &[Complex64], h: &ChannelVector, noise: f64) -> Result<f64> {
    if w.len() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: w.len(),
        });
    }
    let wn: f64 = w.iter().map(|c| c.norm_sqr()).sum();
    if wn == 0.0 {
        return Err(Error::ZeroVector("combiner"));
    }
    let inner: Complex64 = w.iter().zip(h.0.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(inner.norm_sqr() / (wn * noise))
}

/// Result of checking the edge-capability constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCheck {
    pub feasible: bool,
    /// Per-tail slack in CPU cycles: `f_E (Δτ + Σ_{i≥k} τ_i) − Σ_{i≥k} φ_i R_{O,i} T`.
    pub slack: Vec<f64>,
    /// First (1-based) WD index whose tail constraint is violated.
    pub violated_at: Option<usize>,
}

/// Checks that every suffix of offloaded work fits in the edge server's
/// remaining cycles. Tolerance is `FEAS_TOL` seconds of edge time.
pub fn edge_feasible(alloc: &Allocation, offload_rates: &[f64], params: &SystemParams) -> EdgeCheck {
    edge_check_raw(
        alloc.dtau,
        &alloc.tau,
        offload_rates,
        &params.phi,
        params.f_edge,
        params.t_block,
    )
}

pub(crate) fn edge_check_raw(
    dtau: f64,
    tau: &[f64],
    rates: &[f64],
    phi: &[f64],
    f_edge: f64,
    t_block: f64,
) -> EdgeCheck {
    let k = tau.len();
    let mut slack = vec![0.0; k];
    let mut work = 0.0;
    let mut time = dtau;
    for i in (0..k).rev() {
        work += phi[i] * rates[i] * t_block;
        time += tau[i];
        slack[i] = f_edge * time - work;
    }
    let violated_at = slack.iter().position(|&s| s < -FEAS_TOL * f_edge).map(|i| i + 1);
    EdgeCheck {
        feasible: violated_at.is_none(),
        slack,
        violated_at,
    }
}

/// Sum computational rate.
pub fn scr(local_rates: &[f64], offload_rates: &[f64]) -> f64 {
    local_rates.iter().sum::<f64>() + offload_rates.iter().sum::<f64>()
}
