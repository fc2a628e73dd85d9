//! Energy beamforming by successive convex approximation.
//!
//! The sigmoid harvester is minorized at the current beam through the tangent
//! of `1/(1+z)` in `z`, which turns each outer step into a concave problem over
//! `{Q ⪰ 0, tr Q ≤ P}`. That problem is solved by projected gradient ascent
//! with Armijo backtracking.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::psd::project_hermitian;
use super::split::{evaluate_split, SplitOutcome};
use super::time_energy::OffloadMode;
use crate::channel::ChannelVector;
use crate::error::{Error, Result};
use crate::harvest::{harvested_power, quad_form, EhParams, EnergyBeamMatrix};
use crate::rates::{frequency_for_energy, offload_rate_raw, Allocation, SystemParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaState {
    pub q: EnergyBeamMatrix,
    /// Sigmoid exponents `z_k` at the final beam.
    pub z: Vec<f64>,
    /// True sum computational rate after each outer iteration (bps).
    pub trace: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ScaOptions {
    pub max_outer: usize,
    pub outer_tol: f64,
    pub max_inner: usize,
    pub step_floor: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_outer: 50,
            outer_tol: 1e-5,
            max_inner: 300,
            step_floor: 1e-12,
        }
    }
}

struct Problem<'a> {
    params: &'a SystemParams,
    v: Vec<DVector<Complex64>>,
    alloc: &'a Allocation,
    gains: &'a [f64],
    mode: OffloadMode,
    eh: Vec<EhParams>,
    /// Offloading energy held fixed for WDs whose rate is capped by the edge.
    fixed: Vec<Option<f64>>,
}

impl Problem<'_> {
    fn incident(&self, q: &DMatrix<Complex64>) -> Vec<f64> {
        self.v.iter().map(|v| quad_form(v, q)).collect()
    }

    fn harvested(&self, q: &DMatrix<Complex64>) -> Vec<f64> {
        self.incident(q)
            .iter()
            .zip(&self.eh)
            .map(|(&pin, eh)| harvested_power(pin, eh))
            .collect()
    }

    fn local_energy(&self, k: usize, x: f64) -> f64 {
        if self.mode == OffloadMode::OffloadingOnly {
            return 0.0;
        }
        let harvested = self.alloc.tau0 * x;
        match self.fixed[k] {
            Some(e) => (harvested - e).max(0.0),
            None => (1.0 - self.alloc.beta[k]) * harvested,
        }
    }

    /// Surrogate rate sum for harvested powers `xi`.
    fn rate_sum(&self, xi: &[f64]) -> f64 {
        let p = self.params;
        let mut total = 0.0;
        for (i, &x) in xi.iter().enumerate() {
            let x = x.max(0.0);
            total += frequency_for_energy(self.local_energy(i, x), p.kappa, p.t_block) / p.phi[i];
            let e = self.fixed[i].unwrap_or(self.alloc.beta[i] * self.alloc.tau0 * x);
            total += offload_rate_raw(self.alloc.tau[i], e, self.gains[i], p.bandwidth, p.t_block);
        }
        total
    }

    /// Objective after the edge-limited split; always edge feasible.
    fn true_objective(&self, q: &DMatrix<Complex64>) -> SplitOutcome {
        evaluate_split(self.params, &self.harvested(q), self.gains, self.alloc, self.mode)
    }

    fn refresh_caps(&mut self, q: &DMatrix<Complex64>) {
        let out = self.true_objective(q);
        self.fixed = out
            .capped
            .iter()
            .zip(&out.allocation.e)
            .map(|(&c, &e)| c.then_some(e))
            .collect();
    }

    fn surrogate_xi(&self, pin: &[f64], zbar: &[f64]) -> Vec<f64> {
        pin.iter()
            .zip(zbar)
            .zip(&self.eh)
            .map(|((&p, &zb), eh)| {
                let z = eh.z(p);
                let d = 1.0 + zb;
                (eh.x_const * (1.0 / d - (z - zb) / (d * d)) - eh.y_const).max(0.0)
            })
            .collect()
    }

    fn surrogate(&self, q: &DMatrix<Complex64>, zbar: &[f64]) -> f64 {
        self.rate_sum(&self.surrogate_xi(&self.incident(q), zbar))
    }

    fn surrogate_gradient(&self, q: &DMatrix<Complex64>, zbar: &[f64]) -> DMatrix<Complex64> {
        let p = self.params;
        let pin = self.incident(q);
        let xi = self.surrogate_xi(&pin, zbar);
        let tau0 = self.alloc.tau0;
        let m = q.nrows();
        let mut g = DMatrix::zeros(m, m);
        for k in 0..pin.len() {
            let eh = &self.eh[k];
            let floor = 1e-9 * eh.m_sat;
            let x = xi[k].max(floor);
            let share = match (self.mode, self.fixed[k]) {
                (OffloadMode::OffloadingOnly, _) => 0.0,
                (_, Some(_)) => 1.0,
                (_, None) => 1.0 - self.alloc.beta[k],
            };
            let el = self.local_energy(k, x).max(floor * tau0 * share);
            let d_local = if share > 0.0 {
                share * tau0 * frequency_for_energy(el, p.kappa, p.t_block) / (3.0 * el * p.phi[k])
            } else {
                0.0
            };
            let tau = self.alloc.tau[k];
            let beta = self.alloc.beta[k];
            let d_off = if self.fixed[k].is_none() && tau > 0.0 && beta > 0.0 {
                let c = self.gains[k] * beta * tau0 / tau;
                p.bandwidth * tau / p.t_block / std::f64::consts::LN_2 * c / (1.0 + c * x)
            } else {
                0.0
            };
            let d1 = 1.0 + zbar[k];
            let dxi = eh.x_const * eh.a * eh.z(pin[k]) / (d1 * d1);
            let w = (d_local + d_off) * dxi;
            if w != 0.0 {
                let v = &self.v[k];
                g += v * v.adjoint() * Complex64::new(w, 0.0);
            }
        }
        g
    }
}

/// Optimizes the energy beam for a fixed time allocation, partition factors
/// `alloc.beta` and offloading gains. `wpt_channels` are the channels at the
/// WPT-slot antenna positions. The reported objective uses the edge-limited
/// split, so it is always edge feasible.
pub fn sca_beamforming(
    params: &SystemParams,
    wpt_channels: &[ChannelVector],
    alloc: &Allocation,
    gains: &[f64],
    mode: OffloadMode,
    q0: Option<&EnergyBeamMatrix>,
    opts: &ScaOptions,
) -> Result<ScaState> {
    let k = wpt_channels.len();
    for len in [alloc.beta.len(), gains.len(), alloc.tau.len()] {
        if len != k {
            return Err(Error::DimensionMismatch { expected: k, got: len });
        }
    }
    if alloc.beta.iter().any(|b| !(0.0..=1.0).contains(b)) {
        return Err(Error::invalid("partition factors must lie in [0, 1]"));
    }
    let m = params.m_antennas;
    if let Some(h) = wpt_channels.iter().find(|h| h.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: h.len(),
        });
    }
    let budget = params.p_max;
    let mut q = match q0 {
        Some(q) => {
            q.validate(budget)?;
            q.matrix().clone()
        }
        None => EnergyBeamMatrix::isotropic(m, budget).matrix().clone(),
    };
    let mut prob = Problem {
        params,
        v: wpt_channels.iter().map(|h| h.downlink()).collect(),
        alloc,
        gains,
        mode,
        eh: params.eh.iter().take(k).copied().collect(),
        fixed: vec![None; k],
    };
    let mut current = prob.true_objective(&q).scr;
    let mut trace = vec![current];
    let mut step = 0.0f64;
    for _outer in 0..opts.max_outer {
        prob.refresh_caps(&q);
        let zbar: Vec<f64> = prob.incident(&q).iter().zip(&prob.eh).map(|(&p, eh)| eh.z(p)).collect();
        let mut cand = q.clone();
        let mut val = prob.surrogate(&cand, &zbar);
        for _inner in 0..opts.max_inner {
            let g = prob.surrogate_gradient(&cand, &zbar);
            let gnorm = g.norm();
            if gnorm == 0.0 || !gnorm.is_finite() {
                break;
            }
            if step == 0.0 {
                step = budget / gnorm;
            }
            // very long steps only cost eigen-solver accuracy after projection
            let mut s = f64::min(step * 2.0, 100.0 * budget / gnorm);
            let mut accepted = None;
            while s * gnorm >= opts.step_floor * budget.max(1.0) {
                let trial = project_hermitian(&(&cand + &g * Complex64::new(s, 0.0)), budget);
                let tm = trial.matrix();
                let diff = tm - &cand;
                let lin = (g.adjoint() * &diff).trace().re;
                let tv = prob.surrogate(tm, &zbar);
                if tv >= val + 1e-4 * lin && tv >= val {
                    accepted = Some((tm.clone(), tv, diff.norm()));
                    break;
                }
                s *= 0.5;
            }
            let Some((next, tv, moved)) = accepted else {
                break;
            };
            step = s;
            let gain = tv - val;
            cand = next;
            val = tv;
            if moved <= 1e-12 * budget || gain <= 1e-12 * val.abs() {
                break;
            }
        }
        let new_true = prob.true_objective(&cand).scr;
        let improved = new_true >= current;
        let prev = current;
        if improved {
            q = cand;
            current = new_true;
        }
        trace.push(current);
        if !improved || (current - prev).abs() <= opts.outer_tol * current.abs().max(1e-300) {
            break;
        }
    }
    let z = prob.incident(&q).iter().zip(&prob.eh).map(|(&p, eh)| eh.z(p)).collect();
    Ok(ScaState {
        q: EnergyBeamMatrix::from_matrix_unchecked(q),
        z,
        trace,
    })
}
