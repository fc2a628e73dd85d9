//! Time and energy allocation for fixed beams and antenna positions.
//!
//! Works with `y_k = e_k / Ξ_k` (seconds of harvesting spent on offloading),
//! in which the problem is jointly concave: the local term is
//! `c_L (τ0 − y_k)^{1/3}` and the offload term is the perspective
//! `c_O τ_k ln(1 + G_k Ξ_k y_k / τ_k)`. Offloaded rates enter the objective and
//! the edge constraint through epigraph variables `r_k ≤ R_{O,k}`, which keeps
//! every constraint convex.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::barrier::{self, BarrierOptions, Concave, Polytope};
use crate::error::{Error, Result};
use crate::rates::{edge_check_raw, frequency_for_energy, local_rate, offload_rate_raw, Allocation, SystemParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffloadMode {
    #[default]
    Partial,
    OffloadingOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Tau0 {
    #[default]
    Free,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug)]
pub struct TimeEnergyOptions {
    pub tau0: Tau0,
    /// Target relative duality gap.
    pub tolerance: f64,
}

impl Default for TimeEnergyOptions {
    fn default() -> Self {
        Self {
            tau0: Tau0::Free,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEnergySolution {
    pub tau0: f64,
    pub tau: Vec<f64>,
    pub dtau: f64,
    pub e: Vec<f64>,
    /// Sum computational rate (bps).
    pub objective: f64,
    pub kkt_residual: f64,
    pub allocation: Allocation,
}

#[derive(Clone, Copy, Debug)]
enum Arg {
    Var(usize),
    Const(f64),
}

impl Arg {
    fn get(self, x: &DVector<f64>) -> f64 {
        match self {
            Arg::Var(i) => x[i],
            Arg::Const(c) => c,
        }
    }
}

#[derive(Clone, Debug)]
struct LocalTerm {
    coef: f64,
    tau0: Arg,
    y: Arg,
}

#[derive(Clone, Debug)]
struct OffloadTerm {
    coef: f64,
    gain: f64,
    tau: usize,
    y: Arg,
    rate: usize,
}

/// Value and derivatives of `c τ ln(1 + g y / τ)` in `(τ, y)`.
fn offload_parts(coef: f64, gain: f64, tau: f64, y: f64) -> (f64, [f64; 2], [f64; 3]) {
    let s = gain * y / tau;
    let l = s.ln_1p();
    let d = tau * (1.0 + s) * (1.0 + s);
    (
        coef * tau * l,
        [coef * (l - s / (1.0 + s)), coef * gain / (1.0 + s)],
        [-coef * s * s / d, coef * gain * s / d, -coef * gain * gain / d],
    )
}

fn offload_value(coef: f64, gain: f64, tau: f64, y: f64) -> f64 {
    if tau <= 0.0 || y <= 0.0 {
        return 0.0;
    }
    coef * tau * (gain * y / tau).ln_1p()
}

struct Objective {
    local: Vec<LocalTerm>,
    offload: Vec<OffloadTerm>,
}

fn add_grad(grad: &mut DVector<f64>, a: Arg, v: f64) {
    if let Arg::Var(i) = a {
        grad[i] += v;
    }
}

fn add_hess(hess: &mut DMatrix<f64>, a: Arg, b: Arg, v: f64) {
    if let (Arg::Var(i), Arg::Var(j)) = (a, b) {
        hess[(i, j)] += v;
    }
}

impl Concave for Objective {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.local {
            let u = t.tau0.get(x) - t.y.get(x);
            if u < 0.0 {
                return f64::NEG_INFINITY;
            }
            total += t.coef * u.cbrt();
        }
        total + self.offload.iter().map(|t| x[t.rate]).sum::<f64>()
    }

    fn derivatives(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.local {
            let u = (t.tau0.get(x) - t.y.get(x)).max(1e-300);
            let c = u.cbrt();
            total += t.coef * c;
            let d1 = t.coef * c / (3.0 * u);
            let d2 = -2.0 * d1 / (3.0 * u);
            add_grad(grad, t.tau0, d1);
            add_grad(grad, t.y, -d1);
            add_hess(hess, t.tau0, t.tau0, d2);
            add_hess(hess, t.y, t.y, d2);
            add_hess(hess, t.tau0, t.y, -d2);
            add_hess(hess, t.y, t.tau0, -d2);
        }
        for t in &self.offload {
            grad[t.rate] += 1.0;
            total += x[t.rate];
        }
        total
    }

    fn n_constraints(&self) -> usize {
        self.offload.len()
    }

    fn constraint_barrier(&self, x: &DVector<f64>) -> f64 {
        let mut total = 0.0;
        for t in &self.offload {
            let tau = x[t.tau];
            let y = t.y.get(x);
            if tau <= 0.0 || y < 0.0 {
                return f64::NEG_INFINITY;
            }
            let c = t.coef * tau * (t.gain * y / tau).ln_1p() - x[t.rate];
            if !(c > 0.0) {
                return f64::NEG_INFINITY;
            }
            total += c.ln();
        }
        total
    }

    fn constraint_barrier_derivatives(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        for t in &self.offload {
            let tv = Arg::Var(t.tau);
            let rv = Arg::Var(t.rate);
            let (v, g, h) = offload_parts(t.coef, t.gain, x[t.tau], t.y.get(x));
            let c = v - x[t.rate];
            let args = [tv, t.y, rv];
            let dc = [g[0], g[1], -1.0];
            let d2 = [[h[0], h[1], 0.0], [h[1], h[2], 0.0], [0.0, 0.0, 0.0]];
            for a in 0..3 {
                add_grad(grad, args[a], dc[a] / c);
                for b in 0..3 {
                    add_hess(hess, args[a], args[b], d2[a][b] / c - dc[a] * dc[b] / (c * c));
                }
            }
        }
    }
}

struct Layout {
    n: usize,
    tau0: Arg,
    /// Slot variable per WD, `None` when the WD cannot offload.
    tau: Vec<Option<usize>>,
    dtau: Option<usize>,
    y: Vec<Arg>,
    rate: Vec<Option<usize>>,
}

/// Solves the time/energy block for given harvested powers `xi` (W) and
/// post-combining gains per unit transmit power `gains` (1/W).
pub fn solve_time_energy(
    params: &SystemParams,
    xi: &[f64],
    gains: &[f64],
    mode: OffloadMode,
    opts: &TimeEnergyOptions,
) -> Result<TimeEnergySolution> {
    let k = xi.len();
    if gains.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: gains.len(),
        });
    }
    if params.phi.len() < k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: params.phi.len(),
        });
    }
    let t_block = params.t_block;
    if !(t_block > 0.0) {
        return Err(Error::invalid(format!("block length must be positive, got {t_block}")));
    }
    if xi.iter().chain(gains).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::invalid(
            "harvested powers and gains must be finite and nonnegative",
        ));
    }
    if let Tau0::Fixed(v) = opts.tau0 {
        if !(0.0..=t_block).contains(&v) {
            return Err(Error::invalid(format!("fixed tau0 {v} outside [0, T]")));
        }
    }

    let room = match opts.tau0 {
        Tau0::Fixed(v) => t_block - v > 1e-12 * t_block && v > 0.0,
        Tau0::Free => true,
    };
    let active: Vec<bool> = (0..k).map(|i| room && xi[i] > 0.0 && gains[i] > 0.0).collect();
    let has_local = |i: usize| mode == OffloadMode::Partial && xi[i] > 0.0;
    let fixed_tau0 = match opts.tau0 {
        Tau0::Fixed(v) => Some(v),
        Tau0::Free => None,
    };
    let any_energy = xi.iter().any(|&v| v > 0.0) && fixed_tau0 != Some(0.0);
    let any_term = (0..k).any(|i| active[i] || has_local(i));
    if !any_energy || !any_term {
        let tau0 = fixed_tau0.unwrap_or(0.0);
        return Ok(assemble(
            params,
            xi,
            gains,
            mode,
            tau0,
            vec![0.0; k],
            0.0,
            vec![0.0; k],
            0.0,
        ));
    }

    let mut n = 0;
    let mut next = || {
        n += 1;
        n - 1
    };
    let tau0 = match fixed_tau0 {
        None => Arg::Var(next()),
        Some(v) => Arg::Const(v),
    };
    let tau_idx: Vec<Option<usize>> = active.iter().map(|&a| a.then(&mut next)).collect();
    let dtau = active.iter().any(|&a| a).then(&mut next);
    let y: Vec<Arg> = (0..k)
        .map(|i| {
            if !active[i] {
                Arg::Const(0.0)
            } else if mode == OffloadMode::OffloadingOnly {
                tau0
            } else {
                Arg::Var(next())
            }
        })
        .collect();
    let rate: Vec<Option<usize>> = active.iter().map(|&a| a.then(&mut next)).collect();
    let layout = Layout {
        n,
        tau0,
        tau: tau_idx,
        dtau,
        y,
        rate,
    };
    if n == 0 {
        let tau0 = fixed_tau0.unwrap_or(0.0);
        return Ok(assemble(
            params,
            xi,
            gains,
            mode,
            tau0,
            vec![0.0; k],
            0.0,
            vec![0.0; k],
            0.0,
        ));
    }

    // rates are carried in units of the bandwidth
    let scale = params.bandwidth;
    let c_o = params.bandwidth / (t_block * std::f64::consts::LN_2) / scale;
    let mut local = Vec::new();
    let mut offload = Vec::new();
    for i in 0..k {
        if has_local(i) {
            let coef = (xi[i] / (params.kappa * t_block)).cbrt() / params.phi[i] / scale;
            local.push(LocalTerm {
                coef,
                tau0: layout.tau0,
                y: layout.y[i],
            });
        }
        if let (Some(t), Some(r)) = (layout.tau[i], layout.rate[i]) {
            offload.push(OffloadTerm {
                coef: c_o,
                gain: gains[i] * xi[i],
                tau: t,
                y: layout.y[i],
                rate: r,
            });
        }
    }
    let obj = Objective { local, offload };
    let weights: Vec<f64> = (0..k)
        .map(|i| params.phi[i] * t_block / params.f_edge * scale)
        .collect();
    let poly = Polytope::from_rows(constraint_rows(&layout, &weights, t_block), n);

    let mut x0 = barrier::interior_point(&poly, &default_guess(&layout, t_block)).ok_or(Error::NonConvergence {
        what: "time/energy interior point",
        residual: f64::INFINITY,
    })?;
    // pull the epigraph variables under their rate functions
    for t in &obj.offload {
        let cap = offload_value(t.coef, t.gain, x0[t.tau], t.y.get(&x0));
        x0[t.rate] = x0[t.rate].min(0.5 * cap);
    }
    if !poly.strictly_inside(&x0) || !obj.constraint_barrier(&x0).is_finite() {
        return Err(Error::NonConvergence {
            what: "time/energy interior point",
            residual: f64::INFINITY,
        });
    }
    let bopts = BarrierOptions {
        gap_tol: opts.tolerance,
        ..BarrierOptions::default()
    };
    let res = barrier::maximize(&obj, &poly, x0, &bopts);
    if !res.converged && res.gap > 1e-6 {
        return Err(Error::NonConvergence {
            what: "time/energy barrier",
            residual: res.gap,
        });
    }
    let x = res.x;

    let tau0_v = layout.tau0.get(&x).clamp(0.0, t_block);
    let mut tau: Vec<f64> = layout.tau.iter().map(|t| t.map_or(0.0, |j| x[j].max(0.0))).collect();
    let mut dtau_v = layout.dtau.map_or(0.0, |j| x[j].max(0.0));
    let mut e = vec![0.0; k];
    for t in &obj.offload {
        let i = layout
            .tau
            .iter()
            .position(|&v| v == Some(t.tau))
            .expect("slot belongs to a WD");
        let target = x[t.rate].max(0.0);
        let y = t.y.get(&x).clamp(0.0, tau0_v);
        // make the carried rate the delivered one
        match mode {
            OffloadMode::Partial => {
                let y_new = shrink_to_rate(|v| offload_value(t.coef, t.gain, tau[i], v), y, target);
                e[i] = y_new * xi[i];
            }
            OffloadMode::OffloadingOnly => {
                let t_new = shrink_to_rate(|v| offload_value(t.coef, t.gain, v, y), tau[i], target);
                dtau_v += tau[i] - t_new;
                tau[i] = t_new;
                e[i] = y * xi[i];
            }
        }
    }
    Ok(assemble(params, xi, gains, mode, tau0_v, tau, dtau_v, e, res.gap))
}

/// Largest `v ≤ hi` with `rate(v) ≤ target`, for `rate` increasing in `v`.
fn shrink_to_rate<F: Fn(f64) -> f64>(rate: F, hi: f64, target: f64) -> f64 {
    if rate(hi) <= target {
        return hi;
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + up);
        if rate(mid) <= target {
            lo = mid;
        } else {
            up = mid;
        }
        if up - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

fn default_guess(layout: &Layout, t_block: f64) -> DVector<f64> {
    let n_slots = layout.tau.iter().flatten().count() + layout.dtau.iter().count();
    let mut x = DVector::zeros(layout.n);
    let tau0 = match layout.tau0 {
        Arg::Var(j) => {
            x[j] = 0.5 * t_block;
            0.5 * t_block
        }
        Arg::Const(c) => c,
    };
    let share = (t_block - tau0) / (n_slots as f64 + 1.0);
    for j in layout.tau.iter().flatten().chain(layout.dtau.iter()) {
        x[*j] = share;
    }
    for y in &layout.y {
        if let Arg::Var(j) = y {
            if !matches!(layout.tau0, Arg::Var(t) if t == *j) {
                x[*j] = 0.5 * tau0;
            }
        }
    }
    x
}

/// Nonnegativity, time budget, energy causality and the edge tails.
fn constraint_rows(layout: &Layout, weights: &[f64], t_block: f64) -> Vec<(Vec<f64>, f64)> {
    let n = layout.n;
    let mut rows = Vec::new();
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = -1.0;
        rows.push((r, 0.0));
    }
    let mut budget = vec![0.0; n];
    let mut rhs = t_block;
    match layout.tau0 {
        Arg::Var(j) => budget[j] = 1.0,
        Arg::Const(c) => rhs -= c,
    }
    for j in layout.tau.iter().flatten().chain(layout.dtau.iter()) {
        budget[*j] = 1.0;
    }
    rows.push((budget, rhs));
    for y in &layout.y {
        let Arg::Var(j) = y else { continue };
        if matches!(layout.tau0, Arg::Var(t) if t == *j) {
            continue;
        }
        let mut r = vec![0.0; n];
        r[*j] = 1.0;
        let rhs = match layout.tau0 {
            Arg::Var(t) => {
                r[t] = -1.0;
                0.0
            }
            Arg::Const(c) => c,
        };
        rows.push((r, rhs));
    }
    if let Some(dtau) = layout.dtau {
        let mut row = vec![0.0; n];
        row[dtau] = -1.0;
        for i in (0..layout.tau.len()).rev() {
            let (Some(t), Some(r)) = (layout.tau[i], layout.rate[i]) else {
                continue;
            };
            row[r] += weights[i];
            row[t] -= 1.0;
            rows.push((row.clone(), 0.0));
        }
    }
    rows
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    params: &SystemParams,
    xi: &[f64],
    gains: &[f64],
    mode: OffloadMode,
    tau0: f64,
    tau: Vec<f64>,
    dtau: f64,
    e: Vec<f64>,
    kkt_residual: f64,
) -> TimeEnergySolution {
    let k = xi.len();
    let mut p = vec![0.0; k];
    let mut f = vec![0.0; k];
    let mut beta = vec![0.0; k];
    let mut rl = vec![0.0; k];
    let mut ro = vec![0.0; k];
    for i in 0..k {
        let harvested = tau0 * xi[i];
        if tau[i] > 0.0 {
            p[i] = e[i] / tau[i];
        }
        if mode == OffloadMode::Partial {
            f[i] = frequency_for_energy(harvested - e[i], params.kappa, params.t_block);
        }
        if harvested > 0.0 {
            beta[i] = (e[i] / harvested).clamp(0.0, 1.0);
        }
        rl[i] = local_rate(f[i], params.phi[i]);
        ro[i] = offload_rate_raw(tau[i], e[i], gains[i], params.bandwidth, params.t_block);
    }
    let objective = rl.iter().sum::<f64>() + ro.iter().sum::<f64>();
    let allocation = Allocation {
        tau0,
        tau: tau.clone(),
        dtau,
        e: e.clone(),
        p,
        f,
        beta,
    };
    TimeEnergySolution {
        tau0,
        tau,
        dtau,
        e,
        objective,
        kkt_residual,
        allocation,
    }
}

/// Rates of an allocation under given gains: `(local, offload)` per WD.
pub fn allocation_rates(params: &SystemParams, alloc: &Allocation, gains: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let local = alloc
        .f
        .iter()
        .zip(&params.phi)
        .map(|(&f, &phi)| local_rate(f, phi))
        .collect();
    let offload = (0..alloc.tau.len())
        .map(|i| offload_rate_raw(alloc.tau[i], alloc.e[i], gains[i], params.bandwidth, params.t_block))
        .collect();
    (local, offload)
}

/// Whether the edge constraint holds for `alloc` at the given gains.
pub fn edge_ok(params: &SystemParams, alloc: &Allocation, gains: &[f64]) -> bool {
    let (_, ro) = allocation_rates(params, alloc, gains);
    edge_check_raw(alloc.dtau, &alloc.tau, &ro, &params.phi, params.f_edge, params.t_block).feasible
}
