//! Alternating optimization frameworks for dynamic, semi-dynamic and static
//! antenna positioning, and the fixed-array baseline.
//!
//! Each outer iteration runs, in order: time/energy allocation, partition
//! factor update, swarm-based positioning of the WPT antennas (or of the
//! shared array in the static scheme), SCA on the energy beam, and in the
//! semi-dynamic scheme a second swarm run for the shared offloading array.
//! A block's result is kept only when it does not lower the sum rate, so the
//! convergence trace never decreases. Offloading gains always come from
//! maximum-ratio combining at the current offloading positions.
//!
//! Positions and beams are scored by re-evaluating the current time
//! allocation and partition factors with
//! [`evaluate_split`](crate::subsolvers::evaluate_split), which cuts each
//! offloading rate to what the edge server can process.

pub mod exhaustive;
mod upa;
pub mod validate;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Apv, Steering};
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harvest::{harvested_power, quad_form, EnergyBeamMatrix};
use crate::pso::{self, flat_min_distance_feasible, PsoConfig, PsoMode};
use crate::rates::{Allocation, SystemParams};
use crate::subsolvers::{
    evaluate_split, mrc_combiner, sca_beamforming, solve_time_energy, OffloadMode, ScaOptions, Tau0, TimeEnergyOptions,
    TimeEnergySolution,
};

pub use exhaustive::solve_exhaustive_small;
pub use upa::upa_layout;
pub use validate::{validate_solution, ConstraintReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positioning {
    Dynamic,
    SemiDynamic,
    Static,
    Fpa,
}

impl Positioning {
    pub fn name(self) -> &'static str {
        match self {
            Positioning::Dynamic => "dynamic",
            Positioning::SemiDynamic => "semi_dynamic",
            Positioning::Static => "static",
            Positioning::Fpa => "fpa",
        }
    }
}

/// Restricts antennas to cell centres of an evenly divided region and the
/// WPT duration to multiples of `T / tau0_levels`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteGrid {
    pub cells_per_side: usize,
    pub tau0_levels: usize,
}

impl Default for DiscreteGrid {
    fn default() -> Self {
        Self {
            cells_per_side: 4,
            tau0_levels: 100,
        }
    }
}

impl DiscreteGrid {
    /// Cell-centre coordinates along one axis.
    pub fn centers(&self, region_a: f64) -> Vec<f64> {
        let n = self.cells_per_side as f64;
        (0..self.cells_per_side)
            .map(|i| -region_a / 2.0 + region_a * (i as f64 + 0.5) / n)
            .collect()
    }

    pub fn snap(&self, flat: &[f64], region_a: f64) -> Vec<f64> {
        let c = self.centers(region_a);
        flat.iter()
            .map(|&v| {
                *c.iter()
                    .min_by(|a, b| (*a - v).abs().total_cmp(&(*b - v).abs()))
                    .expect("grid has cells")
            })
            .collect()
    }

    pub fn tau0_level(&self, j: usize, t_block: f64) -> f64 {
        t_block * j as f64 / self.tau0_levels as f64
    }

    /// Grid levels bracketing a continuous WPT duration.
    pub fn bracket(&self, tau0: f64, t_block: f64) -> [usize; 2] {
        let x = (tau0 / t_block * self.tau0_levels as f64).clamp(0.0, self.tau0_levels as f64);
        [x.floor() as usize, (x.ceil() as usize).min(self.tau0_levels)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub positioning: Positioning,
    pub pso_mode: PsoMode,
    pub offload_mode: OffloadMode,
    pub max_outer_iters: usize,
    /// Relative sum-rate improvement below which the outer loop stops.
    pub outer_tol: f64,
    /// Swarm settings; `None` uses the reference settings at the carrier
    /// wavelength. The swarm mode always follows `pso_mode`.
    #[serde(default)]
    pub pso: Option<PsoConfig>,
    #[serde(default)]
    pub grid: Option<DiscreteGrid>,
}

impl SchemeConfig {
    pub fn new(positioning: Positioning) -> Self {
        Self {
            positioning,
            pso_mode: PsoMode::Vls,
            offload_mode: OffloadMode::Partial,
            max_outer_iters: 30,
            outer_tol: 1e-4,
            pso: None,
            grid: None,
        }
    }

    pub fn with_offload_mode(mut self, mode: OffloadMode) -> Self {
        self.offload_mode = mode;
        self
    }

    pub fn with_pso_mode(mut self, mode: PsoMode) -> Self {
        self.pso_mode = mode;
        self
    }

    pub fn with_pso(mut self, pso: PsoConfig) -> Self {
        self.pso = Some(pso);
        self
    }

    /// Short identifier such as `static-vls-partial` or `fpa-partial`.
    pub fn label(&self) -> String {
        let off = match self.offload_mode {
            OffloadMode::Partial => "partial",
            OffloadMode::OffloadingOnly => "offloading_only",
        };
        match self.positioning {
            Positioning::Fpa => format!("fpa-{off}"),
            p => {
                let m = match self.pso_mode {
                    PsoMode::Vls => "vls",
                    PsoMode::Standard => "standard",
                };
                format!("{}-{m}-{off}", p.name())
            }
        }
    }

    pub fn pso_config(&self, params: &SystemParams) -> PsoConfig {
        self.pso
            .clone()
            .unwrap_or_else(|| PsoConfig::reference(params.lambda))
            .with_mode(self.pso_mode)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("at least one outer iteration is required"));
        }
        if !(self.outer_tol >= 0.0) {
            return Err(Error::invalid("outer tolerance must be nonnegative"));
        }
        if let Some(p) = &self.pso {
            p.validate()?;
        }
        if let Some(g) = &self.grid {
            if g.cells_per_side == 0 || g.tau0_levels == 0 {
                return Err(Error::invalid("grid must have at least one cell and one level"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub positioning: Positioning,
    /// Sum computational rate (bps).
    pub scr: f64,
    pub allocation: Allocation,
    /// `[r̃0, r̃1, …, r̃K]` (dynamic), `[r̃0, r̃u]` (semi-dynamic) or a single
    /// shared array (static, fixed).
    pub apvs: Vec<Apv>,
    pub q: EnergyBeamMatrix,
    pub combiners: Vec<DVector<Complex64>>,
    /// Sum rate after the first allocation and after every outer iteration.
    pub convergence_trace: Vec<f64>,
}

impl Solution {
    pub fn iterations(&self) -> usize {
        self.convergence_trace.len().saturating_sub(1)
    }

    pub fn wpt_apv(&self) -> &Apv {
        &self.apvs[0]
    }

    pub fn offload_apv(&self, k: usize) -> &Apv {
        match self.positioning {
            Positioning::Dynamic => &self.apvs[k + 1],
            Positioning::SemiDynamic => &self.apvs[1],
            Positioning::Static | Positioning::Fpa => &self.apvs[0],
        }
    }
}

struct State {
    wpt: Vec<f64>,
    offload: Vec<Vec<f64>>,
    q: DMatrix<Complex64>,
    alloc: Allocation,
    scr: f64,
}

pub(crate) struct Engine<'a> {
    pub params: &'a SystemParams,
    pub steer: Vec<Steering>,
    pub mode: OffloadMode,
    pub grid: Option<DiscreteGrid>,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario, mode: OffloadMode, grid: Option<DiscreteGrid>) -> Self {
        Self {
            params: &scenario.params,
            steer: scenario.steering(),
            mode,
            grid,
        }
    }

    pub fn k(&self) -> usize {
        self.steer.len()
    }

    pub fn snap(&self, flat: &[f64]) -> Vec<f64> {
        match &self.grid {
            Some(g) => g.snap(flat, self.params.region_a),
            None => flat.to_vec(),
        }
    }

    pub fn positions_ok(&self, flat: &[f64]) -> bool {
        flat_min_distance_feasible(flat, self.params.min_dist)
    }

    /// Harvested power of every WD for WPT antennas at `flat` and beam `q`.
    pub fn xi_at(&self, flat: &[f64], q: &DMatrix<Complex64>) -> Vec<f64> {
        let apv = Apv::from_flat(flat);
        self.steer
            .iter()
            .zip(&self.params.eh)
            .map(|(s, eh)| harvested_power(quad_form(&s.response(&apv).downlink(), q), eh))
            .collect()
    }

    pub fn gain_at(&self, k: usize, flat: &[f64]) -> f64 {
        self.steer[k].gain_flat(flat) / self.params.noise
    }

    pub fn gains(&self, offload: &[Vec<f64>]) -> Vec<f64> {
        offload.iter().enumerate().map(|(k, f)| self.gain_at(k, f)).collect()
    }

    fn te_fixed(&self, xi: &[f64], gains: &[f64], tau0: f64) -> Result<TimeEnergySolution> {
        let opts = TimeEnergyOptions {
            tau0: Tau0::Fixed(tau0),
            ..Default::default()
        };
        solve_time_energy(self.params, xi, gains, self.mode, &opts)
    }

    /// Time/energy block; on a grid, the WPT duration is the better of the
    /// two levels around the continuous optimum (or the incumbent level).
    pub fn time_energy(&self, xi: &[f64], gains: &[f64], incumbent: Option<f64>) -> Result<TimeEnergySolution> {
        let free = solve_time_energy(self.params, xi, gains, self.mode, &TimeEnergyOptions::default())?;
        let Some(grid) = &self.grid else {
            return Ok(free);
        };
        let t = self.params.t_block;
        let mut levels: Vec<usize> = grid.bracket(free.tau0, t).to_vec();
        if let Some(inc) = incumbent {
            levels.push(grid.bracket(inc, t)[0]);
            levels.push(grid.bracket(inc, t)[1]);
        }
        levels.sort_unstable();
        levels.dedup();
        let mut best: Option<TimeEnergySolution> = None;
        for j in levels {
            let s = self.te_fixed(xi, gains, grid.tau0_level(j, t))?;
            if best.as_ref().is_none_or(|b| s.objective > b.objective) {
                best = Some(s);
            }
        }
        Ok(best.expect("at least one level"))
    }

    /// Re-evaluates a fixed time allocation and partition at new harvested
    /// powers or gains, cutting offloading to what the edge can process.
    pub fn evaluate(&self, xi: &[f64], gains: &[f64], alloc: &Allocation) -> (f64, Allocation) {
        let out = evaluate_split(self.params, xi, gains, alloc, self.mode);
        (out.scr, out.allocation)
    }

    /// Runs the swarm over a position fitness, snapping to the grid if any.
    fn swarm<R: Rng + ?Sized, F: Fn(&[f64]) -> f64>(
        &self,
        fitness: F,
        cfg: &PsoConfig,
        rng: &mut R,
    ) -> (Vec<f64>, f64) {
        let m = self.params.m_antennas;
        let a = self.params.region_a;
        let wrapped = |flat: &[f64]| {
            let s = self.snap(flat);
            if !self.positions_ok(&s) {
                return -1.0;
            }
            fitness(&s)
        };
        let out = pso::run(wrapped, cfg, m, a, rng);
        (self.snap(&out.best.position), out.best.fitness)
    }
}

/// Sum rate as a function of the WPT antenna positions at the first outer
/// iterate: offloading at the fixed array, isotropic beam and the allocation
/// of the first time/energy solve. Positions closer than the minimum
/// distance score −1.
pub struct WptFitness<'a> {
    engine: Engine<'a>,
    q: DMatrix<Complex64>,
    gains: Vec<f64>,
    alloc: Allocation,
}

impl<'a> WptFitness<'a> {
    pub fn new(scenario: &'a Scenario, mode: OffloadMode) -> Result<Self> {
        scenario.params.validate()?;
        let engine = Engine::new(scenario, mode, None);
        let params = &scenario.params;
        let start = upa_layout(params.m_antennas, params.min_dist, params.region_a)?.flatten();
        let q = EnergyBeamMatrix::isotropic(params.m_antennas, params.p_max)
            .matrix()
            .clone();
        let gains = engine.gains(&vec![start.clone(); engine.k()]);
        let first = engine.time_energy(&engine.xi_at(&start, &q), &gains, None)?;
        Ok(Self {
            engine,
            q,
            gains,
            alloc: first.allocation,
        })
    }

    pub fn eval(&self, flat: &[f64]) -> f64 {
        if !self.engine.positions_ok(flat) {
            return -1.0;
        }
        self.engine
            .evaluate(&self.engine.xi_at(flat, &self.q), &self.gains, &self.alloc)
            .0
    }

    pub fn region_a(&self) -> f64 {
        self.engine.params.region_a
    }

    pub fn m_antennas(&self) -> usize {
        self.engine.params.m_antennas
    }
}

/// Solves one scenario with the configured scheme.
pub fn solve<R: Rng + ?Sized>(scenario: &Scenario, cfg: &SchemeConfig, rng: &mut R) -> Result<Solution> {
    scenario.params.validate()?;
    cfg.validate()?;
    if scenario.k() != scenario.params.k_wds {
        return Err(Error::DimensionMismatch {
            expected: scenario.params.k_wds,
            got: scenario.k(),
        });
    }
    let engine = Engine::new(scenario, cfg.offload_mode, cfg.grid);
    let params = &scenario.params;
    let k = engine.k();
    let m = params.m_antennas;
    let pso_cfg = cfg.pso_config(params);

    let start = engine.snap(&upa_layout(m, params.min_dist, params.region_a)?.flatten());
    if !engine.positions_ok(&start) {
        return Err(Error::invalid("initial array violates the minimum antenna distance"));
    }
    let mut offload = vec![start.clone(); k];

    if cfg.positioning == Positioning::Dynamic {
        for (i, slot) in offload.iter_mut().enumerate() {
            let (best, fit) = engine.swarm(|f| engine.gain_at(i, f), &pso_cfg, rng);
            if fit > engine.gain_at(i, slot) {
                *slot = best;
            }
        }
    }

    let q0 = EnergyBeamMatrix::isotropic(m, params.p_max).matrix().clone();
    let xi = engine.xi_at(&start, &q0);
    let gains = engine.gains(&offload);
    let first = engine.time_energy(&xi, &gains, None).map_err(|e| e.at_outer(0))?;
    let mut st = State {
        wpt: start,
        offload,
        q: q0,
        scr: first.objective,
        alloc: first.allocation,
    };
    let mut trace = vec![st.scr];

    for iter in 1..=cfg.max_outer_iters {
        let prev = st.scr;
        if iter > 1 {
            time_energy_block(&engine, &mut st).map_err(|e| e.at_outer(iter))?;
        }
        match cfg.positioning {
            Positioning::Dynamic | Positioning::SemiDynamic => wpt_block(&engine, &mut st, &pso_cfg, rng),
            Positioning::Static => shared_block(&engine, &mut st, &pso_cfg, rng),
            Positioning::Fpa => {}
        }
        beam_block(&engine, &mut st).map_err(|e| e.at_outer(iter))?;
        if cfg.positioning == Positioning::SemiDynamic {
            offload_block(&engine, &mut st, &pso_cfg, rng);
        }
        trace.push(st.scr);
        if st.scr - prev <= cfg.outer_tol * prev.abs() {
            break;
        }
    }

    let solution = finish(&engine, cfg.positioning, st, trace)?;
    let report = validate_solution(scenario, &solution)?;
    if !report.all_ok() {
        return Err(Error::NonConvergence {
            what: "post-hoc constraint validation",
            residual: report.worst_violation,
        });
    }
    Ok(solution)
}

fn time_energy_block(engine: &Engine, st: &mut State) -> Result<()> {
    let xi = engine.xi_at(&st.wpt, &st.q);
    let gains = engine.gains(&st.offload);
    let s = engine.time_energy(&xi, &gains, Some(st.alloc.tau0))?;
    if s.objective > st.scr {
        st.scr = s.objective;
        st.alloc = s.allocation;
    }
    Ok(())
}

fn wpt_block<R: Rng + ?Sized>(engine: &Engine, st: &mut State, cfg: &PsoConfig, rng: &mut R) {
    let gains = engine.gains(&st.offload);
    let fitness = |f: &[f64]| {
        let xi = engine.xi_at(f, &st.q);
        engine.evaluate(&xi, &gains, &st.alloc).0
    };
    let (best, fit) = engine.swarm(fitness, cfg, rng);
    if fit > st.scr {
        let xi = engine.xi_at(&best, &st.q);
        let (v, alloc) = engine.evaluate(&xi, &gains, &st.alloc);
        st.wpt = best;
        st.scr = v;
        st.alloc = alloc;
    }
}

fn shared_block<R: Rng + ?Sized>(engine: &Engine, st: &mut State, cfg: &PsoConfig, rng: &mut R) {
    let k = engine.k();
    let eval = |f: &[f64]| {
        let xi = engine.xi_at(f, &st.q);
        let gains: Vec<f64> = (0..k).map(|i| engine.gain_at(i, f)).collect();
        engine.evaluate(&xi, &gains, &st.alloc)
    };
    let (best, fit) = engine.swarm(|f| eval(f).0, cfg, rng);
    if fit > st.scr {
        let (v, alloc) = eval(&best);
        st.offload = vec![best.clone(); k];
        st.wpt = best;
        st.scr = v;
        st.alloc = alloc;
    }
}

fn offload_block<R: Rng + ?Sized>(engine: &Engine, st: &mut State, cfg: &PsoConfig, rng: &mut R) {
    let k = engine.k();
    let xi = engine.xi_at(&st.wpt, &st.q);
    let gains_at = |f: &[f64]| -> Vec<f64> { (0..k).map(|i| engine.gain_at(i, f)).collect() };
    let fitness = |f: &[f64]| engine.evaluate(&xi, &gains_at(f), &st.alloc).0;
    let (best, fit) = engine.swarm(fitness, cfg, rng);
    if fit > st.scr {
        let (v, alloc) = engine.evaluate(&xi, &gains_at(&best), &st.alloc);
        st.offload = vec![best; k];
        st.scr = v;
        st.alloc = alloc;
    }
}

fn beam_block(engine: &Engine, st: &mut State) -> Result<()> {
    let apv = Apv::from_flat(&st.wpt);
    let hs: Vec<_> = engine.steer.iter().map(|s| s.response(&apv)).collect();
    let gains = engine.gains(&st.offload);
    let q0 = EnergyBeamMatrix::from_matrix_unchecked(st.q.clone());
    let sca = sca_beamforming(
        engine.params,
        &hs,
        &st.alloc,
        &gains,
        engine.mode,
        Some(&q0),
        &ScaOptions::default(),
    )?;
    let q = sca.q.matrix().clone();
    let xi = engine.xi_at(&st.wpt, &q);
    let (v, alloc) = engine.evaluate(&xi, &gains, &st.alloc);
    if v > st.scr {
        st.q = q;
        st.scr = v;
        st.alloc = alloc;
    }
    Ok(())
}

fn finish(engine: &Engine, positioning: Positioning, st: State, trace: Vec<f64>) -> Result<Solution> {
    let k = engine.k();
    let p = engine.params;
    let apvs = match positioning {
        Positioning::Dynamic => std::iter::once(&st.wpt)
            .chain(&st.offload)
            .map(|f| Apv::from_flat(f))
            .collect(),
        Positioning::SemiDynamic => vec![Apv::from_flat(&st.wpt), Apv::from_flat(&st.offload[0])],
        Positioning::Static | Positioning::Fpa => vec![Apv::from_flat(&st.wpt)],
    };
    let combiners = (0..k)
        .map(|i| {
            let h = engine.steer[i].response(&Apv::from_flat(&st.offload[i]));
            // the combiner's scale does not affect the gain
            let power = if st.alloc.p[i] > 0.0 { st.alloc.p[i] } else { 1.0 };
            mrc_combiner(&h, power, p.noise)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Solution {
        positioning,
        scr: st.scr,
        allocation: st.alloc,
        apvs,
        q: EnergyBeamMatrix::from_matrix_unchecked(st.q),
        combiners,
        convergence_trace: trace,
    })
}

fn require(cfg: &SchemeConfig, want: Positioning) -> Result<()> {
    if cfg.positioning != want {
        return Err(Error::invalid(format!(
            "scheme positioning is {}, expected {}",
            cfg.positioning.name(),
            want.name()
        )));
    }
    Ok(())
}

pub fn solve_dynamic<R: Rng + ?Sized>(scenario: &Scenario, cfg: &SchemeConfig, rng: &mut R) -> Result<Solution> {
    require(cfg, Positioning::Dynamic)?;
    solve(scenario, cfg, rng)
}

pub fn solve_semidynamic<R: Rng + ?Sized>(scenario: &Scenario, cfg: &SchemeConfig, rng: &mut R) -> Result<Solution> {
    require(cfg, Positioning::SemiDynamic)?;
    solve(scenario, cfg, rng)
}

pub fn solve_static<R: Rng + ?Sized>(scenario: &Scenario, cfg: &SchemeConfig, rng: &mut R) -> Result<Solution> {
    require(cfg, Positioning::Static)?;
    solve(scenario, cfg, rng)
}

/// Fixed uniform planar array; no randomness is consumed.
pub fn solve_fpa(scenario: &Scenario, cfg: &SchemeConfig) -> Result<Solution> {
    require(cfg, Positioning::Fpa)?;
    solve(scenario, cfg, &mut rand::rngs::mock::StepRng::new(0, 0))
}
