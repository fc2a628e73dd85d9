//! Particle swarm optimization with variable local search (PSO-VLS).
//!
//! The social attractor of each particle is the best personal-best position
//! among its `nbh_size` nearest particles (itself included). The neighbourhood
//! starts at one particle and grows by `nbh_growth` per iteration until it
//! covers the whole swarm. [`PsoMode::Standard`] pins the neighbourhood to the
//! whole swarm, which is the classic global-best PSO.
//!
//! Every particle owns an RNG substream derived from the caller's RNG, so the
//! result depends only on that seed and not on evaluation order.

use std::cmp::Ordering;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::Apv;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsoMode {
    Vls,
    Standard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub max_iters: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub c1: f64,
    pub c2: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Neighbourhood growth per iteration (particles).
    pub nbh_growth: usize,
    pub mode: PsoMode,
}

impl PsoConfig {
    /// Reference settings for carrier wavelength `lambda`: 200 iterations,
    /// ω ∈ [0.4, 0.9], c1 = c2 = 1.4, v ∈ ±λ/2, growth 1, 50 particles.
    pub fn reference(lambda: f64) -> Self {
        Self {
            n_particles: 50,
            max_iters: 200,
            omega_min: 0.4,
            omega_max: 0.9,
            c1: 1.4,
            c2: 1.4,
            v_min: -0.5 * lambda,
            v_max: 0.5 * lambda,
            nbh_growth: 1,
            mode: PsoMode::Vls,
        }
    }

    pub fn with_mode(mut self, mode: PsoMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::invalid("swarm needs at least one particle"));
        }
        if !(0.0 < self.omega_min && self.omega_min <= self.omega_max) {
            return Err(Error::invalid("inertia bounds must satisfy 0 < min <= max"));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::invalid("velocity bounds must satisfy v_min < v_max"));
        }
        Ok(())
    }
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self::reference(0.1)
    }
}

/// A position and its fitness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub position: Vec<f64>,
    pub fitness: f64,
}

#[derive(Clone, Debug)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: f64,
    pub pbest: Scored,
    pub nbest: Scored,
    pub nbh_size: usize,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug)]
pub struct Swarm {
    pub particles: Vec<Particle>,
    half_a: f64,
}

impl Swarm {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Evaluates the initial positions; personal and neighbourhood bests
    /// start at the particle itself.
    pub fn evaluate_initial<F: Fn(&[f64]) -> f64>(&mut self, fitness_fn: &F) {
        for p in &mut self.particles {
            p.fitness = fitness_fn(&p.position);
            p.pbest = Scored {
                position: p.position.clone(),
                fitness: p.fitness,
            };
            p.nbest = p.pbest.clone();
        }
    }

    /// Best personal-best fitness over the swarm.
    pub fn best_fitness(&self) -> f64 {
        self.particles
            .iter()
            .map(|p| p.pbest.fitness)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn mean_fitness(&self) -> f64 {
        self.particles.iter().map(|p| p.fitness).sum::<f64>() / self.len() as f64
    }
}

/// Uniform initial positions in `[-A/2, A/2]` and velocities in
/// `[v_min, v_max]`; fitness is unset until [`Swarm::evaluate_initial`].
pub fn init_swarm<R: Rng + ?Sized>(rng: &mut R, config: &PsoConfig, m_antennas: usize, region_a: f64) -> Swarm {
    let master: u64 = rng.gen();
    let half_a = region_a / 2.0;
    let dim = 2 * m_antennas;
    let particles = (0..config.n_particles)
        .map(|n| {
            let mut prng = ChaCha8Rng::seed_from_u64(master);
            prng.set_stream(n as u64);
            let position: Vec<f64> = (0..dim).map(|_| prng.gen_range(-half_a..=half_a)).collect();
            let velocity: Vec<f64> = (0..dim).map(|_| prng.gen_range(config.v_min..=config.v_max)).collect();
            let seed = Scored {
                position: position.clone(),
                fitness: f64::NEG_INFINITY,
            };
            Particle {
                position,
                velocity,
                fitness: f64::NEG_INFINITY,
                pbest: seed.clone(),
                nbest: seed,
                nbh_size: 1,
                rng: prng,
            }
        })
        .collect();
    Swarm { particles, half_a }
}

/// Linearly decreasing inertia weight.
pub fn inertia(t: usize, max_iters: usize, omega_min: f64, omega_max: f64) -> f64 {
    if max_iters == 0 {
        return omega_max;
    }
    omega_max - (omega_max - omega_min) * (t as f64 / max_iters as f64)
}

/// Neighbourhood size for iteration `t + 1` given the size at iteration `t`.
pub fn grow_neighborhood(t: usize, current: usize, growth: usize, n_particles: usize) -> usize {
    if t == 0 {
        1
    } else {
        (current + growth).min(n_particles)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the best personal best among the `nbh_size` particles nearest to
/// particle `n` (self included). Ties go to the lowest index.
fn nbest_index(swarm: &Swarm, n: usize, nbh_size: usize) -> usize {
    let ps = &swarm.particles;
    let better = |i: usize, j: usize| -> usize {
        // returns the preferred of i and j
        match ps[i].pbest.fitness.partial_cmp(&ps[j].pbest.fitness) {
            Some(Ordering::Greater) => i,
            Some(Ordering::Less) => j,
            _ => i.min(j),
        }
    };
    if nbh_size >= ps.len() {
        return (1..ps.len()).fold(0, better);
    }
    let here = &ps[n].position;
    let mut order: Vec<(f64, usize)> = ps
        .iter()
        .enumerate()
        .map(|(i, p)| (sq_dist(here, &p.position), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order[..nbh_size.max(1)]
        .iter()
        .map(|&(_, i)| i)
        .reduce(better)
        .unwrap_or(n)
}

/// Best personal best within particle `n`'s current neighbourhood.
pub fn select_nbest(swarm: &Swarm, n: usize) -> Scored {
    let idx = nbest_index(swarm, n, swarm.particles[n].nbh_size);
    swarm.particles[idx].pbest.clone()
}

/// One PSO iteration (`t` is 1-based).
pub fn step<F: Fn(&[f64]) -> f64>(swarm: &mut Swarm, fitness_fn: &F, t: usize, config: &PsoConfig) {
    let omega = inertia(t, config.max_iters, config.omega_min, config.omega_max);
    let n_particles = swarm.len();
    let half_a = swarm.half_a;
    for p in &mut swarm.particles {
        p.nbh_size = match config.mode {
            PsoMode::Standard => n_particles,
            PsoMode::Vls => grow_neighborhood(t - 1, p.nbh_size, config.nbh_growth, n_particles),
        };
        let phi1: f64 = p.rng.gen();
        let phi2: f64 = p.rng.gen();
        for d in 0..p.position.len() {
            let x = p.position[d];
            let v = omega * p.velocity[d]
                + config.c1 * phi1 * (p.pbest.position[d] - x)
                + config.c2 * phi2 * (p.nbest.position[d] - x);
            let v = v.clamp(config.v_min, config.v_max);
            p.velocity[d] = v;
            p.position[d] = (x + v).clamp(-half_a, half_a);
        }
        p.fitness = fitness_fn(&p.position);
        if p.fitness > p.pbest.fitness {
            p.pbest = Scored {
                position: p.position.clone(),
                fitness: p.fitness,
            };
        }
    }
    let candidates: Vec<usize> = (0..n_particles)
        .map(|n| nbest_index(swarm, n, swarm.particles[n].nbh_size))
        .collect();
    for (n, idx) in candidates.into_iter().enumerate() {
        if swarm.particles[idx].pbest.fitness > swarm.particles[n].nbest.fitness {
            let best = swarm.particles[idx].pbest.clone();
            swarm.particles[n].nbest = best;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsoOutcome {
    pub best: Scored,
    /// One row per iteration, starting with the initial swarm (iteration 0).
    pub trace: Vec<TraceRow>,
}

/// Runs the swarm for `max_iters` iterations over `2 · m_antennas`
/// coordinates and returns the best neighbourhood-best position.
pub fn run<R, F>(fitness_fn: F, config: &PsoConfig, m_antennas: usize, region_a: f64, rng: &mut R) -> PsoOutcome
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let mut swarm = init_swarm(rng, config, m_antennas, region_a);
    swarm.evaluate_initial(&fitness_fn);
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    trace.push(TraceRow {
        iter: 0,
        best_fitness: swarm.best_fitness(),
        mean_fitness: swarm.mean_fitness(),
    });
    for t in 1..=config.max_iters {
        step(&mut swarm, &fitness_fn, t, config);
        trace.push(TraceRow {
            iter: t,
            best_fitness: swarm.best_fitness(),
            mean_fitness: swarm.mean_fitness(),
        });
    }
    let best = swarm
        .particles
        .iter()
        .enumerate()
        .fold(None::<(usize, &Scored)>, |acc, (i, p)| match acc {
            Some((_, b)) if b.fitness >= p.nbest.fitness => acc,
            _ => Some((i, &p.nbest)),
        })
        .map(|(_, s)| s.clone())
        .expect("swarm is non-empty");
    PsoOutcome { best, trace }
}

/// Whether every pair of antennas is at least `min_dist` apart.
pub fn min_distance_feasible(apv: &Apv, min_dist: f64) -> bool {
    flat_min_distance_feasible(&apv.flatten(), min_dist)
}

/// Relative slack on the squared minimum distance, so that arrays laid out at
/// exactly the minimum spacing pass despite rounding.
const DIST_REL_TOL: f64 = 1e-12;

pub(crate) fn flat_min_distance_feasible(flat: &[f64], min_dist: f64) -> bool {
    let n = flat.len() / 2;
    let d2 = min_dist * min_dist * (1.0 - DIST_REL_TOL);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = flat[2 * i] - flat[2 * j];
            let dy = flat[2 * i + 1] - flat[2 * j + 1];
            if dx * dx + dy * dy < d2 {
                return false;
            }
        }
    }
    true
}

/// Writes `iter,best_fitness,mean_fitness` rows.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PsoConfig {
        PsoConfig::reference(0.1)
    }

    #[test]
    fn init_respects_boxes_and_seed() {
        let c = cfg();
        let s = init_swarm(&mut ChaCha8Rng::seed_from_u64(1), &c, 4, 0.3);
        assert_eq!(s.len(), 50);
        for p in &s.particles {
            assert_eq!(p.nbh_size, 1);
            assert!(p.position.iter().all(|x| x.abs() <= 0.15));
            assert!(p.velocity.iter().all(|v| (c.v_min..=c.v_max).contains(v)));
            assert_eq!(p.pbest.position, p.position);
            assert_eq!(p.nbest.position, p.position);
        }
        let s2 = init_swarm(&mut ChaCha8Rng::seed_from_u64(1), &c, 4, 0.3);
        for (a, b) in s.particles.iter().zip(&s2.particles) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.velocity, b.velocity);
        }
    }

    #[test]
    fn inertia_schedule() {
        assert!((inertia(0, 200, 0.4, 0.9) - 0.9).abs() < 1e-15);
        assert!((inertia(200, 200, 0.4, 0.9) - 0.4).abs() < 1e-15);
        assert!((inertia(100, 200, 0.4, 0.9) - 0.65).abs() < 1e-15);
    }

    #[test]
    fn neighbourhood_growth() {
        assert_eq!(grow_neighborhood(0, 7, 1, 50), 1);
        assert_eq!(grow_neighborhood(3, 49, 1, 50), 50);
        assert_eq!(grow_neighborhood(3, 50, 1, 50), 50);
        assert_eq!(grow_neighborhood(3, 10, 3, 50), 13);
    }

    fn hand_swarm() -> Swarm {
        let c = PsoConfig {
            n_particles: 3,
            ..cfg()
        };
        let mut s = init_swarm(&mut ChaCha8Rng::seed_from_u64(0), &c, 1, 10.0);
        let pos = [[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]];
        let fit = [1.0, 5.0, 9.0];
        for (i, p) in s.particles.iter_mut().enumerate() {
            p.position = pos[i].to_vec();
            p.fitness = fit[i];
            p.pbest = Scored {
                position: pos[i].to_vec(),
                fitness: fit[i],
            };
            p.nbest = p.pbest.clone();
        }
        s
    }

    #[test]
    fn nbest_selection() {
        let mut s = hand_swarm();
        assert_eq!(select_nbest(&s, 0).fitness, 1.0);
        for p in &mut s.particles {
            p.nbh_size = 2;
        }
        // nearest two of particle 0 are {0, 1}; of particle 2 are {2, 1}
        assert_eq!(select_nbest(&s, 0).fitness, 5.0);
        assert_eq!(select_nbest(&s, 1).fitness, 5.0);
        assert_eq!(select_nbest(&s, 2).fitness, 9.0);
        for p in &mut s.particles {
            p.nbh_size = 3;
        }
        assert_eq!(select_nbest(&s, 0).fitness, 9.0);
    }

    #[test]
    fn nbest_ties_go_to_lowest_index() {
        let mut s = hand_swarm();
        for p in &mut s.particles {
            p.pbest.fitness = 2.0;
            p.nbh_size = 3;
        }
        assert_eq!(select_nbest(&s, 2).position, vec![0.0, 0.0]);
    }

    #[test]
    fn stationary_fixed_point() {
        let c = PsoConfig {
            n_particles: 1,
            ..cfg()
        };
        let mut s = init_swarm(&mut ChaCha8Rng::seed_from_u64(4), &c, 2, 0.3);
        s.particles[0].velocity = vec![0.0; 4];
        let start = s.particles[0].position.clone();
        s.evaluate_initial(&|_: &[f64]| 1.0);
        step(&mut s, &|_: &[f64]| 1.0, 1, &c);
        assert_eq!(s.particles[0].position, start);
    }

    #[test]
    fn velocity_is_clamped() {
        let c = PsoConfig {
            n_particles: 1,
            ..cfg()
        };
        let mut s = init_swarm(&mut ChaCha8Rng::seed_from_u64(4), &c, 1, 100.0);
        s.particles[0].position = vec![0.0, 0.0];
        s.particles[0].velocity = vec![10.0, -10.0];
        s.evaluate_initial(&|_: &[f64]| 0.0);
        step(&mut s, &|_: &[f64]| 0.0, 1, &c);
        assert_eq!(s.particles[0].velocity, vec![c.v_max, c.v_min]);
        assert_eq!(s.particles[0].position, vec![c.v_max, c.v_min]);
    }

    #[test]
    fn constant_fitness_and_monotone_trace() {
        let c = PsoConfig { max_iters: 30, ..cfg() };
        let out = run(|_: &[f64]| 3.5, &c, 2, 0.3, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(out.best.fitness, 3.5);
        assert!(out.best.position.iter().all(|x| x.abs() <= 0.15));
        let f = |x: &[f64]| -(x[0] - 0.03).powi(2) - (x[1] + 0.02).powi(2) + (10.0 * x[2]).sin();
        let out = run(f, &c, 2, 0.3, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(out.trace.len(), 31);
        assert!(out.trace.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
    }

    #[test]
    fn min_distance_rule() {
        assert!(min_distance_feasible(&Apv::new(vec![[0.1, 0.1]]), 0.05));
        assert!(min_distance_feasible(&Apv::new(vec![[0.0, 0.0], [0.05, 0.0]]), 0.05));
        assert!(!min_distance_feasible(
            &Apv::new(vec![[0.0, 0.0], [0.05 - 1e-6, 0.0]]),
            0.05
        ));
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(
            &[TraceRow {
                iter: 0,
                best_fitness: 1.0,
                mean_fitness: 0.5,
            }],
            &mut buf,
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("iter,best_fitness,mean_fitness\n0,1.0,0.5"));
    }
}
