//! Exhaustive reference solver for two-antenna instances.
//!
//! Antenna positions are enumerated over the cell centres of an evenly
//! divided region and the WPT duration over multiples of `T / levels`. With
//! two antennas an optimal energy beam can be taken rank-one, so the beam is
//! scanned over the Bloch sphere and the best directions are refined by
//! alternating the time/energy and SCA sub-solvers. A placement is skipped
//! when its rate with every WD receiving the full beam power cannot beat the
//! incumbent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{
    beam_block, finish, time_energy_block, validate_solution, DiscreteGrid, Engine, Positioning, SchemeConfig,
    Solution, State,
};
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harvest::harvested_power;
use crate::subsolvers::{solve_time_energy, TimeEnergyOptions};

/// Beam directions scanned per placement.
const SPHERE_POINTS: usize = 40;
/// Scanned directions refined per placement.
const REFINED: usize = 3;
const REFINE_ITERS: usize = 30;
const REFINE_TOL: f64 = 1e-7;

/// Unordered cell-centre pairs that respect the minimum distance, flattened
/// as `[x1, y1, x2, y2]`.
pub fn grid_pairs(grid: &DiscreteGrid, region_a: f64, min_dist: f64) -> Vec<Vec<f64>> {
    let c = grid.centers(region_a);
    let cells: Vec<[f64; 2]> = c.iter().flat_map(|&y| c.iter().map(move |&x| [x, y])).collect();
    let mut pairs = Vec::new();
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            let d = (cells[i][0] - cells[j][0]).hypot(cells[i][1] - cells[j][1]);
            if d >= min_dist {
                pairs.push(vec![cells[i][0], cells[i][1], cells[j][0], cells[j][1]]);
            }
        }
    }
    pairs
}

/// Rank-one beams `P u uᴴ` on a Fibonacci lattice of the Bloch sphere.
pub(crate) fn sphere_beams(n: usize, p_max: f64) -> Vec<DMatrix<Complex64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let cos_t = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let theta = cos_t.clamp(-1.0, 1.0).acos();
            let phi = golden * i as f64;
            let u = DVector::from_vec(vec![
                Complex64::new((theta / 2.0).cos(), 0.0),
                Complex64::from_polar((theta / 2.0).sin(), phi),
            ]);
            &u * u.adjoint() * Complex64::new(p_max, 0.0)
        })
        .collect()
}

struct Candidate {
    wpt: Vec<f64>,
    offload: Vec<Vec<f64>>,
    bound: f64,
}

/// Searches every grid placement and WPT level for the configured scheme.
pub fn solve_exhaustive_small(scenario: &Scenario, cfg: &SchemeConfig) -> Result<Solution> {
    let params = &scenario.params;
    params.validate()?;
    cfg.validate()?;
    if params.m_antennas != 2 {
        return Err(Error::invalid(format!(
            "exhaustive search needs exactly 2 antennas, got {}",
            params.m_antennas
        )));
    }
    if cfg.positioning == Positioning::Fpa {
        return Err(Error::invalid("the fixed array has no placement to search"));
    }
    if scenario.k() != params.k_wds {
        return Err(Error::DimensionMismatch {
            expected: params.k_wds,
            got: scenario.k(),
        });
    }
    let grid = cfg.grid.unwrap_or_default();
    let engine = Engine::new(scenario, cfg.offload_mode, Some(grid));
    let k = engine.k();
    let pairs = grid_pairs(&grid, params.region_a, params.min_dist);
    if pairs.is_empty() {
        return Err(Error::invalid("no grid pair satisfies the minimum distance"));
    }
    let gain_table: Vec<Vec<f64>> = pairs
        .iter()
        .map(|f| (0..k).map(|i| engine.gain_at(i, f)).collect())
        .collect();

    let mut layouts: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    match cfg.positioning {
        Positioning::Static => {
            for (i, p) in pairs.iter().enumerate() {
                layouts.push((i, vec![p.clone(); k]));
            }
        }
        Positioning::Dynamic => {
            let offload: Vec<Vec<f64>> = (0..k)
                .map(|wd| {
                    let best = (0..pairs.len())
                        .max_by(|&a, &b| gain_table[a][wd].total_cmp(&gain_table[b][wd]).then(b.cmp(&a)))
                        .expect("pairs are non-empty");
                    pairs[best].clone()
                })
                .collect();
            for i in 0..pairs.len() {
                layouts.push((i, offload.clone()));
            }
        }
        Positioning::SemiDynamic => {
            let front = pareto_front(&gain_table);
            for i in 0..pairs.len() {
                for &j in &front {
                    layouts.push((i, vec![pairs[j].clone(); k]));
                }
            }
        }
        Positioning::Fpa => unreachable!("rejected above"),
    }

    let mut candidates = Vec::with_capacity(layouts.len());
    for (i, offload) in layouts {
        let wpt = pairs[i].clone();
        let xi_max: Vec<f64> = (0..k)
            .map(|wd| harvested_power(params.p_max * engine.steer[wd].gain_flat(&wpt), &params.eh[wd]))
            .collect();
        let gains = engine.gains(&offload);
        let bound = solve_time_energy(params, &xi_max, &gains, engine.mode, &TimeEnergyOptions::default())?.objective;
        candidates.push(Candidate { wpt, offload, bound });
    }
    candidates.sort_by(|a, b| b.bound.total_cmp(&a.bound));

    let beams = sphere_beams(SPHERE_POINTS, params.p_max);
    let mut best: Option<State> = None;
    for cand in &candidates {
        let incumbent = best.as_ref().map_or(f64::NEG_INFINITY, |s| s.scr);
        if cand.bound <= incumbent * (1.0 + 1e-9) {
            break;
        }
        let st = search_placement(&engine, cand, &beams)?;
        if st.scr > incumbent {
            best = Some(st);
        }
    }
    let st = best.expect("at least one placement is searched");
    let trace = vec![st.scr];
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

/// Indices of gain vectors not dominated by any other one.
fn pareto_front(gains: &[Vec<f64>]) -> Vec<usize> {
    (0..gains.len())
        .filter(|&i| {
            !(0..gains.len()).any(|j| {
                j != i
                    && gains[j].iter().zip(&gains[i]).all(|(a, b)| a >= b)
                    && (gains[j].iter().zip(&gains[i]).any(|(a, b)| a > b) || j < i)
            })
        })
        .collect()
}

fn search_placement(engine: &Engine, cand: &Candidate, beams: &[DMatrix<Complex64>]) -> Result<State> {
    let gains = engine.gains(&cand.offload);
    let mut scored = Vec::with_capacity(beams.len());
    for (i, q) in beams.iter().enumerate() {
        let xi = engine.xi_at(&cand.wpt, q);
        let v = solve_time_energy(engine.params, &xi, &gains, engine.mode, &TimeEnergyOptions::default())?.objective;
        scored.push((v, i));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best: Option<State> = None;
    for &(_, i) in scored.iter().take(REFINED) {
        let q = beams[i].clone();
        let xi = engine.xi_at(&cand.wpt, &q);
        let first = engine.time_energy(&xi, &gains, None)?;
        let mut st = State {
            wpt: cand.wpt.clone(),
            offload: cand.offload.clone(),
            q,
            scr: first.objective,
            alloc: first.allocation,
        };
        for _ in 0..REFINE_ITERS {
            let prev = st.scr;
            beam_block(engine, &mut st)?;
            time_energy_block(engine, &mut st)?;
            if st.scr - prev <= REFINE_TOL * prev.abs() {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| st.scr > b.scr) {
            best = Some(st);
        }
    }
    Ok(best.expect("at least one beam is refined"))
}
