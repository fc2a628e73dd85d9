//! Convergence traces of the swarm and of the alternating loops.

use std::io::Write;

use serde::Serialize;

use super::run_scheme;
use super::scenario::Scenario;
use super::seeds::solver_rng;
use crate::ao::{SchemeConfig, WptFitness};
use crate::error::Result;
use crate::pso::{self, PsoConfig, PsoMode, PsoOutcome};
use crate::subsolvers::OffloadMode;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    /// `pso` or `ao`.
    pub kind: &'static str,
    pub series: String,
    pub iter: usize,
    pub value: f64,
}

/// Runs the swarm in both modes on the WPT-position fitness. Both modes draw
/// from the same stream so they start from the same swarm.
pub fn pso_traces(scenario: &Scenario, cfg: &PsoConfig, seed: u64) -> Result<Vec<(PsoMode, PsoOutcome)>> {
    let fit = WptFitness::new(scenario, OffloadMode::Partial)?;
    let mut out = Vec::new();
    for mode in [PsoMode::Vls, PsoMode::Standard] {
        let c = cfg.clone().with_mode(mode);
        c.validate()?;
        let mut rng = solver_rng(seed, 0);
        out.push((
            mode,
            pso::run(|f| fit.eval(f), &c, fit.m_antennas(), fit.region_a(), &mut rng),
        ));
    }
    Ok(out)
}

/// Outer-loop traces of each scheme, labelled by [`SchemeConfig::label`].
pub fn ao_traces(scenario: &Scenario, schemes: &[SchemeConfig], seed: u64) -> Result<Vec<(String, Vec<f64>)>> {
    schemes
        .iter()
        .enumerate()
        .map(|(i, cfg)| {
            let mut rng = solver_rng(seed, i as u64);
            let sol = run_scheme(scenario, cfg, &mut rng)?;
            Ok((cfg.label(), sol.convergence_trace))
        })
        .collect()
}

pub fn trace_points(pso: &[(PsoMode, PsoOutcome)], ao: &[(String, Vec<f64>)]) -> Vec<TracePoint> {
    let mut pts = Vec::new();
    for (mode, out) in pso {
        let series = match mode {
            PsoMode::Vls => "pso_vls",
            PsoMode::Standard => "pso_standard",
        };
        pts.extend(out.trace.iter().map(|r| TracePoint {
            kind: "pso",
            series: series.to_string(),
            iter: r.iter,
            value: r.best_fitness,
        }));
    }
    for (label, trace) in ao {
        pts.extend(trace.iter().enumerate().map(|(i, &v)| TracePoint {
            kind: "ao",
            series: label.clone(),
            iter: i,
            value: v,
        }));
    }
    pts
}

/// Writes `kind,series,iter,value` rows.
pub fn write_trace_points<W: Write>(points: &[TracePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
