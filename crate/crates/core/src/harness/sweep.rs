//! Parameter sweeps over seeds and schemes with CSV output.
//!
//! Rows are ordered by swept value, seed and scheme position in the spec.
//! Next to the CSV a `.runs.jsonl` file records, per run, the resolved
//! parameters, the scheme configuration and the outcome.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{PsoSection, SystemConfig};
use super::run_scheme;
use super::scenario::build_scenario;
use super::seeds::solver_rng;
use crate::ao::{Positioning, SchemeConfig};
use crate::error::{Error, Result};
use crate::pso::PsoMode;
use crate::rates::SystemParams;
use crate::subsolvers::OffloadMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Number of HAP antennas.
    M,
    /// Number of WDs.
    K,
    /// HAP transmit power budget in dBm.
    PMax,
    /// Paths per WD.
    LK,
    /// Edge CPU frequency in Hz.
    FE,
    /// Task complexity in cycles/bit.
    Phi,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::M => "m",
            SweepVariable::K => "k",
            SweepVariable::PMax => "p_max",
            SweepVariable::LK => "l_k",
            SweepVariable::FE => "f_e",
            SweepVariable::Phi => "phi",
        }
    }

    /// Writes `value` into `cfg`.
    pub fn apply(self, cfg: &mut SystemConfig, value: f64) -> Result<()> {
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Config(format!(
                    "{} needs a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepVariable::M => cfg.m_antennas = Some(count()?),
            SweepVariable::K => cfg.k_wds = Some(count()?),
            SweepVariable::LK => cfg.paths_per_wd = Some(count()?),
            SweepVariable::PMax => cfg.p_max_dbm = Some(value),
            SweepVariable::FE => cfg.f_edge_hz = Some(value),
            SweepVariable::Phi => cfg.phi_cycles_per_bit = Some(value),
        }
        Ok(())
    }
}

/// One scheme of a sweep; unset fields take the scheme defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub positioning: Positioning,
    pub pso_mode: Option<PsoMode>,
    pub offload_mode: Option<OffloadMode>,
    pub max_outer_iters: Option<usize>,
    pub outer_tol: Option<f64>,
}

impl SchemeEntry {
    pub fn to_config(&self) -> SchemeConfig {
        let mut c = SchemeConfig::new(self.positioning);
        if let Some(m) = self.pso_mode {
            c.pso_mode = m;
        }
        if let Some(m) = self.offload_mode {
            c.offload_mode = m;
        }
        if let Some(n) = self.max_outer_iters {
            c.max_outer_iters = n;
        }
        if let Some(t) = self.outer_tol {
            c.outer_tol = t;
        }
        c
    }
}

impl From<&SchemeConfig> for SchemeEntry {
    fn from(c: &SchemeConfig) -> Self {
        Self {
            positioning: c.positioning,
            pso_mode: Some(c.pso_mode),
            offload_mode: Some(c.offload_mode),
            max_outer_iters: Some(c.max_outer_iters),
            outer_tol: Some(c.outer_tol),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<SchemeEntry>,
    /// Writes measured wall time; otherwise `wall_ms` is 0 so repeated runs
    /// give identical files.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub pso: PsoSection,
}

impl SweepSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (what, empty) in [
            ("values", self.values.is_empty()),
            ("seeds", self.seeds.is_empty()),
            ("schemes", self.schemes.is_empty()),
        ] {
            if empty {
                return Err(Error::Config(format!("sweep needs at least one entry in `{what}`")));
            }
        }
        for &v in &self.values {
            self.params_at(v)?;
        }
        Ok(())
    }

    pub fn params_at(&self, value: f64) -> Result<SystemParams> {
        let mut cfg = self.system.clone();
        self.variable.apply(&mut cfg, value)?;
        cfg.resolve()
    }

    fn scheme_configs(&self, lambda: f64) -> Result<Vec<SchemeConfig>> {
        let pso = if self.pso.is_empty() {
            None
        } else {
            Some(self.pso.resolve(lambda)?)
        };
        Ok(self
            .schemes
            .iter()
            .map(|s| {
                let mut c = s.to_config();
                c.pso = pso.clone();
                c
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub seed: u64,
    pub scheme: String,
    pub scr_bps: Option<f64>,
    pub iters: Option<usize>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub value: f64,
    pub scheme: String,
    pub mean_scr: f64,
    pub std_scr: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub value: f64,
    pub seed: u64,
    pub scheme: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub csv_path: PathBuf,
    pub audit_path: PathBuf,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SchemeSummary>,
    pub errors: Vec<RowError>,
}

impl SweepReport {
    /// Summary entry for `(value, scheme label)`.
    pub fn summary_for(&self, value: f64, scheme: &str) -> Option<&SchemeSummary> {
        self.summary.iter().find(|s| s.value == value && s.scheme == scheme)
    }
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    variable: &'static str,
    value: f64,
    seed: u64,
    scheme: &'a SchemeConfig,
    params: &'a SystemParams,
    scr_bps: Option<f64>,
    convergence_trace: Option<&'a [f64]>,
    error: Option<&'a str>,
}

/// Path of the audit file written next to `csv_path`.
pub fn audit_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_stem().unwrap_or_default().to_os_string();
    name.push(".runs.jsonl");
    csv_path.with_file_name(name)
}

/// Runs every `(value, seed, scheme)` cell in order. Solver failures and
/// per-row write failures are collected in the report; only failing to
/// create the output files aborts the sweep.
pub fn run_sweep(spec: &SweepSpec, out_path: &Path) -> Result<SweepReport> {
    spec.validate()?;
    let audit = audit_path(out_path);
    let mut csv = csv::Writer::from_path(out_path)?;
    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(&audit)?);
    let var = spec.variable.name();
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut summary = Vec::new();

    for &value in &spec.values {
        let params = spec.params_at(value)?;
        let schemes = spec.scheme_configs(params.lambda)?;
        let mut per_scheme: Vec<Vec<f64>> = vec![Vec::new(); schemes.len()];
        let mut failed = vec![0usize; schemes.len()];
        for &seed in &spec.seeds {
            let scenario = build_scenario(&params, seed);
            for (si, cfg) in schemes.iter().enumerate() {
                let label = cfg.label();
                let start = Instant::now();
                let outcome = scenario.as_ref().map_err(|e| e.to_string()).and_then(|sc| {
                    let mut rng = solver_rng(seed, si as u64);
                    run_scheme(sc, cfg, &mut rng).map_err(|e| e.to_string())
                });
                let elapsed = start.elapsed().as_millis() as u64;
                let row = SweepRow {
                    variable: var.to_string(),
                    value,
                    seed,
                    scheme: label.clone(),
                    scr_bps: outcome.as_ref().ok().map(|s| s.scr),
                    iters: outcome.as_ref().ok().map(|s| s.iterations()),
                    wall_ms: if spec.record_timing { elapsed } else { 0 },
                };
                let record = AuditRecord {
                    variable: var,
                    value,
                    seed,
                    scheme: cfg,
                    params: &params,
                    scr_bps: row.scr_bps,
                    convergence_trace: outcome.as_ref().ok().map(|s| s.convergence_trace.as_slice()),
                    error: outcome.as_ref().err().map(String::as_str),
                };
                let mut push_err = |message: String| {
                    errors.push(RowError {
                        value,
                        seed,
                        scheme: label.clone(),
                        message,
                    });
                };
                match &outcome {
                    Ok(s) => per_scheme[si].push(s.scr),
                    Err(e) => {
                        failed[si] += 1;
                        push_err(e.clone());
                    }
                }
                if let Err(e) = csv.serialize(&row) {
                    push_err(format!("csv write: {e}"));
                }
                let line = serde_json::to_string(&record)
                    .map_err(Error::from)
                    .and_then(|l| writeln!(jsonl, "{l}").map_err(Error::from));
                if let Err(e) = line {
                    push_err(format!("audit write: {e}"));
                }
                rows.push(row);
            }
        }
        for (si, cfg) in schemes.iter().enumerate() {
            let (mean, std) = mean_std(&per_scheme[si]);
            summary.push(SchemeSummary {
                value,
                scheme: cfg.label(),
                mean_scr: mean,
                std_scr: std,
                n_ok: per_scheme[si].len(),
                n_failed: failed[si],
            });
        }
    }
    csv.flush()?;
    jsonl.flush()?;
    Ok(SweepReport {
        csv_path: out_path.to_path_buf(),
        audit_path: audit,
        rows,
        summary,
        errors,
    })
}

/// Sample mean and standard deviation (`n − 1` denominator); NaN when empty.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
