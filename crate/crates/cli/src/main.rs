//! Batch driver: single runs, sweeps, the oracle battery and traces.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mawpmec::ao::{validate_solution, Positioning, SchemeConfig};
use mawpmec::harness::seeds::solver_rng;
use mawpmec::harness::trace::{ao_traces, pso_traces, trace_points, write_trace_points};
use mawpmec::harness::{build_scenario, run_battery, run_scheme, run_sweep, BatteryOptions, ConfigFile, SweepSpec};
use mawpmec::pso::{PsoConfig, PsoMode};
use mawpmec::subsolvers::OffloadMode;

#[derive(Parser)]
#[command(name = "mawpmec", version, about = "Movable-antenna WP-MEC optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one scheme and print a summary.
    Run(RunArgs),
    /// Run a sweep spec and write a CSV.
    Sweep(SweepArgs),
    /// Run the oracle battery; exits nonzero when a check fails.
    Validate(ValidateArgs),
    /// Write swarm and outer-loop convergence traces as CSV.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Dynamic,
    SemiDynamic,
    Static,
    Fpa,
}

impl From<SchemeArg> for Positioning {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dynamic => Positioning::Dynamic,
            SchemeArg::SemiDynamic => Positioning::SemiDynamic,
            SchemeArg::Static => Positioning::Static,
            SchemeArg::Fpa => Positioning::Fpa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PsoModeArg {
    Vls,
    Standard,
}

#[derive(Clone, Copy, ValueEnum)]
enum OffloadArg {
    Partial,
    OffloadingOnly,
}

/// Scenario options shared by `run` and `trace`. Flags override the file.
#[derive(Args)]
struct ScenarioArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario seed.
    #[arg(long, env = "MAWPMEC_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    m_antennas: Option<usize>,
    #[arg(long)]
    k_wds: Option<usize>,
    #[arg(long)]
    paths_per_wd: Option<usize>,
    #[arg(long)]
    p_max_dbm: Option<f64>,
    #[arg(long)]
    f_edge_hz: Option<f64>,
    #[arg(long)]
    phi_cycles_per_bit: Option<f64>,
    /// Swarm size.
    #[arg(long)]
    particles: Option<usize>,
    /// Swarm iterations.
    #[arg(long)]
    pso_iters: Option<usize>,
}

impl ScenarioArgs {
    fn resolve(&self) -> Result<ConfigFile> {
        let mut cfg = match &self.config {
            Some(p) => ConfigFile::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => ConfigFile::default(),
        };
        let mut over = ConfigFile {
            seed: self.seed,
            ..Default::default()
        };
        over.system.m_antennas = self.m_antennas;
        over.system.k_wds = self.k_wds;
        over.system.paths_per_wd = self.paths_per_wd;
        over.system.p_max_dbm = self.p_max_dbm;
        over.system.f_edge_hz = self.f_edge_hz;
        over.system.phi_cycles_per_bit = self.phi_cycles_per_bit;
        over.pso.n_particles = self.particles;
        over.pso.max_iters = self.pso_iters;
        cfg.merge(&over);
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "dynamic")]
    scheme: SchemeArg,
    #[arg(long, value_enum, default_value = "vls")]
    pso_mode: PsoModeArg,
    #[arg(long, value_enum, default_value = "partial")]
    offload_mode: OffloadArg,
    /// Also write the full solution as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec (TOML).
    spec: PathBuf,
    /// Output CSV; the audit file is written next to it.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Write the report as JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, env = "MAWPMEC_SEED", default_value_t = 0)]
    seed: u64,
    /// Scenarios in the exhaustive comparison.
    #[arg(long, default_value_t = 3)]
    exhaustive_seeds: usize,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, short)]
    out: PathBuf,
}

fn scheme_config(pos: Positioning, pso_mode: PsoMode, offload: OffloadMode, pso: &Option<PsoConfig>) -> SchemeConfig {
    let mut c = SchemeConfig::new(pos)
        .with_pso_mode(pso_mode)
        .with_offload_mode(offload);
    c.pso = pso.clone();
    c
}

fn run(args: &RunArgs) -> Result<()> {
    let file = args.scenario.resolve()?;
    let params = file.params()?;
    let seed = file.seed.unwrap_or(0);
    let pso = file.pso_config(params.lambda)?;
    let offload = match args.offload_mode {
        OffloadArg::Partial => OffloadMode::Partial,
        OffloadArg::OffloadingOnly => OffloadMode::OffloadingOnly,
    };
    let pso_mode = match args.pso_mode {
        PsoModeArg::Vls => PsoMode::Vls,
        PsoModeArg::Standard => PsoMode::Standard,
    };
    let cfg = scheme_config(args.scheme.into(), pso_mode, offload, &pso);
    let scenario = build_scenario(&params, seed)?;
    let start = std::time::Instant::now();
    let sol = run_scheme(&scenario, &cfg, &mut solver_rng(seed, 0))?;
    let elapsed = start.elapsed();
    let report = validate_solution(&scenario, &sol)?;
    let a = &sol.allocation;
    println!("scheme      {}", cfg.label());
    println!("seed        {seed}");
    println!("scr_bps     {:.3}", sol.scr);
    println!("iterations  {}", sol.iterations());
    println!("wall_ms     {}", elapsed.as_millis());
    println!("tau0        {:.6}", a.tau0);
    println!("dtau        {:.6}", a.dtau);
    println!("trace_q     {:.6}", sol.q.trace());
    println!("wd  tau        e_J          f_Hz         beta");
    for k in 0..a.tau.len() {
        println!(
            "{k:<3} {:<10.6} {:<12.4e} {:<12.4e} {:.4}",
            a.tau[k], a.e[k], a.f[k], a.beta[k]
        );
    }
    println!(
        "constraints {}",
        if report.all_ok() {
            "ok".to_string()
        } else {
            format!("violated: {:?}", report.failures())
        }
    );
    if let Some(path) = &args.json {
        let w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        serde_json::to_writer_pretty(w, &sol)?;
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = SweepSpec::load(&args.spec).with_context(|| format!("reading {}", args.spec.display()))?;
    let report = run_sweep(&spec, &args.out)?;
    println!("value,scheme,mean_scr,std_scr,n_ok,n_failed");
    for s in &report.summary {
        println!(
            "{},{},{:.3},{:.3},{},{}",
            s.value, s.scheme, s.mean_scr, s.std_scr, s.n_ok, s.n_failed
        );
    }
    for e in &report.errors {
        eprintln!(
            "row value={} seed={} scheme={}: {}",
            e.value, e.seed, e.scheme, e.message
        );
    }
    println!(
        "wrote {} and {}",
        report.csv_path.display(),
        report.audit_path.display()
    );
    Ok(())
}

fn validate(args: &ValidateArgs) -> Result<bool> {
    let opts = BatteryOptions {
        seed: args.seed,
        exhaustive_seeds: args.exhaustive_seeds,
        ..Default::default()
    };
    let report = run_battery(&opts, args.out.as_deref())?;
    for c in &report.checks {
        println!(
            "{} {:<36} measured={:.3e} threshold={:.3e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        );
    }
    Ok(report.passed)
}

fn trace(args: &TraceArgs) -> Result<()> {
    let file = args.scenario.resolve()?;
    let params = file.params()?;
    let seed = file.seed.unwrap_or(0);
    let pso = file.pso_config(params.lambda)?;
    let scenario = build_scenario(&params, seed)?;
    let swarm = pso.clone().unwrap_or_else(|| PsoConfig::reference(params.lambda));
    let pso_runs = pso_traces(&scenario, &swarm, seed)?;
    let schemes: Vec<SchemeConfig> = [
        Positioning::Dynamic,
        Positioning::SemiDynamic,
        Positioning::Static,
        Positioning::Fpa,
    ]
    .into_iter()
    .map(|p| scheme_config(p, PsoMode::Vls, OffloadMode::Partial, &pso))
    .collect();
    let ao = ao_traces(&scenario, &schemes, seed)?;
    let w = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    write_trace_points(&trace_points(&pso_runs, &ao), w)?;
    for (label, t) in &ao {
        println!(
            "{label}: {} iterations, final {:.3}",
            t.len() - 1,
            t.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Validate(a) => validate(a),
        Command::Trace(a) => trace(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
