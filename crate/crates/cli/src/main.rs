//! `stc`: build traffic abstractions of a PETC loop, synthesise
//! self-triggered sampling strategies, simulate and plot.

mod plot;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use stc_core::abstraction::{build_model, make_backend, ActionSet, TrafficModel};
use stc_core::config::Config;
use stc_core::deadline::Petc;
use stc_core::policy::{make_policy, PetcPolicy, PolicyContext, StrategyPolicy};
use stc_core::rational::{to_f64, Rational};
use stc_core::simulation::{
    estimate_saist, initial_states, read_trace_csv, simulate, verify_deadline_safety,
    write_trace_csv, SaistEstimate, Trace,
};
use stc_core::synthesis::{
    calibrate_rho, default_rho_grid, solve_model, synthesize_with_models, CalibrationResult,
    StrategyTable,
};
use stc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "stc", version, about = "Self-triggered sampling strategies from PETC traffic models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides for the `run` section of the configuration.
#[derive(Args, Default)]
struct RunFlags {
    /// Deadline word length (largest one tried, for `pipeline`).
    #[arg(long)]
    l: Option<usize>,
    /// Sampled directions per abstraction.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per simulated trace.
    #[arg(long)]
    steps: Option<usize>,
    /// Initial states for SAIST estimates.
    #[arg(long)]
    n_init: Option<usize>,
    /// Trigger decay rate, replacing the one in the file.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the traffic model S_l and write it as JSON.
    Abstract {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Witness backend (`sampling` or `planar`).
        #[arg(long)]
        backend: Option<String>,
        /// Keep only the PETC action in every state.
        #[arg(long)]
        petc_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the mean-payoff game of a model and write the strategy table.
    Solve {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the closed loop and estimate the SAIST of a policy.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Strategy table for the `sdss` policy.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Sampling policy; `sdss` when a strategy is given, else `petc`.
        #[arg(long)]
        policy: Option<String>,
        /// Period in steps of h for the `periodic` policy.
        #[arg(long, default_value_t = 1)]
        period: u32,
        /// Initial state of the exported trace, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate if needed, synthesise, and export models, strategy, report
    /// and traces.
    Pipeline {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot inter-sample times and their running averages as SVG.
    Plot {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pick the trigger decay rate whose PETC SAIST is nearest a target.
    Calibrate {
        config: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        /// Target PETC SAIST; defaults to `run.target_saist`.
        #[arg(long)]
        target: Option<f64>,
        /// Candidate rates, comma separated.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Abstract {
            config,
            run,
            backend,
            petc_only,
            out,
        } => cmd_abstract(&config, &run, backend, petc_only, &out),
        Command::Solve { model, out } => cmd_solve(&model, &out),
        Command::Simulate {
            config,
            run,
            strategy,
            policy,
            period,
            x0,
            out,
        } => cmd_simulate(&config, &run, strategy.as_deref(), policy, period, x0, &out),
        Command::Pipeline { config, run, out } => cmd_pipeline(&config, &run, &out),
        Command::Plot { traces, out } => cmd_plot(&traces, &out),
        Command::Calibrate {
            config,
            run,
            target,
            grid,
            out,
        } => cmd_calibrate(&config, &run, target, grid, out.as_deref()),
    }
}

fn load_config(path: &Path, flags: &RunFlags) -> Result<Config> {
    let mut c = Config::load(path).map_err(|e| at(path, e))?;
    let r = &mut c.run;
    if let Some(l) = flags.l {
        r.l_max = l;
    }
    if let Some(b) = flags.budget {
        r.budget = b;
    }
    if let Some(s) = flags.seed {
        r.seed = s;
    }
    if let Some(s) = flags.steps {
        r.steps = s;
    }
    if let Some(n) = flags.n_init {
        r.n_init = n;
    }
    c.validate()?;
    Ok(c)
}

/// Names the offending file in input errors.
fn at(path: &Path, e: Error) -> Error {
    match e {
        Error::InvalidSpec(m) => Error::InvalidSpec(format!("{}: {m}", path.display())),
        e if e.is_input_error() => Error::InvalidSpec(format!("{}: {e}", path.display())),
        e => e,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| at(dir, e.into()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| at(path, e.into()))
}

fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let file = File::create(path).map_err(|e| at(path, e.into()))?;
    write_trace_csv(trace, BufWriter::new(file))
}

/// `p/q` even for integers.
fn ratio(r: Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn cmd_abstract(
    path: &Path,
    flags: &RunFlags,
    backend: Option<String>,
    petc_only: bool,
    out: &Path,
) -> Result<()> {
    let config = load_config(path, flags)?;
    let petc = config.petc(flags.rho)?;
    let name = backend.unwrap_or_else(|| config.run.backend.clone());
    let backend = make_backend(&name, &config.backend_options())?;
    let actions = if petc_only { ActionSet::PetcOnly } else { ActionSet::All };
    let model = build_model(&petc, config.run.l_max, backend.as_ref(), actions, config.run.witness_cap)?;
    model.save(out)?;
    println!(
        "l={} states={} edges={}",
        model.l(),
        model.n_states(),
        model.game().edges().len()
    );
    Ok(())
}

fn cmd_solve(path: &Path, out: &Path) -> Result<()> {
    let model = TrafficModel::load(path).map_err(|e| at(path, e))?;
    let solved = solve_model(&model)?;
    let t = &solved.table;
    t.save(out)?;
    println!(
        "l={} value={} ({:.6}) upper={} eps={:.6}",
        t.l(),
        ratio(t.game_value()),
        to_f64(t.game_value()),
        ratio(t.upper()),
        to_f64(t.upper() - t.game_value())
    );
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary {
    policy: String,
    x0: Vec<f64>,
    tail_average: f64,
    deadline_safe: bool,
    saist: SaistEstimate,
    strategy_misses: Option<u64>,
}

fn cmd_simulate(
    path: &Path,
    flags: &RunFlags,
    strategy: Option<&Path>,
    policy: Option<String>,
    period: u32,
    x0: Option<Vec<f64>>,
    out: &Path,
) -> Result<()> {
    let config = load_config(path, flags)?;
    let petc = config.petc(flags.rho)?;
    let table = strategy
        .map(|p| StrategyTable::load(p).map_err(|e| at(p, e)))
        .transpose()?
        .map(Arc::new);
    if let Some(t) = &table {
        check_strategy(t, &petc)?;
    }
    let name = policy.unwrap_or_else(|| if table.is_some() { "sdss" } else { "petc" }.to_string());
    let ctx = PolicyContext {
        strategy: table.clone(),
        period,
    };
    let policy = make_policy(&name, &ctx)?;
    let run = &config.run;
    let x0 = match x0 {
        Some(x) => x,
        None => initial_states(petc.nx(), 1, run.seed).remove(0),
    };
    let trace = simulate(&petc, policy.as_ref(), &x0, run.steps)?;
    let saist = estimate_saist(&petc, policy.as_ref(), run.n_init, run.steps, run.seed)?;
    create_dir(out)?;
    write_trace(&out.join(format!("{name}.csv")), &trace)?;
    let summary = SimulationSummary {
        policy: name,
        x0,
        tail_average: trace.tail_average(),
        deadline_safe: verify_deadline_safety(&trace, &petc),
        saist,
        strategy_misses: table.as_ref().map(|t| t.misses()),
    };
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "policy={} saist={:.6} tail={:.6} safe={}",
        summary.policy, summary.saist.min, summary.tail_average, summary.deadline_safe
    );
    Ok(())
}

fn check_strategy(table: &StrategyTable, petc: &Petc) -> Result<()> {
    if (table.h() - petc.h()).abs() > 1e-12 * petc.h() {
        return Err(Error::InvalidSpec(format!(
            "strategy was built for h = {}, the configuration has h = {}",
            table.h(),
            petc.h()
        )));
    }
    if let Some((w, _)) = table.table().iter().find(|(w, _)| w.indices().iter().any(|&k| k > petc.kmax())) {
        return Err(Error::InvalidSpec(format!(
            "strategy word {w} exceeds kmax = {}",
            petc.kmax()
        )));
    }
    Ok(())
}

/// The configured rho, or the calibrated one when the file leaves it out.
fn resolve_rho(config: &Config, flags: &RunFlags, out: &Path) -> Result<Option<f64>> {
    if flags.rho.is_some() || config.rho().is_some() || config.template()?.is_none() {
        return Ok(flags.rho);
    }
    let target = config.run.target_saist.ok_or_else(|| {
        Error::InvalidSpec("trigger.rho: missing, and run.target_saist is not set to calibrate it".into())
    })?;
    let result = calibrate(config, target, None)?;
    write_json(&out.join("calibration.json"), &result)?;
    println!("calibrated rho={} estimate={:.6} gap={:.6}", result.rho, result.estimate, result.gap);
    Ok(Some(result.rho))
}

fn calibrate(config: &Config, target: f64, grid: Option<Vec<f64>>) -> Result<CalibrationResult> {
    if !(target.is_finite() && target > 0.0) {
        return Err(Error::InvalidSpec(format!("target SAIST must be positive, got {target}")));
    }
    let template = config
        .template()?
        .ok_or_else(|| Error::InvalidSpec("calibration needs a predictive_lyapunov trigger".into()))?;
    let grid = grid
        .or_else(|| config.run.rho_grid.clone())
        .unwrap_or_else(default_rho_grid);
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0 && g < 1.0)) {
        return Err(Error::InvalidSpec("rho grid values must lie in (0, 1)".into()));
    }
    calibrate_rho(&config.plant()?, &template, target, &grid, &config.calibration_options())
}

fn cmd_pipeline(path: &Path, flags: &RunFlags, out: &Path) -> Result<()> {
    let config = load_config(path, flags)?;
    create_dir(out)?;
    let rho = resolve_rho(&config, flags, out)?;
    let petc = config.petc(rho)?;
    let outcome = synthesize_with_models(&petc, &config.synthesis_options())?;

    for model in &outcome.models {
        model.save(&out.join(format!("model-l{}.json", model.l())))?;
    }
    outcome.strategy.save(&out.join("strategy.json"))?;
    write_json(&out.join("report.json"), &outcome.report)?;
    for r in &outcome.report.records {
        let value = r.value.to_rational()?;
        let upper = r.upper.to_rational()?;
        println!(
            "l={} value={} ({}) upper={} eps={}",
            r.l,
            ratio(value),
            r.value.decimal,
            ratio(upper),
            r.epsilon.decimal
        );
    }

    let traces = out.join("traces");
    create_dir(&traces)?;
    let x0 = initial_states(petc.nx(), 1, config.run.seed).remove(0);
    let petc_trace = simulate(&petc, &PetcPolicy, &x0, config.run.steps)?;
    let sdss = StrategyPolicy::new(Arc::new(outcome.strategy));
    let sdss_trace = simulate(&petc, &sdss, &x0, config.run.steps)?;
    write_trace(&traces.join("petc.csv"), &petc_trace)?;
    write_trace(&traces.join("sdss.csv"), &sdss_trace)?;
    eprintln!(
        "chosen l={} ({:?}); traces: petc tail {:.4}, sdss tail {:.4}, sdss deadline-safe {}",
        outcome.report.chosen_l,
        outcome.report.stop_reason,
        petc_trace.tail_average(),
        sdss_trace.tail_average(),
        verify_deadline_safety(&sdss_trace, &petc)
    );
    Ok(())
}

fn cmd_plot(paths: &[PathBuf], out: &Path) -> Result<()> {
    let mut series = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path).map_err(|e| at(path, e.into()))?;
        let rows = read_trace_csv(file).map_err(|e| at(path, e))?;
        if rows.is_empty() {
            return Err(Error::InvalidSpec(format!("{}: trace has no rows", path.display())));
        }
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        series.push(plot::Series::from_rows(name, &rows));
    }
    fs::write(out, plot::render(&series)).map_err(|e| at(out, e.into()))?;
    Ok(())
}

fn cmd_calibrate(
    path: &Path,
    flags: &RunFlags,
    target: Option<f64>,
    grid: Option<Vec<f64>>,
    out: Option<&Path>,
) -> Result<()> {
    let config = load_config(path, flags)?;
    let target = target
        .or(config.run.target_saist)
        .ok_or_else(|| Error::InvalidSpec("no target: pass --target or set run.target_saist".into()))?;
    let result = calibrate(&config, target, grid)?;
    for e in &result.entries {
        let sim = e.simulated.map_or_else(|| "-".to_string(), |s| format!("{s:.6}"));
        println!("rho={} estimate={} ({}) simulated={sim}", e.rho, ratio(e.estimate.to_rational()?), e.estimate.decimal);
    }
    println!("chosen rho={} estimate={:.6} gap={:.6}", result.rho, result.estimate, result.gap);
    if let Some(out) = out {
        write_json(out, &result)?;
    }
    Ok(())
}
