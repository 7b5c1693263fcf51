//! Command-line front end: campaign runs, start-by-duration sweeps, report
//! re-aggregation from per-run records, and single-run traces.

use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use adasim::attack::{AttackSpec, AttackType, Schedule, Strategy, ValuePolicy};
use adasim::campaign::{
    emit_report, read_jsonl, run_matrix, sweep_start_duration, write_csv, write_summary,
    write_sweep_csv, MatrixSpec,
};
use adasim::runner::{run_scenario_traced, RunSpec, TraceConfig};
use adasim::scenario::{Scenario, ScenarioId};
use adasim::{SignalLayout, SimConfig};

#[derive(Parser)]
#[command(name = "adasim", version, about = "Closed-loop ADAS attack simulation campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full strategy/type/scenario matrix and write reports.
    Run(RunArgs),
    /// Map hazard outcomes over an attack start-by-duration grid.
    Sweep(SweepArgs),
    /// Re-aggregate reports from previously written per-run records.
    Report(ReportArgs),
    /// Execute one run and write bus, frame, and state traces.
    Trace(TraceArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Master seed override (decimal or 0x-prefixed hex).
    #[arg(long, value_parser = parse_seed)]
    seed: Option<u64>,
    /// Worker thread count; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Repetitions per cell override; 20 reproduces the full-scale campaign.
    #[arg(long)]
    reps: Option<u32>,
    /// Force one corruption value policy across all strategies.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<ValuePolicy>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_parser = parse_attack_type)]
    attack_type: AttackType,
    #[arg(long, value_parser = parse_scenario, default_value = "slow-lead")]
    scenario: ScenarioId,
    /// Initial bumper gap to the lead (m).
    #[arg(long, default_value_t = 100.0)]
    gap: f64,
    /// Attack start grid, `lo:hi:step` or a comma list (s).
    #[arg(long, default_value = "5:40:1")]
    starts: String,
    /// Attack duration grid, `lo:hi:step` or a comma list (s).
    #[arg(long, default_value = "0.5:2.5:0.5")]
    durations: String,
    #[arg(long, value_parser = parse_policy, default_value = "fixed")]
    policy: ValuePolicy,
    /// Include the driver-reaction model.
    #[arg(long)]
    driver: bool,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-run records written by `run` (runs.jsonl).
    #[arg(long)]
    records: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_parser = parse_scenario, default_value = "slow-lead")]
    scenario: ScenarioId,
    #[arg(long, default_value_t = 50.0)]
    gap: f64,
    /// Attack type; omit for an attack-free run.
    #[arg(long, value_parser = parse_attack_type)]
    attack_type: Option<AttackType>,
    #[arg(long, value_parser = parse_strategy, default_value = "context-aware")]
    strategy: Strategy,
    /// Value policy override; defaults to the strategy's own binding.
    #[arg(long, value_parser = parse_policy)]
    policy: Option<ValuePolicy>,
    /// Fixed attack start (s) overriding the strategy's draw.
    #[arg(long)]
    start: Option<f64>,
    /// Fixed attack duration (s) overriding the strategy's draw.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    driver: bool,
    #[arg(long, value_parser = parse_seed, default_value = "1")]
    seed: u64,
    /// Signal layout file; the built-in three-frame layout when omitted.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Write the sensor/control message log (bus.log).
    #[arg(long)]
    bus: bool,
    /// Write transmitted and received frames (frames.log).
    #[arg(long)]
    frames: bool,
    /// Write the per-step state table (states.csv).
    #[arg(long)]
    states: bool,
}

fn parse_seed(text: &str) -> Result<u64, String> {
    let parsed = match text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => text.parse(),
    };
    parsed.map_err(|_| format!("bad seed {text:?}"))
}

fn parse_scenario(text: &str) -> Result<ScenarioId, String> {
    ScenarioId::ALL
        .into_iter()
        .find(|s| s.label() == text)
        .ok_or_else(|| unknown("scenario", text, ScenarioId::ALL.map(|s| s.label())))
}

fn parse_attack_type(text: &str) -> Result<AttackType, String> {
    AttackType::ALL
        .into_iter()
        .find(|t| t.label() == text)
        .ok_or_else(|| unknown("attack type", text, AttackType::ALL.map(|t| t.label())))
}

fn parse_strategy(text: &str) -> Result<Strategy, String> {
    Strategy::ALL
        .into_iter()
        .find(|s| s.label() == text)
        .ok_or_else(|| unknown("strategy", text, Strategy::ALL.map(|s| s.label())))
}

fn parse_policy(text: &str) -> Result<ValuePolicy, String> {
    [ValuePolicy::Fixed, ValuePolicy::Strategic]
        .into_iter()
        .find(|p| p.label() == text)
        .ok_or_else(|| unknown("policy", text, ["fixed", "strategic"]))
}

fn unknown(what: &str, got: &str, options: impl IntoIterator<Item = &'static str>) -> String {
    let options: Vec<&str> = options.into_iter().collect();
    format!("unknown {what} {got:?}; expected one of {}", options.join(", "))
}

/// `lo:hi:step` inclusive, or a comma-separated list.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || anyhow!("bad grid {text:?}; use lo:hi:step or v1,v2,...");
    let values = if text.contains(':') {
        let parts: Vec<f64> =
            text.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
        let [lo, hi, step] = parts[..] else { return Err(bad()) };
        if !(step > 0.0 && hi >= lo) {
            return Err(bad());
        }
        let count = ((hi - lo) / step + 1e-9) as usize + 1;
        (0..count).map(|i| lo + step * i as f64).collect()
    } else {
        text.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

fn load_config(path: &Option<PathBuf>) -> Result<SimConfig> {
    match path {
        Some(path) => {
            SimConfig::load(path).with_context(|| format!("loading {}", path.display()))
        }
        None => Ok(SimConfig::default()),
    }
}

fn set_jobs(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    set_jobs(args.jobs)?;
    let mut cfg = load_config(&args.common.config)?;
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(reps) = args.reps {
        cfg.reps = reps;
        cfg.validate().map_err(|e| anyhow!(e))?;
    }
    let mut matrix = MatrixSpec::full(&cfg);
    matrix.value_policy = args.policy;

    let result = run_matrix(&cfg, &matrix).map_err(|e| anyhow!(e))?;
    emit_report(&args.common.out, &result, &cfg).context("writing reports")?;

    let pairs = result.records.len() / 2;
    println!("{pairs} driver-on/off run pairs -> {}", args.common.out.display());
    for name in ["report.csv", "summary.txt", "runs.jsonl"] {
        println!("  {name}");
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    set_jobs(args.jobs)?;
    let cfg = load_config(&args.common.config)?;
    let starts = parse_grid(&args.starts)?;
    let durations = parse_grid(&args.durations)?;
    let scenario = Scenario::new(args.scenario, args.gap, &cfg);
    let attack = AttackSpec {
        attack_type: args.attack_type,
        strategy: Strategy::RandomStartDuration,
        value_policy: args.policy,
    };
    let cells = sweep_start_duration(&cfg, scenario, attack, &starts, &durations, args.driver)
        .map_err(|e| anyhow!(e))?;

    fs::create_dir_all(&args.common.out)?;
    let path = args.common.out.join("sweep.csv");
    let mut out = Vec::new();
    write_sweep_csv(&mut out, &cells)?;
    fs::write(&path, out)?;

    let hazardous = cells.iter().filter(|c| c.hazardous).count();
    println!("{} cells, {hazardous} hazardous -> {}", cells.len(), path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.records)
        .with_context(|| format!("reading {}", args.records.display()))?;
    let result = read_jsonl(&text).context("parsing run records")?;

    fs::create_dir_all(&args.out)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &result)?;
    fs::write(args.out.join("report.csv"), csv)?;
    let mut summary = Vec::new();
    // The records don't carry the campaign's master seed, so the summary
    // doesn't claim one.
    write_summary(&mut summary, &result, None)?;
    fs::write(args.out.join("summary.txt"), summary)?;

    println!("{} records -> {}", result.records.len(), args.out.display());
    Ok(())
}

fn cmd_trace(args: TraceArgs) -> Result<()> {
    let cfg = load_config(&args.common.config)?;
    let layout = match &args.layout {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            SignalLayout::parse(&text).map_err(|e| anyhow!(e))?
        }
        None => SignalLayout::standard(),
    };

    let scenario = Scenario::new(args.scenario, args.gap, &cfg);
    let mut spec = match args.attack_type {
        Some(attack_type) => {
            let attack = AttackSpec {
                attack_type,
                strategy: args.strategy,
                value_policy: args.policy.unwrap_or_else(|| args.strategy.default_policy()),
            };
            RunSpec::attacked(scenario, attack, args.driver, args.seed)
        }
        None => {
            if args.start.is_some() || args.duration.is_some() {
                bail!("--start/--duration need an --attack-type");
            }
            RunSpec::attack_free(scenario, args.driver, args.seed)
        }
    };
    if args.start.is_some() || args.duration.is_some() {
        spec.schedule_override = Some(Schedule { start: args.start, duration: args.duration });
    }

    let trace_cfg = TraceConfig { bus: args.bus, frames: args.frames, states: args.states };
    let (result, trace) =
        run_scenario_traced(&cfg, &spec, &layout, &trace_cfg).map_err(|e| anyhow!(e))?;

    fs::create_dir_all(&args.common.out)?;
    let dumps = [
        (args.bus, "bus.log", &trace.bus_lines),
        (args.frames, "frames.log", &trace.frame_lines),
        (args.states, "states.csv", &trace.state_lines),
    ];
    for (enabled, name, lines) in dumps {
        if enabled {
            let mut text = lines.join("\n");
            text.push('\n');
            fs::write(args.common.out.join(name), text)?;
            println!("  {name}");
        }
    }

    println!("steps: {}", result.steps_run);
    match result.attack_activation {
        Some((step, rule)) => {
            let rule = rule.map_or_else(|| "timed".into(), |r| format!("rule {r}"));
            println!("attack: activated at step {step} ({rule})");
        }
        None => println!("attack: never activated"),
    }
    println!(
        "hazards: {:?}",
        result.hazard_kinds().iter().map(|h| h.label()).collect::<Vec<_>>()
    );
    if let Some(accident) = &result.accident {
        println!("accident: {} at step {}", accident.kind.label(), accident.step);
    }
    println!("alerts: {}", result.alerts.len());
    if let Some(tth) = result.time_to_hazard {
        println!("time to hazard: {tth:.2} s");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
        Command::Trace(args) => cmd_trace(args),
    }
}
