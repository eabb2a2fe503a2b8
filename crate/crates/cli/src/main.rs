//! Batch front end for the parked-car RSU simulator.
//!
//! Subcommands mirror the experiments the library supports: single runs,
//! weight sweeps, greedy-vs-optimal comparisons, the sparse-network
//! broadcast experiment, the battery-drain calculator, and config
//! validation. Every command is reproducible from its manifest: the same
//! config and seed produce byte-identical outputs.
//!
//! Exit codes: 0 success, 2 invalid configuration or input, 3 runtime
//! failure (I/O or a violated run invariant).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parknet::battery::battery_drain;
use parknet::broadcast::broadcast_experiment;
use parknet::engine;
use parknet::oracle::{compare_greedy_vs_optimal, Objective, DEFAULT_BRUTE_FORCE_CAP};
use parknet::propagation::predicted_coverage_map;
use parknet::scenario::{scenario_from_doc, Scenario, ScenarioDoc};
use parknet::selforg::DecisionPolicy;
use parknet::{CoverageMap, Error, Result};

#[derive(Parser)]
#[command(name = "parknet", version, about = "Parked-car RSU network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run(RunArgs),
    /// Sweep the decision weights over a grid and tabulate the outcomes.
    Sweep(SweepArgs),
    /// Compare the greedy decision process against the brute-force optimum.
    Compare(CompareArgs),
    /// Run the sparse-network broadcast experiment.
    Broadcast(BroadcastArgs),
    /// Compute the battery drain of a parked-car radio duty.
    Battery(BatteryArgs),
    /// Validate a scenario config without running it.
    Validate(ScenarioArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Coverage-quality weights (low saturation penalty).
    Set1,
    /// Car-count weights (high improvement weight).
    Set2,
}

/// Flags shared by every scenario-driven command.
#[derive(Args)]
struct ScenarioArgs {
    /// Scenario config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-path config overrides, e.g. `scenario.mu=0.5` (repeatable).
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// Decision-weight preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario> {
        let text = std::fs::read_to_string(&self.config).map_err(|e| {
            Error::ScenarioLoad(format!("cannot read {}: {e}", self.config.display()))
        })?;
        let mut text = text;
        for assignment in &self.overrides {
            text = ScenarioDoc::apply_override(&text, assignment)?;
        }
        if let Some(seed) = self.seed {
            text = ScenarioDoc::apply_override(&text, &format!("scenario.rng_seed={seed}"))?;
        }
        let doc = ScenarioDoc::from_toml(&text)?;
        let base = self.config.parent().unwrap_or_else(|| Path::new("."));
        let mut scenario = scenario_from_doc(doc, base)?;
        match self.preset {
            Some(Preset::Set1) => scenario.config.apply_set1(),
            Some(Preset::Set2) => scenario.config.apply_set2(),
            None => {}
        }
        Ok(scenario)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Artifact directory (defaults to $PARKNET_OUT_DIR or ./out).
    #[arg(long, env = "PARKNET_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Comma-separated kappa values.
    #[arg(long, default_value = "1.0", value_delimiter = ',')]
    kappa: Vec<f64>,
    /// Comma-separated lambda values.
    #[arg(long, default_value = "1.0", value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Comma-separated mu values.
    #[arg(long, default_value = "1.0", value_delimiter = ',')]
    mu: Vec<f64>,
    /// Worker threads for independent grid points.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Candidate-count cap on the exhaustive enumeration.
    #[arg(long, default_value_t = DEFAULT_BRUTE_FORCE_CAP)]
    cap: u32,
    /// Use the scalarized objective `mean_signal - alpha * rsu_count`
    /// instead of the lexicographic default.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct BroadcastArgs {
    #[command(flatten)]
    output: OutputArgs,
    /// Moving-vehicle densities to evaluate, per square kilometer.
    #[arg(long, default_value = "20", value_delimiter = ',')]
    density: Vec<f64>,
    /// Scenario area in square kilometers.
    #[arg(long, default_value_t = 1.0)]
    area: f64,
    /// Scenario duration in seconds.
    #[arg(long, default_value_t = 600.0)]
    duration: f64,
    /// Parked cars per moving car.
    #[arg(long, default_value_t = 0.1)]
    ratio: f64,
    /// Number of seeds per density.
    #[arg(long, default_value_t = 50)]
    seeds: u64,
}

#[derive(Args)]
struct BatteryArgs {
    /// Radio power draw, watts.
    power: f64,
    /// Battery voltage, volts.
    voltage: f64,
    /// Duty duration, hours.
    hours: f64,
    /// Battery capacity, amp-hours.
    capacity: f64,
    /// Remaining usable fraction of an aged battery (1.0 = new).
    #[arg(long, default_value_t = 1.0)]
    eol_factor: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ScenarioLoad(_) | Error::InvalidInput(_) | Error::Format(_) => 2,
        Error::Io(_) => 3,
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Broadcast(args) => cmd_broadcast(args),
        Command::Battery(args) => cmd_battery(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    let artifacts = engine::run(&scenario)?;
    artifacts.write_to(&args.output.out_dir)?;
    println!(
        "run complete: {} parked, {} active RSUs, mean completeness {:.3}, artifacts in {}",
        artifacts.summary.parked_total,
        artifacts.summary.active_rsus,
        artifacts.summary.mean_completeness,
        args.output.out_dir.display()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.kappa.is_empty() || args.lambda.is_empty() || args.mu.is_empty() {
        return Err(Error::Config("sweep grid must be nonempty".into()));
    }
    let scenario = args.scenario.load()?;
    let mut grid: Vec<(f64, f64, f64)> = Vec::new();
    for &k in &args.kappa {
        for &l in &args.lambda {
            for &m in &args.mu {
                grid.push((k, l, m));
            }
        }
    }
    let eval = |&(kappa, lambda, mu): &(f64, f64, f64)| -> Result<String> {
        let mut s = scenario.clone();
        s.config.kappa = kappa;
        s.config.lambda = lambda;
        s.config.mu = mu;
        let out = engine::run(&s)?;
        Ok(format!(
            "{kappa},{lambda},{mu},{:.6},{:.6},{}\n",
            out.summary.network.mean_signal,
            out.summary.network.mean_saturation,
            out.summary.active_rsus
        ))
    };
    let workers = args.parallel.max(1);
    let mut rows: Vec<(usize, Result<String>)> = if workers == 1 {
        grid.iter().map(eval).enumerate().collect()
    } else {
        // Fan grid points out round-robin; aggregation order stays fixed.
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let grid = &grid;
                    scope.spawn(move || {
                        grid.iter()
                            .enumerate()
                            .skip(w)
                            .step_by(workers)
                            .map(|(idx, point)| (idx, eval(point)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("sweep worker"))
                .collect()
        })
    };
    rows.sort_by_key(|(idx, _)| *idx);
    let mut csv = String::from("kappa,lambda,mu,mean_signal,mean_saturation,rsu_count\n");
    for (_, row) in rows {
        csv.push_str(&row?);
    }
    std::fs::create_dir_all(&args.output.out_dir)?;
    std::fs::write(args.output.out_dir.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let scenario = args.scenario.load()?;
    // Candidates: the parked cars, each with the ideal converged coverage
    // map of its spot.
    let cfg = &scenario.config;
    let mut candidates: Vec<CoverageMap> = Vec::new();
    for ev in &scenario.parking {
        if let Some(pos) = ev.position {
            candidates.push(predicted_coverage_map(
                pos,
                cfg.map_order,
                cfg.cell_size,
                &scenario.obstructions,
                &cfg.quality,
            )?);
        }
    }
    if candidates.is_empty() {
        return Err(Error::InvalidInput(
            "scenario has no parked candidates to compare".into(),
        ));
    }
    let policy = DecisionPolicy {
        weights: cfg.weights(),
        activation_threshold: cfg.activation_threshold,
        delta_cov_threshold: cfg.delta_cov_threshold,
    };
    let objective = match args.alpha {
        Some(alpha) => Objective::Scalarized { alpha },
        None => Objective::default(),
    };
    let report = compare_greedy_vs_optimal(&candidates, &policy, objective, args.cap)?;
    let json = serde_json::to_string_pretty(&report).expect("serialize");
    std::fs::create_dir_all(&args.output.out_dir)?;
    std::fs::write(args.output.out_dir.join("compare.json"), &json)?;
    println!("{json}");
    Ok(())
}

fn cmd_broadcast(args: BroadcastArgs) -> Result<()> {
    let mut csv = String::from(
        "density_per_km2,mean_time_full_control,mean_time_full_rsu,\
         mean_time_90_control,mean_time_90_rsu,improvement_full\n",
    );
    for &density in &args.density {
        let summary = broadcast_experiment(
            density,
            args.area,
            args.duration,
            args.ratio,
            0..args.seeds,
        )?;
        csv.push_str(&format!(
            "{density},{:.3},{:.3},{:.3},{:.3},{:.4}\n",
            summary.mean_time_full_control,
            summary.mean_time_full_rsu,
            summary.mean_time_90_control,
            summary.mean_time_90_rsu,
            summary.improvement_full
        ));
    }
    std::fs::create_dir_all(&args.output.out_dir)?;
    std::fs::write(args.output.out_dir.join("broadcast.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_battery(args: BatteryArgs) -> Result<()> {
    let percent = battery_drain(
        args.power,
        args.voltage,
        args.hours,
        args.capacity,
        args.eol_factor,
    )?;
    println!("{percent:.2}%");
    Ok(())
}

fn cmd_validate(args: ScenarioArgs) -> Result<()> {
    let scenario = args.load()?;
    println!(
        "ok: {} trace vehicles, {} parking events, digest {}",
        scenario.trace.vehicles().len(),
        scenario.parking.len(),
        scenario.digest()
    );
    Ok(())
}
