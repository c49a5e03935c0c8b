//! `megtomo`: run MEG tracking experiments and write plot-ready data.
//!
//! Exit status is 0 on success, 1 when a run fails and 2 for usage or
//! configuration errors.

mod config;
mod output;
mod presets;
mod summary;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use megtomo::bench::{aggregate, noise_sweep, run_ensemble, split_runs, ScenarioConfig};
use megtomo::measurement::MeasurementFamily;
use megtomo::report::{write_aggregate_csv, write_trace_csv};
use serde_json::{json, Map, Value};

use config::{ConfigError, Source};
use output::OutputDir;

#[derive(Parser)]
#[command(name = "megtomo", version, about = "Online quantum state tomography by matrix-exponentiated gradient")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track one ensemble member and write its trace.
    Track {
        #[command(flatten)]
        common: Common,
        /// Ensemble member to run.
        #[arg(long, default_value_t = 0)]
        state: usize,
        /// Noise repeat of that member.
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Run a full ensemble and aggregate it.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Run the ensemble once per extra background level.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated extra background rates per window, e.g. 0,1000,2500.
        #[arg(long)]
        levels: String,
    },
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Bundled scenario name (see `megtomo presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config value by dotted path, e.g. noise.signal_rate=1e6.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for ensemble runs (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Runtime(format!("writing {}: {e}", path.display()))
}

impl Common {
    fn load(&self) -> Result<(ScenarioConfig, MeasurementFamily), Failure> {
        let source = match (&self.config, &self.preset) {
            (Some(path), _) => Source::File(path),
            (None, Some(name)) => Source::Preset(name),
            (None, None) => return Err(Failure::Config("one of --config or --preset is required".into())),
        };
        if self.jobs == Some(0) {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        let cfg = config::load(&source, &self.overrides, self.seed)?.resolved();
        let family = MeasurementFamily::build(cfg.scheme, cfg.dim).map_err(|e| Failure::Config(e.to_string()))?;
        Ok((cfg, family))
    }
}

fn to_bytes(f: impl FnOnce(&mut Vec<u8>) -> megtomo::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::Runtime(e.to_string()))?;
    Ok(buf)
}

fn cmd_track(common: &Common, state: usize, repeat: usize) -> Result<(), Failure> {
    let (cfg, family) = common.load()?;
    if state >= cfg.n_states || repeat >= cfg.n_noise_repeats() {
        return Err(Failure::Config(format!(
            "member (state {state}, repeat {repeat}) is outside the ensemble of {} states x {} repeats",
            cfg.n_states,
            cfg.n_noise_repeats()
        )));
    }
    let trace = cfg
        .run_one(&family, state, repeat)
        .map_err(|e| Failure::Runtime(format!("state {state}, repeat {repeat}: {e}")))?;
    let err = io_failure(&common.out);
    let mut out = OutputDir::create(&common.out).map_err(&err)?;
    out.write("trace.csv", &to_bytes(|b| write_trace_csv(b, &trace))?).map_err(&err)?;
    out.write_json("family.json", &family.to_record()).map_err(&err)?;
    let mut details = Map::new();
    details.insert("state_index".into(), state.into());
    details.insert("repeat_index".into(), repeat.into());
    details.insert("state_seed".into(), cfg.state_seed(state).into());
    details.insert("run_seed".into(), cfg.run_seed(state, repeat).into());
    out.finish("track", &cfg, details).map_err(&err)
}

fn cmd_bench(common: &Common) -> Result<(), Failure> {
    let (cfg, family) = common.load()?;
    let runs = run_ensemble(&cfg, common.jobs).map_err(|e| Failure::Runtime(e.to_string()))?;
    let err = io_failure(&common.out);
    let mut out = OutputDir::create(&common.out).map_err(&err)?;
    let mut seeds = Vec::with_capacity(runs.len());
    for run in &runs {
        seeds.push(json!({ "state": run.state_index, "repeat": run.repeat_index, "seed": run.seed }));
        if let Ok(trace) = &run.outcome {
            let name = format!("traces/state{}_rep{}.csv", run.state_index, run.repeat_index);
            out.write(&name, &to_bytes(|b| write_trace_csv(b, trace))?).map_err(&err)?;
        }
    }
    let (traces, errors) = split_runs(runs);
    let failures: Vec<String> = errors.iter().map(ToString::to_string).collect();
    if !traces.is_empty() {
        let stats = aggregate(&traces, cfg.threshold, cfg.burn_in).map_err(|e| Failure::Runtime(e.to_string()))?;
        out.write("aggregate.csv", &to_bytes(|b| write_aggregate_csv(b, &stats))?).map_err(&err)?;
        out.write_json("summary.json", &summary::ensemble_summary(&cfg, &stats, &failures)).map_err(&err)?;
    }
    out.write_json("family.json", &family.to_record()).map_err(&err)?;
    let mut details = Map::new();
    details.insert("runs".into(), Value::Array(seeds));
    out.finish("bench", &cfg, details).map_err(&err)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} of {} runs failed:\n  {}", failures.len(), failures.len() + traces.len(), failures.join("\n  "))))
    }
}

fn level_dir(level: f64) -> String {
    format!("level_{level}")
}

fn cmd_sweep(common: &Common, levels: &str) -> Result<(), Failure> {
    let levels = config::parse_levels(levels)?;
    let (cfg, family) = common.load()?;
    let results = noise_sweep(&cfg, &levels, common.jobs).map_err(|e| Failure::Runtime(e.to_string()))?;
    let err = io_failure(&common.out);
    let mut out = OutputDir::create(&common.out).map_err(&err)?;
    let mut failures = Vec::new();
    for level in &results {
        let mut level_cfg = cfg.clone();
        level_cfg.noise.extra_background_rate = level.level;
        let errors: Vec<String> = level
            .runs
            .iter()
            .filter_map(|r| r.outcome.as_ref().err().map(ToString::to_string))
            .collect();
        let dir = level_dir(level.level);
        out.write(&format!("{dir}/aggregate.csv"), &to_bytes(|b| write_aggregate_csv(b, &level.stats))?)
            .map_err(&err)?;
        let mut s = summary::ensemble_summary(&level_cfg, &level.stats, &errors);
        s["snr"] = level.snr.into();
        s["extra_snr"] = level.extra_snr.into();
        out.write_json(&format!("{dir}/summary.json"), &s).map_err(&err)?;
        failures.extend(errors.into_iter().map(|e| format!("level {}: {e}", level.level)));
    }
    let table = summary::sweep_csv(&results).map_err(|e| Failure::Runtime(e.to_string()))?;
    out.write("sweep.csv", &table).map_err(&err)?;
    out.write_json("family.json", &family.to_record()).map_err(&err)?;
    let mut details = Map::new();
    details.insert("levels".into(), levels.iter().map(|&l| Value::from(l)).collect());
    out.finish("sweep", &cfg, details).map_err(&err)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("{} runs failed:\n  {}", failures.len(), failures.join("\n  "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Track { common, state, repeat } => cmd_track(common, *state, *repeat),
        Command::Bench { common } => cmd_bench(common),
        Command::Sweep { common, levels } => cmd_sweep(common, levels),
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
