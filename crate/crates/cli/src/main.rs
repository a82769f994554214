//! `dpd` — closed-loop planner runner.
//!
//! Subcommands: `run` (simulate scenarios to JSONL logs), `eval`
//! (aggregate logs into a JSON+CSV report), `inspect` (print a log's
//! decision trace), `scenarios` (write the bundled scenario files).
//!
//! The config file (TOML or JSON) is taken from `--config`, falling back
//! to the `DPD_CONFIG` environment variable, then to built-in defaults.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dualpath_core::harness::{
    episode_metrics, export_report, load_log, run_episode, save_log, MetricsReport, RunMode,
};
use dualpath_core::world::load_scenario;
use dualpath_core::Config;

#[derive(Parser)]
#[command(name = "dpd", about = "Dual-pathway driving planner simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Dual,
    #[value(name = "fast-only")]
    FastOnly,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file or every *.json scenario in a directory.
    Run {
        /// Scenario file or directory of scenario files.
        #[arg(long)]
        scenario: PathBuf,
        /// Config file (TOML or JSON); falls back to $DPD_CONFIG, then defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dual")]
        mode: ModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for per-episode JSONL logs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a directory of episode logs into a metrics report.
    Eval {
        /// Directory containing *.jsonl episode logs.
        #[arg(long)]
        logs: PathBuf,
        /// Report path; JSON is written here and CSV next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the per-tick decision trace of one episode log.
    Inspect {
        #[arg(long)]
        log: PathBuf,
        /// Show full detail for a single tick.
        #[arg(long)]
        tick: Option<u32>,
    },
    /// Write the bundled scenario suites as JSON files.
    Scenarios {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config, dualpath_core::Error> {
    if let Some(p) = path {
        return Config::load(p);
    }
    if let Ok(env_path) = std::env::var("DPD_CONFIG") {
        if !env_path.is_empty() {
            return Config::load(Path::new(&env_path));
        }
    }
    Ok(Config::default())
}

fn scenario_files(path: &Path) -> Result<Vec<PathBuf>, String> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| format!("reading {}: {e}", path.display()))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(format!("no *.json scenarios in {}", path.display()));
        }
        return Ok(files);
    }
    Err(format!("scenario path {} does not exist", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn cmd_run(
    scenario: &Path,
    config: Option<&Path>,
    mode: ModeArg,
    seed: u64,
    out: &Path,
) -> Result<(), String> {
    let cfg = load_config(config).map_err(|e| e.to_string())?;
    let mode = match mode {
        ModeArg::Dual => RunMode::Dual,
        ModeArg::FastOnly => RunMode::FastOnly,
    };
    std::fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;
    for file in scenario_files(scenario)? {
        let name = stem(&file);
        let sc = load_scenario(&file).map_err(|e| e.to_string())?;
        let started = std::time::Instant::now();
        let log = run_episode(&sc, &name, &cfg, mode, seed).map_err(|e| e.to_string())?;
        let wall = started.elapsed().as_secs_f64();
        let log_path = out.join(format!("{name}.jsonl"));
        save_log(&log, &log_path).map_err(|e| e.to_string())?;
        println!(
            "{name}: ticks={} slow={} collisions={} red_light={} rc={:.3} ds={:.3} wall={wall:.3}s -> {}",
            log.summary.ticks,
            log.summary.slow_ticks,
            log.summary.collision_events,
            log.summary.red_light_violations,
            log.summary.route_completion,
            log.summary.driving_score,
            log_path.display(),
        );
    }
    Ok(())
}

fn cmd_eval(logs: &Path, out: &Path) -> Result<(), String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(logs)
        .map_err(|e| format!("reading {}: {e}", logs.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "jsonl"))
        .collect();
    files.sort();
    let started = std::time::Instant::now();
    let mut rows: Vec<(String, MetricsReport)> = Vec::with_capacity(files.len());
    for file in &files {
        let log = load_log(file).map_err(|e| e.to_string())?;
        let metrics = episode_metrics(&log, &log.scenario_spec).map_err(|e| e.to_string())?;
        rows.push((log.scenario.clone(), metrics));
    }
    export_report(&rows, out).map_err(|e| e.to_string())?;
    println!(
        "{} episodes -> {} (+ csv), wall={:.3}s",
        rows.len(),
        out.display(),
        started.elapsed().as_secs_f64(),
    );
    Ok(())
}

fn cmd_inspect(log_path: &Path, tick: Option<u32>) -> Result<(), String> {
    let log = load_log(log_path).map_err(|e| e.to_string())?;
    println!(
        "scenario={} mode={} seed={}",
        log.scenario,
        match log.mode {
            RunMode::Dual => "dual",
            RunMode::FastOnly => "fast-only",
        },
        log.seed,
    );
    match tick {
        Some(t) => {
            let r = log
                .records
                .iter()
                .find(|r| r.tick == t)
                .ok_or_else(|| format!("no tick {t} in log (0..{})", log.records.len()))?;
            println!(
                "{}",
                serde_json::to_string_pretty(r).map_err(|e| e.to_string())?
            );
        }
        None => {
            for r in &log.records {
                let actions = r
                    .meta_actions
                    .as_ref()
                    .map(|a| format!(" actions={}", serde_json::to_string(a).unwrap_or_default()))
                    .unwrap_or_default();
                println!(
                    "tick {:>3}: {:?}/{:?}{} reward={:+.3} u={:.3}{}{}{}{}",
                    r.tick,
                    r.pathway,
                    r.reason,
                    if r.gated { " gated" } else { "" },
                    r.best_reward,
                    r.uncertainty,
                    if r.dist_flag { " dist_flag" } else { "" },
                    actions,
                    if r.collided { " COLLISION" } else { "" },
                    if r.red_light_violation { " RED_LIGHT" } else { "" },
                );
            }
            let s = &log.summary;
            println!(
                "summary: rc={:.3} is={:.3} ds={:.3} slow_rate={:.3}",
                s.route_completion, s.infraction_score, s.driving_score, s.slow_activation_rate
            );
        }
    }
    Ok(())
}

fn cmd_scenarios(out: &Path) -> Result<(), String> {
    std::fs::create_dir_all(out).map_err(|e| format!("creating {}: {e}", out.display()))?;
    let mut all: Vec<(String, dualpath_core::world::Scenario)> = Vec::new();
    all.push(("intersection".into(), dualpath_core::suite::intersection_scenario()));
    all.extend(dualpath_core::suite::hazard_suite());
    all.extend(dualpath_core::suite::nominal_suite());
    for (name, sc) in &all {
        let path = out.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(sc).map_err(|e| e.to_string())?;
        std::fs::write(&path, text).map_err(|e| format!("writing {}: {e}", path.display()))?;
    }
    println!("wrote {} scenarios to {}", all.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            scenario,
            config,
            mode,
            seed,
            out,
        } => cmd_run(scenario, config.as_deref(), *mode, *seed, out),
        Command::Eval { logs, out } => cmd_eval(logs, out),
        Command::Inspect { log, tick } => cmd_inspect(log, *tick),
        Command::Scenarios { out } => cmd_scenarios(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
