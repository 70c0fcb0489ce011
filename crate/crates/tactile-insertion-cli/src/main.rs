//! Command-line entry points for the tactile insertion suite:
//! `train`, `eval`, `report`, and `replay`.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tactile_insertion::config::RunConfig;
use tactile_insertion::env::{log_from_jsonl, logs_to_jsonl, EpisodeLog};
use tactile_insertion::eval::ReportTable;
use tactile_insertion::pipeline::{
    evaluate_policy, train_policy, LoadedPolicy, ObjectSet, PolicyKind,
};
use tactile_insertion::util::write_atomic;

/// Environment variable that supplies the config path when `--config` is
/// not given.
const CONFIG_ENV: &str = "TACTILE_INSERTION_CONFIG";

#[derive(Parser)]
#[command(
    name = "tactile-insertion",
    about = "Train and evaluate tactile-feedback insertion policies in a desk-scale simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one policy and write its checkpoint and training log.
    Train {
        /// Policy pipeline: rl-star | rl-flat | rl-rgb | rl-ft | sl
        #[arg(long)]
        policy: String,
        /// Master seed; identical (config, seed) reproduce identical outputs.
        #[arg(long)]
        seed: u64,
        /// Path to a key-value config file (defaults apply when absent).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Evaluate a checkpoint over an object set and write metrics records.
    Eval {
        /// Checkpoint file written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Object set: train | novel | all
        #[arg(long, default_value = "all")]
        objects: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (defaults to the checkpoint's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collect metrics records from a directory into one table.
    Report {
        /// Directory containing *.metrics.jsonl files.
        #[arg(long = "in")]
        input: PathBuf,
        /// Basename for the table files (JSON and text).
        #[arg(long, default_value = "table")]
        out: String,
    },
    /// Print a step-by-step trace of one logged episode.
    Replay {
        /// A *.replay.jsonl file written by `eval`.
        #[arg(long)]
        log: PathBuf,
        /// Episode index within the log.
        #[arg(long)]
        episode: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn load_config(flag: Option<PathBuf>) -> Result<RunConfig, AnyError> {
    let path = flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        None => Ok(RunConfig::standard()),
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
            Ok(RunConfig::parse(&text)?)
        }
    }
}

fn run(command: Command) -> Result<(), AnyError> {
    match command {
        Command::Train { policy, seed, config, out } => {
            let cfg = load_config(config)?;
            let kind = PolicyKind::parse(&policy)?;
            let result = train_policy(&cfg, kind, seed)?;
            std::fs::create_dir_all(&out)?;
            let stem = format!("{}-seed{}", kind.label(), seed);
            let ckpt = out.join(format!("{stem}.ckpt"));
            let log = out.join(format!("{stem}.train.jsonl"));
            write_atomic(&ckpt, result.checkpoint.as_bytes())?;
            write_atomic(&log, result.training_log.to_jsonl().as_bytes())?;
            println!(
                "trained {} (seed {seed}): {} transitions over {} episodes, bootstrap mse {:.3}",
                kind.label(),
                result.training_log.total_transitions,
                result.training_log.episodes.len(),
                result.bootstrap_mse,
            );
            println!("wrote {}", ckpt.display());
            println!("wrote {}", log.display());
            Ok(())
        }
        Command::Eval { checkpoint, objects, seed, config, out } => {
            let cfg = load_config(config)?;
            let set = ObjectSet::parse(&objects)
                .ok_or_else(|| format!("unknown object set '{objects}' (train|novel|all)"))?;
            let text = std::fs::read_to_string(&checkpoint)
                .map_err(|e| format!("cannot read checkpoint {}: {e}", checkpoint.display()))?;
            let loaded = LoadedPolicy::parse(&text)?;
            let result = evaluate_policy(&loaded, set, &cfg, seed);
            let dir = out.unwrap_or_else(|| {
                checkpoint.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
            });
            std::fs::create_dir_all(&dir)?;
            let stem = checkpoint
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("checkpoint")
                .to_string();
            let base = format!("{stem}.{objects}.seed{seed}");
            let metrics_path = dir.join(format!("{base}.metrics.jsonl"));
            let episodes_path = dir.join(format!("{base}.episodes.jsonl"));
            let replay_path = dir.join(format!("{base}.replay.jsonl"));
            let mut metrics_text = String::new();
            for m in &result.metrics {
                metrics_text.push_str(&serde_json::to_string(m)?);
                metrics_text.push('\n');
            }
            let mut episodes_text = String::new();
            for r in &result.records {
                episodes_text.push_str(&serde_json::to_string(r)?);
                episodes_text.push('\n');
            }
            write_atomic(&metrics_path, metrics_text.as_bytes())?;
            write_atomic(&episodes_path, episodes_text.as_bytes())?;
            write_atomic(&replay_path, logs_to_jsonl(&result.logs).as_bytes())?;
            for m in &result.metrics {
                let attempts = m
                    .mean_attempts_on_success
                    .map(|a| format!("{a:.2}"))
                    .unwrap_or_else(|| "-".to_string());
                println!(
                    "{} on {}: success {:.1}%  attempts {attempts}",
                    m.policy,
                    m.object,
                    100.0 * m.success_rate,
                );
            }
            println!("wrote {}", metrics_path.display());
            println!("wrote {}", episodes_path.display());
            println!("wrote {}", replay_path.display());
            Ok(())
        }
        Command::Report { input, out } => {
            let mut table = ReportTable::default();
            let mut found = 0;
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&input)
                .map_err(|e| format!("cannot read {}: {e}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .collect();
            entries.sort();
            for path in entries {
                let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
                if !name.ends_with(".metrics.jsonl") {
                    continue;
                }
                let text = std::fs::read_to_string(&path)?;
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let m: tactile_insertion::eval::Metrics = serde_json::from_str(line)?;
                    table.insert(&m);
                    found += 1;
                }
            }
            let json_path = input.join(format!("{out}.json"));
            let text_path = input.join(format!("{out}.txt"));
            let rendered = table.to_text();
            write_atomic(&json_path, table.to_json().as_bytes())?;
            write_atomic(&text_path, rendered.as_bytes())?;
            print!("{rendered}");
            println!("({found} metric records -> {})", json_path.display());
            Ok(())
        }
        Command::Replay { log, episode } => {
            let text = std::fs::read_to_string(&log)
                .map_err(|e| format!("cannot read log {}: {e}", log.display()))?;
            let ep = log_from_jsonl(&text, episode)
                .ok_or_else(|| format!("episode {episode} not found in {}", log.display()))?;
            print_episode(episode, &ep);
            Ok(())
        }
    }
}

fn obs_summary(obs: &[f64]) -> String {
    let norm = obs.iter().map(|x| x * x).sum::<f64>().sqrt();
    let head: Vec<String> = obs.iter().take(4).map(|x| format!("{x:+.3}")).collect();
    format!("obs[{}] |.|={:.3} [{} ...]", obs.len(), norm, head.join(" "))
}

fn print_episode(index: usize, ep: &EpisodeLog) {
    println!(
        "episode {index}: object={} env={} representation={}",
        ep.object,
        ep.env.label(),
        ep.representation.label()
    );
    println!(
        "reset: error=({:+.3} mm, {:+.3} mm, {:+.2} deg) fits={} contacts={} max_depth={:.3} mm",
        ep.initial_error.ex,
        ep.initial_error.ey,
        ep.initial_error.etheta,
        ep.reset_fits,
        ep.reset_contact_count,
        ep.reset_max_depth,
    );
    println!("       {}", obs_summary(&ep.reset_obs));
    for (i, s) in ep.steps.iter().enumerate() {
        println!(
            "step {:>2}: action=({:+.3}, {:+.3}, {:+.2}) error=({:+.3}, {:+.3}, {:+.2}) reward={:+.3} fits={} contacts={} max_depth={:.3}",
            i + 1,
            s.action.dx,
            s.action.dy,
            s.action.dtheta,
            s.post_error.ex,
            s.post_error.ey,
            s.post_error.etheta,
            s.reward,
            s.fits,
            s.contact_count,
            s.max_depth,
        );
        println!("        {}", obs_summary(&s.obs));
    }
    println!("outcome: {:?} after {} attempts", ep.outcome, ep.attempts);
}
