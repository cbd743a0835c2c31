//! Command-line front end: `train`, `evaluate` and `baselines`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::agent::{evaluate, train};
use crate::baselines::{compare_schemes, Scheme};
use crate::config::{Preset, RunConfig};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::neural::MlpParams;
use crate::trace::to_csv;

#[derive(Debug, Parser)]
#[command(
    name = "satrelay",
    version,
    about = "LEO satellite + HAP relay simulator and DQN trainer"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a Q-network and write checkpoint.json and training_log.csv.
    Train(TrainArgs),
    /// Roll out a checkpoint greedily and write trace.csv and summary.json.
    Evaluate(EvaluateArgs),
    /// Run baseline schemes and write comparison.csv/.json and traces/.
    Baselines(BaselinesArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration; lengths in kilometers.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Preset used when --config is absent.
    #[arg(long, value_enum, default_value = "desk")]
    pub preset: PresetArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PresetArg {
    Desk,
    Full,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured number of training iterations.
    #[arg(long)]
    pub iterations: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub episodes: usize,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// direct, sat-only, fixed-ground, fixed-hap or all.
    #[arg(long, conflicts_with = "all")]
    pub scheme: Option<String>,
    /// Runs every baseline.
    #[arg(long)]
    pub all: bool,
    /// Fixed-relay sweep step in meters.
    #[arg(long)]
    pub grid_step: Option<f64>,
    /// Adds the trained mobile-HAP policy to the comparison.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(args: &ConfigArgs) -> Result<(RunConfig, Option<String>)> {
    match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let rc = RunConfig::load(path)?;
            Ok((rc, Some(text)))
        }
        None => {
            let rc = match args.preset {
                PresetArg::Desk => Preset::Desk.base(),
                PresetArg::Full => Preset::Full.base(),
            };
            Ok((rc, None))
        }
    }
}

/// Run manifest, rewritten atomically as the run progresses.
struct Manifest {
    path: PathBuf,
    doc: Value,
    start: Instant,
    outputs: Vec<String>,
}

impl Manifest {
    fn begin(
        out: &Path,
        command: &str,
        config_path: Option<&Path>,
        config_text: Option<String>,
        config: &RunConfig,
        seed: Option<u64>,
    ) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let doc = json!({
            "tool": "satrelay",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "config_path": config_path.map(|p| p.display().to_string()),
            "config_text": config_text,
            "config": config,
            "started_unix_s": started,
            "status": "running",
            "outputs": [],
        });
        let m = Self {
            path: out.join("manifest.json"),
            doc,
            start: Instant::now(),
            outputs: Vec::new(),
        };
        m.flush()?;
        Ok(m)
    }

    fn flush(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.doc).expect("manifest serializes");
        write_atomic(&self.path, format!("{text}\n").as_bytes())
    }

    fn set(&mut self, key: &str, value: Value) {
        self.doc[key] = value;
    }

    fn write(&mut self, out: &Path, name: &str, contents: &[u8]) -> Result<()> {
        let path = out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_atomic(&path, contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.doc["outputs"] = json!(self.outputs);
        self.doc["elapsed_s"] = json!(self.start.elapsed().as_secs_f64());
        self.doc["status"] = json!("complete");
        self.flush()
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let (mut rc, text) = load_config(&args.config)?;
    if let Some(n) = args.iterations {
        rc.dqn.total_iterations = n;
    }
    let mut m = Manifest::begin(
        &args.out,
        "train",
        args.config.config.as_deref(),
        text,
        &rc,
        Some(args.seed),
    )?;
    let out = train(&rc.scenario, &rc.dqn, args.seed)?;
    m.set("reward", json!(out.scenario.reward));
    m.write(
        &args.out,
        "checkpoint.json",
        out.params.to_checkpoint_string().as_bytes(),
    )?;
    m.write(&args.out, "training_log.csv", out.log.to_csv().as_bytes())?;
    m.finish()
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let (rc, text) = load_config(&args.config)?;
    let params = MlpParams::load(&args.checkpoint)?;
    let mut m = Manifest::begin(
        &args.out,
        "evaluate",
        args.config.config.as_deref(),
        text,
        &rc,
        None,
    )?;
    m.set("checkpoint", json!(args.checkpoint.display().to_string()));
    let ev = evaluate(&params, &rc.scenario, args.episodes)?;
    let summary = json!({
        "episodes": args.episodes,
        "slots": ev.trace.len(),
        "mean_rate_bps": ev.mean_rate,
        "spectral_efficiency": ev.spectral_efficiency,
        "mean_reward": ev.mean_reward,
        "bandwidth_hz": rc.scenario.radio.bandwidth,
    });
    m.write(&args.out, "trace.csv", to_csv(&ev.trace).as_bytes())?;
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    m.write(&args.out, "summary.json", format!("{text}\n").as_bytes())?;
    m.finish()
}

pub fn cmd_baselines(args: &BaselinesArgs) -> Result<()> {
    let schemes: Vec<Scheme> = match (&args.scheme, args.all) {
        (_, true) => Scheme::BASELINES.to_vec(),
        (Some(s), false) if s == "all" => Scheme::BASELINES.to_vec(),
        (Some(s), false) => vec![s.parse()?],
        (None, false) => return Err(Error::config("scheme", "pass --scheme <name> or --all")),
    };
    let (mut rc, text) = load_config(&args.config)?;
    if let Some(step) = args.grid_step {
        rc.grid_step = step;
        rc.validate()?;
    }
    let policy = args
        .checkpoint
        .as_deref()
        .map(MlpParams::load)
        .transpose()?;
    let mut m = Manifest::begin(
        &args.out,
        "baselines",
        args.config.config.as_deref(),
        text,
        &rc,
        None,
    )?;
    let cmp = compare_schemes(&rc.scenario, &schemes, rc.grid_step, policy.as_ref())?;
    m.write(&args.out, "comparison.csv", cmp.to_csv().as_bytes())?;
    m.write(
        &args.out,
        "comparison.json",
        format!("{}\n", cmp.to_json()).as_bytes(),
    )?;
    for row in &cmp.rows {
        let name = format!("traces/{}.csv", row.scheme.name());
        m.write(&args.out, &name, to_csv(&row.records).as_bytes())?;
    }
    m.finish()
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Baselines(a) => cmd_baselines(a),
    }
}
