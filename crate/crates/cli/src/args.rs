use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "drivesim", version, about = "Train, evaluate and drive agents in a 2D kinematic driving simulator")]
pub struct Cli {
    /// Master seed applied to the world, evolution and DQN streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve network weights with the genetic algorithm.
    TrainEvo(TrainEvoArgs),
    /// Train the deep Q-learning agent.
    TrainDqn(TrainDqnArgs),
    /// Run seeded evaluation episodes of a checkpoint.
    Eval(EvalArgs),
    /// Re-simulate a trajectory log from its control column and check it.
    Replay(ReplayArgs),
    /// Drive a scenario with a fixed control stream and log the run.
    Record(RecordArgs),
    /// Serve a live session over WebSocket.
    Serve(ServeArgs),
    /// Build the comparison report from persisted runs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct TrainEvoArgs {
    /// Preset name or scenario file.
    #[arg(long, default_value = "straight_highway")]
    pub scenario: String,
    /// Generation budget (overrides the config).
    #[arg(long)]
    pub generations: Option<u64>,
    /// Continue from a checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save a checkpoint every N generations.
    #[arg(long, default_value_t = 5)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Args)]
pub struct TrainDqnArgs {
    #[arg(long, default_value = "straight_highway")]
    pub scenario: String,
    /// Episode budget (overrides the config).
    #[arg(long)]
    pub episodes: Option<u64>,
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Save a checkpoint every N episodes.
    #[arg(long, default_value_t = 50)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Scenario to evaluate on; the training scenario when omitted.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Reference trajectory log (e.g. a recorded human drive).
    #[arg(long, conflicts_with = "scripted_reference")]
    pub reference: Option<PathBuf>,
    /// Use the scripted lane-following driver as the reference.
    #[arg(long)]
    pub scripted_reference: bool,
    /// Number of evaluation episodes (overrides the config).
    #[arg(long)]
    pub episodes: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Trajectory log to replay.
    #[arg(long)]
    pub log: PathBuf,
    /// Scenario override; the log's scenario name when omitted.
    #[arg(long)]
    pub scenario: Option<String>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[arg(long, default_value = "straight_highway")]
    pub scenario: String,
    /// Text file with one `steer:accel` control per line (`#` comments).
    #[arg(long)]
    pub controls: PathBuf,
    /// Agent id written into the log header.
    #[arg(long, default_value = "scripted")]
    pub agent: String,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    #[arg(long, default_value = "straight_highway")]
    pub scenario: String,
    /// Checkpoint for agent-drive mode.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Simulation ticks per wall-clock second.
    #[arg(long, default_value_t = 20.0)]
    pub rate: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for run records; `<out>/runs` by default.
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// First train and evaluate both agents on each scenario.
    #[arg(long)]
    pub train: bool,
    /// Scenarios for `--train`; all presets when omitted.
    #[arg(long, num_args = 1..)]
    pub scenarios: Vec<String>,
}
