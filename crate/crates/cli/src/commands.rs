use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use drivesim::dqn::{self, DqnTrainer};
use drivesim::episode::{rollout, RolloutLimits, ScriptedDriver, StopReason};
use drivesim::eval::{
    build_comparison_report, compare_logs, load_runs, reference_rollout, ErrorMetrics, RunMeta, RunRecord,
    TrajectoryLog,
};
use drivesim::evo::{self, Evolution};
use drivesim::formats::{resolve_scenario, AgentKind, Checkpoint, RunConfig, ScenarioFile};
use drivesim::pipeline::{comparison_run, environment, eval_episode_seed, evaluate_policy};
use drivesim::scenarios::{preset_specs, ScenarioSpec};
use drivesim::sim::{ControlInput, TickConfig};

use crate::args::{Cli, Command, EvalArgs, RecordArgs, ReplayArgs, ReportArgs, ServeArgs, TrainDqnArgs, TrainEvoArgs};
use crate::{CmdResult, Failure};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";
pub const SCENARIO_SNAPSHOT_FILE: &str = "scenario.toml";
pub const TIMING_FILE: &str = "timing.json";
pub const METRICS_FILE: &str = "metrics.json";

pub fn run(cli: Cli) -> CmdResult {
    match &cli.command {
        Command::TrainEvo(a) => train_evo(&cli, a),
        Command::TrainDqn(a) => train_dqn(&cli, a),
        Command::Eval(a) => eval(&cli, a),
        Command::Replay(a) => replay(&cli, a),
        Command::Record(a) => record(&cli, a),
        Command::Serve(a) => serve(&cli, a),
        Command::Report(a) => report(&cli, a),
    }
}

/// Config file (or defaults) with the global seed applied.
pub fn load_config(cli: &Cli) -> CmdResult<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    Ok(match cli.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CmdResult {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(Failure::Runtime)
}

fn write_json(path: &Path, value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Runtime(e.into()))?;
    write(path, text + "\n")
}

fn write_snapshots(out: &Path, cfg: &RunConfig, spec: &ScenarioSpec) -> CmdResult {
    write(&out.join(CONFIG_SNAPSHOT_FILE), cfg.to_toml_string())?;
    write(&out.join(SCENARIO_SNAPSHOT_FILE), ScenarioFile::new(spec.clone()).to_toml_string())
}

#[derive(Serialize)]
struct Timing {
    training_seconds: f64,
    counter: u64,
}

fn train_evo(cli: &Cli, args: &TrainEvoArgs) -> CmdResult {
    let (mut evo, mut cfg, spec, prior_secs) = match &args.resume {
        Some(p) => Checkpoint::load(p)?.to_evolution()?,
        None => {
            let cfg = load_config(cli)?;
            let spec = resolve_scenario(&args.scenario)?;
            let env = environment(&cfg, &spec)?;
            (Evolution::new(&env, cfg.evo.clone())?, cfg, spec, 0.0)
        }
    };
    if let Some(g) = args.generations {
        evo.config.generations = g;
        cfg.evo.generations = g;
    }
    let env = environment(&cfg, &spec)?;
    let out = &cli.out;
    write_snapshots(out, &cfg, &spec)?;
    let start = Instant::now();
    let save = |evo: &Evolution| -> CmdResult {
        let secs = prior_secs + start.elapsed().as_secs_f64();
        Checkpoint::from_evolution(evo, &cfg, &spec, secs).save(&out.join(CHECKPOINT_FILE))?;
        write(&out.join(HISTORY_FILE), evo::history_csv(&evo.history))
    };
    save(&evo)?;
    let every = args.checkpoint_every.max(1);
    while !evo.done(&env) {
        evo.step(&env)?;
        if evo.generation() % every == 0 {
            save(&evo)?;
        }
    }
    save(&evo)?;
    let secs = prior_secs + start.elapsed().as_secs_f64();
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            training_seconds: secs,
            counter: evo.generation(),
        },
    )?;
    let best = evo.history.last().expect("history always has generation 0");
    println!(
        "generation {}  best fitness {:.4}  distance {:.1}/{:.1}  mean speed {:.2}  ({:.1}s)",
        best.generation,
        best.best_scalar,
        best.best_distance,
        env.scenario.track.finish_arc_length,
        best.best_mean_speed,
        secs
    );
    Ok(())
}

fn train_dqn(cli: &Cli, args: &TrainDqnArgs) -> CmdResult {
    let (mut trainer, mut cfg, spec, prior_secs) = match &args.resume {
        Some(p) => Checkpoint::load(p)?.to_dqn()?,
        None => {
            let cfg = load_config(cli)?;
            let spec = resolve_scenario(&args.scenario)?;
            let env = environment(&cfg, &spec)?;
            (DqnTrainer::new(&env, cfg.dqn.clone())?, cfg, spec, 0.0)
        }
    };
    if let Some(e) = args.episodes {
        trainer.config.episodes = e;
        cfg.dqn.episodes = e;
    }
    let env = environment(&cfg, &spec)?;
    let out = &cli.out;
    write_snapshots(out, &cfg, &spec)?;
    let start = Instant::now();
    let save = |t: &DqnTrainer| -> CmdResult {
        let secs = prior_secs + start.elapsed().as_secs_f64();
        Checkpoint::from_dqn(t, &cfg, &spec, secs).save(&out.join(CHECKPOINT_FILE))?;
        write(&out.join(HISTORY_FILE), dqn::history_csv(&t.history))
    };
    save(&trainer)?;
    let every = args.checkpoint_every.max(1);
    while !trainer.done() {
        trainer.train_episode(&env)?;
        if trainer.episode % every == 0 {
            save(&trainer)?;
        }
    }
    save(&trainer)?;
    let secs = prior_secs + start.elapsed().as_secs_f64();
    write_json(
        &out.join(TIMING_FILE),
        &Timing {
            training_seconds: secs,
            counter: trainer.episode,
        },
    )?;
    let report = dqn::DqnReport::of(&trainer, secs);
    println!(
        "episodes {}  converged {}  best reward {}  ({:.1}s)",
        report.episodes,
        report.converged,
        report.best_reward.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into()),
        secs
    );
    Ok(())
}

#[derive(Serialize)]
struct EpisodeSummary {
    seed: u64,
    ticks: u64,
    distance: f64,
    mean_speed: f64,
    stop: String,
}

#[derive(Serialize)]
struct EvalMetrics {
    agent: String,
    scenario: String,
    episodes: Vec<EpisodeSummary>,
    mean_distance: f64,
    finished: usize,
    collided: usize,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    errors: Option<ErrorMetrics>,
}

fn stop_name(s: StopReason) -> String {
    match s {
        StopReason::Terminal(t) => format!("{t:?}").to_lowercase(),
        StopReason::TickCap => "tick_cap".into(),
        StopReason::Stalled => "stalled".into(),
        StopReason::Aborted => "aborted".into(),
    }
}

fn eval(cli: &Cli, args: &EvalArgs) -> CmdResult {
    let ck = Checkpoint::load(&args.checkpoint)?;
    let (mut cfg, trained_on, training_seconds) = ck.run_info()?;
    if let Some(p) = &cli.config {
        cfg.eval = RunConfig::load(p)?.eval;
    }
    if let Some(s) = cli.seed {
        cfg.tick.seed = s;
    }
    let spec = match &args.scenario {
        Some(r) => resolve_scenario(r)?,
        None => trained_on,
    };
    let reference = match &args.reference {
        Some(p) => {
            let log = TrajectoryLog::load(p)?;
            if log.header.scenario != spec.name {
                return Err(Failure::data(format!(
                    "reference log is for scenario `{}` but evaluation runs `{}`",
                    log.header.scenario, spec.name
                )));
            }
            Some(log)
        }
        None => None,
    };
    let policy = ck.policy()?;
    let env = environment(&cfg, &spec)?;
    let n = args.episodes.unwrap_or(cfg.eval.episodes);
    let out = &cli.out;
    let mut episodes = Vec::new();
    let mut first_log = None;
    for i in 0..n {
        let seed = eval_episode_seed(&cfg, i);
        let r = evaluate_policy(&policy, &env, &cfg, seed);
        r.log.save(&out.join("episodes").join(format!("episode_{i:03}.csv")))?;
        episodes.push(EpisodeSummary {
            seed,
            ticks: r.ticks,
            distance: r.distance,
            mean_speed: r.mean_speed,
            stop: stop_name(r.stop),
        });
        if i == 0 {
            first_log = Some(r.log);
        }
    }
    let reference = match (reference, args.scripted_reference) {
        (Some(r), _) => Some(r),
        (None, true) => Some(
            reference_rollout(&env, TickConfig::new(cfg.tick.dt, eval_episode_seed(&cfg, 0)), cfg.eval.max_ticks).log,
        ),
        (None, false) => None,
    };
    let errors = match (&first_log, &reference) {
        (Some(a), Some(r)) => Some(compare_logs(a, r, cfg.align_step(), cfg.vehicle.max_speed)?),
        _ => None,
    };
    let metrics = EvalMetrics {
        agent: policy.kind().as_str().into(),
        scenario: spec.name.clone(),
        mean_distance: if episodes.is_empty() {
            0.0
        } else {
            episodes.iter().map(|e| e.distance).sum::<f64>() / episodes.len() as f64
        },
        finished: episodes.iter().filter(|e| e.stop == "finished").count(),
        collided: episodes.iter().filter(|e| e.stop == "collision").count(),
        episodes,
        errors,
    };
    write_json(&out.join(METRICS_FILE), &metrics)?;
    if let Some(agent_log) = first_log {
        let best_at = match ck.kind {
            AgentKind::Evo => ck.to_evolution()?.0.best_at(),
            AgentKind::Dqn => dqn::DqnReport::of(&ck.to_dqn()?.0, training_seconds).best_episode,
        };
        RunRecord {
            meta: RunMeta {
                agent: metrics.agent.clone(),
                scenario: spec.name.clone(),
                training_seconds,
                best_at,
                max_speed: cfg.vehicle.max_speed,
                align_step: cfg.align_step(),
            },
            agent_log,
            reference_log: reference,
        }
        .save(out)?;
    }
    println!(
        "{} on {}: {} episodes, mean distance {:.1}, finished {}, collided {}",
        metrics.agent,
        metrics.scenario,
        n,
        metrics.mean_distance,
        metrics.finished,
        metrics.collided
    );
    if let Some(e) = &metrics.errors {
        println!(
            "velocity error {:.3}%  e_vf mean {:.4} max {:.4} ppu  e_delta mean {:.3} max {:.3} deg",
            e.velocity_error_pct, e.e_vf_mean, e.e_vf_max, e.e_delta_mean, e.e_delta_max
        );
    }
    Ok(())
}

/// Offline re-simulation of a control stream from tick 0.
fn simulate_controls(cfg: &RunConfig, spec: &ScenarioSpec, seed: u64, controls: Vec<ControlInput>, agent: &str) -> CmdResult<TrajectoryLog> {
    let env = environment(cfg, spec)?;
    let ticks = controls.len() as u64;
    Ok(rollout(
        env.world(TickConfig::new(cfg.tick.dt, seed)),
        &mut ScriptedDriver::new(controls),
        RolloutLimits {
            max_ticks: ticks,
            stall_ticks: None,
        },
        agent,
    )
    .log)
}

fn replay(cli: &Cli, args: &ReplayArgs) -> CmdResult {
    let log = TrajectoryLog::load(&args.log)?;
    if log.rows.first().map(|r| r.tick) != Some(0) {
        return Err(Failure::data("log does not start at tick 0 and cannot be replayed from reset"));
    }
    let spec = resolve_scenario(args.scenario.as_deref().unwrap_or(&log.header.scenario))?;
    let mut cfg = load_config(cli)?;
    cfg.tick.dt = log.header.dt;
    let replayed = simulate_controls(&cfg, &spec, log.header.seed, log.controls(), &log.header.agent)?;
    replayed.save(&cli.out.join("replayed.csv"))?;
    let mismatch = log.rows.iter().zip(&replayed.rows).find(|(a, b)| a != b).map(|(a, _)| a.tick);
    match (mismatch, log.rows.len() == replayed.rows.len()) {
        (None, true) => {
            println!("replay identical: {} ticks", log.rows.len().saturating_sub(1));
            Ok(())
        }
        (Some(t), _) => Err(Failure::data(format!("replay diverges at tick {t}"))),
        (None, false) => Err(Failure::data(format!(
            "replay ended after {} rows, log has {}",
            replayed.rows.len(),
            log.rows.len()
        ))),
    }
}

pub fn parse_controls(text: &str) -> CmdResult<Vec<ControlInput>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<ControlInput>().map_err(Failure::from))
        .collect()
}

fn record(cli: &Cli, args: &RecordArgs) -> CmdResult {
    let cfg = load_config(cli)?;
    let spec = resolve_scenario(&args.scenario)?;
    let text = std::fs::read_to_string(&args.controls)
        .map_err(|e| Failure::data(format!("{}: {e}", args.controls.display())))?;
    let log = simulate_controls(&cfg, &spec, cfg.tick.seed, parse_controls(&text)?, &args.agent)?;
    let path = cli.out.join(format!("{}_{}.csv", spec.name, args.agent));
    std::fs::create_dir_all(&cli.out)?;
    log.save(&path)?;
    println!("recorded {} ticks to {}", log.rows.len().saturating_sub(1), path.display());
    Ok(())
}

fn serve(cli: &Cli, args: &ServeArgs) -> CmdResult {
    if !(args.rate > 0.0 && args.rate.is_finite()) {
        return Err(Failure::Usage("--rate must be a positive number".into()));
    }
    let cfg = load_config(cli)?;
    let spec = resolve_scenario(&args.scenario)?;
    let policy = match &args.checkpoint {
        Some(p) => Some(Checkpoint::load(p)?.policy()?),
        None => None,
    };
    let session = drivesim::session::Session::new(cfg, spec, policy, cli.out.join("recordings"))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind)
            .await
            .with_context(|| format!("binding {}", args.bind))
            .map_err(Failure::Runtime)?;
        let addr = listener.local_addr()?;
        println!("serving on ws://{addr}/ws  (role=driver|observer)");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        let mut session = crate::server::serve(listener, session, args.rate, shutdown)
            .await
            .map_err(Failure::Runtime)?;
        if let Some(p) = session.close()? {
            println!("saved recording {}", p.display());
        }
        Ok(())
    })
}

fn report(cli: &Cli, args: &ReportArgs) -> CmdResult {
    let runs_dir: PathBuf = args.runs.clone().unwrap_or_else(|| cli.out.join("runs"));
    if args.train {
        let cfg = load_config(cli)?;
        let specs = if args.scenarios.is_empty() {
            preset_specs()
        } else {
            args.scenarios.iter().map(|s| resolve_scenario(s)).collect::<Result<_, _>>()?
        };
        for spec in &specs {
            for kind in [AgentKind::Evo, AgentKind::Dqn] {
                let rec = comparison_run(kind, &cfg, spec)?;
                rec.save(&runs_dir.join(kind.as_str()).join(&spec.name))?;
                println!("{} on {}: trained in {:.1}s", kind.as_str(), spec.name, rec.meta.training_seconds);
            }
        }
    }
    if !runs_dir.is_dir() {
        return Err(Failure::data(format!("run directory {} does not exist", runs_dir.display())));
    }
    let runs = load_runs(&runs_dir)?;
    if runs.is_empty() {
        return Err(Failure::data(format!("no run records under {}", runs_dir.display())));
    }
    let report = build_comparison_report(&runs)?;
    write(&cli.out.join("report.txt"), report.to_table())?;
    write(&cli.out.join("report.csv"), report.to_csv())?;
    print!("{}", report.to_table());
    Ok(())
}
