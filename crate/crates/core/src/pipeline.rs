//! End-to-end helpers: train an agent on a scenario, evaluate its greedy
//! policy, and package the result for the comparison report.

use std::time::Instant;

use crate::dqn::{DqnReport, DqnTrainer};
use crate::episode::{rollout_with, Rollout, RolloutLimits};
use crate::error::Result;
use crate::eval::{reference_rollout, RunMeta, RunRecord};
use crate::evo::Evolution;
use crate::formats::{AgentKind, Checkpoint, RunConfig, TrainedPolicy};
use crate::rng::derive_seed;
use crate::scenarios::ScenarioSpec;
use crate::sim::{Environment, TickConfig};

pub fn environment(config: &RunConfig, spec: &ScenarioSpec) -> Result<Environment> {
    Environment::new(spec.build(&config.vehicle)?, config.vehicle, config.sensor.clone())
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub checkpoint: Checkpoint,
    pub training_seconds: f64,
    pub best_at: Option<u64>,
}

pub fn train_agent(kind: AgentKind, config: &RunConfig, spec: &ScenarioSpec) -> Result<Trained> {
    let env = environment(config, spec)?;
    let start = Instant::now();
    match kind {
        AgentKind::Evo => {
            let mut evo = Evolution::new(&env, config.evo.clone())?;
            evo.run(&env)?;
            let secs = start.elapsed().as_secs_f64();
            Ok(Trained {
                best_at: evo.best_at(),
                checkpoint: Checkpoint::from_evolution(&evo, config, spec, secs),
                training_seconds: secs,
            })
        }
        AgentKind::Dqn => {
            let mut t = DqnTrainer::new(&env, config.dqn.clone())?;
            t.run(&env)?;
            let secs = start.elapsed().as_secs_f64();
            Ok(Trained {
                best_at: DqnReport::of(&t, secs).best_episode,
                checkpoint: Checkpoint::from_dqn(&t, config, spec, secs),
                training_seconds: secs,
            })
        }
    }
}

/// World seed of evaluation episode `i`.
pub fn eval_episode_seed(config: &RunConfig, i: u64) -> u64 {
    derive_seed(config.tick.seed, &[0x6576, i])
}

/// One greedy episode of `policy`. Stops on a terminal state, the tick cap,
/// or an unusable network output.
pub fn evaluate_policy(policy: &TrainedPolicy, env: &Environment, config: &RunConfig, seed: u64) -> Rollout {
    let mut world = env.world(TickConfig::new(config.tick.dt, seed));
    rollout_with(
        &mut world,
        |_, obs| policy.act(obs),
        RolloutLimits {
            max_ticks: config.eval.max_ticks,
            stall_ticks: None,
        },
        policy.kind().as_str(),
    )
}

/// Train, run evaluation episode 0, and pair it with the scripted reference
/// drive on the same world seed.
pub fn comparison_run(kind: AgentKind, config: &RunConfig, spec: &ScenarioSpec) -> Result<RunRecord> {
    let trained = train_agent(kind, config, spec)?;
    let env = environment(config, spec)?;
    let seed = eval_episode_seed(config, 0);
    let agent = evaluate_policy(&trained.checkpoint.policy()?, &env, config, seed);
    let reference = reference_rollout(&env, TickConfig::new(config.tick.dt, seed), config.eval.max_ticks);
    Ok(RunRecord {
        meta: RunMeta {
            agent: kind.as_str().into(),
            scenario: spec.name.clone(),
            training_seconds: trained.training_seconds,
            best_at: trained.best_at,
            max_speed: config.vehicle.max_speed,
            align_step: config.align_step(),
        },
        agent_log: agent.log,
        reference_log: Some(reference.log),
    })
}
