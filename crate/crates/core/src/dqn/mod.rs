//! Discrete-action deep Q-learning over the 11-value observation.

mod replay;

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use replay::{ReplayBuffer, Transition};

use crate::error::{Result, SimError};
use crate::eval::{LogHeader, LogRow, TrajectoryLog};
use crate::neuro::{backward, flatten, unflatten, Network, NetworkTopology, SolutionVector};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sensing::min_reading;
use crate::sim::{
    observation_from, AccelCmd, ControlInput, Environment, SteerCmd, Terminal, TickConfig, VehicleParams, World,
    DEFAULT_DT,
};

pub const ACTION_COUNT: usize = 8;

pub const ACTIONS: [ControlInput; ACTION_COUNT] = [
    ControlInput::new(SteerCmd::None, AccelCmd::Accelerate),
    ControlInput::new(SteerCmd::None, AccelCmd::Brake),
    ControlInput::new(SteerCmd::Left, AccelCmd::Coast),
    ControlInput::new(SteerCmd::Right, AccelCmd::Coast),
    ControlInput::new(SteerCmd::Left, AccelCmd::Accelerate),
    ControlInput::new(SteerCmd::Right, AccelCmd::Accelerate),
    ControlInput::new(SteerCmd::Left, AccelCmd::Brake),
    ControlInput::new(SteerCmd::Right, AccelCmd::Brake),
];

pub const W_DIST: f64 = 0.15;
pub const W_VEL: f64 = 0.15;
pub const W_SENSOR: f64 = 0.7;

pub fn decode_action(index: usize) -> Result<ControlInput> {
    ACTIONS.get(index).copied().ok_or(SimError::ActionOutOfRange(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub f_dist: f64,
    pub f_vel: f64,
    pub f_sensor: f64,
    pub rho: f64,
}

impl RewardBreakdown {
    pub fn from_terms(f_dist: f64, f_vel: f64, f_sensor: f64) -> Self {
        Self {
            f_dist,
            f_vel,
            f_sensor,
            rho: W_DIST * f_dist + W_VEL * f_vel + W_SENSOR * f_sensor,
        }
    }
}

/// Reward for one tick. `step_odometry` is the distance driven this tick;
/// it is normalized by the largest distance possible in one tick.
pub fn compute_reward(step_odometry: f64, speed: f64, min_sensor: f64, params: &VehicleParams, dt: f64) -> RewardBreakdown {
    let f_dist = (step_odometry / (params.max_speed * dt)).clamp(0.0, 1.0);
    let f_vel = (speed / params.max_speed).clamp(0.0, 1.0);
    RewardBreakdown::from_terms(f_dist, f_vel, min_sensor.clamp(0.0, 1.0))
}

/// Greedy argmax with ties to the lowest index.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action choice. The uniform draw for exploration happens only
/// when the Bernoulli(ε) test succeeds.
pub fn select_action(q: &[f64], epsilon: f64, rng: &mut SimRng) -> usize {
    if rng.random_bool(epsilon.clamp(0.0, 1.0)) {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Bellman regression target for one transition.
pub fn td_target(t: &Transition, target: &Network, gamma: f64) -> Result<f64> {
    if t.terminal {
        return Ok(t.reward);
    }
    let next = target.forward(&t.next_state)?;
    Ok(t.reward + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Mean of `½(Q(s,a) − y)²` over the batch.
pub fn batch_loss(batch: &[&Transition], online: &Network, target: &Network, gamma: f64) -> Result<f64> {
    let mut sum = 0.0;
    for t in batch {
        let q = online.forward(&t.state)?;
        let err = q[t.action] - td_target(t, target, gamma)?;
        sum += 0.5 * err * err;
    }
    Ok(sum / batch.len().max(1) as f64)
}

/// One SGD step of the online network toward the TD targets. Returns the
/// pre-update loss.
pub fn q_update(batch: &[&Transition], online: &mut Network, target: &Network, gamma: f64, lr: f64) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let (loss, grad) = q_gradient(batch, online, target, gamma)?;
    online.apply_gradient(&grad, lr)?;
    Ok(loss)
}

/// Batch loss and its gradient with respect to the online parameters.
pub fn q_gradient(batch: &[&Transition], online: &Network, target: &Network, gamma: f64) -> Result<(f64, Vec<f64>)> {
    let n = online.topology().param_count();
    let outputs = online.topology().outputs();
    let scale = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for t in batch {
        if t.action >= outputs {
            return Err(SimError::ActionOutOfRange(t.action));
        }
        let q = online.forward(&t.state)?;
        let err = q[t.action] - td_target(t, target, gamma)?;
        loss += 0.5 * err * err * scale;
        if err == 0.0 {
            continue;
        }
        let mut og = vec![0.0; outputs];
        og[t.action] = err * scale;
        for (g, d) in grad.iter_mut().zip(backward(online, &t.state, &og)?) {
            *g += d;
        }
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// First and second moment estimates for Adam (β₁ = 0.9, β₂ = 0.999).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Turn a raw gradient into the bias-corrected Adam step direction.
    pub fn step(&mut self, grad: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t as i32);
        let c2 = 1.0 - Self::B2.powi(self.t as i32);
        grad.iter()
            .enumerate()
            .map(|(i, &g)| {
                self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g;
                self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g * g;
                (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Fraction of `episodes` over which ε decays linearly.
    pub epsilon_decay_fraction: f64,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub replay_capacity: usize,
    pub batch_size: usize,
    /// Gradient steps between target-network syncs.
    pub target_sync: u64,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    pub episodes: u64,
    pub max_episode_ticks: u64,
    pub min_episode_len: u64,
    pub hidden_layers: Vec<usize>,
    pub probe_states: usize,
    pub convergence_tol: f64,
    pub convergence_window: u64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.5,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            replay_capacity: 50_000,
            batch_size: 64,
            target_sync: 500,
            train_every: 4,
            episodes: 2000,
            max_episode_ticks: 400,
            min_episode_len: 15,
            hidden_layers: vec![16, 16],
            probe_states: 32,
            convergence_tol: 1e-3,
            convergence_window: 50,
            seed: 0,
            dt: DEFAULT_DT,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: &str| Err(SimError::config(format!("dqn.{f}"), why));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must be in [0, 1)");
        }
        for (f, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
            ("epsilon_decay_fraction", self.epsilon_decay_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(f, "must be in [0, 1]");
            }
        }
        if !(self.learning_rate >= 0.0) {
            return bad("learning_rate", "must be >= 0");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity", "must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be >= 1");
        }
        if self.target_sync == 0 {
            return bad("target_sync", "must be >= 1");
        }
        if self.train_every == 0 {
            return bad("train_every", "must be >= 1");
        }
        if self.min_episode_len != 15 {
            return bad("min_episode_len", "is fixed at 15");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden_layers", "sizes must be >= 1");
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be > 0");
        }
        Ok(())
    }

    pub fn topology(&self, inputs: usize) -> NetworkTopology {
        let mut sizes = vec![inputs];
        sizes.extend(&self.hidden_layers);
        sizes.push(ACTION_COUNT);
        NetworkTopology::new(sizes).expect("validated hidden layer sizes")
    }

    pub fn epsilon(&self, episode: u64) -> f64 {
        let span = ((self.episodes as f64) * self.epsilon_decay_fraction).floor().max(1.0);
        let frac = (episode as f64 / span).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn episode_seed(&self, episode: u64) -> u64 {
        derive_seed(self.seed, &[episode])
    }

    pub fn eval_seed(&self, i: u64) -> u64 {
        derive_seed(self.seed, &[0x6576_616c, i])
    }
}

/// Gaussian weights scaled by `1/sqrt(fan_in)`, zero biases.
pub fn init_network(topology: &NetworkTopology, rng: &mut SimRng) -> Network {
    let mut theta = Vec::with_capacity(topology.param_count());
    for w in topology.layer_sizes.windows(2) {
        let normal = Normal::new(0.0, 1.0 / (w[0] as f64).sqrt()).expect("finite std");
        theta.extend((0..w[0] * w[1]).map(|_| normal.sample(rng)));
        theta.extend(std::iter::repeat_n(0.0, w[1]));
    }
    unflatten(topology, &SolutionVector(theta)).expect("sized from topology")
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub log: TrajectoryLog,
    pub transitions: Vec<Transition>,
    pub total_reward: f64,
    pub ticks: u64,
    pub terminal: Option<Terminal>,
    /// Fewer than `min_episode_len` actions; transitions must not be replayed.
    pub degenerate: bool,
}

/// Roll out one episode with an action chooser that sees the Q-values
/// (`None` when no network is used) and the observation.
pub fn run_episode_with(
    world: &mut World,
    max_ticks: u64,
    min_len: u64,
    agent: &str,
    mut choose: impl FnMut(&[f64]) -> usize,
) -> Result<EpisodeResult> {
    let dt = world.dt();
    let params = *world.params();
    let mut log = TrajectoryLog::new(LogHeader {
        scenario: world.scenario().name.clone(),
        seed: world.tick_config().seed,
        agent: agent.to_string(),
        dt,
    });
    log.rows.push(LogRow::from_state(0, dt, world.ego(), None, 0.0, 0.0));
    let mut obs = observation_from(&world.sense(), world.ego(), &params);
    let mut transitions = Vec::new();
    let mut total = 0.0;
    let mut terminal = None;
    while world.tick() < max_ticks {
        let action = choose(&obs);
        let cmd = decode_action(action)?;
        let out = world.step(cmd)?;
        let reading = world.sense();
        let r = compute_reward(out.odometry_delta, out.ego.speed, min_reading(&reading), &params, dt);
        let next = observation_from(&reading, &out.ego, &params);
        total += r.rho;
        log.rows.push(LogRow::from_state(out.tick, dt, &out.ego, Some(cmd), r.rho, world.odometry()));
        transitions.push(Transition {
            state: std::mem::replace(&mut obs, next.clone()),
            action,
            reward: r.rho,
            next_state: next,
            terminal: out.terminal.is_some(),
        });
        if out.terminal.is_some() {
            terminal = out.terminal;
            break;
        }
    }
    let ticks = world.tick();
    let degenerate = ticks < min_len;
    if degenerate {
        transitions.clear();
    }
    Ok(EpisodeResult {
        log,
        transitions,
        total_reward: total,
        ticks,
        terminal,
        degenerate,
    })
}

/// ε-greedy episode driven by `online`.
pub fn run_episode(
    world: &mut World,
    online: &Network,
    config: &DqnConfig,
    epsilon: f64,
    rng: &mut SimRng,
) -> Result<EpisodeResult> {
    run_episode_with(world, config.max_episode_ticks, config.min_episode_len, "dqn", |obs| {
        let q = online.forward(obs).expect("observation matches topology");
        select_action(&q, epsilon, rng)
    })
}

/// Uniform random policy episode, the baseline for trained agents.
pub fn run_random_episode(world: &mut World, config: &DqnConfig, rng: &mut SimRng) -> Result<EpisodeResult> {
    run_episode_with(world, config.max_episode_ticks, config.min_episode_len, "random", |_| {
        rng.random_range(0..ACTION_COUNT)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: u64,
    pub ticks: u64,
    pub total_reward: f64,
    pub epsilon: f64,
    pub max_delta_q: f64,
    pub degenerate: bool,
    pub collided: bool,
}

pub const HISTORY_COLUMNS: &str = "episode,ticks,total_reward,epsilon,max_delta_q,degenerate,collided";

pub fn history_csv(history: &[EpisodeStats]) -> String {
    let mut out = format!("{HISTORY_COLUMNS}\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            h.episode, h.ticks, h.total_reward, h.epsilon, h.max_delta_q, h.degenerate as u8, h.collided as u8
        ));
    }
    out
}

/// Resumable training state. Everything that affects the future trace lives
/// here so a checkpoint continues bit-identically.
#[derive(Debug, Clone)]
pub struct DqnTrainer {
    pub config: DqnConfig,
    pub topology: NetworkTopology,
    pub online: Network,
    pub target: Network,
    pub replay: ReplayBuffer,
    pub adam: AdamState,
    pub rng: SimRng,
    pub episode: u64,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub stable_episodes: u64,
    pub converged: bool,
    pub history: Vec<EpisodeStats>,
    probes: Vec<Vec<f64>>,
}

impl DqnTrainer {
    pub fn new(env: &Environment, config: DqnConfig) -> Result<Self> {
        config.validate()?;
        let topology = config.topology(env.sensor.ray_count + 2);
        let mut rng = rng_from_seed(config.seed);
        let online = init_network(&topology, &mut rng);
        let parts = TrainerParts {
            replay: ReplayBuffer::new(config.replay_capacity),
            adam: AdamState::new(topology.param_count()),
            target: online.clone(),
            online,
            rng,
            counters: TrainerCounters::default(),
            history: Vec::new(),
        };
        Ok(Self::from_parts(config, topology, parts))
    }

    /// Reassemble a trainer (e.g. from a checkpoint).
    pub fn from_parts(config: DqnConfig, topology: NetworkTopology, parts: TrainerParts) -> Self {
        let probes = probe_states(&config, topology.inputs());
        let TrainerParts {
            online,
            target,
            replay,
            adam,
            rng,
            counters,
            history,
        } = parts;
        Self {
            replay,
            adam,
            config,
            topology,
            online,
            target,
            rng,
            episode: counters.episode,
            env_steps: counters.env_steps,
            grad_steps: counters.grad_steps,
            stable_episodes: counters.stable_episodes,
            converged: counters.converged,
            history,
            probes,
        }
    }

    pub fn counters(&self) -> TrainerCounters {
        TrainerCounters {
            episode: self.episode,
            env_steps: self.env_steps,
            grad_steps: self.grad_steps,
            stable_episodes: self.stable_episodes,
            converged: self.converged,
        }
    }

    pub fn done(&self) -> bool {
        self.converged || self.episode >= self.config.episodes
    }

    fn probe_q(&self) -> Vec<f64> {
        self.probes
            .iter()
            .flat_map(|p| self.online.forward(p).expect("probe sized to topology"))
            .collect()
    }

    /// Run one training episode.
    pub fn train_episode(&mut self, env: &Environment) -> Result<&EpisodeStats> {
        let cfg = self.config.clone();
        let epsilon = cfg.epsilon(self.episode);
        let before = self.probe_q();
        let mut world = env.world(TickConfig::new(cfg.dt, cfg.episode_seed(self.episode)));

        // Acting and learning interleave, so the episode loop is inlined
        // rather than going through `run_episode`.
        let dt = cfg.dt;
        let params = env.vehicle;
        let mut obs = world.observation();
        let mut pending = Vec::new();
        let mut total = 0.0;
        let mut collided = false;
        while world.tick() < cfg.max_episode_ticks {
            let q = self.online.forward(&obs)?;
            let action = select_action(&q, epsilon, &mut self.rng);
            let out = world.step(decode_action(action)?)?;
            let reading = world.sense();
            let r = compute_reward(out.odometry_delta, out.ego.speed, min_reading(&reading), &params, dt);
            let next = observation_from(&reading, &out.ego, &params);
            total += r.rho;
            pending.push(Transition {
                state: std::mem::replace(&mut obs, next.clone()),
                action,
                reward: r.rho,
                next_state: next,
                terminal: out.terminal.is_some(),
            });
            // Transitions enter replay once the episode has proven long
            // enough; until then they are held back.
            if world.tick() >= cfg.min_episode_len {
                for t in pending.drain(..) {
                    self.replay.push(t);
                }
            }
            self.env_steps += 1;
            if self.env_steps % cfg.train_every == 0 && self.replay.len() >= cfg.batch_size {
                let batch = self.replay.sample(cfg.batch_size, &mut self.rng);
                let (_, grad) = q_gradient(&batch, &self.online, &self.target, cfg.gamma)?;
                let step = match cfg.optimizer {
                    Optimizer::Sgd => grad,
                    Optimizer::Adam => self.adam.step(&grad),
                };
                self.online.apply_gradient(&step, cfg.learning_rate)?;
                self.grad_steps += 1;
                if self.grad_steps % cfg.target_sync == 0 {
                    self.target = self.online.clone();
                }
            }
            if let Some(t) = out.terminal {
                collided = t == Terminal::Collision;
                break;
            }
        }
        let ticks = world.tick();
        let after = self.probe_q();
        let max_delta_q = before
            .iter()
            .zip(&after)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if max_delta_q < cfg.convergence_tol {
            self.stable_episodes += 1;
        } else {
            self.stable_episodes = 0;
        }
        if self.stable_episodes >= cfg.convergence_window {
            self.converged = true;
        }
        self.history.push(EpisodeStats {
            episode: self.episode,
            ticks,
            total_reward: total,
            epsilon,
            max_delta_q,
            degenerate: ticks < cfg.min_episode_len,
            collided,
        });
        self.episode += 1;
        Ok(self.history.last().unwrap())
    }

    /// Train until the episode budget is spent or Q converges.
    pub fn run(&mut self, env: &Environment) -> Result<()> {
        while !self.done() {
            self.train_episode(env)?;
        }
        Ok(())
    }

    pub fn greedy_episode(&self, env: &Environment, seed: u64) -> Result<EpisodeResult> {
        let mut world = env.world(TickConfig::new(self.config.dt, seed));
        let mut rng = rng_from_seed(seed);
        run_episode(&mut world, &self.online, &self.config, 0.0, &mut rng)
    }

    pub fn online_vector(&self) -> SolutionVector {
        flatten(&self.online)
    }
}

/// Mutable learning state of a trainer, split out for persistence.
#[derive(Debug, Clone)]
pub struct TrainerParts {
    pub online: Network,
    pub target: Network,
    pub replay: ReplayBuffer,
    pub adam: AdamState,
    pub rng: SimRng,
    pub counters: TrainerCounters,
    pub history: Vec<EpisodeStats>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainerCounters {
    pub episode: u64,
    pub env_steps: u64,
    pub grad_steps: u64,
    pub stable_episodes: u64,
    pub converged: bool,
}

/// Fixed synthetic observations used to measure how much Q still moves.
fn probe_states(config: &DqnConfig, inputs: usize) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(derive_seed(config.seed, &[0x7072_6f62]));
    (0..config.probe_states)
        .map(|_| {
            (0..inputs)
                .map(|i| if i + 1 == inputs { rng.random_range(-1.0..=1.0) } else { rng.random_range(0.0..=1.0) })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnReport {
    pub episodes: u64,
    pub converged: bool,
    pub training_seconds: f64,
    pub best_episode: Option<u64>,
    pub best_reward: Option<f64>,
}

impl DqnReport {
    pub fn of(trainer: &DqnTrainer, training_seconds: f64) -> Self {
        let best = trainer
            .history
            .iter()
            .fold(None::<&EpisodeStats>, |b, h| match b {
                Some(b) if b.total_reward >= h.total_reward => Some(b),
                _ => Some(h),
            });
        Self {
            episodes: trainer.episode,
            converged: trainer.converged,
            training_seconds,
            best_episode: best.map(|b| b.episode),
            best_reward: best.map(|b| b.total_reward),
        }
    }
}

/// Train from scratch, timing the loop.
pub fn train(env: &Environment, config: DqnConfig) -> Result<(DqnTrainer, DqnReport)> {
    let start = Instant::now();
    let mut trainer = DqnTrainer::new(env, config)?;
    trainer.run(env)?;
    let report = DqnReport::of(&trainer, start.elapsed().as_secs_f64());
    Ok((trainer, report))
}
