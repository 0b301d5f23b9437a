//! Neuroevolution of network weights: a fixed-size population of solution
//! vectors bred by tournament selection, uniform crossover and Gaussian
//! mutation, with the top individuals carried over unmodified.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::episode::{rollout_with, Rollout, RolloutLimits};
use crate::error::{Result, SimError};
use crate::neuro::{unflatten, Network, NetworkTopology, SolutionVector};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::{AccelCmd, ControlInput, Environment, SteerCmd, TickConfig, World, DEFAULT_DT};

/// Network outputs inside ±DEAD_ZONE map to "no command" on that axis.
pub const DEAD_ZONE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub pop_size: usize,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub mutation_sigma: f64,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    /// Std-dev of the initial Gaussian weights.
    pub init_sigma: f64,
    pub hidden_layers: Vec<usize>,
    pub max_episode_ticks: u64,
    /// Episodes end after this many ticks without progress (0 disables).
    pub stall_ticks: u64,
    pub generations: u64,
    pub seed: u64,
    pub dt: f64,
    pub speed_bounds: [f64; 2],
    pub fitness_alpha: f64,
    /// Stop before `generations` once the elite completes the course.
    pub stop_when_finished: bool,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            pop_size: 50,
            tournament_size: 3,
            elite_count: 2,
            mutation_sigma: 0.1,
            mutation_rate: 0.05,
            crossover_rate: 0.7,
            init_sigma: 0.5,
            hidden_layers: vec![16, 16],
            max_episode_ticks: 1200,
            stall_ticks: 60,
            generations: 100,
            seed: 0,
            dt: DEFAULT_DT,
            speed_bounds: [0.0, 30.0],
            fitness_alpha: 0.5,
            stop_when_finished: false,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self, max_speed: f64) -> Result<()> {
        let bad = |f: &str, why: &str| Err(SimError::config(format!("evo.{f}"), why));
        if self.pop_size == 0 {
            return bad("pop_size", "must be >= 1");
        }
        if !(1 <= self.elite_count && self.elite_count <= self.pop_size) {
            return bad("elite_count", "need 1 <= elite_count <= pop_size");
        }
        if !(2 <= self.tournament_size && self.tournament_size <= self.pop_size) {
            return bad("tournament_size", "need 2 <= tournament_size <= pop_size");
        }
        for (f, v) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(f, "must be in [0, 1]");
            }
        }
        if !(self.mutation_sigma > 0.0) {
            return bad("mutation_sigma", "must be > 0");
        }
        if !(self.init_sigma >= 0.0) {
            return bad("init_sigma", "must be >= 0");
        }
        if !(self.dt > 0.0) {
            return bad("dt", "must be > 0");
        }
        let [lo, hi] = self.speed_bounds;
        if !(lo >= 0.0 && lo < hi && hi <= max_speed) {
            return bad("speed_bounds", "need 0 <= v_lo < v_hi <= max_speed");
        }
        if !(0.0..=1.0).contains(&self.fitness_alpha) {
            return bad("fitness_alpha", "must be in [0, 1]");
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden_layers", "sizes must be >= 1");
        }
        Ok(())
    }

    /// `[inputs, hidden…, 2]`: one steering and one throttle output.
    pub fn topology(&self, inputs: usize) -> NetworkTopology {
        let mut sizes = vec![inputs];
        sizes.extend(&self.hidden_layers);
        sizes.push(2);
        NetworkTopology::new(sizes).expect("validated hidden layer sizes")
    }

    /// Seed of the world every genome is evaluated in. Fixed per run so
    /// fitness values are comparable across individuals and generations.
    pub fn eval_seed(&self) -> u64 {
        derive_seed(self.seed, &[0x6576_616c])
    }

    fn limits(&self) -> RolloutLimits {
        RolloutLimits {
            max_ticks: self.max_episode_ticks,
            stall_ticks: (self.stall_ticks > 0).then_some(self.stall_ticks),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub distance: f64,
    pub mean_speed: f64,
    pub scalar: f64,
}

impl FitnessReport {
    pub fn distance_ratio(&self, finish: f64) -> f64 {
        if finish > 0.0 {
            (self.distance / finish).min(1.0)
        } else {
            0.0
        }
    }
}

/// `α·min(distance/finish, 1) + (1−α)·(mean_speed − v_lo)/(v_hi − v_lo)`.
pub fn scalarize_fitness(distance: f64, mean_speed: f64, finish: f64, config: &EvolutionConfig) -> f64 {
    let [lo, hi] = config.speed_bounds;
    let ratio = if finish > 0.0 { (distance / finish).clamp(0.0, 1.0) } else { 0.0 };
    let speed = ((mean_speed - lo) / (hi - lo)).clamp(0.0, 1.0);
    config.fitness_alpha * ratio + (1.0 - config.fitness_alpha) * speed
}

/// Dead-zone mapping of the two network outputs. Positive steering output
/// means steer right.
pub fn decode_outputs(outputs: &[f64]) -> Option<ControlInput> {
    let (s, a) = (outputs.first()?, outputs.get(1)?);
    if !s.is_finite() || !a.is_finite() {
        return None;
    }
    let steer = if *s > DEAD_ZONE {
        SteerCmd::Right
    } else if *s < -DEAD_ZONE {
        SteerCmd::Left
    } else {
        SteerCmd::None
    };
    let accel = if *a > DEAD_ZONE {
        AccelCmd::Accelerate
    } else if *a < -DEAD_ZONE {
        AccelCmd::Brake
    } else {
        AccelCmd::Coast
    };
    Some(ControlInput::new(steer, accel))
}

/// Closed-loop rollout of one network, stopping on a NaN output.
pub fn network_rollout(net: &Network, world: &mut World, config: &EvolutionConfig, agent: &str) -> Rollout {
    rollout_with(
        world,
        |_, obs| net.forward(obs).ok().and_then(|o| decode_outputs(&o)),
        config.limits(),
        agent,
    )
}

pub fn evaluation_world(env: &Environment, config: &EvolutionConfig) -> World {
    env.world(TickConfig::new(config.dt, config.eval_seed()))
}

pub fn evaluate_fitness(
    genome: &SolutionVector,
    topology: &NetworkTopology,
    env: &Environment,
    config: &EvolutionConfig,
) -> Result<FitnessReport> {
    let net = unflatten(topology, genome)?;
    let mut world = evaluation_world(env, config);
    let r = network_rollout(&net, &mut world, config, "evo");
    let [lo, hi] = config.speed_bounds;
    let mean_speed = r.mean_speed.clamp(lo, hi);
    let finish = env.scenario.track.finish_arc_length;
    Ok(FitnessReport {
        distance: r.distance,
        mean_speed,
        scalar: scalarize_fitness(r.distance, mean_speed, finish, config),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: SolutionVector,
    pub fitness: Option<FitnessReport>,
}

impl Individual {
    pub fn scalar(&self) -> Option<f64> {
        self.fitness.map(|f| f.scalar)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub individuals: Vec<Individual>,
    pub generation: u64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    fn scalars(&self) -> Result<Vec<f64>> {
        self.individuals
            .iter()
            .enumerate()
            .map(|(i, ind)| ind.scalar().ok_or(SimError::Unevaluated(i)))
            .collect()
    }

    /// Indices ordered best first; ties keep the lower index first.
    pub fn ranking(&self) -> Result<Vec<usize>> {
        let s = self.scalars()?;
        let mut idx: Vec<usize> = (0..s.len()).collect();
        idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        Ok(idx)
    }

    pub fn best_index(&self) -> Result<usize> {
        Ok(self.ranking()?[0])
    }

    pub fn best(&self) -> Result<&Individual> {
        Ok(&self.individuals[self.best_index()?])
    }
}

/// Draw `t` distinct members and return the index of the fittest (lowest
/// index on ties).
pub fn tournament_select(population: &Population, t: usize, rng: &mut SimRng) -> Result<usize> {
    let k = population.len();
    if t > k {
        return Err(SimError::TournamentTooLarge { t, k });
    }
    let scalars = population.scalars()?;
    let mut drawn: Vec<usize> = sample(rng, k, t).into_vec();
    drawn.sort_unstable();
    Ok(drawn
        .into_iter()
        .fold(None::<usize>, |best, i| match best {
            Some(b) if scalars[b] >= scalars[i] => Some(b),
            _ => Some(i),
        })
        .expect("t >= 1"))
}

/// Uniform crossover applied with probability `rate`; otherwise a copy of `a`.
pub fn crossover(a: &SolutionVector, b: &SolutionVector, rate: f64, rng: &mut SimRng) -> SolutionVector {
    assert_eq!(a.len(), b.len(), "parents must have equal genome length");
    if !rng.random_bool(rate) {
        return a.clone();
    }
    SolutionVector(
        a.0.iter()
            .zip(&b.0)
            .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
            .collect(),
    )
}

/// Add `N(0, σ²)` to each gene independently with probability `rate`.
pub fn mutate(genome: &SolutionVector, sigma: f64, rate: f64, rng: &mut SimRng) -> SolutionVector {
    let normal = Normal::new(0.0, sigma).expect("sigma > 0");
    SolutionVector(
        genome
            .0
            .iter()
            .map(|&g| if rng.random_bool(rate) { g + normal.sample(rng) } else { g })
            .collect(),
    )
}

pub fn random_population(topology: &NetworkTopology, config: &EvolutionConfig, rng: &mut SimRng) -> Population {
    let n = topology.param_count();
    let normal = Normal::new(0.0, config.init_sigma).expect("finite sigma");
    let individuals = (0..config.pop_size)
        .map(|_| Individual {
            genome: SolutionVector((0..n).map(|_| normal.sample(rng)).collect()),
            fitness: None,
        })
        .collect();
    Population {
        individuals,
        generation: 0,
    }
}

/// Evaluate every unevaluated individual. Evaluations are independent and
/// run in parallel; the result does not depend on scheduling.
pub fn evaluate_population(
    population: &mut Population,
    topology: &NetworkTopology,
    env: &Environment,
    config: &EvolutionConfig,
) -> Result<()> {
    let reports: Vec<Option<FitnessReport>> = population
        .individuals
        .par_iter()
        .map(|ind| match ind.fitness {
            Some(_) => Ok(None),
            None => evaluate_fitness(&ind.genome, topology, env, config).map(Some),
        })
        .collect::<Result<_>>()?;
    for (ind, r) in population.individuals.iter_mut().zip(reports) {
        if let Some(r) = r {
            ind.fitness = Some(r);
        }
    }
    Ok(())
}

/// One generation: elites copied verbatim (with their fitness), the rest
/// bred by tournament → crossover → mutation, then evaluated.
pub fn evolve_generation(
    population: &Population,
    topology: &NetworkTopology,
    env: &Environment,
    config: &EvolutionConfig,
    rng: &mut SimRng,
) -> Result<Population> {
    let ranking = population.ranking()?;
    let mut next: Vec<Individual> = ranking
        .iter()
        .take(config.elite_count)
        .map(|&i| population.individuals[i].clone())
        .collect();
    while next.len() < population.len() {
        let a = tournament_select(population, config.tournament_size, rng)?;
        let b = tournament_select(population, config.tournament_size, rng)?;
        let child = crossover(
            &population.individuals[a].genome,
            &population.individuals[b].genome,
            config.crossover_rate,
            rng,
        );
        next.push(Individual {
            genome: mutate(&child, config.mutation_sigma, config.mutation_rate, rng),
            fitness: None,
        });
    }
    let mut out = Population {
        individuals: next,
        generation: population.generation + 1,
    };
    evaluate_population(&mut out, topology, env, config)?;
    Ok(out)
}

/// Control from the current best genome.
pub fn elite_policy_action(population: &Population, topology: &NetworkTopology, input: &[f64]) -> Result<ControlInput> {
    let net = unflatten(topology, &population.best()?.genome)?;
    let out = net.forward(input)?;
    Ok(decode_outputs(&out).unwrap_or(ControlInput::COAST))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u64,
    pub best_scalar: f64,
    pub mean_scalar: f64,
    pub best_distance: f64,
    pub best_mean_speed: f64,
    pub best_index: usize,
}

impl GenerationStats {
    pub fn of(population: &Population) -> Result<Self> {
        let ranking = population.ranking()?;
        let best = population.individuals[ranking[0]].fitness.expect("ranked => evaluated");
        let scalars = population.scalars()?;
        Ok(Self {
            generation: population.generation,
            best_scalar: best.scalar,
            mean_scalar: scalars.iter().sum::<f64>() / scalars.len() as f64,
            best_distance: best.distance,
            best_mean_speed: best.mean_speed,
            best_index: ranking[0],
        })
    }
}

pub const HISTORY_COLUMNS: &str = "generation,best_scalar,mean_scalar,best_distance,best_mean_speed,best_index";

pub fn history_csv(history: &[GenerationStats]) -> String {
    let mut out = format!("{HISTORY_COLUMNS}\n");
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            h.generation, h.best_scalar, h.mean_scalar, h.best_distance, h.best_mean_speed, h.best_index
        ));
    }
    out
}

/// Resumable evolution run. All state that influences the future trace is
/// held here, so a checkpoint of it continues bit-identically.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub config: EvolutionConfig,
    pub topology: NetworkTopology,
    pub population: Population,
    pub rng: SimRng,
    pub history: Vec<GenerationStats>,
}

impl Evolution {
    pub fn new(env: &Environment, config: EvolutionConfig) -> Result<Self> {
        config.validate(env.vehicle.max_speed)?;
        let topology = config.topology(env.sensor.ray_count + 2);
        let mut rng = rng_from_seed(config.seed);
        let mut population = random_population(&topology, &config, &mut rng);
        evaluate_population(&mut population, &topology, env, &config)?;
        let history = vec![GenerationStats::of(&population)?];
        Ok(Self {
            config,
            topology,
            population,
            rng,
            history,
        })
    }

    pub fn generation(&self) -> u64 {
        self.population.generation
    }

    pub fn step(&mut self, env: &Environment) -> Result<&GenerationStats> {
        self.population = evolve_generation(&self.population, &self.topology, env, &self.config, &mut self.rng)?;
        self.history.push(GenerationStats::of(&self.population)?);
        Ok(self.history.last().unwrap())
    }

    pub fn elite_finished(&self, env: &Environment) -> bool {
        self.population
            .best()
            .map(|b| b.fitness.unwrap().distance_ratio(env.scenario.track.finish_arc_length) >= 1.0)
            .unwrap_or(false)
    }

    pub fn done(&self, env: &Environment) -> bool {
        self.generation() >= self.config.generations || (self.config.stop_when_finished && self.elite_finished(env))
    }

    /// Run until `config.generations` (or the early-stop condition).
    pub fn run(&mut self, env: &Environment) -> Result<()> {
        while !self.done(env) {
            self.step(env)?;
        }
        Ok(())
    }

    /// First generation whose best scalar equals the final best.
    pub fn best_at(&self) -> Option<u64> {
        let best = self.history.iter().map(|h| h.best_scalar).fold(f64::NEG_INFINITY, f64::max);
        self.history.iter().find(|h| h.best_scalar == best).map(|h| h.generation)
    }

    pub fn elite_network(&self) -> Result<Network> {
        unflatten(&self.topology, &self.population.best()?.genome)
    }
}
