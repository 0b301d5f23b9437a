//! Binary checkpoint layout, all integers and floats little-endian:
//!
//! | field          | encoding                                       |
//! |----------------|------------------------------------------------|
//! | magic          | 8 bytes `DSIMCKPT`                             |
//! | version        | u32                                            |
//! | agent kind     | u8 (1 = evo, 2 = dqn)                          |
//! | counter        | u64 (generation or episode)                    |
//! | rng seed       | 32 bytes                                       |
//! | rng stream     | u64                                            |
//! | rng word pos   | u128                                           |
//! | topology       | u32 layer count, then u32 per layer            |
//! | state          | u32 byte length, then UTF-8 JSON               |
//! | vectors        | u32 count, then per vector u64 length + f64s   |
//!
//! The JSON state holds the config snapshot, scenario spec, history and
//! counters. The vectors hold the numeric bulk: genomes for evo; online
//! net, target net, Adam moments and flattened replay for dqn.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::{AdamState, DqnTrainer, EpisodeStats, ReplayBuffer, TrainerCounters, TrainerParts, Transition};
use crate::error::{Result, SimError};
use crate::evo::{decode_outputs, Evolution, FitnessReport, GenerationStats, Individual, Population};
use crate::neuro::{flatten, unflatten, Network, NetworkTopology, SolutionVector};
use crate::rng::RngState;
use crate::scenarios::ScenarioSpec;
use crate::sim::ControlInput;

use super::RunConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DSIMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Evo = 1,
    Dqn = 2,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Evo => "evo",
            AgentKind::Dqn => "dqn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: AgentKind,
    pub counter: u64,
    pub rng: RngState,
    pub topology: NetworkTopology,
    pub state: String,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct EvoState {
    config: RunConfig,
    scenario: ScenarioSpec,
    fitness: Vec<Option<FitnessReport>>,
    history: Vec<GenerationStats>,
    training_seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct DqnState {
    config: RunConfig,
    scenario: ScenarioSpec,
    counters: TrainerCounters,
    history: Vec<EpisodeStats>,
    adam_t: u64,
    replay_len: usize,
    training_seconds: f64,
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("state serializes")
}

fn from_json<'a, T: Deserialize<'a>>(s: &'a str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| SimError::Format(format!("checkpoint state: {e}")))
}

impl Checkpoint {
    pub fn from_evolution(evo: &Evolution, config: &RunConfig, scenario: &ScenarioSpec, training_seconds: f64) -> Self {
        let state = EvoState {
            config: config.clone(),
            scenario: scenario.clone(),
            fitness: evo.population.individuals.iter().map(|i| i.fitness).collect(),
            history: evo.history.clone(),
            training_seconds,
        };
        Self {
            kind: AgentKind::Evo,
            counter: evo.generation(),
            rng: RngState::capture(&evo.rng),
            topology: evo.topology.clone(),
            state: json(&state),
            vectors: evo.population.individuals.iter().map(|i| i.genome.0.clone()).collect(),
        }
    }

    pub fn from_dqn(t: &DqnTrainer, config: &RunConfig, scenario: &ScenarioSpec, training_seconds: f64) -> Self {
        let state = DqnState {
            config: config.clone(),
            scenario: scenario.clone(),
            counters: t.counters(),
            history: t.history.clone(),
            adam_t: t.adam.t,
            replay_len: t.replay.len(),
            training_seconds,
        };
        let mut replay = Vec::new();
        for tr in t.replay.iter() {
            replay.push(tr.action as f64);
            replay.push(tr.reward);
            replay.push(if tr.terminal { 1.0 } else { 0.0 });
            replay.extend_from_slice(&tr.state);
            replay.extend_from_slice(&tr.next_state);
        }
        Self {
            kind: AgentKind::Dqn,
            counter: t.episode,
            rng: RngState::capture(&t.rng),
            topology: t.topology.clone(),
            state: json(&state),
            vectors: vec![
                flatten(&t.online).0,
                flatten(&t.target).0,
                t.adam.m.clone(),
                t.adam.v.clone(),
                replay,
            ],
        }
    }

    fn expect_kind(&self, kind: AgentKind) -> Result<()> {
        if self.kind != kind {
            return Err(SimError::Mismatch(format!(
                "checkpoint holds a {} agent, expected {}",
                self.kind.as_str(),
                kind.as_str()
            )));
        }
        Ok(())
    }

    /// Config snapshot and scenario the checkpoint was trained with.
    pub fn run_info(&self) -> Result<(RunConfig, ScenarioSpec, f64)> {
        match self.kind {
            AgentKind::Evo => {
                let s: EvoState = from_json(&self.state)?;
                Ok((s.config, s.scenario, s.training_seconds))
            }
            AgentKind::Dqn => {
                let s: DqnState = from_json(&self.state)?;
                Ok((s.config, s.scenario, s.training_seconds))
            }
        }
    }

    fn check_topology(&self, expected: &NetworkTopology) -> Result<()> {
        if &self.topology != expected {
            return Err(SimError::Mismatch(format!(
                "checkpoint topology {:?} does not match config {:?}",
                self.topology.layer_sizes, expected.layer_sizes
            )));
        }
        Ok(())
    }

    pub fn to_evolution(&self) -> Result<(Evolution, RunConfig, ScenarioSpec, f64)> {
        self.expect_kind(AgentKind::Evo)?;
        let s: EvoState = from_json(&self.state)?;
        self.check_topology(&s.config.evo.topology(s.config.sensor.ray_count + 2))?;
        if s.fitness.len() != self.vectors.len() {
            return Err(SimError::Format("fitness count differs from genome count".into()));
        }
        let n = self.topology.param_count();
        let individuals = self
            .vectors
            .iter()
            .zip(&s.fitness)
            .map(|(g, f)| {
                if g.len() != n {
                    return Err(SimError::DimensionMismatch {
                        expected: n,
                        actual: g.len(),
                    });
                }
                Ok(Individual {
                    genome: SolutionVector(g.clone()),
                    fitness: *f,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let evo = Evolution {
            config: s.config.evo.clone(),
            topology: self.topology.clone(),
            population: Population {
                individuals,
                generation: self.counter,
            },
            rng: self.rng.restore(),
            history: s.history,
        };
        Ok((evo, s.config, s.scenario, s.training_seconds))
    }

    pub fn to_dqn(&self) -> Result<(DqnTrainer, RunConfig, ScenarioSpec, f64)> {
        self.expect_kind(AgentKind::Dqn)?;
        let s: DqnState = from_json(&self.state)?;
        self.check_topology(&s.config.dqn.topology(s.config.sensor.ray_count + 2))?;
        let [online, target, m, v, replay] = self.vectors.as_slice() else {
            return Err(SimError::Format("dqn checkpoint needs 5 vectors".into()));
        };
        let n = self.topology.param_count();
        for vec in [m, v] {
            if vec.len() != n {
                return Err(SimError::DimensionMismatch {
                    expected: n,
                    actual: vec.len(),
                });
            }
        }
        let inputs = self.topology.inputs();
        let stride = 3 + 2 * inputs;
        if replay.len() != s.replay_len * stride {
            return Err(SimError::Format("replay payload length mismatch".into()));
        }
        let mut buffer = ReplayBuffer::new(s.config.dqn.replay_capacity);
        for chunk in replay.chunks_exact(stride) {
            buffer.push(Transition {
                action: chunk[0] as usize,
                reward: chunk[1],
                terminal: chunk[2] != 0.0,
                state: chunk[3..3 + inputs].to_vec(),
                next_state: chunk[3 + inputs..].to_vec(),
            });
        }
        let parts = TrainerParts {
            online: unflatten(&self.topology, &SolutionVector(online.clone()))?,
            target: unflatten(&self.topology, &SolutionVector(target.clone()))?,
            replay: buffer,
            adam: AdamState {
                m: m.clone(),
                v: v.clone(),
                t: s.adam_t,
            },
            rng: self.rng.restore(),
            counters: s.counters,
            history: s.history,
        };
        let trainer = DqnTrainer::from_parts(s.config.dqn.clone(), self.topology.clone(), parts);
        Ok((trainer, s.config, s.scenario, s.training_seconds))
    }

    /// The greedy controller held by this checkpoint.
    pub fn policy(&self) -> Result<TrainedPolicy> {
        match self.kind {
            AgentKind::Evo => {
                let (evo, ..) = self.to_evolution()?;
                Ok(TrainedPolicy::Evo(evo.elite_network()?))
            }
            AgentKind::Dqn => {
                self.expect_kind(AgentKind::Dqn)?;
                let online = self
                    .vectors
                    .first()
                    .ok_or_else(|| SimError::Format("dqn checkpoint has no vectors".into()))?;
                Ok(TrainedPolicy::Dqn(unflatten(&self.topology, &SolutionVector(online.clone()))?))
            }
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(CHECKPOINT_MAGIC);
        b.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        b.push(self.kind as u8);
        b.extend_from_slice(&self.counter.to_le_bytes());
        b.extend_from_slice(&self.rng.seed);
        b.extend_from_slice(&self.rng.stream.to_le_bytes());
        b.extend_from_slice(&self.rng.word_pos.to_le_bytes());
        b.extend_from_slice(&(self.topology.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.topology.layer_sizes {
            b.extend_from_slice(&(s as u32).to_le_bytes());
        }
        b.extend_from_slice(&(self.state.len() as u32).to_le_bytes());
        b.extend_from_slice(self.state.as_bytes());
        b.extend_from_slice(&(self.vectors.len() as u32).to_le_bytes());
        for v in &self.vectors {
            b.extend_from_slice(&(v.len() as u64).to_le_bytes());
            for x in v {
                b.extend_from_slice(&x.to_le_bytes());
            }
        }
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(SimError::Format("not a checkpoint (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(SimError::Format(format!("unsupported checkpoint version {version}")));
        }
        let kind = match r.take(1)?[0] {
            1 => AgentKind::Evo,
            2 => AgentKind::Dqn,
            k => return Err(SimError::Format(format!("unknown agent kind {k}"))),
        };
        let counter = r.u64()?;
        let seed: [u8; 32] = r.take(32)?.try_into().unwrap();
        let stream = r.u64()?;
        let word_pos = u128::from_le_bytes(r.take(16)?.try_into().unwrap());
        let layers = r.u32()? as usize;
        let sizes = (0..layers).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        let topology = NetworkTopology::new(sizes).map_err(|e| SimError::Format(e.to_string()))?;
        let len = r.u32()? as usize;
        let state = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| SimError::Format("checkpoint state is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut vectors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let n = r.u64()? as usize;
            let raw = r.take(n.checked_mul(8).ok_or_else(|| SimError::Format("vector too long".into()))?)?;
            vectors.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        if r.pos != bytes.len() {
            return Err(SimError::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self {
            kind,
            counter,
            rng: RngState {
                seed,
                stream,
                word_pos,
            },
            topology,
            state,
            vectors,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // Write-then-rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.encode())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| SimError::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Greedy controller extracted from a checkpoint.
#[derive(Debug, Clone)]
pub enum TrainedPolicy {
    Evo(Network),
    Dqn(Network),
}

impl TrainedPolicy {
    pub fn kind(&self) -> AgentKind {
        match self {
            TrainedPolicy::Evo(_) => AgentKind::Evo,
            TrainedPolicy::Dqn(_) => AgentKind::Dqn,
        }
    }

    /// `None` when the network output is unusable (non-finite).
    pub fn act(&self, observation: &[f64]) -> Option<ControlInput> {
        match self {
            TrainedPolicy::Evo(net) => decode_outputs(&net.forward(observation).ok()?),
            TrainedPolicy::Dqn(net) => {
                let q = net.forward(observation).ok()?;
                if q.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                crate::dqn::decode_action(crate::dqn::argmax(&q)).ok()
            }
        }
    }
}
