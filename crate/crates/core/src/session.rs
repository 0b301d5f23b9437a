//! Live driving session, independent of any transport. A server feeds it
//! decoded client messages and calls [`Session::step`] at its own rate; the
//! session owns the only copy of the simulation state.
//!
//! Wire format: one JSON object per text frame, discriminated by `type`.
//!
//! Client → server:
//! `{"type":"control","steer":"left","accel":"accelerate"}`,
//! `{"type":"start","scenario":"curved_road","seed":7}`, `{"type":"reset"}`,
//! `{"type":"record_start"}`, `{"type":"record_stop"}`,
//! `{"type":"select_agent","mode":"human"|"agent"}`.
//!
//! Server → client: `frame`, `ack`, `error` and `hello` objects, see
//! [`ServerMessage`].

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::eval::{LogHeader, LogRow, TrajectoryLog};
use crate::formats::{resolve_scenario, RunConfig, TrainedPolicy};
use crate::scenarios::ScenarioSpec;
use crate::sensing::{rasterize_occupancy_grid, SensorReading};
use crate::sim::{observation_from, AccelCmd, ControlInput, Environment, SteerCmd, Terminal, TickConfig, VehicleState, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveMode {
    Human,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Driver,
    Observer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Control { steer: SteerCmd, accel: AccelCmd },
    Start { scenario: String, seed: Option<u64> },
    Reset,
    RecordStart,
    RecordStop,
    SelectAgent { mode: DriveMode },
}

impl ClientMessage {
    fn name(&self) -> &'static str {
        match self {
            ClientMessage::Control { .. } => "control",
            ClientMessage::Start { .. } => "start",
            ClientMessage::Reset => "reset",
            ClientMessage::RecordStart => "record_start",
            ClientMessage::RecordStop => "record_stop",
            ClientMessage::SelectAgent { .. } => "select_agent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl From<&VehicleState> for Pose {
    fn from(s: &VehicleState) -> Self {
        Self {
            x: s.x,
            y: s.y,
            heading: s.heading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPayload {
    pub size: usize,
    pub extent: f64,
    /// `.` free, `#` occupied, space unknown; leftmost band first.
    pub rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub scenario: String,
    pub tick: u64,
    pub time: f64,
    pub ego: VehicleState,
    pub traffic: Vec<Pose>,
    pub sensor: SensorReading,
    pub grid: GridPayload,
    /// Progress gained on the last tick.
    pub reward: f64,
    pub progress: f64,
    pub terminal: Option<Terminal>,
    pub recording: bool,
    pub mode: DriveMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello { role: Role, tick: u64 },
    Frame(Box<Frame>),
    Ack { command: String, detail: Option<String> },
    Error { message: String },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }

    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    pub fn ack(command: &str, detail: Option<String>) -> Self {
        ServerMessage::Ack {
            command: command.into(),
            detail,
        }
    }
}

pub struct Session {
    config: RunConfig,
    spec: ScenarioSpec,
    env: Environment,
    world: World,
    pending: Option<ControlInput>,
    mode: DriveMode,
    policy: Option<TrainedPolicy>,
    recording: Option<TrajectoryLog>,
    record_dir: PathBuf,
    recordings_saved: usize,
    malformed: u64,
    last_reward: f64,
}

impl Session {
    pub fn new(config: RunConfig, spec: ScenarioSpec, policy: Option<TrainedPolicy>, record_dir: PathBuf) -> Result<Self> {
        config.validate()?;
        let env = Environment::new(spec.build(&config.vehicle)?, config.vehicle, config.sensor.clone())?;
        let world = env.world(config.tick);
        Ok(Self {
            config,
            spec,
            env,
            world,
            pending: None,
            mode: DriveMode::Human,
            policy,
            recording: None,
            record_dir,
            recordings_saved: 0,
            malformed: 0,
            last_reward: 0.0,
        })
    }

    pub fn tick(&self) -> u64 {
        self.world.tick()
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn malformed_count(&self) -> u64 {
        self.malformed
    }

    pub fn is_recording(&self) -> bool {
        self.recording.is_some()
    }

    /// Decode and apply one text frame. Malformed frames are dropped and
    /// counted; the reply (if any) goes back to the sender only.
    pub fn handle_text(&mut self, text: &str, role: Role) -> Option<ServerMessage> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle(msg, role),
            Err(_) => {
                self.malformed += 1;
                None
            }
        }
    }

    pub fn handle(&mut self, msg: ClientMessage, role: Role) -> Option<ServerMessage> {
        if role == Role::Observer {
            return Some(ServerMessage::error(format!("observers cannot send `{}`", msg.name())));
        }
        match msg {
            ClientMessage::Control { steer, accel } => {
                self.pending = Some(ControlInput::new(steer, accel));
                None
            }
            ClientMessage::Start { scenario, seed } => Some(self.start(&scenario, seed)),
            ClientMessage::Reset => {
                let detail = self.finish_recording().err().map(|e| e.to_string());
                self.reset_world(self.config.tick.seed);
                Some(match detail {
                    Some(e) => ServerMessage::error(e),
                    None => ServerMessage::ack("reset", None),
                })
            }
            ClientMessage::RecordStart => {
                if self.recording.is_some() {
                    return Some(ServerMessage::error("already recording"));
                }
                let mut log = TrajectoryLog::new(LogHeader {
                    scenario: self.spec.name.clone(),
                    seed: self.world.tick_config().seed,
                    agent: match self.mode {
                        DriveMode::Human => "human".into(),
                        DriveMode::Agent => "agent".into(),
                    },
                    dt: self.world.dt(),
                });
                log.rows.push(LogRow::from_state(
                    self.world.tick(),
                    self.world.dt(),
                    self.world.ego(),
                    None,
                    0.0,
                    self.world.odometry(),
                ));
                self.recording = Some(log);
                Some(ServerMessage::ack("record_start", None))
            }
            ClientMessage::RecordStop => match self.finish_recording() {
                Ok(Some(path)) => Some(ServerMessage::ack("record_stop", Some(path.display().to_string()))),
                Ok(None) => Some(ServerMessage::error("not recording")),
                Err(e) => Some(ServerMessage::error(e.to_string())),
            },
            ClientMessage::SelectAgent { mode } => {
                if mode == DriveMode::Agent && self.policy.is_none() {
                    return Some(ServerMessage::error("no agent checkpoint loaded"));
                }
                self.mode = mode;
                Some(ServerMessage::ack("select_agent", Some(format!("{mode:?}").to_lowercase())))
            }
        }
    }

    fn start(&mut self, scenario: &str, seed: Option<u64>) -> ServerMessage {
        let spec = match resolve_scenario(scenario) {
            Ok(s) => s,
            Err(e) => return ServerMessage::error(e.to_string()),
        };
        let env = match spec
            .build(&self.config.vehicle)
            .and_then(|s| Environment::new(s, self.config.vehicle, self.config.sensor.clone()))
        {
            Ok(e) => e,
            Err(e) => return ServerMessage::error(e.to_string()),
        };
        let saved = self.finish_recording();
        self.spec = spec;
        self.env = env;
        self.reset_world(seed.unwrap_or(self.config.tick.seed));
        match saved {
            Err(e) => ServerMessage::error(e.to_string()),
            Ok(_) => ServerMessage::ack("start", Some(self.spec.name.clone())),
        }
    }

    fn reset_world(&mut self, seed: u64) {
        self.world = self.env.world(TickConfig::new(self.config.tick.dt, seed));
        self.pending = None;
        self.last_reward = 0.0;
    }

    /// Persist the open recording, if any, and return its path.
    fn finish_recording(&mut self) -> Result<Option<PathBuf>> {
        let Some(log) = self.recording.take() else {
            return Ok(None);
        };
        std::fs::create_dir_all(&self.record_dir)?;
        let path = loop {
            self.recordings_saved += 1;
            let p = self
                .record_dir
                .join(format!("{}_{:03}.csv", self.spec.name, self.recordings_saved));
            if !p.exists() {
                break p;
            }
        };
        log.save(&path)?;
        Ok(Some(path))
    }

    /// The log being recorded, if any.
    pub fn recording(&self) -> Option<&TrajectoryLog> {
        self.recording.as_ref()
    }

    /// Advance one tick with the latest control (coasting when none
    /// arrived, or the agent's choice in agent mode). A terminal world is
    /// held until reset. Returns the frame to broadcast.
    pub fn step(&mut self) -> Result<Frame> {
        if self.world.terminal().is_some() {
            self.pending = None;
            return Ok(self.frame());
        }
        let cmd = match (self.mode, &self.policy) {
            (DriveMode::Agent, Some(p)) => {
                let obs = observation_from(&self.world.sense(), self.world.ego(), self.world.params());
                p.act(&obs).unwrap_or(ControlInput::COAST)
            }
            _ => self.pending.unwrap_or(ControlInput::COAST),
        };
        self.pending = None;
        let out = self.world.step(cmd)?;
        self.last_reward = out.progress_delta;
        if let Some(log) = &mut self.recording {
            log.push(LogRow::from_state(
                out.tick,
                self.world.dt(),
                &out.ego,
                Some(cmd),
                out.progress_delta,
                self.world.odometry(),
            ))?;
        }
        Ok(self.frame())
    }

    pub fn frame(&self) -> Frame {
        let reading = self.world.sense();
        let grid = rasterize_occupancy_grid(&reading, self.world.ego(), &self.env.sensor);
        Frame {
            scenario: self.spec.name.clone(),
            tick: self.world.tick(),
            time: self.world.tick() as f64 * self.world.dt(),
            ego: *self.world.ego(),
            traffic: self.world.traffic().iter().map(|c| Pose::from(&c.state)).collect(),
            sensor: reading,
            grid: GridPayload {
                size: grid.size,
                extent: grid.extent,
                rows: grid.to_rows(),
            },
            reward: self.last_reward,
            progress: self.world.progress(),
            terminal: self.world.terminal(),
            recording: self.recording.is_some(),
            mode: self.mode,
        }
    }

    /// Persist any open recording before the session goes away.
    pub fn close(&mut self) -> Result<Option<PathBuf>> {
        self.finish_recording()
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("scenario", &self.spec.name)
            .field("tick", &self.world.tick())
            .field("mode", &self.mode)
            .field("recording", &self.recording.is_some())
            .finish()
    }
}

pub fn parse_client_message(text: &str) -> Result<ClientMessage> {
    serde_json::from_str(text).map_err(|e| SimError::Format(e.to_string()))
}
