use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Result, SimError};
use crate::scenarios::{sample_traffic_in, FreeSpaceLattice, Scenario, TrafficCar};
use crate::sensing::{cast_rays, SensorConfig, SensorReading};

use super::collision::{check_collision, ObstacleSet};
use super::vehicle::{apply_control, step_kinematics, ControlInput, VehicleParams, VehicleState};

/// Fixed timestep used throughout unless configured otherwise.
pub const DEFAULT_DT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TickConfig {
    pub dt: f64,
    pub seed: u64,
}

impl Default for TickConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            seed: 0,
        }
    }
}

impl TickConfig {
    pub fn new(dt: f64, seed: u64) -> Self {
        Self { dt, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::config("tick.dt", "must be finite and > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Collision,
    Finished,
}

/// Immutable pieces shared by every world built for one scenario. Cloning is
/// cheap; the free-space lattice is computed once.
#[derive(Debug, Clone)]
pub struct Environment {
    pub scenario: Arc<Scenario>,
    pub vehicle: VehicleParams,
    pub sensor: SensorConfig,
    lattice: Arc<FreeSpaceLattice>,
}

impl Environment {
    pub fn new(scenario: Scenario, vehicle: VehicleParams, sensor: SensorConfig) -> Result<Self> {
        vehicle.validate()?;
        sensor.validate()?;
        let lattice = FreeSpaceLattice::new(&scenario.track, &vehicle);
        Ok(Self {
            scenario: Arc::new(scenario),
            vehicle,
            sensor,
            lattice: Arc::new(lattice),
        })
    }

    pub fn lattice(&self) -> &FreeSpaceLattice {
        &self.lattice
    }

    /// Fresh world. Traffic is sampled from the tick seed, so the tuple
    /// (scenario, seed, control stream) determines the whole state stream.
    pub fn world(&self, tick: TickConfig) -> World {
        let traffic = sample_traffic_in(&self.scenario, &self.vehicle, &self.lattice, tick.seed);
        World {
            env: self.clone(),
            tick_cfg: tick,
            ego: self.scenario.track.start_pose,
            traffic_shortfall: traffic.shortfall,
            traffic: traffic.cars,
            tick: 0,
            terminal: None,
            odometry: 0.0,
            progress: 0.0,
            progress_segment: 0,
        }
    }
}

/// Result of one `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub tick: u64,
    pub ego: VehicleState,
    /// Arc length driven this tick, `v·dt`.
    pub odometry_delta: f64,
    pub progress_delta: f64,
    pub terminal: Option<Terminal>,
}

#[derive(Debug, Clone)]
pub struct World {
    env: Environment,
    tick_cfg: TickConfig,
    ego: VehicleState,
    traffic: Vec<TrafficCar>,
    traffic_shortfall: bool,
    tick: u64,
    terminal: Option<Terminal>,
    odometry: f64,
    progress: f64,
    progress_segment: usize,
}

impl World {
    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn scenario(&self) -> &Scenario {
        &self.env.scenario
    }

    pub fn params(&self) -> &VehicleParams {
        &self.env.vehicle
    }

    pub fn tick_config(&self) -> TickConfig {
        self.tick_cfg
    }

    pub fn dt(&self) -> f64 {
        self.tick_cfg.dt
    }

    pub fn ego(&self) -> &VehicleState {
        &self.ego
    }

    pub fn traffic(&self) -> &[TrafficCar] {
        &self.traffic
    }

    pub fn traffic_shortfall(&self) -> bool {
        self.traffic_shortfall
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn terminal(&self) -> Option<Terminal> {
        self.terminal
    }

    /// Cumulative arc length driven by the ego.
    pub fn odometry(&self) -> f64 {
        self.odometry
    }

    /// Furthest distance reached along the centerline from the start pose,
    /// capped at the finish distance.
    pub fn progress(&self) -> f64 {
        self.progress
    }

    pub fn obstacles(&self) -> ObstacleSet {
        ObstacleSet::new(
            self.env.scenario.track.walls.clone(),
            self.traffic.iter().map(|c| c.body(&self.env.vehicle)).collect(),
        )
    }

    pub fn sense(&self) -> SensorReading {
        cast_rays(&self.ego, &self.env.vehicle, &self.obstacles(), &self.env.sensor)
    }

    /// Agent observation: normalized rays, then `v/max_speed` and
    /// `δ/max_steer`.
    pub fn observation(&self) -> Vec<f64> {
        observation_from(&self.sense(), &self.ego, &self.env.vehicle)
    }

    /// Advance everything by one tick under the ego command. Traffic steers
    /// itself. Stepping a terminal world is an error.
    pub fn step(&mut self, cmd: ControlInput) -> Result<TickOutcome> {
        if let Some(t) = self.terminal {
            return Err(SimError::TerminalWorld(t));
        }
        let dt = self.tick_cfg.dt;
        let params = self.env.vehicle;
        let actuated = apply_control(&self.ego, cmd, &params, dt);
        self.ego = step_kinematics(&actuated, &params, dt);
        for car in &mut self.traffic {
            car.advance(&params, dt);
        }
        self.tick += 1;

        let odometry_delta = self.ego.speed * dt;
        self.odometry += odometry_delta;

        let track = &self.env.scenario.track;
        let pr = track.project_near(self.ego.position(), self.progress_segment);
        self.progress_segment = pr.segment;
        let reached = (pr.station - track.start_station).min(track.finish_arc_length);
        let before = self.progress;
        self.progress = self.progress.max(reached);

        if check_collision(&self.ego, &params, &self.obstacles()) {
            self.terminal = Some(Terminal::Collision);
        } else if self.progress >= track.finish_arc_length {
            self.terminal = Some(Terminal::Finished);
        }
        Ok(TickOutcome {
            tick: self.tick,
            ego: self.ego,
            odometry_delta,
            progress_delta: self.progress - before,
            terminal: self.terminal,
        })
    }
}

/// Free-function form of [`World::step`].
pub fn step_world(world: &mut World, cmd: ControlInput) -> Result<TickOutcome> {
    world.step(cmd)
}

pub fn observation_from(reading: &SensorReading, ego: &VehicleState, params: &VehicleParams) -> Vec<f64> {
    let mut obs = reading.normalized.clone();
    obs.push(ego.speed / params.max_speed);
    obs.push(ego.steering / params.max_steer);
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{build_scenario, ScenarioKind, ScenarioParams};
    use crate::sim::{AccelCmd, SteerCmd};

    fn env(traffic: usize) -> Environment {
        let vp = VehicleParams::default();
        let sc = build_scenario(
            ScenarioKind::StraightHighway,
            3,
            &ScenarioParams {
                traffic_count: traffic,
                ..Default::default()
            },
            &vp,
        )
        .unwrap();
        Environment::new(sc, vp, SensorConfig::default()).unwrap()
    }

    #[test]
    fn coasting_ego_follows_pure_kinematics() {
        let e = env(0);
        let mut w = e.world(TickConfig::default());
        let mut s = *w.ego();
        s.speed = 0.0;
        for _ in 0..20 {
            w.step(ControlInput::COAST).unwrap();
            s = step_kinematics(&apply_control(&s, ControlInput::COAST, &e.vehicle, 0.05), &e.vehicle, 0.05);
            assert_eq!(*w.ego(), s);
        }
    }

    #[test]
    fn accelerating_straight_reaches_finish() {
        let e = env(0);
        let mut w = e.world(TickConfig::default());
        let go = ControlInput::new(SteerCmd::None, AccelCmd::Accelerate);
        let mut last = None;
        for _ in 0..2000 {
            let out = w.step(go).unwrap();
            if out.terminal.is_some() {
                last = out.terminal;
                break;
            }
        }
        assert_eq!(last, Some(Terminal::Finished));
        assert_eq!(w.progress(), e.scenario.track.finish_arc_length);
        assert!(matches!(w.step(go), Err(SimError::TerminalWorld(Terminal::Finished))));
    }

    #[test]
    fn observation_layout() {
        let e = env(0);
        let w = e.world(TickConfig::default());
        let obs = w.observation();
        assert_eq!(obs.len(), 11);
        assert_eq!(obs[9], 0.0);
        assert_eq!(obs[10], 0.0);
    }

    #[test]
    fn traffic_depends_on_tick_seed() {
        let e = env(3);
        let a = e.world(TickConfig::new(0.05, 1));
        let b = e.world(TickConfig::new(0.05, 1));
        let c = e.world(TickConfig::new(0.05, 2));
        assert_eq!(a.traffic(), b.traffic());
        assert_ne!(a.traffic(), c.traffic());
        assert_eq!(a.traffic().len(), 3);
    }
}
