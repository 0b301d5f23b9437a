//! Closed-loop rollouts of any controller through a [`World`].

use crate::eval::{LogHeader, LogRow, TrajectoryLog};
use crate::geometry::normalize_angle;
use crate::sim::{AccelCmd, ControlInput, SteerCmd, Terminal, World};

/// Anything that maps the current world to a control command.
pub trait Driver {
    fn act(&mut self, world: &World, observation: &[f64]) -> ControlInput;
}

impl<F: FnMut(&World, &[f64]) -> ControlInput> Driver for F {
    fn act(&mut self, world: &World, observation: &[f64]) -> ControlInput {
        self(world, observation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Terminal(Terminal),
    TickCap,
    Stalled,
    /// The driver produced an unusable command (e.g. NaN network output).
    Aborted,
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub log: TrajectoryLog,
    pub ticks: u64,
    /// Progress along the centerline from the start pose.
    pub distance: f64,
    /// Time-average of ego speed over the ticks driven.
    pub mean_speed: f64,
    pub stop: StopReason,
}

impl Rollout {
    pub fn collided(&self) -> bool {
        self.stop == StopReason::Terminal(Terminal::Collision)
    }

    pub fn finished(&self) -> bool {
        self.stop == StopReason::Terminal(Terminal::Finished)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutLimits {
    pub max_ticks: u64,
    /// End early after this many consecutive ticks without progress.
    pub stall_ticks: Option<u64>,
}

/// Drive `world` until it turns terminal, the tick cap is reached, or the
/// ego stalls. The reward column holds the progress increment per tick.
pub fn rollout(mut world: World, driver: &mut dyn Driver, limits: RolloutLimits, agent: &str) -> Rollout {
    rollout_with(&mut world, |w, obs| Some(driver.act(w, obs)), limits, agent)
}

/// Like [`rollout`] but the driver may abort by returning `None`.
pub fn rollout_with(
    world: &mut World,
    mut act: impl FnMut(&World, &[f64]) -> Option<ControlInput>,
    limits: RolloutLimits,
    agent: &str,
) -> Rollout {
    let dt = world.dt();
    let mut log = TrajectoryLog::new(LogHeader {
        scenario: world.scenario().name.clone(),
        seed: world.tick_config().seed,
        agent: agent.to_string(),
        dt,
    });
    log.rows.push(LogRow::from_state(0, dt, world.ego(), None, 0.0, 0.0));
    let mut speed_sum = 0.0;
    let mut since_progress = 0;
    let mut stop = StopReason::TickCap;
    while world.tick() < limits.max_ticks {
        let obs = world.observation();
        let Some(cmd) = act(world, &obs) else {
            stop = StopReason::Aborted;
            break;
        };
        let out = world.step(cmd).expect("rollout never steps a terminal world");
        speed_sum += out.ego.speed;
        log.rows.push(LogRow::from_state(
            out.tick,
            dt,
            &out.ego,
            Some(cmd),
            out.progress_delta,
            world.odometry(),
        ));
        if let Some(t) = out.terminal {
            stop = StopReason::Terminal(t);
            break;
        }
        if out.progress_delta > 0.0 {
            since_progress = 0;
        } else {
            since_progress += 1;
            if limits.stall_ticks.is_some_and(|s| since_progress >= s) {
                stop = StopReason::Stalled;
                break;
            }
        }
    }
    let ticks = world.tick();
    Rollout {
        log,
        ticks,
        distance: world.progress(),
        mean_speed: if ticks > 0 { speed_sum / ticks as f64 } else { 0.0 },
        stop,
    }
}

/// Replays a fixed command stream, then coasts.
#[derive(Debug, Clone)]
pub struct ScriptedDriver {
    controls: Vec<ControlInput>,
    next: usize,
}

impl ScriptedDriver {
    pub fn new(controls: Vec<ControlInput>) -> Self {
        Self { controls, next: 0 }
    }
}

impl Driver for ScriptedDriver {
    fn act(&mut self, _: &World, _: &[f64]) -> ControlInput {
        let c = self.controls.get(self.next).copied().unwrap_or(ControlInput::COAST);
        self.next += 1;
        c
    }
}

/// Pure-pursuit lane follower with discrete actuation: tracks a look-ahead
/// point on the centerline and holds a target speed. Used as the scripted
/// reference driver.
#[derive(Debug, Clone)]
pub struct CenterlineDriver {
    pub target_speed: f64,
    pub lookahead: f64,
}

impl CenterlineDriver {
    pub fn new(target_speed: f64) -> Self {
        Self {
            target_speed,
            lookahead: 8.0,
        }
    }
}

impl Driver for CenterlineDriver {
    fn act(&mut self, world: &World, _: &[f64]) -> ControlInput {
        let p = world.params();
        let ego = world.ego();
        let dt = world.dt();
        let track = &world.scenario().track;
        let here = track.start_station + world.progress();
        let (target, _) = track.point_at(here + self.lookahead.max(p.wheelbase));
        let to = target - ego.position();
        let alpha = normalize_angle(to.angle() - ego.heading);
        let want = (2.0 * p.wheelbase * alpha.sin() / to.norm().max(1e-6))
            .atan()
            .clamp(-p.max_steer, p.max_steer);
        let half_step = 0.5 * p.steer_rate * dt;
        let steer = if want > ego.steering + half_step {
            SteerCmd::Left
        } else if want < ego.steering - half_step {
            SteerCmd::Right
        } else if want.abs() < half_step {
            SteerCmd::None
        } else if want > 0.0 {
            // Holding a turn: `None` would decay the wheel back to centre.
            if ego.steering < want { SteerCmd::Left } else { SteerCmd::Right }
        } else if ego.steering > want {
            SteerCmd::Right
        } else {
            SteerCmd::Left
        };
        let accel = if ego.speed < self.target_speed - 0.5 * p.accel_rate * dt {
            AccelCmd::Accelerate
        } else if ego.speed > self.target_speed + 0.5 * p.brake_rate * dt {
            AccelCmd::Brake
        } else {
            AccelCmd::Coast
        };
        ControlInput::new(steer, accel)
    }
}
