use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::geometry::{normalize_angle, OrientedRect, Vec2};

/// Physical limits of a car-like body. Distances are simulator units,
/// angles radians, times seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub max_speed: f64,
    pub max_steer: f64,
    pub accel_rate: f64,
    pub brake_rate: f64,
    pub steer_rate: f64,
    pub body_length: f64,
    pub body_width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            max_speed: 30.0,
            max_steer: 0.6,
            accel_rate: 8.0,
            brake_rate: 12.0,
            steer_rate: 2.0,
            body_length: 4.0,
            body_width: 1.8,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("wheelbase", self.wheelbase),
            ("max_speed", self.max_speed),
            ("max_steer", self.max_steer),
            ("accel_rate", self.accel_rate),
            ("brake_rate", self.brake_rate),
            ("steer_rate", self.steer_rate),
            ("body_length", self.body_length),
            ("body_width", self.body_width),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::config(
                    format!("vehicle.{name}"),
                    "must be finite and > 0",
                ));
            }
        }
        if self.max_steer >= FRAC_PI_2 {
            return Err(SimError::config("vehicle.max_steer", "must be < π/2"));
        }
        if self.body_length < self.wheelbase {
            return Err(SimError::config(
                "vehicle.body_length",
                "must be >= wheelbase",
            ));
        }
        Ok(())
    }

    /// Distance from the rear axle to the body centre.
    pub fn center_offset(&self) -> f64 {
        0.5 * self.wheelbase
    }

    /// Distance from the rear axle to the front bumper.
    pub fn front_offset(&self) -> f64 {
        0.5 * self.wheelbase + 0.5 * self.body_length
    }

    /// Tightest turning radius of the rear axle.
    pub fn min_turn_radius(&self) -> f64 {
        self.wheelbase / self.max_steer.tan()
    }
}

/// Pose and actuator state. `(x, y)` is the rear-axle midpoint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub steering: f64,
}

impl VehicleState {
    pub fn at(position: Vec2, heading: f64) -> Self {
        Self {
            x: position.x,
            y: position.y,
            heading: normalize_angle(heading),
            speed: 0.0,
            steering: 0.0,
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    pub fn body(&self, params: &VehicleParams) -> OrientedRect {
        OrientedRect {
            center: self.position() + self.forward() * params.center_offset(),
            heading: self.heading,
            half_length: 0.5 * params.body_length,
            half_width: 0.5 * params.body_width,
        }
    }

    /// Sensor origin: midpoint of the front bumper.
    pub fn sensor_origin(&self, params: &VehicleParams) -> Vec2 {
        self.position() + self.forward() * params.front_offset()
    }

    pub fn is_valid(&self, params: &VehicleParams) -> bool {
        let h = self.heading;
        h > -std::f64::consts::PI
            && h <= std::f64::consts::PI
            && (0.0..=params.max_speed).contains(&self.speed)
            && self.steering.abs() <= params.max_steer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteerCmd {
    Left,
    #[default]
    None,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelCmd {
    Accelerate,
    #[default]
    Coast,
    Brake,
}

/// One discrete command per actuation axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub steer: SteerCmd,
    pub accel: AccelCmd,
}

impl ControlInput {
    pub const COAST: ControlInput = ControlInput {
        steer: SteerCmd::None,
        accel: AccelCmd::Coast,
    };

    pub const fn new(steer: SteerCmd, accel: AccelCmd) -> Self {
        Self { steer, accel }
    }
}

impl fmt::Display for ControlInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.steer {
            SteerCmd::Left => "left",
            SteerCmd::None => "none",
            SteerCmd::Right => "right",
        };
        let a = match self.accel {
            AccelCmd::Accelerate => "accelerate",
            AccelCmd::Coast => "coast",
            AccelCmd::Brake => "brake",
        };
        write!(f, "{s}:{a}")
    }
}

impl FromStr for ControlInput {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        let (steer, accel) = s
            .split_once(':')
            .ok_or_else(|| SimError::Format(format!("control `{s}`: expected steer:accel")))?;
        let steer = match steer {
            "left" => SteerCmd::Left,
            "none" => SteerCmd::None,
            "right" => SteerCmd::Right,
            other => return Err(SimError::Format(format!("unknown steer command `{other}`"))),
        };
        let accel = match accel {
            "accelerate" => AccelCmd::Accelerate,
            "coast" => AccelCmd::Coast,
            "brake" => AccelCmd::Brake,
            other => return Err(SimError::Format(format!("unknown accel command `{other}`"))),
        };
        Ok(Self { steer, accel })
    }
}

/// Rate-limited actuation. Positive steering turns left (counter-clockwise).
/// The pose is untouched.
pub fn apply_control(
    state: &VehicleState,
    cmd: ControlInput,
    params: &VehicleParams,
    dt: f64,
) -> VehicleState {
    let speed = match cmd.accel {
        AccelCmd::Accelerate => state.speed + params.accel_rate * dt,
        AccelCmd::Coast => state.speed,
        AccelCmd::Brake => state.speed - params.brake_rate * dt,
    }
    .clamp(0.0, params.max_speed);

    let step = params.steer_rate * dt;
    let steering = match cmd.steer {
        SteerCmd::Left => state.steering + step,
        SteerCmd::Right => state.steering - step,
        SteerCmd::None => state.steering.signum() * (state.steering.abs() - step).max(0.0),
    }
    .clamp(-params.max_steer, params.max_steer);

    VehicleState {
        speed,
        steering,
        ..*state
    }
}

/// One explicit-Euler step of the kinematic bicycle model about the rear axle.
pub fn step_kinematics(state: &VehicleState, params: &VehicleParams, dt: f64) -> VehicleState {
    let v = state.speed;
    let (sin_h, cos_h) = state.heading.sin_cos();
    VehicleState {
        x: state.x + v * cos_h * dt,
        y: state.y + v * sin_h * dt,
        heading: normalize_angle(state.heading + v / params.wheelbase * state.steering.tan() * dt),
        ..*state
    }
}
