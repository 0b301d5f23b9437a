use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{OrientedRect, Vec2};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::{step_kinematics, VehicleParams, VehicleState};

use super::build::Scenario;
use super::track::TrackGeometry;

/// Spawn attempts before giving up on placing the requested traffic.
pub const MAX_SPAWN_ATTEMPTS: usize = 1000;

/// Drivable space discretized into square cells of one body length.
/// A cell is free when its centre leaves room for a car body inside the
/// corridor, away from both road ends.
#[derive(Debug, Clone)]
pub struct FreeSpaceLattice {
    pub cell_size: f64,
    pub cells: Vec<Vec2>,
}

impl FreeSpaceLattice {
    pub fn new(track: &TrackGeometry, vehicle: &VehicleParams) -> Self {
        let cell = vehicle.body_length;
        let margin = 0.5 * track.width - 0.5 * vehicle.body_width;
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in track.left_wall.iter().chain(&track.right_wall) {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let nx = ((hi.x - lo.x) / cell).ceil() as usize;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize;
        let s_lo = vehicle.body_length;
        let s_hi = track.total_length() - vehicle.body_length;
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = Vec2::new(lo.x + (i as f64 + 0.5) * cell, lo.y + (j as f64 + 0.5) * cell);
                let pr = track.project(c);
                if pr.distance <= margin && pr.station >= s_lo && pr.station <= s_hi {
                    cells.push(c);
                }
            }
        }
        Self { cell_size: cell, cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of a uniformly drawn free cell.
    pub fn sample_cell(&self, rng: &mut SimRng) -> usize {
        rng.random_range(0..self.cells.len())
    }
}

/// A randomly routed obstacle car. It loops through its waypoints at
/// constant speed using pure-pursuit steering and ignores the ego.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficCar {
    pub waypoints: Vec<Vec2>,
    pub speed: f64,
    pub state: VehicleState,
    pub target: usize,
    pub ticks_on_target: u32,
}

impl TrafficCar {
    /// Give up on a waypoint after this many ticks (it may sit inside the
    /// turning circle).
    const TARGET_PATIENCE: u32 = 200;

    pub fn body(&self, params: &VehicleParams) -> OrientedRect {
        self.state.body(params)
    }

    pub fn advance(&mut self, params: &VehicleParams, dt: f64) {
        if self.waypoints.is_empty() {
            return;
        }
        let reach = params.body_length;
        if self.state.position().distance(self.waypoints[self.target]) < reach
            || self.ticks_on_target >= Self::TARGET_PATIENCE
        {
            self.target = (self.target + 1) % self.waypoints.len();
            self.ticks_on_target = 0;
        }
        let to = self.waypoints[self.target] - self.state.position();
        let alpha = crate::geometry::normalize_angle(to.angle() - self.state.heading);
        let lookahead = to.norm().max(1e-6);
        let steer = (2.0 * params.wheelbase * alpha.sin() / lookahead).atan();
        self.state.steering = steer.clamp(-params.max_steer, params.max_steer);
        self.state.speed = self.speed;
        self.state = step_kinematics(&self.state, params, dt);
        self.ticks_on_target += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSample {
    pub cars: Vec<TrafficCar>,
    /// Set when fewer than the requested cars could be placed.
    pub shortfall: bool,
}

/// Rectangle kept clear in front of the ego start so no car spawns on top of it.
pub fn ego_clearance(track: &TrackGeometry, vehicle: &VehicleParams) -> OrientedRect {
    let start = track.start_pose;
    let rear = -0.5 * (vehicle.body_length - vehicle.wheelbase);
    let front = 4.0 * vehicle.body_length;
    OrientedRect {
        center: start.position() + start.forward() * (0.5 * (rear + front)),
        heading: start.heading,
        half_length: 0.5 * (front - rear),
        half_width: 0.5 * track.width,
    }
}

/// Sample traffic using the scenario's own seed.
pub fn sample_traffic(scenario: &Scenario, vehicle: &VehicleParams) -> TrafficSample {
    sample_traffic_seeded(scenario, vehicle, scenario.seed)
}

/// Sample traffic for `scenario` from an explicit seed. Spawn points and
/// waypoints are drawn uniformly over free cells; spawn bodies never overlap
/// each other, the ego clearance zone or a wall.
pub fn sample_traffic_seeded(scenario: &Scenario, vehicle: &VehicleParams, seed: u64) -> TrafficSample {
    let count = scenario.traffic_count();
    if count == 0 {
        return TrafficSample {
            cars: Vec::new(),
            shortfall: false,
        };
    }
    let lattice = FreeSpaceLattice::new(&scenario.track, vehicle);
    sample_traffic_in(scenario, vehicle, &lattice, seed)
}

/// As [`sample_traffic_seeded`], reusing a prebuilt lattice.
pub fn sample_traffic_in(
    scenario: &Scenario,
    vehicle: &VehicleParams,
    lattice: &FreeSpaceLattice,
    seed: u64,
) -> TrafficSample {
    let count = scenario.traffic_count();
    let track = &scenario.track;
    if count == 0 {
        return TrafficSample {
            cars: Vec::new(),
            shortfall: false,
        };
    }
    if lattice.is_empty() {
        return TrafficSample {
            cars: Vec::new(),
            shortfall: true,
        };
    }
    let mut rng = rng_from_seed(derive_seed(seed, &[0x7472_6166]));
    let [v_lo, v_hi] = scenario.traffic_speed_range();
    let mut claimed = vec![ego_clearance(track, vehicle)];
    let mut cars = Vec::with_capacity(count);
    let mut attempts = 0;
    while cars.len() < count && attempts < MAX_SPAWN_ATTEMPTS {
        attempts += 1;
        let spawn = lattice.cells[lattice.sample_cell(&mut rng)];
        let waypoints: Vec<Vec2> = (0..scenario.params.traffic_waypoints)
            .map(|_| lattice.cells[lattice.sample_cell(&mut rng)])
            .collect();
        let speed = if v_hi > v_lo { rng.random_range(v_lo..=v_hi) } else { v_lo };
        let first = waypoints[0];
        let heading = if first.distance(spawn) > 1e-9 {
            (first - spawn).angle()
        } else {
            track.point_at(track.project(spawn).station).1
        };
        // The spawn point is the body centre; convert to the rear-axle reference.
        let rear_axle = spawn - Vec2::from_angle(heading) * vehicle.center_offset();
        let state = VehicleState {
            speed,
            ..VehicleState::at(rear_axle, heading)
        };
        let body = state.body(vehicle);
        if claimed.iter().any(|r| r.intersects_rect(&body))
            || track.walls.iter().any(|w| body.intersects_segment(w))
        {
            continue;
        }
        claimed.push(body);
        cars.push(TrafficCar {
            waypoints,
            speed,
            state,
            target: 0,
            ticks_on_target: 0,
        });
    }
    TrafficSample {
        shortfall: cars.len() < count,
        cars,
    }
}
