//! Forward-facing range sensor and its ego-anchored occupancy grid.
//!
//! Ray `i` of `n` leaves the front-bumper midpoint at bearing
//! `heading − fov/2 + i·fov/(n−1)`, so ray 0 is the rightmost one and the
//! endpoints of the field of view are both sampled.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Result, SimError};
use crate::geometry::{ray_segment, Vec2};
use crate::sim::{ObstacleSet, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub fov: f64,
    pub ray_count: usize,
    pub max_range: f64,
    pub grid_size: usize,
    /// Side length of the square grid, centred on the sensor origin.
    pub grid_extent: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov: 2.0 * PI / 3.0,
            ray_count: 9,
            max_range: 50.0,
            grid_size: 64,
            grid_extent: 100.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov <= 2.0 * PI) {
            return Err(SimError::config("sensor.fov", "must be in (0, 2π]"));
        }
        if self.ray_count < 2 {
            return Err(SimError::config("sensor.ray_count", "must be >= 2"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(SimError::config("sensor.max_range", "must be finite and > 0"));
        }
        if self.grid_size == 0 {
            return Err(SimError::config("sensor.grid_size", "must be >= 1"));
        }
        if !(self.grid_extent > 0.0) {
            return Err(SimError::config("sensor.grid_extent", "must be > 0"));
        }
        Ok(())
    }

    /// Bearing of ray `i` relative to the vehicle heading.
    pub fn relative_bearing(&self, i: usize) -> f64 {
        -0.5 * self.fov + i as f64 * self.fov / (self.ray_count - 1) as f64
    }

    pub fn cell_size(&self) -> f64 {
        self.grid_extent / self.grid_size as f64
    }
}

/// Range vector `S = [s₁ … sₙ]` and its normalization by `max_range`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub distances: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl SensorReading {
    pub fn from_distances(distances: Vec<f64>, max_range: f64) -> Self {
        let normalized = distances.iter().map(|d| (d / max_range).clamp(0.0, 1.0)).collect();
        Self {
            distances,
            normalized,
        }
    }
}

/// Distances from the ego sensor origin to the nearest obstacle along each ray.
pub fn cast_rays(
    ego: &VehicleState,
    params: &VehicleParams,
    obstacles: &ObstacleSet,
    cfg: &SensorConfig,
) -> SensorReading {
    let origin = ego.sensor_origin(params);
    let r = cfg.max_range;
    let near: Vec<_> = obstacles
        .boundary_segments()
        .filter(|s| {
            s.a.x.min(s.b.x) <= origin.x + r
                && s.a.x.max(s.b.x) >= origin.x - r
                && s.a.y.min(s.b.y) <= origin.y + r
                && s.a.y.max(s.b.y) >= origin.y - r
        })
        .collect();
    let distances = (0..cfg.ray_count)
        .map(|i| {
            let dir = Vec2::from_angle(ego.heading + cfg.relative_bearing(i));
            near.iter()
                .filter_map(|s| ray_segment(origin, dir, s))
                .fold(r, f64::min)
        })
        .collect();
    SensorReading::from_distances(distances, r)
}

/// `f(S) = min(S)` over the normalized readings.
pub fn min_reading(reading: &SensorReading) -> f64 {
    min_normalized(&reading.normalized)
}

pub fn min_normalized(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    Unknown,
    Free,
    Occupied,
}

/// Square grid in the ego frame: cell `(ix, iy)` spans forward coordinate
/// `[ix·c − E/2, (ix+1)·c − E/2)` and leftward coordinate likewise in `iy`,
/// with the sensor origin at the grid centre. Stored row-major by `iy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGridFrame {
    pub size: usize,
    pub extent: f64,
    pub anchor: VehicleState,
    pub cells: Vec<Occupancy>,
}

impl OccupancyGridFrame {
    pub fn get(&self, ix: usize, iy: usize) -> Occupancy {
        self.cells[iy * self.size + ix]
    }

    pub fn count(&self, kind: Occupancy) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    /// Cell containing the ego-frame point `(forward, left)`, if on the grid.
    pub fn cell_of(&self, forward: f64, left: f64) -> Option<(usize, usize)> {
        cell_index(self.size, self.extent, forward, left)
    }

    /// Compact text rendering: `.` free, `#` occupied, space unknown. Rows run
    /// from the leftmost band to the rightmost.
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.size)
            .rev()
            .map(|iy| {
                (0..self.size)
                    .map(|ix| match self.get(ix, iy) {
                        Occupancy::Unknown => ' ',
                        Occupancy::Free => '.',
                        Occupancy::Occupied => '#',
                    })
                    .collect()
            })
            .collect()
    }
}

fn cell_index(size: usize, extent: f64, u: f64, w: f64) -> Option<(usize, usize)> {
    let c = extent / size as f64;
    let fx = ((u + 0.5 * extent) / c).floor();
    let fy = ((w + 0.5 * extent) / c).floor();
    if fx < 0.0 || fy < 0.0 || fx >= size as f64 || fy >= size as f64 {
        None
    } else {
        Some((fx as usize, fy as usize))
    }
}

/// Cells visited by the ego-frame segment from the origin to `end`, in order
/// (grid traversal by boundary crossings).
fn traverse(size: usize, extent: f64, end: Vec2) -> Vec<(usize, usize)> {
    let c = extent / size as f64;
    let Some((mut ix, mut iy)) = cell_index(size, extent, 0.0, 0.0) else {
        return Vec::new();
    };
    let goal = cell_index(size, extent, end.x, end.y);
    let len = end.norm();
    let mut out = vec![(ix, iy)];
    if len == 0.0 {
        return out;
    }
    let dir = end * (1.0 / len);
    let step_x: i64 = if dir.x > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dir.y > 0.0 { 1 } else { -1 };
    let origin = Vec2::new(0.5 * extent, 0.5 * extent);
    let next_boundary = |i: usize, step: i64| {
        if step > 0 {
            (i + 1) as f64 * c
        } else {
            i as f64 * c
        }
    };
    let mut t_max_x = if dir.x != 0.0 {
        (next_boundary(ix, step_x) - origin.x) / dir.x
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dir.y != 0.0 {
        (next_boundary(iy, step_y) - origin.y) / dir.y
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dir.x != 0.0 { c / dir.x.abs() } else { f64::INFINITY };
    let t_delta_y = if dir.y != 0.0 { c / dir.y.abs() } else { f64::INFINITY };
    while Some((ix, iy)) != goal {
        let t = t_max_x.min(t_max_y);
        if t > len {
            break;
        }
        if t_max_x < t_max_y {
            let n = ix as i64 + step_x;
            if n < 0 || n >= size as i64 {
                break;
            }
            ix = n as usize;
            t_max_x += t_delta_x;
        } else {
            let n = iy as i64 + step_y;
            if n < 0 || n >= size as i64 {
                break;
            }
            iy = n as usize;
            t_max_y += t_delta_y;
        }
        out.push((ix, iy));
    }
    out
}

/// Rasterize one reading into an ego-anchored ternary grid. Cells a ray
/// passes through before its hit are free; the cell containing a hit is
/// occupied (rays at `max_range` mark no hit); all other cells are unknown.
pub fn rasterize_occupancy_grid(
    reading: &SensorReading,
    ego: &VehicleState,
    cfg: &SensorConfig,
) -> OccupancyGridFrame {
    let n = cfg.grid_size;
    let mut cells = vec![Occupancy::Unknown; n * n];
    let mut hits = Vec::new();
    for (i, &d) in reading.distances.iter().enumerate() {
        let end = Vec2::from_angle(cfg.relative_bearing(i)) * d;
        let hit = d < cfg.max_range;
        let path = traverse(n, cfg.grid_extent, end);
        let hit_cell = if hit {
            cell_index(n, cfg.grid_extent, end.x, end.y)
        } else {
            None
        };
        for &(ix, iy) in &path {
            if Some((ix, iy)) != hit_cell {
                cells[iy * n + ix] = Occupancy::Free;
            }
        }
        if let Some(c) = hit_cell {
            hits.push(c);
        }
    }
    for (ix, iy) in hits {
        cells[iy * n + ix] = Occupancy::Occupied;
    }
    OccupancyGridFrame {
        size: n,
        extent: cfg.grid_extent,
        anchor: *ego,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;

    fn params() -> VehicleParams {
        VehicleParams::default()
    }

    #[test]
    fn empty_scene_reads_max_range() {
        let cfg = SensorConfig::default();
        let r = cast_rays(&VehicleState::default(), &params(), &ObstacleSet::default(), &cfg);
        assert_eq!(r.distances, vec![50.0; 9]);
        assert_eq!(r.normalized, vec![1.0; 9]);
    }

    #[test]
    fn perpendicular_wall_center_ray() {
        let cfg = SensorConfig::default();
        let ego = VehicleState::default();
        let origin = ego.sensor_origin(&params());
        let x = origin.x + 5.0;
        let wall = Segment::new(Vec2::new(x, -3.0), Vec2::new(x, 3.0));
        let r = cast_rays(&ego, &params(), &ObstacleSet::new(vec![wall], vec![]), &cfg);
        assert!((r.distances[4] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn obstacle_outside_fov_is_invisible() {
        let cfg = SensorConfig::default();
        let ego = VehicleState::at(Vec2::new(3.0, 4.0), 0.4);
        let origin = ego.sensor_origin(&params());
        // Short wall straight to the left of the sensor (bearing +90°).
        let side = Vec2::from_angle(0.4 + PI / 2.0);
        let c = origin + side * 10.0;
        let along = Vec2::from_angle(0.4);
        let wall = Segment::new(c - along * 2.0, c + along * 2.0);
        let seen = cast_rays(&ego, &params(), &ObstacleSet::new(vec![wall], vec![]), &cfg);
        let empty = cast_rays(&ego, &params(), &ObstacleSet::default(), &cfg);
        assert_eq!(seen, empty);
    }

    #[test]
    fn min_reading_examples() {
        let r = SensorReading::from_distances(vec![30.0, 10.0, 20.0], 50.0);
        assert_eq!(r.normalized, vec![0.6, 0.2, 0.4]);
        assert_eq!(min_reading(&r), 0.2);
        assert_eq!(min_normalized(&[1.0; 9]), 1.0);
        assert_eq!(min_normalized(&[0.7]), 0.7);
    }

    #[test]
    fn open_grid_is_wedge_without_hits() {
        let cfg = SensorConfig::default();
        let ego = VehicleState::default();
        let r = SensorReading::from_distances(vec![cfg.max_range; 9], cfg.max_range);
        let g = rasterize_occupancy_grid(&r, &ego, &cfg);
        assert_eq!(g.count(Occupancy::Occupied), 0);
        let free = g.count(Occupancy::Free);
        assert!(free > 9 * 20, "free cells {free}");
        // Nothing behind the sensor.
        for iy in 0..cfg.grid_size {
            for ix in 0..cfg.grid_size / 2 {
                assert_eq!(g.get(ix, iy), Occupancy::Unknown);
            }
        }
    }

    #[test]
    fn grid_is_frame_invariant() {
        let cfg = SensorConfig::default();
        let r = SensorReading::from_distances(
            vec![50.0, 40.0, 12.5, 50.0, 25.0, 31.0, 50.0, 8.0, 50.0],
            cfg.max_range,
        );
        let a = rasterize_occupancy_grid(&r, &VehicleState::default(), &cfg);
        let b = rasterize_occupancy_grid(&r, &VehicleState::at(Vec2::new(5.0, 9.0), PI / 2.0), &cfg);
        assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn config_validation() {
        assert!(SensorConfig::default().validate().is_ok());
        let bad = SensorConfig {
            ray_count: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
