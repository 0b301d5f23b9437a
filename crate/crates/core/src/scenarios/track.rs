use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, Segment, Vec2};
use crate::sim::VehicleState;

/// Maximum angle subtended by one polyline chord when sampling arcs.
const ARC_SAMPLE_STEP: f64 = 3.0 * std::f64::consts::PI / 180.0;

/// Analytic road primitive. Arcs carry a signed sweep: positive turns left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RoadPiece {
    Straight { length: f64 },
    Arc { radius: f64, sweep: f64 },
    /// Zero-length heading change (rectilinear street corners).
    Corner { turn: f64 },
}

/// Tangent-direction information at the boundary between two pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub position: Vec2,
    pub end_tangent: f64,
    pub start_tangent: f64,
}

impl Joint {
    pub fn tangent_mismatch(&self) -> f64 {
        normalize_angle(self.start_tangent - self.end_tangent).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackGeometry {
    pub centerline: Vec<Vec2>,
    /// Cumulative arc length at each centerline vertex.
    pub stations: Vec<f64>,
    pub width: f64,
    pub walls: Vec<Segment>,
    pub left_wall: Vec<Vec2>,
    pub right_wall: Vec<Vec2>,
    pub start_pose: VehicleState,
    /// Centerline station of the start pose.
    pub start_station: f64,
    /// Distance along the centerline from the start pose to the finish line.
    pub finish_arc_length: f64,
    pub pieces: Vec<RoadPiece>,
    pub joints: Vec<Joint>,
}

/// Result of projecting a point onto the centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub station: f64,
    pub lateral: f64,
    pub segment: usize,
    pub distance: f64,
}

impl TrackGeometry {
    /// Build from analytic pieces starting at `origin` with `heading`.
    /// `start_offset` places the ego rear axle that far down the road;
    /// `finish_margin` is kept clear before the far end.
    pub fn from_pieces(
        origin: Vec2,
        heading: f64,
        pieces: &[RoadPiece],
        width: f64,
        start_offset: f64,
        finish_margin: f64,
    ) -> Self {
        let mut points = vec![origin];
        let mut joints = Vec::new();
        let mut pos = origin;
        let mut h = heading;
        for (i, piece) in pieces.iter().enumerate() {
            let end_tangent = match *piece {
                RoadPiece::Straight { length } => {
                    pos = pos + Vec2::from_angle(h) * length;
                    points.push(pos);
                    h
                }
                RoadPiece::Arc { radius, sweep } => {
                    let side = sweep.signum();
                    let center = pos + Vec2::from_angle(h).perp() * (radius * side);
                    let start_radial = (pos - center).angle();
                    let n = (sweep.abs() / ARC_SAMPLE_STEP).ceil().max(1.0) as usize;
                    for k in 1..=n {
                        let a = start_radial + sweep * k as f64 / n as f64;
                        points.push(center + Vec2::from_angle(a) * radius);
                    }
                    pos = *points.last().unwrap();
                    h = normalize_angle(h + sweep);
                    // Tangent recomputed from the circle geometry at the end point.
                    ((pos - center).perp() * side).angle()
                }
                RoadPiece::Corner { turn } => {
                    h = normalize_angle(h + turn);
                    h - turn
                }
            };
            if i + 1 < pieces.len() {
                joints.push(Joint {
                    position: pos,
                    end_tangent,
                    start_tangent: h,
                });
            }
        }
        let mut track = Self::from_polyline(points, width, start_offset, finish_margin);
        track.pieces = pieces.to_vec();
        track.joints = joints;
        track
    }

    pub fn from_polyline(
        mut centerline: Vec<Vec2>,
        width: f64,
        start_offset: f64,
        finish_margin: f64,
    ) -> Self {
        centerline.dedup_by(|a, b| a.distance(*b) < 1e-12);
        assert!(centerline.len() >= 2, "centerline needs at least two points");
        let mut stations = Vec::with_capacity(centerline.len());
        let mut acc = 0.0;
        stations.push(0.0);
        for w in centerline.windows(2) {
            acc += w[0].distance(w[1]);
            stations.push(acc);
        }
        let half = 0.5 * width;
        let left_wall = offset_polyline(&centerline, half);
        let right_wall = offset_polyline(&centerline, -half);
        let mut walls: Vec<Segment> = Vec::new();
        for side in [&left_wall, &right_wall] {
            walls.extend(side.windows(2).map(|w| Segment::new(w[0], w[1])));
        }
        walls.push(Segment::new(left_wall[0], right_wall[0]));
        walls.push(Segment::new(
            *left_wall.last().unwrap(),
            *right_wall.last().unwrap(),
        ));

        let mut track = Self {
            centerline,
            stations,
            width,
            walls,
            left_wall,
            right_wall,
            start_pose: VehicleState::default(),
            start_station: 0.0,
            finish_arc_length: 0.0,
            pieces: Vec::new(),
            joints: Vec::new(),
        };
        let (pos, heading) = track.point_at(start_offset);
        track.start_pose = VehicleState::at(pos, heading);
        track.start_station = start_offset;
        track.finish_arc_length = (track.total_length() - finish_margin - start_offset).max(0.0);
        track
    }

    pub fn total_length(&self) -> f64 {
        *self.stations.last().unwrap()
    }

    /// Position and heading at centerline station `s` (clamped to the track).
    pub fn point_at(&self, s: f64) -> (Vec2, f64) {
        let s = s.clamp(0.0, self.total_length());
        let i = match self.stations.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => i.min(self.centerline.len() - 2),
            Err(i) => (i - 1).min(self.centerline.len() - 2),
        };
        let a = self.centerline[i];
        let b = self.centerline[i + 1];
        let len = self.stations[i + 1] - self.stations[i];
        let t = if len > 0.0 { (s - self.stations[i]) / len } else { 0.0 };
        (a + (b - a) * t, (b - a).angle())
    }

    fn project_on(&self, p: Vec2, i: usize) -> Projection {
        let a = self.centerline[i];
        let b = self.centerline[i + 1];
        let d = b - a;
        let len2 = d.dot(d);
        let t = if len2 > 0.0 {
            ((p - a).dot(d) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let foot = a + d * t;
        let rel = p - foot;
        let dist = rel.norm();
        let lateral = if len2 > 0.0 {
            d.normalized().cross(p - a)
        } else {
            0.0
        };
        Projection {
            station: self.stations[i] + t * len2.sqrt(),
            lateral,
            segment: i,
            distance: dist,
        }
    }

    /// Nearest-point projection over the whole centerline.
    pub fn project(&self, p: Vec2) -> Projection {
        (0..self.centerline.len() - 1)
            .map(|i| self.project_on(p, i))
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .unwrap()
    }

    /// Projection restricted to the segments from `hint - 4` to `hint + 12`.
    pub fn project_near(&self, p: Vec2, hint: usize) -> Projection {
        let n = self.centerline.len() - 1;
        let lo = hint.saturating_sub(4);
        let hi = (hint + 12).min(n);
        (lo..hi)
            .map(|i| self.project_on(p, i))
            .min_by(|a, b| a.distance.total_cmp(&b.distance))
            .unwrap()
    }
}

/// Offset a polyline by `d` along its left normal, with mitred joints so every
/// offset segment stays exactly `|d|` from its source segment.
pub fn offset_polyline(points: &[Vec2], d: f64) -> Vec<Vec2> {
    let n = points.len();
    let normals: Vec<Vec2> = points
        .windows(2)
        .map(|w| (w[1] - w[0]).normalized().perp())
        .collect();
    (0..n)
        .map(|i| {
            if i == 0 {
                points[0] + normals[0] * d
            } else if i == n - 1 {
                points[i] + normals[n - 2] * d
            } else {
                let a = normals[i - 1];
                let b = normals[i];
                let bis = (a + b).normalized();
                points[i] + bis * (d / bis.dot(a))
            }
        })
        .collect()
}

/// Radius of the circle through three points (infinite when collinear).
pub fn circumradius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let area2 = (b - a).cross(c - a).abs();
    if area2 == 0.0 {
        return f64::INFINITY;
    }
    a.distance(b) * b.distance(c) * c.distance(a) / (2.0 * area2)
}
