use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Result, SimError};
use crate::geometry::Vec2;
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::VehicleParams;

use super::track::{RoadPiece, TrackGeometry};

/// Heading excursion allowed for generated roads, keeping them x-monotone so
/// distant parts of the road never overlap.
const MAX_ROAD_HEADING: f64 = PI / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    StraightHighway,
    CurvedRoad,
    InnerCity,
    SeamlessGenerated,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::StraightHighway,
        ScenarioKind::CurvedRoad,
        ScenarioKind::InnerCity,
        ScenarioKind::SeamlessGenerated,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::StraightHighway => "straight_highway",
            ScenarioKind::CurvedRoad => "curved_road",
            ScenarioKind::InnerCity => "inner_city",
            ScenarioKind::SeamlessGenerated => "seamless_generated",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SimError::InvalidScenario(format!("unknown scenario kind `{s}`")))
    }
}

/// Difficulty knobs. Every kind reads the subset relevant to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub width: f64,
    /// Straight-highway length.
    pub length: f64,
    /// Number of generated pieces (arcs, seamless segments, city blocks).
    pub segment_count: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    pub min_sweep_deg: f64,
    pub max_sweep_deg: f64,
    pub straight_min: f64,
    pub straight_max: f64,
    pub block_min: f64,
    pub block_max: f64,
    pub traffic_count: usize,
    pub traffic_speed_range: [f64; 2],
    pub traffic_waypoints: usize,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            width: 12.0,
            length: 300.0,
            segment_count: 6,
            min_radius: 20.0,
            max_radius: 45.0,
            min_sweep_deg: 20.0,
            max_sweep_deg: 60.0,
            straight_min: 20.0,
            straight_max: 50.0,
            block_min: 30.0,
            block_max: 60.0,
            traffic_count: 0,
            traffic_speed_range: [4.0, 8.0],
            traffic_waypoints: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    pub params: ScenarioParams,
    pub track: TrackGeometry,
}

impl Scenario {
    pub fn traffic_count(&self) -> usize {
        self.params.traffic_count
    }

    pub fn traffic_speed_range(&self) -> [f64; 2] {
        self.params.traffic_speed_range
    }
}

fn validate(params: &ScenarioParams, vehicle: &VehicleParams, kind: ScenarioKind) -> Result<()> {
    let bad = |field: &str, why: String| Err(SimError::config(format!("scenario.{field}"), why));
    if !(params.width > vehicle.body_width) {
        return bad("width", format!("must exceed vehicle body width {}", vehicle.body_width));
    }
    if params.segment_count == 0 && kind != ScenarioKind::StraightHighway {
        return bad("segment_count", "must be >= 1".into());
    }
    let s = params.traffic_speed_range;
    if !(s[0] >= 0.0 && s[0] <= s[1]) {
        return bad("traffic_speed_range", "need 0 <= lo <= hi".into());
    }
    if params.traffic_count > 0 && params.traffic_waypoints == 0 {
        return bad("traffic_waypoints", "must be >= 1 when traffic is enabled".into());
    }
    match kind {
        ScenarioKind::StraightHighway => {
            if !(params.length > 3.0 * vehicle.body_length) {
                return bad("length", "too short for a vehicle to start and finish".into());
            }
        }
        ScenarioKind::CurvedRoad | ScenarioKind::SeamlessGenerated => {
            let min_r = 2.0 * vehicle.wheelbase;
            if !(params.min_radius >= min_r) {
                return Err(SimError::InvalidScenario(format!(
                    "curvature radius {} below 2·wheelbase = {min_r}",
                    params.min_radius
                )));
            }
            if !(params.min_radius > 0.5 * params.width) {
                return Err(SimError::InvalidScenario(format!(
                    "radius {} leaves no room for the inner wall at width {}",
                    params.min_radius, params.width
                )));
            }
            if params.max_radius < params.min_radius {
                return bad("max_radius", "must be >= min_radius".into());
            }
            if !(params.min_sweep_deg > 0.0 && params.min_sweep_deg <= params.max_sweep_deg) {
                return bad("min_sweep_deg", "need 0 < min_sweep <= max_sweep".into());
            }
            if !(params.straight_min > 0.0 && params.straight_min <= params.straight_max) {
                return bad("straight_min", "need 0 < straight_min <= straight_max".into());
            }
        }
        ScenarioKind::InnerCity => {
            if !(params.block_min >= 2.0 * params.width) {
                return bad("block_min", "city blocks must be at least twice the street width".into());
            }
            if params.block_max < params.block_min {
                return bad("block_max", "must be >= block_min".into());
            }
        }
    }
    Ok(())
}

fn uniform(rng: &mut SimRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Random arc whose sweep keeps the road heading inside ±MAX_ROAD_HEADING.
fn sample_arc(rng: &mut SimRng, params: &ScenarioParams, heading: f64, prefer_left: bool) -> RoadPiece {
    let radius = uniform(rng, params.min_radius, params.max_radius);
    let sweep = uniform(rng, params.min_sweep_deg, params.max_sweep_deg).to_radians();
    let room_left = MAX_ROAD_HEADING - heading;
    let room_right = MAX_ROAD_HEADING + heading;
    let min_sweep = params.min_sweep_deg.to_radians();
    let left = if prefer_left { room_left >= min_sweep } else { room_right < min_sweep };
    let signed = if left {
        sweep.min(room_left)
    } else {
        -sweep.min(room_right)
    };
    RoadPiece::Arc {
        radius,
        sweep: signed,
    }
}

fn finish(
    name: &str,
    kind: ScenarioKind,
    seed: u64,
    params: &ScenarioParams,
    vehicle: &VehicleParams,
    pieces: &[RoadPiece],
) -> Scenario {
    let track = TrackGeometry::from_pieces(
        Vec2::ZERO,
        0.0,
        pieces,
        params.width,
        vehicle.body_length,
        2.0 * vehicle.body_length,
    );
    Scenario {
        name: name.to_string(),
        kind,
        seed,
        params: params.clone(),
        track,
    }
}

fn heading_after(pieces: &[RoadPiece]) -> f64 {
    pieces.iter().fold(0.0, |h, p| match *p {
        RoadPiece::Straight { .. } => h,
        RoadPiece::Arc { sweep, .. } => h + sweep,
        RoadPiece::Corner { turn } => h + turn,
    })
}

/// Deterministic scenario construction from `(kind, seed, params)`.
pub fn build_scenario(
    kind: ScenarioKind,
    seed: u64,
    params: &ScenarioParams,
    vehicle: &VehicleParams,
) -> Result<Scenario> {
    validate(params, vehicle, kind)?;
    let mut rng = rng_from_seed(derive_seed(seed, &[0x7472_6163_6b]));
    let pieces = match kind {
        ScenarioKind::StraightHighway => vec![RoadPiece::Straight {
            length: params.length,
        }],
        ScenarioKind::CurvedRoad => {
            let mut pieces = vec![RoadPiece::Straight { length: 30.0 }];
            let mut left = rng.random_bool(0.5);
            for _ in 0..params.segment_count {
                let h = heading_after(&pieces);
                pieces.push(sample_arc(&mut rng, params, h, left));
                left = !left;
            }
            pieces.push(RoadPiece::Straight { length: 30.0 });
            pieces
        }
        ScenarioKind::InnerCity => {
            // Staircase route: heading alternates between east and north/south,
            // so every corner is ±90° and the route cannot cross itself.
            let up = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let mut pieces = Vec::new();
            let mut east = true;
            for i in 0..params.segment_count.max(1) {
                if i > 0 {
                    let turn = if east { up * FRAC_PI_2 } else { -up * FRAC_PI_2 };
                    pieces.push(RoadPiece::Corner { turn });
                    east = !east;
                }
                let length = uniform(&mut rng, params.block_min, params.block_max);
                pieces.push(RoadPiece::Straight { length });
            }
            pieces
        }
        ScenarioKind::SeamlessGenerated => seamless_pieces(&mut rng, params, params.segment_count),
    };
    Ok(finish(kind.as_str(), kind, seed, params, vehicle, &pieces))
}

fn seamless_pieces(rng: &mut SimRng, params: &ScenarioParams, count: usize) -> Vec<RoadPiece> {
    let mut pieces = Vec::with_capacity(count);
    for _ in 0..count {
        let h = heading_after(&pieces);
        let piece = match rng.random_range(0..3u8) {
            0 => RoadPiece::Straight {
                length: uniform(rng, params.straight_min, params.straight_max),
            },
            1 => sample_arc(rng, params, h, true),
            _ => sample_arc(rng, params, h, false),
        };
        pieces.push(piece);
    }
    pieces
}

/// Procedural road of `segment_count` C¹-joined straights and arcs.
pub fn generate_seamless(
    seed: u64,
    segment_count: usize,
    params: &ScenarioParams,
    vehicle: &VehicleParams,
) -> Result<Scenario> {
    let params = ScenarioParams {
        segment_count,
        ..params.clone()
    };
    build_scenario(ScenarioKind::SeamlessGenerated, seed, &params, vehicle)
}

/// A named scenario reference: kind + seed + parameters. This is what gets
/// persisted; geometry is always rebuilt from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default)]
    pub params: ScenarioParams,
}

impl ScenarioSpec {
    pub fn build(&self, vehicle: &VehicleParams) -> Result<Scenario> {
        let mut s = build_scenario(self.kind, self.seed, &self.params, vehicle)?;
        s.name = self.name.clone();
        Ok(s)
    }
}

/// The five comparison scenarios: three named families plus two seamless
/// presets with fixed seeds.
pub fn preset_specs() -> Vec<ScenarioSpec> {
    let base = ScenarioParams::default();
    vec![
        ScenarioSpec {
            name: "straight_highway".into(),
            kind: ScenarioKind::StraightHighway,
            seed: 1,
            params: ScenarioParams {
                traffic_count: 3,
                ..base.clone()
            },
        },
        ScenarioSpec {
            name: "curved_road".into(),
            kind: ScenarioKind::CurvedRoad,
            seed: 7,
            params: ScenarioParams {
                segment_count: 5,
                traffic_count: 2,
                ..base.clone()
            },
        },
        ScenarioSpec {
            name: "inner_city".into(),
            kind: ScenarioKind::InnerCity,
            seed: 3,
            params: ScenarioParams {
                segment_count: 5,
                width: 14.0,
                traffic_count: 2,
                traffic_speed_range: [2.0, 5.0],
                ..base.clone()
            },
        },
        ScenarioSpec {
            name: "seamless_a".into(),
            kind: ScenarioKind::SeamlessGenerated,
            seed: 101,
            params: ScenarioParams {
                segment_count: 8,
                traffic_count: 2,
                ..base.clone()
            },
        },
        ScenarioSpec {
            name: "seamless_b".into(),
            kind: ScenarioKind::SeamlessGenerated,
            seed: 202,
            params: ScenarioParams {
                segment_count: 10,
                min_radius: 15.0,
                traffic_count: 3,
                ..base
            },
        },
    ]
}

pub fn preset(name: &str) -> Option<ScenarioSpec> {
    preset_specs().into_iter().find(|s| s.name == name)
}
