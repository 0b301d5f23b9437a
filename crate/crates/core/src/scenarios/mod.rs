//! Track families, procedural road generation and random traffic.

mod build;
mod track;
mod traffic;

pub use build::{
    build_scenario, generate_seamless, preset, preset_specs, Scenario, ScenarioKind, ScenarioParams,
    ScenarioSpec,
};
pub use track::{circumradius, offset_polyline, Joint, Projection, RoadPiece, TrackGeometry};
pub use traffic::{
    ego_clearance, sample_traffic, sample_traffic_in, sample_traffic_seeded, FreeSpaceLattice, TrafficCar, TrafficSample,
    MAX_SPAWN_ATTEMPTS,
};
