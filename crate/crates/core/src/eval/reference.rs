use crate::episode::{rollout, CenterlineDriver, Rollout, RolloutLimits};
use crate::sim::{Environment, TickConfig};

/// Cruise speed of the scripted reference driver.
pub const REFERENCE_SPEED: f64 = 12.0;

/// Scripted lane-following run, used as the reference when no recorded
/// human drive is available.
pub fn reference_rollout(env: &Environment, tick: TickConfig, max_ticks: u64) -> Rollout {
    rollout(
        env.world(tick),
        &mut CenterlineDriver::new(REFERENCE_SPEED.min(env.vehicle.max_speed)),
        RolloutLimits {
            max_ticks,
            stall_ticks: None,
        },
        "reference",
    )
}
