//! Arc-length alignment of two runs and the velocity/steering error metrics.

use serde::{Deserialize, Serialize};

use super::TrajectoryLog;
use crate::error::{Result, SimError};

/// Both runs resampled at one common arc-length station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedPair {
    pub station: f64,
    pub v_agent: f64,
    pub v_ref: f64,
    pub delta_agent: f64,
    pub delta_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// Velocity error in distance units per tick (`|Δv|·dt`).
    pub e_vf_mean: f64,
    pub e_vf_max: f64,
    /// Steering error in degrees.
    pub e_delta_mean: f64,
    pub e_delta_max: f64,
    /// `100·mean|Δv| / max_speed`.
    pub velocity_error_pct: f64,
    pub stations: usize,
}

fn arc_range(log: &TrajectoryLog) -> Option<(f64, f64)> {
    Some((log.rows.first()?.arc_length, log.rows.last()?.arc_length))
}

/// `(v, δ)` at arc length `s`, linear between the bracketing rows. On a
/// plateau (vehicle stopped) the first row reaching `s` wins.
fn sample_at(log: &TrajectoryLog, s: f64) -> (f64, f64) {
    let rows = &log.rows;
    let j = rows.partition_point(|r| r.arc_length < s);
    if j == 0 {
        return (rows[0].v, rows[0].delta);
    }
    if j == rows.len() {
        let r = rows.last().unwrap();
        return (r.v, r.delta);
    }
    let (a, b) = (&rows[j - 1], &rows[j]);
    if b.arc_length == s {
        return (b.v, b.delta);
    }
    let t = (s - a.arc_length) / (b.arc_length - a.arc_length);
    (a.v + t * (b.v - a.v), a.delta + t * (b.delta - a.delta))
}

pub fn align_by_arc_length(agent: &TrajectoryLog, reference: &TrajectoryLog, step: f64) -> Result<Vec<AlignedPair>> {
    if !(step > 0.0) {
        return Err(SimError::config("eval.align_step", "must be > 0"));
    }
    if agent.header.scenario != reference.header.scenario {
        return Err(SimError::Mismatch(format!(
            "agent log is for `{}`, reference for `{}`",
            agent.header.scenario, reference.header.scenario
        )));
    }
    let (Some((a0, a1)), Some((r0, r1))) = (arc_range(agent), arc_range(reference)) else {
        return Err(SimError::EmptyOverlap);
    };
    let (lo, hi) = (a0.max(r0), a1.min(r1));
    if hi < lo {
        return Err(SimError::EmptyOverlap);
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let s = lo + k as f64 * step;
            let (v_agent, delta_agent) = sample_at(agent, s);
            let (v_ref, delta_ref) = sample_at(reference, s);
            AlignedPair {
                station: s,
                v_agent,
                v_ref,
                delta_agent,
                delta_ref,
            }
        })
        .collect())
}

pub fn velocity_and_steering_errors(pairs: &[AlignedPair], dt: f64, max_speed: f64) -> Result<ErrorMetrics> {
    if pairs.is_empty() {
        return Err(SimError::EmptyOverlap);
    }
    let n = pairs.len() as f64;
    let dv: Vec<f64> = pairs.iter().map(|p| (p.v_agent - p.v_ref).abs()).collect();
    let dd: Vec<f64> = pairs
        .iter()
        .map(|p| (p.delta_agent - p.delta_ref).abs().to_degrees())
        .collect();
    let mean_dv = dv.iter().sum::<f64>() / n;
    let max = |xs: &[f64]| xs.iter().copied().fold(0.0, f64::max);
    Ok(ErrorMetrics {
        e_vf_mean: mean_dv * dt,
        e_vf_max: max(&dv) * dt,
        e_delta_mean: dd.iter().sum::<f64>() / n,
        e_delta_max: max(&dd),
        velocity_error_pct: 100.0 * mean_dv / max_speed,
        stations: pairs.len(),
    })
}

/// Align and score in one call, using the agent log's `dt`.
pub fn compare_logs(agent: &TrajectoryLog, reference: &TrajectoryLog, step: f64, max_speed: f64) -> Result<ErrorMetrics> {
    let pairs = align_by_arc_length(agent, reference, step)?;
    velocity_and_steering_errors(&pairs, agent.header.dt, max_speed)
}
