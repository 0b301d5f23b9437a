//! Trajectory logs and comparison of agent runs against a reference.

mod log;
mod metrics;
mod reference;
mod report;

pub use log::{LogHeader, LogRow, TrajectoryLog, LOG_COLUMNS};
pub use metrics::{align_by_arc_length, compare_logs, velocity_and_steering_errors, AlignedPair, ErrorMetrics};
pub use reference::{reference_rollout, REFERENCE_SPEED};
pub use report::{
    build_comparison_report, load_runs, ComparisonReport, ComparisonRow, RunMeta, RunRecord, AGENT_LOG_FILE,
    REFERENCE_LOG_FILE, REPORT_COLUMNS, RUN_META_FILE,
};
