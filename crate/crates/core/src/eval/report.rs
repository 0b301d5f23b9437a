//! Cross-agent comparison table. Built only from persisted run records so
//! it can be regenerated byte-for-byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{compare_logs, ErrorMetrics, TrajectoryLog};
use crate::error::{Result, SimError};

pub const RUN_META_FILE: &str = "run.json";
pub const AGENT_LOG_FILE: &str = "agent.csv";
pub const REFERENCE_LOG_FILE: &str = "reference.csv";

/// Metadata persisted alongside a run's logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub agent: String,
    pub scenario: String,
    pub training_seconds: f64,
    /// Generation or episode at which the best result was first reached.
    pub best_at: Option<u64>,
    pub max_speed: f64,
    pub align_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub agent_log: TrajectoryLog,
    pub reference_log: Option<TrajectoryLog>,
}

impl RunRecord {
    pub fn metrics(&self) -> Result<Option<ErrorMetrics>> {
        self.reference_log
            .as_ref()
            .map(|r| compare_logs(&self.agent_log, r, self.meta.align_step, self.meta.max_speed))
            .transpose()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let meta = serde_json::to_string_pretty(&self.meta).map_err(|e| SimError::Format(e.to_string()))?;
        std::fs::write(dir.join(RUN_META_FILE), meta + "\n")?;
        self.agent_log.save(&dir.join(AGENT_LOG_FILE))?;
        if let Some(r) = &self.reference_log {
            r.save(&dir.join(REFERENCE_LOG_FILE))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: RunMeta = serde_json::from_str(&std::fs::read_to_string(dir.join(RUN_META_FILE))?)
            .map_err(|e| SimError::Format(format!("{}: {e}", dir.join(RUN_META_FILE).display())))?;
        let reference = dir.join(REFERENCE_LOG_FILE);
        Ok(Self {
            meta,
            agent_log: TrajectoryLog::load(&dir.join(AGENT_LOG_FILE))?,
            reference_log: if reference.exists() {
                Some(TrajectoryLog::load(&reference)?)
            } else {
                None
            },
        })
    }
}

/// Every `run.json`-bearing directory under `root`, sorted by path.
pub fn load_runs(root: &Path) -> Result<Vec<RunRecord>> {
    let mut dirs = Vec::new();
    collect_run_dirs(root, &mut dirs)?;
    dirs.sort();
    dirs.iter().map(|d| RunRecord::load(d)).collect()
}

fn collect_run_dirs(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> Result<()> {
    if dir.join(RUN_META_FILE).is_file() {
        out.push(dir.to_path_buf());
    }
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_run_dirs(&p, out)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub agent: String,
    pub scenario: String,
    /// False when no run exists for this pair; all other fields are then empty.
    pub present: bool,
    pub velocity_error_pct: Option<f64>,
    pub e_vf_mean: Option<f64>,
    pub e_delta_mean: Option<f64>,
    pub training_seconds: Option<f64>,
    pub best_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

pub const REPORT_COLUMNS: &str = "agent,scenario,present,velocity_error_pct,e_vf_mean,e_delta_mean,training_seconds,best_at";

/// One row per (agent, scenario) in the cross product of the names seen in
/// `runs`, sorted. Pairs without a run are flagged absent.
pub fn build_comparison_report(runs: &[RunRecord]) -> Result<ComparisonReport> {
    let mut agents: Vec<&str> = runs.iter().map(|r| r.meta.agent.as_str()).collect();
    let mut scenarios: Vec<&str> = runs.iter().map(|r| r.meta.scenario.as_str()).collect();
    agents.sort_unstable();
    agents.dedup();
    scenarios.sort_unstable();
    scenarios.dedup();
    let mut rows = Vec::with_capacity(agents.len() * scenarios.len());
    for a in &agents {
        for s in &scenarios {
            let run = runs.iter().find(|r| r.meta.agent == *a && r.meta.scenario == *s);
            let row = match run {
                None => ComparisonRow {
                    agent: a.to_string(),
                    scenario: s.to_string(),
                    present: false,
                    velocity_error_pct: None,
                    e_vf_mean: None,
                    e_delta_mean: None,
                    training_seconds: None,
                    best_at: None,
                },
                Some(r) => {
                    let m = r.metrics()?;
                    ComparisonRow {
                        agent: a.to_string(),
                        scenario: s.to_string(),
                        present: true,
                        velocity_error_pct: m.map(|m| m.velocity_error_pct),
                        e_vf_mean: m.map(|m| m.e_vf_mean),
                        e_delta_mean: m.map(|m| m.e_delta_mean),
                        training_seconds: Some(r.meta.training_seconds),
                        best_at: r.meta.best_at,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(ComparisonReport { rows })
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_else(|| "-".into())
}

impl ComparisonReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_COLUMNS}\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.agent,
                r.scenario,
                r.present,
                opt(r.velocity_error_pct),
                opt(r.e_vf_mean),
                opt(r.e_delta_mean),
                opt(r.training_seconds),
                r.best_at.map(|b| b.to_string()).unwrap_or_default()
            );
        }
        out
    }

    pub fn to_table(&self) -> String {
        let header = ["agent", "scenario", "vel_err_%", "e_vf_ppu", "e_delta_deg", "train_time_s", "best_at"];
        let body: Vec<[String; 7]> = self
            .rows
            .iter()
            .map(|r| {
                if !r.present {
                    return [
                        r.agent.clone(),
                        r.scenario.clone(),
                        "absent".into(),
                        "-".into(),
                        "-".into(),
                        "-".into(),
                        "-".into(),
                    ];
                }
                [
                    r.agent.clone(),
                    r.scenario.clone(),
                    cell(r.velocity_error_pct, 3),
                    cell(r.e_vf_mean, 4),
                    cell(r.e_delta_mean, 3),
                    cell(r.training_seconds, 2),
                    r.best_at.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..7)
            .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
            .collect();
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
                + "\n"
        };
        let mut out = line(header.to_vec());
        out += &line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect());
        for r in &body {
            out += &line(r.iter().map(|s| s.as_str()).collect());
        }
        out
    }
}
