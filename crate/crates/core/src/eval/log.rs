//! Trajectory logs as CSV: `#`-prefixed metadata lines, then the fixed column
//! header `tick,time,x,y,heading,v,delta,action,reward,arc_length`.
//!
//! Floats use Rust's shortest round-trip formatting, so a log written and
//! read back is bit-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::sim::{ControlInput, VehicleState};

pub const LOG_COLUMNS: &str = "tick,time,x,y,heading,v,delta,action,reward,arc_length";
const LOG_MAGIC: &str = "# drivesim trajectory v1";

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub scenario: String,
    pub seed: u64,
    pub agent: String,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub tick: u64,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub delta: f64,
    /// Control applied on the tick that produced this row; `None` for the
    /// initial state.
    pub action: Option<ControlInput>,
    pub reward: f64,
    pub arc_length: f64,
}

impl LogRow {
    pub fn from_state(tick: u64, dt: f64, s: &VehicleState, action: Option<ControlInput>, reward: f64, arc_length: f64) -> Self {
        Self {
            tick,
            time: tick as f64 * dt,
            x: s.x,
            y: s.y,
            heading: s.heading,
            v: s.speed,
            delta: s.steering,
            action,
            reward,
            arc_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub header: LogHeader,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn new(header: LogHeader) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    /// Append a row, enforcing strictly increasing ticks and non-decreasing
    /// arc length.
    pub fn push(&mut self, row: LogRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.tick <= last.tick {
                return Err(SimError::Format(format!("tick {} after {}", row.tick, last.tick)));
            }
            if row.arc_length < last.arc_length {
                return Err(SimError::Format(format!(
                    "arc length decreased at tick {}",
                    row.tick
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Controls applied after the initial row, in tick order.
    pub fn controls(&self) -> Vec<ControlInput> {
        self.rows.iter().filter_map(|r| r.action).collect()
    }

    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut out = String::new();
        let _ = writeln!(out, "{LOG_MAGIC}");
        let _ = writeln!(out, "# scenario={}", h.scenario);
        let _ = writeln!(out, "# seed={}", h.seed);
        let _ = writeln!(out, "# agent={}", h.agent);
        let _ = writeln!(out, "# dt={}", h.dt);
        let _ = writeln!(out, "{LOG_COLUMNS}");
        for r in &self.rows {
            let action = r.action.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.tick, r.time, r.x, r.y, r.heading, r.v, r.delta, action, r.reward, r.arc_length
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(LOG_MAGIC) {
            return Err(SimError::Format("missing trajectory log magic line".into()));
        }
        let mut meta = std::collections::HashMap::new();
        let mut saw_columns = false;
        for line in lines.by_ref() {
            if let Some(kv) = line.strip_prefix("# ") {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| SimError::Format(format!("bad metadata line `{line}`")))?;
                meta.insert(k.to_string(), v.to_string());
            } else if line == LOG_COLUMNS {
                saw_columns = true;
                break;
            } else {
                return Err(SimError::Format(format!("unexpected line before header: `{line}`")));
            }
        }
        if !saw_columns {
            return Err(SimError::Format("missing column header".into()));
        }
        let get = |k: &str| {
            meta.get(k)
                .cloned()
                .ok_or_else(|| SimError::Format(format!("missing metadata `{k}`")))
        };
        let header = LogHeader {
            scenario: get("scenario")?,
            seed: parse(&get("seed")?, "seed")?,
            agent: get("agent")?,
            dt: parse(&get("dt")?, "dt")?,
        };
        let mut log = TrajectoryLog::new(header);
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(SimError::Format(format!("row {}: expected 10 fields, got {}", n + 1, f.len())));
            }
            let action = if f[7].is_empty() {
                None
            } else {
                Some(f[7].parse::<ControlInput>()?)
            };
            log.push(LogRow {
                tick: parse(f[0], "tick")?,
                time: parse(f[1], "time")?,
                x: parse(f[2], "x")?,
                y: parse(f[3], "y")?,
                heading: parse(f[4], "heading")?,
                v: parse(f[5], "v")?,
                delta: parse(f[6], "delta")?,
                action,
                reward: parse(f[8], "reward")?,
                arc_length: parse(f[9], "arc_length")?,
            })?;
        }
        Ok(log)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| with_path(e, path))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path).map_err(|e| with_path(e, path))?)
    }
}

fn with_path(e: std::io::Error, path: &Path) -> std::io::Error {
    std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))
}

fn parse<T: std::str::FromStr>(s: &str, field: &str) -> Result<T> {
    s.parse()
        .map_err(|_| SimError::Format(format!("field `{field}`: cannot parse `{s}`")))
}
