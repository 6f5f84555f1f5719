//! Per-step episode log records.
//!
//! One comma-separated line per agent per step. Lines starting with `#`
//! carry episode metadata (`# key=value`) and are ignored by record parsing.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{AgentId, Role};

pub const LOG_HEADER: &str = "episode_id,t,agent_id,role,x,y,heading,F,D,CV,CO,IO,reward";

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLogRecord {
    pub episode_id: u64,
    pub t: u64,
    pub agent_id: AgentId,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub distance_to_goal: f64,
    pub cv: bool,
    pub co: bool,
    pub io: bool,
    pub reward: f64,
}

impl EpisodeLogRecord {
    pub fn write_line(&self, out: &mut String) {
        let b = |v: bool| if v { 1 } else { 0 };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.episode_id,
            self.t,
            self.agent_id.0,
            self.role.as_str(),
            self.x,
            self.y,
            self.heading,
            self.speed,
            self.distance_to_goal,
            b(self.cv),
            b(self.co),
            b(self.io),
            self.reward
        )
        .unwrap();
    }

    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let err = |m: String| Error::Parse {
            line: line_no,
            message: m,
        };
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 13 {
            return Err(err(format!("expected 13 fields, found {}", fields.len())));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|e| err(format!("field {i} '{}': {e}", fields[i])))
        };
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse::<u64>()
                .map_err(|e| err(format!("field {i} '{}': {e}", fields[i])))
        };
        let flag = |i: usize| -> Result<bool> {
            match fields[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(err(format!("field {i}: flag must be 0 or 1, got '{other}'"))),
            }
        };
        let role = match fields[3] {
            "ac" => Role::Ac,
            "adversary" => Role::Adversary,
            "scripted" => Role::Scripted,
            other => return Err(err(format!("unknown role '{other}'"))),
        };
        Ok(Self {
            episode_id: int(0)?,
            t: int(1)?,
            agent_id: AgentId(int(2)? as u32),
            role,
            x: num(4)?,
            y: num(5)?,
            heading: num(6)?,
            speed: num(7)?,
            distance_to_goal: num(8)?,
            cv: flag(9)?,
            co: flag(10)?,
            io: flag(11)?,
            reward: num(12)?,
        })
    }
}

/// A parsed episode log file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    /// `# key=value` metadata lines in file order.
    pub meta: Vec<(String, String)>,
    pub records: Vec<EpisodeLogRecord>,
}

impl EpisodeLog {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}").unwrap();
        }
        out.push_str(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            r.write_line(&mut out);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut log = EpisodeLog::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed == LOG_HEADER {
                continue;
            }
            if let Some(meta) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = meta.trim().split_once('=') {
                    log.meta.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            log.records.push(EpisodeLogRecord::parse(trimmed, line_no)?);
        }
        Ok(log)
    }
}
