//! Driving performance metrics from episode logs: per-step fractions of
//! collision and offroad flags, speed series, grouped aggregates and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::env::EpisodeLog;
use crate::error::{Error, Result};
use crate::harness::TRAFFIC_LABEL;
use crate::sim::AgentId;

pub const METRICS_HEADER: &str = "policy,scenario,map,episodes,cc,co,os,mean_speed";
pub const SPEED_HEADER: &str = "t,mean_speed";

/// Denominator of the per-step fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalize {
    /// Steps the agent actually drove.
    #[default]
    Executed,
    /// The configured episode length, from the log's `steps` metadata.
    Configured,
}

impl std::str::FromStr for Normalize {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "executed" => Ok(Normalize::Executed),
            "configured" => Ok(Normalize::Configured),
            other => Err(Error::config(format!("metrics.normalize = '{other}' is not executed or configured"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub agent: AgentId,
    pub policy: String,
    pub scenario: String,
    pub map: String,
    pub seed: u64,
    pub cc: f64,
    pub co: f64,
    pub os: f64,
    /// Forward speed per executed step, in time order.
    pub speeds: Vec<f64>,
    pub steps: usize,
}

impl EpisodeMetrics {
    pub fn mean_speed(&self) -> f64 {
        if self.speeds.is_empty() {
            0.0
        } else {
            self.speeds.iter().sum::<f64>() / self.speeds.len() as f64
        }
    }

    /// CC + CO + OS.
    pub fn failure_sum(&self) -> f64 {
        self.cc + self.co + self.os
    }
}

/// Metrics for every non-traffic agent in the log, in agent id order.
/// Duplicate `(agent, t)` records count once.
pub fn compute_episode_metrics(log: &EpisodeLog, normalize: Normalize) -> Result<Vec<EpisodeMetrics>> {
    let meta = |k: &str| log.meta(k).unwrap_or("").to_string();
    let seed: u64 = match log.meta("seed") {
        Some(s) => s.parse().map_err(|_| Error::config(format!("bad seed metadata '{s}'")))?,
        None => log.records.first().map(|r| r.episode_id).unwrap_or(0),
    };
    let configured: Option<usize> = log.meta("steps").and_then(|s| s.parse().ok());
    let mut per_agent: BTreeMap<AgentId, BTreeMap<u64, (bool, bool, bool, f64)>> = BTreeMap::new();
    for r in &log.records {
        per_agent.entry(r.agent_id).or_default().insert(r.t, (r.cv, r.co, r.io, r.speed));
    }
    let mut out = Vec::new();
    for (agent, steps) in per_agent {
        let label = log.meta(&format!("agent.{}", agent.0)).unwrap_or("unknown").to_string();
        if label == TRAFFIC_LABEL {
            continue;
        }
        let n = steps.len();
        let denom = match normalize {
            Normalize::Executed => n,
            Normalize::Configured => configured.unwrap_or(n).max(n),
        };
        let frac = |count: usize| if denom == 0 { 0.0 } else { count as f64 / denom as f64 };
        let cc = steps.values().filter(|s| s.0).count();
        let co = steps.values().filter(|s| s.1).count();
        let os = steps.values().filter(|s| s.2).count();
        out.push(EpisodeMetrics {
            agent,
            policy: label,
            scenario: meta("scenario"),
            map: meta("map"),
            seed,
            cc: frac(cc),
            co: frac(co),
            os: frac(os),
            speeds: steps.values().map(|s| s.3).collect(),
            steps: n,
        });
    }
    Ok(out)
}

/// Parses a log file and computes its metrics. Parse errors carry the file name and line.
pub fn metrics_from_file(path: &Path, normalize: Normalize) -> Result<Vec<EpisodeMetrics>> {
    let text = std::fs::read_to_string(path)?;
    let log = EpisodeLog::parse(&text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        e => e,
    })?;
    compute_episode_metrics(&log, normalize)
}

/// Every `.csv` file below `dir`, sorted by path.
pub fn find_logs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "csv") {
                files.push(p);
            }
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub policy: String,
    pub scenario: String,
    pub map: String,
    pub episodes: usize,
    pub cc: f64,
    pub co: f64,
    pub os: f64,
    /// Mean over episodes of each episode's mean speed.
    pub mean_speed: f64,
    /// Mean speed at each step index over the episodes that reached it.
    pub speed_curve: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AggregateReport {
    pub groups: Vec<GroupReport>,
}

/// Means per `(policy, scenario, map)` group. Episodes are put in canonical
/// order before summing, so the result does not depend on input order.
pub fn aggregate(metrics: &[EpisodeMetrics]) -> AggregateReport {
    if metrics.is_empty() {
        log::warn!("no episodes to aggregate; the report is empty");
        return AggregateReport::default();
    }
    let mut groups: BTreeMap<(String, String, String), Vec<&EpisodeMetrics>> = BTreeMap::new();
    for m in metrics {
        groups.entry((m.policy.clone(), m.scenario.clone(), m.map.clone())).or_default().push(m);
    }
    let mut report = AggregateReport::default();
    for ((policy, scenario, map), mut eps) in groups {
        eps.sort_by(|a, b| {
            (a.seed, a.agent, a.steps)
                .cmp(&(b.seed, b.agent, b.steps))
                .then_with(|| a.cc.total_cmp(&b.cc))
                .then_with(|| a.co.total_cmp(&b.co))
                .then_with(|| a.os.total_cmp(&b.os))
        });
        let n = eps.len() as f64;
        let mean = |f: &dyn Fn(&EpisodeMetrics) -> f64| eps.iter().map(|m| f(m)).sum::<f64>() / n;
        let len = eps.iter().map(|m| m.speeds.len()).max().unwrap_or(0);
        let speed_curve = (0..len)
            .map(|t| {
                let vals: Vec<f64> = eps.iter().filter_map(|m| m.speeds.get(t).copied()).collect();
                vals.iter().sum::<f64>() / vals.len() as f64
            })
            .collect();
        report.groups.push(GroupReport {
            policy,
            scenario,
            map,
            episodes: eps.len(),
            cc: mean(&|m| m.cc),
            co: mean(&|m| m.co),
            os: mean(&|m| m.os),
            mean_speed: mean(&|m| m.mean_speed()),
            speed_curve,
        });
    }
    report
}

/// Six significant digits, plain notation where it fits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-4..=9).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

fn group_file_stem(g: &GroupReport) -> String {
    let clean = |s: &str| s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect::<String>();
    format!("speed_{}_s{}_{}", clean(&g.policy), clean(&g.scenario), clean(&g.map))
}

pub fn metrics_table(report: &AggregateReport) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for g in &report.groups {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            g.policy,
            g.scenario,
            g.map,
            g.episodes,
            fmt_sig(g.cc),
            fmt_sig(g.co),
            fmt_sig(g.os),
            fmt_sig(g.mean_speed)
        )
        .unwrap();
    }
    out
}

pub fn speed_series(g: &GroupReport) -> String {
    let mut out = String::from(SPEED_HEADER);
    out.push('\n');
    for (t, v) in g.speed_curve.iter().enumerate() {
        writeln!(out, "{},{}", t + 1, fmt_sig(*v)).unwrap();
    }
    out
}

/// Writes `metrics.csv`, one speed series per group and `summary.json` into `dir`.
pub fn emit_report(report: &AggregateReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let table = dir.join("metrics.csv");
    std::fs::write(&table, metrics_table(report))?;
    written.push(table);
    for g in &report.groups {
        let p = dir.join(format!("{}.csv", group_file_stem(g)));
        std::fs::write(&p, speed_series(g))?;
        written.push(p);
    }
    let summary = dir.join("summary.json");
    std::fs::write(&summary, serde_json::to_string_pretty(report)? + "\n")?;
    written.push(summary);
    Ok(written)
}

/// Parses a metrics table back into `(policy, scenario, map, episodes, [cc, co, os, mean_speed])`.
pub fn parse_metrics_table(text: &str) -> Result<Vec<(String, String, String, usize, [f64; 4])>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != METRICS_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    message: "unexpected metrics header".into(),
                });
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: &str| Error::Parse {
            line: i + 1,
            message: m.to_string(),
        };
        if f.len() != 8 {
            return Err(bad("expected 8 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        rows.push((
            f[0].to_string(),
            f[1].to_string(),
            f[2].to_string(),
            f[3].parse().map_err(|_| bad("bad episode count"))?,
            [num(f[4])?, num(f[5])?, num(f[6])?, num(f[7])?],
        ));
    }
    Ok(rows)
}

/// Reads every log below `input`, aggregates and writes the report to `out`.
pub fn report_dir(input: &Path, out: &Path, normalize: Normalize) -> Result<AggregateReport> {
    let files = find_logs(input)?;
    if files.is_empty() {
        return Err(Error::config(format!("no episode logs under {}", input.display())));
    }
    let per_file = crate::par::map(&files, |f| metrics_from_file(f, normalize));
    let mut all = Vec::new();
    for m in per_file {
        all.extend(m?);
    }
    let report = aggregate(&all);
    emit_report(&report, out)?;
    Ok(report)
}

/// Percentile bootstrap confidence interval of the mean.
pub fn bootstrap_mean_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples.max(1))
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let idx = |q: f64| ((q * (means.len() - 1) as f64).round() as usize).min(means.len() - 1);
    (means[idx(alpha)], means[idx(1.0 - alpha)])
}
