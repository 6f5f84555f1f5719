//! Runs one episode with fixed policies and records its log.

use crate::env::{DrivingEnv, EpisodeConfig, EpisodeLog, EpisodeLogRecord, Observation, RewardConfig, RosterEntry};
use crate::error::Result;
use crate::sim::{AgentId, MapId, Role};

use super::config::Config;
use super::policy::{Participant, TRAFFIC_LABEL};

/// Environment settings shared by training, evaluation and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    pub dt: f64,
    pub spawn_jitter: f64,
    pub heading_jitter: f64,
    pub reward: RewardConfig,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self::from_config(&Config::default()).expect("default config is valid")
    }
}

impl EnvParams {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        Ok(Self {
            dt: cfg.get_f64("env.dt")?,
            spawn_jitter: cfg.get_f64("env.spawn_jitter")?,
            heading_jitter: cfg.get_f64("env.heading_jitter")?,
            reward: cfg.reward_config()?,
        })
    }
}

/// Roster: participants take ids `0..n` in order, scripted traffic follows.
/// Adversaries target the first autonomous car.
pub fn build_roster(roles: &[Role], observe: &[bool], scripted: usize) -> Vec<RosterEntry> {
    let victim = roles.iter().position(|&r| r == Role::Ac).map(|i| AgentId(i as u32));
    let mut roster: Vec<RosterEntry> = roles
        .iter()
        .zip(observe)
        .enumerate()
        .map(|(i, (&role, &obs))| {
            let mut e = RosterEntry::new(i as u32, role);
            e.observe = obs;
            if role == Role::Adversary {
                e.target = victim;
            }
            e
        })
        .collect();
    let n = roster.len();
    roster.extend((0..scripted).map(|k| RosterEntry::new((n + k) as u32, Role::Scripted)));
    roster
}

pub fn episode_config(map: MapId, roster: Vec<RosterEntry>, max_steps: usize, seed: u64, env: &EnvParams) -> EpisodeConfig {
    let mut c = EpisodeConfig::new(map, roster, max_steps, seed);
    c.dt = env.dt;
    c.spawn_jitter = env.spawn_jitter;
    c.heading_jitter = env.heading_jitter;
    c.reward = env.reward;
    c
}

#[derive(Debug, Clone)]
pub struct EpisodeSetup<'a> {
    pub map: MapId,
    pub participants: &'a [Participant],
    pub scripted: usize,
    pub max_steps: usize,
    pub env: &'a EnvParams,
    /// Extra `# key=value` lines written ahead of the per-agent labels.
    pub meta: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    /// Undiscounted return of each participant.
    pub returns: Vec<f64>,
    pub steps: u64,
    pub log: Option<EpisodeLog>,
}

/// Plays one episode to its end. Deterministic in `(setup, seed)`.
pub fn run_episode(setup: &EpisodeSetup<'_>, episode_id: u64, seed: u64, keep_log: bool) -> Result<EpisodeOutcome> {
    let roles: Vec<Role> = setup.participants.iter().map(|p| p.role).collect();
    let observe: Vec<bool> = setup.participants.iter().map(|p| p.policy.needs_observation()).collect();
    let roster = build_roster(&roles, &observe, setup.scripted);
    let config = episode_config(setup.map, roster.clone(), setup.max_steps, seed, setup.env);
    let (mut env, initial) = DrivingEnv::reset(config)?;

    let n = setup.participants.len();
    let mut obs: Vec<Option<Observation>> = vec![None; n];
    for (id, o) in initial {
        obs[id.0 as usize] = Some(o);
    }
    let mut returns = vec![0.0; n];
    let mut records = Vec::new();

    while !env.is_over() {
        let joint = (0..n)
            .filter(|&i| !env.is_done(AgentId(i as u32)))
            .map(|i| {
                let id = AgentId(i as u32);
                Ok((id, setup.participants[i].policy.control(env.world(), id, obs[i].as_ref())?))
            })
            .collect::<Result<Vec<_>>>()?;
        let results = env.step(&joint)?;
        let t = env.t();
        for (id, r) in results {
            let i = id.0 as usize;
            if keep_log {
                let v = &env.world().vehicle(id).expect("stepped agent exists").state;
                records.push(EpisodeLogRecord {
                    episode_id,
                    t,
                    agent_id: id,
                    role: roster[i].role,
                    x: v.position.x,
                    y: v.position.y,
                    heading: v.heading,
                    speed: r.info.speed,
                    distance_to_goal: r.info.distance_to_goal,
                    cv: r.info.cv,
                    co: r.info.co,
                    io: r.info.io,
                    reward: r.reward,
                });
            }
            if i < n {
                returns[i] += r.reward;
                obs[i] = r.observation;
            }
        }
    }

    let log = keep_log.then(|| {
        let mut meta = setup.meta.clone();
        meta.push(("episode".into(), episode_id.to_string()));
        meta.push(("seed".into(), seed.to_string()));
        meta.push(("map".into(), setup.map.as_str().into()));
        meta.push(("steps".into(), setup.max_steps.to_string()));
        for (i, e) in roster.iter().enumerate() {
            let label = setup.participants.get(i).map(|p| p.label.as_str()).unwrap_or(TRAFFIC_LABEL);
            meta.push((format!("agent.{}", e.id.0), label.to_string()));
        }
        EpisodeLog { meta, records }
    });
    Ok(EpisodeOutcome {
        returns,
        steps: env.t(),
        log,
    })
}
