//! The multi-agent driving environment: reset/step over joint actions,
//! observation rendering, action decoding and rewards.

pub mod action;
pub mod log;
pub mod observation;
pub mod reward;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use action::{decode_continuous_action, decode_discrete_action, Action, CONTINUOUS_ACTION_DIM, NUM_DISCRETE_ACTIONS};
pub use log::{EpisodeLog, EpisodeLogRecord, LOG_HEADER};
pub use observation::{render_observation, Observation, OBS_LEN, OBS_SIZE};
pub use reward::{reward_ac, reward_adv, RewardConfig};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::sim::{
    build_map, detect_events, scripted_traffic_policy, step_vehicle, AgentId, ControlCommand, MapId, Role,
    VehicleState, WorldState, DT,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub id: AgentId,
    pub role: Role,
    /// Algorithm tag of the controlling policy, informational.
    pub algorithm: Option<String>,
    /// Route name overriding the spawn slot's default route.
    pub route: Option<String>,
    /// Victim for adversary rewards. Defaults to the first autonomous car.
    pub target: Option<AgentId>,
    /// Whether to render observations for this agent.
    pub observe: bool,
}

impl RosterEntry {
    pub fn new(id: u32, role: Role) -> Self {
        Self {
            id: AgentId(id),
            role,
            algorithm: None,
            route: None,
            target: None,
            observe: role != Role::Scripted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub map: MapId,
    /// Roster order is spawn slot order.
    pub roster: Vec<RosterEntry>,
    pub max_steps: usize,
    pub seed: u64,
    pub dt: f64,
    pub reward: RewardConfig,
    /// Uniform longitudinal spawn offset range in meters.
    pub spawn_jitter: f64,
    /// Uniform heading offset range in radians.
    pub heading_jitter: f64,
}

impl EpisodeConfig {
    pub fn new(map: MapId, roster: Vec<RosterEntry>, max_steps: usize, seed: u64) -> Self {
        Self {
            map,
            roster,
            max_steps,
            seed,
            dt: DT,
            reward: RewardConfig::default(),
            spawn_jitter: 1.5,
            heading_jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::config("max steps must be positive"));
        }
        if self.roster.is_empty() {
            return Err(Error::config("roster is empty"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("dt must be positive"));
        }
        let mut ids: Vec<_> = self.roster.iter().map(|r| r.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.roster.len() {
            return Err(Error::config("duplicate agent ids in roster"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepInfo {
    pub cv: bool,
    pub co: bool,
    pub io: bool,
    /// Remaining distance to goal, meters.
    pub distance_to_goal: f64,
    /// Forward speed, m/s.
    pub speed: f64,
    pub collided_with: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Present for agents whose roster entry asks for observations.
    pub observation: Option<Observation>,
    pub reward: f64,
    /// Goal reached, step limit hit, or crashed.
    pub done: bool,
    /// Done only because the step limit was hit.
    pub truncated: bool,
    pub info: StepInfo,
}

/// One running episode. Owns its world; not shared between threads.
#[derive(Debug, Clone)]
pub struct DrivingEnv {
    config: EpisodeConfig,
    world: WorldState,
    /// Parallel to `world.vehicles`.
    done: Vec<bool>,
}

impl DrivingEnv {
    /// Places the roster on the map's spawn slots and returns initial observations.
    pub fn reset(config: EpisodeConfig) -> Result<(Self, Vec<(AgentId, Observation)>)> {
        config.validate()?;
        let map = Arc::new(build_map(config.map));
        if config.roster.len() > map.spawns.len() {
            return Err(Error::config(format!(
                "roster of {} agents exceeds the {} spawn slots of {}",
                config.roster.len(),
                map.spawns.len(),
                config.map
            )));
        }
        let mut world = WorldState::new(Arc::clone(&map), config.seed);
        for (slot, entry) in map.spawns.iter().zip(&config.roster) {
            let route = match &entry.route {
                Some(name) => map
                    .route_index(name)
                    .ok_or_else(|| Error::config(format!("unknown route '{name}' on {}", config.map)))?,
                None => slot.route,
            };
            let along: f64 = if config.spawn_jitter > 0.0 {
                world.rng.random_range(-config.spawn_jitter..=config.spawn_jitter)
            } else {
                0.0
            };
            let turn: f64 = if config.heading_jitter > 0.0 {
                world.rng.random_range(-config.heading_jitter..=config.heading_jitter)
            } else {
                0.0
            };
            let position = slot.pose.position + Vec2::from_angle(slot.pose.heading) * along;
            let state = VehicleState::new(position, slot.pose.heading + turn, route, entry.role);
            world.add_vehicle(entry.id, state);
        }
        detect_events(&mut world);
        let n = world.vehicles.len();
        let env = Self {
            config,
            world,
            done: vec![false; n],
        };
        let obs = env
            .config
            .roster
            .iter()
            .filter(|r| r.observe)
            .map(|r| (r.id, render_observation(&env.world, r.id)))
            .collect();
        Ok((env, obs))
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    /// Mutable world access for constructing test situations.
    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn t(&self) -> u64 {
        self.world.t
    }

    pub fn is_done(&self, agent: AgentId) -> bool {
        self.world.index_of(agent).map(|i| self.done[i]).unwrap_or(true)
    }

    /// Non-scripted agents still driving.
    pub fn live_agents(&self) -> Vec<AgentId> {
        self.world
            .vehicles
            .iter()
            .zip(&self.done)
            .filter(|(v, d)| !**d && v.state.role != Role::Scripted)
            .map(|(v, _)| v.id)
            .collect()
    }

    /// True once every non-scripted agent has finished or the step limit is hit.
    pub fn is_over(&self) -> bool {
        if self.world.t as usize >= self.config.max_steps {
            return true;
        }
        let controlled = self.world.vehicles.iter().any(|v| v.state.role != Role::Scripted);
        if controlled {
            self.live_agents().is_empty()
        } else {
            self.done.iter().all(|&d| d)
        }
    }

    fn victim_of(&self, entry: &RosterEntry) -> Option<AgentId> {
        entry
            .target
            .or_else(|| self.config.roster.iter().find(|r| r.role == Role::Ac).map(|r| r.id))
    }

    /// Advances every vehicle by one timestep. `joint` must hold exactly one
    /// command per live non-scripted agent; scripted agents drive themselves.
    pub fn step(&mut self, joint: &[(AgentId, ControlCommand)]) -> Result<Vec<(AgentId, StepResult)>> {
        if self.is_over() {
            return Err(Error::protocol("step called on a finished episode"));
        }
        let n = self.world.vehicles.len();
        let mut controls: Vec<Option<ControlCommand>> = vec![None; n];
        for &(id, cmd) in joint {
            let i = self
                .world
                .index_of(id)
                .ok_or_else(|| Error::protocol(format!("action for unknown agent {id}")))?;
            if self.done[i] {
                return Err(Error::protocol(format!("action for finished agent {id}")));
            }
            if self.world.vehicles[i].state.role == Role::Scripted {
                return Err(Error::protocol(format!("action for scripted agent {id}")));
            }
            if controls[i].replace(cmd).is_some() {
                return Err(Error::protocol(format!("two actions for agent {id}")));
            }
        }
        for i in 0..n {
            let v = &self.world.vehicles[i];
            if self.done[i] {
                continue;
            }
            if v.state.role == Role::Scripted {
                controls[i] = Some(scripted_traffic_policy(&self.world, v.id));
            } else if controls[i].is_none() {
                return Err(Error::protocol(format!("missing action for agent {}", v.id)));
            }
        }

        let prev = self.world.clone();
        let dt = self.config.dt;
        for (i, v) in self.world.vehicles.iter_mut().enumerate() {
            if let Some(cmd) = controls[i] {
                v.state = step_vehicle(&v.state, cmd, dt);
            }
        }
        self.world.t += 1;
        detect_events(&mut self.world);

        let limit = self.world.t as usize >= self.config.max_steps;
        let mut results = Vec::new();
        let mut finished = Vec::new();
        for (i, entry) in self.config.roster.iter().enumerate() {
            if self.done[i] {
                continue;
            }
            let id = entry.id;
            let ev = self.world.events[i];
            let reward = match entry.role {
                Role::Adversary => match self.victim_of(entry) {
                    Some(victim) => reward_adv(&prev, &self.world, id, victim, &self.config.reward),
                    None => reward_ac(&prev, &self.world, id, &self.config.reward),
                },
                _ => reward_ac(&prev, &self.world, id, &self.config.reward),
            };
            let done = ev.reached_goal() || ev.crashed() || limit;
            let observation = entry.observe.then(|| render_observation(&self.world, id));
            results.push((
                id,
                StepResult {
                    observation,
                    reward,
                    done,
                    truncated: done && !(ev.reached_goal() || ev.crashed()),
                    info: StepInfo {
                        cv: ev.cv,
                        co: ev.co,
                        io: ev.io,
                        distance_to_goal: ev.distance_to_goal,
                        speed: self.world.vehicles[i].state.speed,
                        collided_with: ev.collided_with,
                    },
                },
            ));
            if done {
                finished.push(i);
            }
        }
        for i in finished {
            self.done[i] = true;
            if !limit {
                let v = &mut self.world.vehicles[i];
                v.active = false;
                v.state.speed = 0.0;
                let ev = &mut self.world.events[i];
                ev.cv = false;
                ev.co = false;
                ev.io = false;
                ev.collided_with = None;
            }
        }
        Ok(results)
    }
}
