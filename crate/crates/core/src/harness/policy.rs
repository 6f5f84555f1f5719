use crate::algos::FrozenPolicy;
use crate::env::Observation;
use crate::error::{Error, Result};
use crate::sim::{lane_follow_control, AgentId, ControlCommand, Role, WorldState, SCRIPTED_TARGET_SPEED};

/// Label for scripted traffic in logs; excluded from reports.
pub const TRAFFIC_LABEL: &str = "traffic";

/// How a non-learning car is driven during evaluation and testing.
#[derive(Debug, Clone)]
pub enum DrivePolicy {
    /// Greedy actions from a loaded network.
    Learned(FrozenPolicy),
    /// The rule-based lane follower used for traffic.
    Scripted,
    /// Full brake, no steering, every step.
    Brake,
}

impl DrivePolicy {
    /// Special names accepted wherever a policy name is expected.
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "scripted" => Some(DrivePolicy::Scripted),
            "brake" => Some(DrivePolicy::Brake),
            _ => None,
        }
    }

    pub fn needs_observation(&self) -> bool {
        matches!(self, DrivePolicy::Learned(_))
    }

    pub fn control(&self, world: &WorldState, agent: AgentId, obs: Option<&Observation>) -> Result<ControlCommand> {
        match self {
            DrivePolicy::Learned(p) => {
                let obs = obs.ok_or_else(|| Error::protocol(format!("no observation for learned agent {agent}")))?;
                let features = p.net.encode(obs)?;
                p.act(&features)?.decode()
            }
            DrivePolicy::Scripted => {
                let i = world
                    .index_of(agent)
                    .ok_or_else(|| Error::protocol(format!("unknown agent {agent}")))?;
                Ok(lane_follow_control(world, i, SCRIPTED_TARGET_SPEED))
            }
            DrivePolicy::Brake => Ok(ControlCommand {
                steer: 0.0,
                throttle: 0.0,
                brake: 1.0,
            }),
        }
    }
}

/// A non-scripted car in an evaluation or testing episode.
#[derive(Debug, Clone)]
pub struct Participant {
    pub label: String,
    pub role: Role,
    pub policy: DrivePolicy,
}

impl Participant {
    pub fn new(label: impl Into<String>, role: Role, policy: DrivePolicy) -> Self {
        Self {
            label: label.into(),
            role,
            policy,
        }
    }
}
