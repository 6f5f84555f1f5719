use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AlgoTag {
    Ppo,
    A2c,
    A3c,
    Impala,
    Dqn,
    Ddpg,
    Td3,
}

impl AlgoTag {
    pub const ALL: [AlgoTag; 7] = [
        AlgoTag::Ppo,
        AlgoTag::A2c,
        AlgoTag::A3c,
        AlgoTag::Impala,
        AlgoTag::Dqn,
        AlgoTag::Ddpg,
        AlgoTag::Td3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AlgoTag::Ppo => "PPO",
            AlgoTag::A2c => "A2C",
            AlgoTag::A3c => "A3C",
            AlgoTag::Impala => "IMPALA",
            AlgoTag::Dqn => "DQN",
            AlgoTag::Ddpg => "DDPG",
            AlgoTag::Td3 => "TD3",
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, AlgoTag::Ddpg | AlgoTag::Td3)
    }

    pub fn is_policy_gradient(&self) -> bool {
        matches!(self, AlgoTag::Ppo | AlgoTag::A2c | AlgoTag::A3c | AlgoTag::Impala)
    }
}

impl fmt::Display for AlgoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgoTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        AlgoTag::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_explore: f64,
    pub sigma_target: f64,
    pub noise_clip: f64,
    pub policy_delay: u64,
    pub tau: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_explore: 0.1,
            sigma_target: 0.2,
            noise_clip: 0.5,
            policy_delay: 2,
            tau: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub kl_adaptive: bool,
    pub kl_target: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub rollout_steps: usize,
    pub ppo_epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
    /// Unroll length for A2C/A3C/IMPALA workers.
    pub n_steps: usize,
    pub workers: usize,
    pub rho_bar: f64,
    pub c_bar: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub target_sync: u64,
    pub buffer_capacity: usize,
    /// Environment steps between off-policy updates.
    pub train_freq: u64,
    /// Environment steps before off-policy updates start.
    pub warmup_steps: u64,
    /// DDPG/TD3 actor learning rate as a multiple of `lr`.
    pub actor_lr_scale: f64,
    /// DDPG/TD3 penalty on the actor's pre-tanh outputs.
    pub action_reg: f64,
    /// DDPG/TD3 actor lr falls linearly to zero over this many env steps; 0 keeps it constant.
    pub actor_lr_decay_steps: u64,
    pub noise: NoiseConfig,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip_eps: 0.2,
            kl_coef: 0.2,
            kl_adaptive: false,
            kl_target: 0.01,
            lr: 5e-4,
            batch_size: 128,
            rollout_steps: 2048,
            ppo_epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            grad_clip: 40.0,
            n_steps: 16,
            workers: 2,
            rho_bar: 1.0,
            c_bar: 1.0,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_steps: 100_000,
            target_sync: 1000,
            buffer_capacity: 50_000,
            train_freq: 1,
            warmup_steps: 1000,
            actor_lr_scale: 1.0,
            action_reg: 0.0,
            actor_lr_decay_steps: 0,
            noise: NoiseConfig::default(),
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must be in [0, 1]");
        }
        if self.clip_eps <= 0.0 {
            return bad("clip epsilon must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.actor_lr_scale > 0.0 && self.actor_lr_scale.is_finite()) {
            return bad("actor learning rate scale must be positive");
        }
        if !(self.action_reg >= 0.0 && self.action_reg.is_finite()) {
            return bad("action penalty must be non-negative");
        }
        if self.batch_size == 0
            || self.rollout_steps == 0
            || self.ppo_epochs == 0
            || self.n_steps == 0
            || self.workers == 0
            || self.target_sync == 0
            || self.buffer_capacity == 0
            || self.train_freq == 0
        {
            return bad("counts must be positive");
        }
        if self.buffer_capacity < self.batch_size {
            return bad("replay capacity must be at least the batch size");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon schedule must stay in [0, 1]");
        }
        let n = &self.noise;
        if n.sigma_explore < 0.0 || n.sigma_target < 0.0 || n.noise_clip < 0.0 {
            return bad("noise scales must be non-negative");
        }
        if n.policy_delay == 0 {
            return bad("policy delay must be at least 1");
        }
        if !(n.tau > 0.0 && n.tau <= 1.0) {
            return bad("tau must be in (0, 1]");
        }
        Ok(())
    }
}
