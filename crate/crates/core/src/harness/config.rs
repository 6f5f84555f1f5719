//! Flat `key = value` configuration with a single table of keys and defaults.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::algos::{AlgoConfig, AlgoTag, NetArch, NoiseConfig};
use crate::env::RewardConfig;
use crate::error::{Error, Result};
use crate::sim::MapId;

pub struct KeyDef {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(key: &'static str, default: &'static str, help: &'static str) -> KeyDef {
    KeyDef { key, default, help }
}

/// Every recognized key. Defaults follow the full-scale protocol.
pub const KEYS: &[KeyDef] = &[
    k("scenario.kind", "1", "1 = multi-agent, 2 = single agent, 3 = adversarial"),
    k("scenario.map", "env_1", "env_1, env_2 or straight"),
    k("scenario.episodes", "50", "testing episodes"),
    k("scenario.steps", "0", "steps per testing episode; 0 uses the map default"),
    k("scenario.steps_env_1", "2000", "default testing steps on env_1"),
    k("scenario.steps_env_2", "5000", "default testing steps on env_2"),
    k("scenario.steps_straight", "300", "default testing steps on straight"),
    k("scenario.policies", "all", "comma list of AC policies tested together in scenario 1, or all"),
    k("scenario.policy", "AC-A3C", "policy tested alone in scenario 2"),
    k("scenario.scripted", "1", "scripted cars during testing"),
    k("algo.tag", "PPO", "PPO, A2C, A3C, IMPALA, DQN, DDPG or TD3"),
    k("algo.gamma", "0.99", "discount factor"),
    k("algo.lambda", "0.95", "GAE lambda"),
    k("algo.clip_eps", "0.2", "PPO clip range"),
    k("algo.kl_coef", "0.2", "PPO KL penalty coefficient"),
    k("algo.kl_adaptive", "false", "adapt the KL coefficient toward algo.kl_target"),
    k("algo.kl_target", "0.01", "target KL for the adaptive coefficient"),
    k("algo.ppo_epochs", "4", "PPO passes over each rollout"),
    k("algo.value_coef", "0.5", "value loss weight"),
    k("algo.entropy_coef", "0.01", "entropy bonus weight"),
    k("algo.grad_clip", "40.0", "global gradient norm bound"),
    k("algo.n_steps", "16", "A2C/A3C/IMPALA unroll length"),
    k("algo.rho_bar", "1.0", "V-trace rho truncation"),
    k("algo.c_bar", "1.0", "V-trace c truncation"),
    k("algo.eps_start", "1.0", "DQN initial epsilon"),
    k("algo.eps_end", "0.05", "DQN final epsilon"),
    k("algo.eps_decay_steps", "100000", "DQN epsilon decay length in env steps"),
    k("algo.target_sync", "1000", "DQN target sync interval in updates"),
    k("algo.buffer_capacity", "50000", "replay capacity"),
    k("algo.train_freq", "1", "env steps between off-policy updates"),
    k("algo.warmup_steps", "1000", "env steps before off-policy updates"),
    k("algo.actor_lr_scale", "1.0", "DDPG/TD3 actor lr as a multiple of train.lr"),
    k("algo.action_reg", "0.0", "DDPG/TD3 penalty on pre-tanh actor outputs"),
    k("algo.actor_lr_decay_steps", "0", "DDPG/TD3 actor lr decays linearly to 0 over this many steps; 0 = constant"),
    k("algo.sigma_explore", "0.1", "DDPG/TD3 exploration noise"),
    k("algo.sigma_target", "0.2", "TD3 target policy noise"),
    k("algo.noise_clip", "0.5", "TD3 target noise clip"),
    k("algo.policy_delay", "2", "TD3 actor update delay"),
    k("algo.tau", "0.005", "soft target update rate"),
    k("net.conv", "true", "use the convolutional trunk"),
    k("net.pool", "1", "average-pool factor applied to observations"),
    k("net.hidden", "256", "hidden dense widths, comma separated"),
    k("train.iterations", "200", "AC training iterations"),
    k("train.rollout_steps", "2048", "env steps per worker per iteration"),
    k("train.episode_steps", "2048", "step limit of a training episode"),
    k("train.total_steps", "40000000", "AC env step budget"),
    k("train.lr", "0.0005", "learning rate"),
    k("train.batch_size", "128", "minibatch size"),
    k("train.optimizer", "adam", "optimizer (adam)"),
    k("train.n_drl", "2", "learners per training session"),
    k("train.scripted", "2", "scripted cars per training session"),
    k("train.workers", "2", "parallel worker environments"),
    k("train.eval_episodes", "1", "greedy evaluation episodes after each iteration"),
    k("train.checkpoint_interval", "10", "iterations between intermediate checkpoints; 0 disables"),
    k("adversary.victim", "AC-A3C", "frozen victim policy name, or scripted"),
    k("adversary.algo", "PPO", "adversary algorithm"),
    k("adversary.iterations", "100", "adversary training iterations"),
    k("adversary.total_steps", "20000000", "adversary env step budget"),
    k("adversary.scripted", "1", "scripted cars during adversarial runs"),
    k("adversary.untrained", "false", "test the adversary at its initialization"),
    k("env.dt", "0.1", "simulation timestep, seconds"),
    k("env.spawn_jitter", "1.5", "uniform spawn offset along the lane, meters"),
    k("env.heading_jitter", "0.0", "uniform spawn heading offset, radians"),
    k("reward.beta", "0.5", "in-lane bonus"),
    k("reward.collision_penalty", "100", "AC penalty per collision flag"),
    k("reward.offroad_penalty", "0.5", "AC penalty for leaving the lane"),
    k("reward.adv_collision_bonus", "5", "adversary bonus per victim collision flag"),
    k("reward.adv_offroad_bonus", "0.05", "adversary bonus for victim offroad"),
    k("reward.speed_divisor", "10", "speed reward divisor"),
    k("seeds.list", "", "comma list or a..b range of episode seeds; empty uses 0..episodes"),
    k("seeds.train", "0", "training seed"),
    k("metrics.normalize", "executed", "executed or configured steps as the metric denominator"),
    k("registry.path", "", "directory holding registry.json; empty uses the output directory"),
    k("desk_scale.enable", "false", "fill unset keys from the desk-scale preset"),
];

/// Values the desk-scale preset applies to keys not set explicitly.
pub const DESK_PRESET: &[(&str, &str)] = &[
    ("net.conv", "false"),
    ("net.pool", "7"),
    ("net.hidden", "64,64"),
    ("train.iterations", "10"),
    ("train.rollout_steps", "1000"),
    ("train.episode_steps", "300"),
    ("train.total_steps", "100000"),
    ("train.batch_size", "32"),
    ("train.lr", "0.001"),
    ("train.workers", "1"),
    ("adversary.iterations", "6"),
    ("adversary.total_steps", "50000"),
    ("algo.buffer_capacity", "20000"),
    ("algo.warmup_steps", "500"),
    ("algo.eps_decay_steps", "5000"),
    ("algo.target_sync", "250"),
    ("algo.train_freq", "2"),
    ("scenario.steps_env_1", "200"),
    ("scenario.steps_env_2", "500"),
];

fn key_def(key: &str) -> Option<&'static KeyDef> {
    KEYS.iter().find(|d| d.key == key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    explicit: BTreeSet<String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|d| (d.key.to_string(), d.default.to_string())).collect(),
            explicit: BTreeSet::new(),
        }
    }
}

impl Config {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", i + 1)))?;
            c.set(key.trim(), value.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if key_def(key).is_none() {
            return Err(Error::config(format!("unknown config key '{key}'")));
        }
        self.values.insert(key.to_string(), value.to_string());
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Parses `KEY=VALUE`.
    pub fn set_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override '{kv}' is not KEY=VALUE")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Applies the desk-scale preset to keys that were not set explicitly.
    pub fn apply_desk_scale(&mut self) {
        for (key, value) in DESK_PRESET {
            if !self.explicit.contains(*key) {
                self.values.insert(key.to_string(), value.to_string());
            }
        }
        self.values.insert("desk_scale.enable".into(), "true".into());
    }

    /// Applies the desk preset if `desk_scale.enable` is true.
    pub fn resolve(mut self) -> Result<Self> {
        if self.get_bool("desk_scale.enable")? {
            self.apply_desk_scale();
        }
        Ok(self)
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("config key '{key}' is not in the key table"))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        self.get(key)
            .parse()
            .map_err(|_| Error::config(format!("{key} = '{}' is not {what}", self.get(key))))
    }

    pub fn get_f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.parse_as(key, "a number")?;
        if !v.is_finite() {
            return Err(Error::config(format!("{key} must be finite")));
        }
        Ok(v)
    }

    pub fn get_usize(&self, key: &str) -> Result<usize> {
        self.parse_as(key, "a non-negative integer")
    }

    pub fn get_u64(&self, key: &str) -> Result<u64> {
        self.parse_as(key, "a non-negative integer")
    }

    pub fn get_bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::config(format!("{key} = '{v}' is not a boolean"))),
        }
    }

    pub fn get_list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    }

    pub fn map(&self) -> Result<MapId> {
        self.get("scenario.map").parse()
    }

    pub fn algo_tag(&self) -> Result<AlgoTag> {
        self.get("algo.tag").parse()
    }

    /// Testing steps for `map`: `scenario.steps` if non-zero, else the per-map key.
    pub fn test_steps(&self, map: MapId) -> Result<usize> {
        let s = self.get_usize("scenario.steps")?;
        if s > 0 {
            return Ok(s);
        }
        self.get_usize(&format!("scenario.steps_{}", map.as_str()))
    }

    pub fn algo_config(&self) -> Result<AlgoConfig> {
        let c = AlgoConfig {
            gamma: self.get_f64("algo.gamma")?,
            lambda: self.get_f64("algo.lambda")?,
            clip_eps: self.get_f64("algo.clip_eps")?,
            kl_coef: self.get_f64("algo.kl_coef")?,
            kl_adaptive: self.get_bool("algo.kl_adaptive")?,
            kl_target: self.get_f64("algo.kl_target")?,
            lr: self.get_f64("train.lr")?,
            batch_size: self.get_usize("train.batch_size")?,
            rollout_steps: self.get_usize("train.rollout_steps")?,
            ppo_epochs: self.get_usize("algo.ppo_epochs")?,
            value_coef: self.get_f64("algo.value_coef")?,
            entropy_coef: self.get_f64("algo.entropy_coef")?,
            grad_clip: self.get_f64("algo.grad_clip")?,
            n_steps: self.get_usize("algo.n_steps")?,
            workers: self.get_usize("train.workers")?,
            rho_bar: self.get_f64("algo.rho_bar")?,
            c_bar: self.get_f64("algo.c_bar")?,
            eps_start: self.get_f64("algo.eps_start")?,
            eps_end: self.get_f64("algo.eps_end")?,
            eps_decay_steps: self.get_u64("algo.eps_decay_steps")?,
            target_sync: self.get_u64("algo.target_sync")?,
            buffer_capacity: self.get_usize("algo.buffer_capacity")?,
            train_freq: self.get_u64("algo.train_freq")?,
            warmup_steps: self.get_u64("algo.warmup_steps")?,
            actor_lr_scale: self.get_f64("algo.actor_lr_scale")?,
            action_reg: self.get_f64("algo.action_reg")?,
            actor_lr_decay_steps: self.get_u64("algo.actor_lr_decay_steps")?,
            noise: NoiseConfig {
                sigma_explore: self.get_f64("algo.sigma_explore")?,
                sigma_target: self.get_f64("algo.sigma_target")?,
                noise_clip: self.get_f64("algo.noise_clip")?,
                policy_delay: self.get_u64("algo.policy_delay")?,
                tau: self.get_f64("algo.tau")?,
            },
        };
        if self.get("train.optimizer") != "adam" {
            return Err(Error::config(format!("unsupported optimizer '{}'", self.get("train.optimizer"))));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn net_arch(&self) -> Result<NetArch> {
        let hidden = self
            .get_list("net.hidden")
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| Error::config(format!("bad hidden width '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        let arch = NetArch {
            conv: self.get_bool("net.conv")?,
            pool: self.get_usize("net.pool")?,
            hidden,
        };
        if arch.pool == 0 || 84 % arch.pool != 0 {
            return Err(Error::config(format!("net.pool = {} must divide 84", arch.pool)));
        }
        Ok(arch)
    }

    pub fn reward_config(&self) -> Result<RewardConfig> {
        Ok(RewardConfig {
            beta: self.get_f64("reward.beta")?,
            collision_penalty: self.get_f64("reward.collision_penalty")?,
            offroad_penalty: self.get_f64("reward.offroad_penalty")?,
            adv_collision_bonus: self.get_f64("reward.adv_collision_bonus")?,
            adv_offroad_bonus: self.get_f64("reward.adv_offroad_bonus")?,
            speed_divisor: self.get_f64("reward.speed_divisor")?,
        })
    }

    /// Episode seeds: `seeds.list` if set, else `0..scenario.episodes`.
    pub fn seeds(&self) -> Result<Vec<u64>> {
        let raw = self.get("seeds.list").trim();
        if raw.is_empty() {
            return Ok((0..self.get_u64("scenario.episodes")?).collect());
        }
        parse_seed_list(raw)
    }

    /// Canonical text form; parsing it back yields the same values.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for d in KEYS {
            out.push_str(&format!("{} = {}\n", d.key, self.get(d.key)));
        }
        out
    }

    /// Help listing: every key with its default.
    pub fn key_help() -> String {
        let width = KEYS.iter().map(|d| d.key.len()).max().unwrap_or(0);
        let mut out = String::from("Config keys (default in brackets):\n");
        for d in KEYS {
            out.push_str(&format!("  {:width$}  [{}]  {}\n", d.key, d.default, d.help));
        }
        out
    }
}

/// `0,1,5` or `0..50` (half-open).
pub fn parse_seed_list(raw: &str) -> Result<Vec<u64>> {
    let bad = || Error::config(format!("bad seed list '{raw}'"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b <= a {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    raw.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_unique_and_defaults_parse() {
        let mut seen = BTreeSet::new();
        for d in KEYS {
            assert!(seen.insert(d.key), "duplicate {}", d.key);
        }
        for (key, _) in DESK_PRESET {
            assert!(key_def(key).is_some(), "{key}");
        }
        let c = Config::default();
        c.algo_config().unwrap();
        c.net_arch().unwrap();
        c.reward_config().unwrap();
        assert_eq!(c.seeds().unwrap(), (0..50).collect::<Vec<_>>());
        let mut desk = Config::default();
        desk.apply_desk_scale();
        desk.algo_config().unwrap();
        desk.net_arch().unwrap();
    }

    #[test]
    fn table_defaults() {
        let c = Config::default();
        assert_eq!(c.get_usize("train.iterations").unwrap(), 200);
        assert_eq!(c.get_usize("adversary.iterations").unwrap(), 100);
        assert_eq!(c.get_usize("train.rollout_steps").unwrap(), 2048);
        assert_eq!(c.get_u64("train.total_steps").unwrap(), 40_000_000);
        assert_eq!(c.get_u64("adversary.total_steps").unwrap(), 20_000_000);
        assert_eq!(c.get_f64("train.lr").unwrap(), 0.0005);
        assert_eq!(c.get_usize("train.batch_size").unwrap(), 128);
        assert!(c.get_usize("adversary.iterations").unwrap() < c.get_usize("train.iterations").unwrap());
        assert_eq!(c.test_steps(MapId::Env1).unwrap(), 2000);
        assert_eq!(c.test_steps(MapId::Env2).unwrap(), 5000);
    }

    #[test]
    fn unknown_key_names_the_key() {
        let err = Config::default().set_override("train.nope=3").unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("train.nope"));
        assert!(Config::parse("bogus = 1").is_err());
    }

    #[test]
    fn desk_preset_respects_explicit_keys() {
        let mut c = Config::parse("train.iterations = 3\n# comment\n").unwrap();
        c.apply_desk_scale();
        assert_eq!(c.get("train.iterations"), "3");
        assert_eq!(c.get("net.pool"), "7");
    }

    #[test]
    fn text_round_trip() {
        let mut c = Config::default();
        c.set("algo.tag", "TD3").unwrap();
        let back = Config::parse(&c.to_text()).unwrap();
        assert_eq!(back.values, c.values);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seed_list("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seed_list("1, 9").unwrap(), vec![1, 9]);
        assert!(parse_seed_list("x").is_err());
    }

    #[test]
    fn help_lists_every_key_with_default() {
        let h = Config::key_help();
        for d in KEYS {
            assert!(h.contains(d.key) && h.contains(&format!("[{}]", d.default)));
        }
    }
}
