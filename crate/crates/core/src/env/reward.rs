//! Per-step rewards for autonomous and adversarial cars.

use serde::{Deserialize, Serialize};

use crate::sim::{AgentEvents, AgentId, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Bonus while the footprint center stays inside the own lane corridor.
    pub beta: f64,
    pub collision_penalty: f64,
    pub offroad_penalty: f64,
    pub adv_collision_bonus: f64,
    pub adv_offroad_bonus: f64,
    pub speed_divisor: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            collision_penalty: 100.0,
            offroad_penalty: 0.5,
            adv_collision_bonus: 5.0,
            adv_offroad_bonus: 0.05,
            speed_divisor: 10.0,
        }
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Progress, speed and lane bonus shared by both reward functions.
fn driving_terms(prev: &AgentEvents, cur: &AgentEvents, speed: f64, cfg: &RewardConfig) -> f64 {
    let beta = if cur.in_lane { cfg.beta } else { 0.0 };
    (prev.distance_to_goal - cur.distance_to_goal) + speed / cfg.speed_divisor + beta
}

/// Autonomous-car reward: progress plus speed, heavy crash penalty, light
/// offroad penalty, lane bonus.
pub fn reward_ac_terms(prev: &AgentEvents, cur: &AgentEvents, speed: f64, cfg: &RewardConfig) -> f64 {
    driving_terms(prev, cur, speed, cfg)
        - cfg.collision_penalty * (flag(cur.cv) + flag(cur.co))
        - cfg.offroad_penalty * flag(cur.io)
}

/// Adversary reward: the adversary's own driving terms plus bonuses for the
/// victim's crash and offroad flags.
pub fn reward_adv_terms(
    adv_prev: &AgentEvents,
    adv_cur: &AgentEvents,
    adv_speed: f64,
    victim: &AgentEvents,
    cfg: &RewardConfig,
) -> f64 {
    driving_terms(adv_prev, adv_cur, adv_speed, cfg)
        + cfg.adv_collision_bonus * (flag(victim.cv) + flag(victim.co))
        + cfg.adv_offroad_bonus * flag(victim.io)
}

pub fn reward_ac(prev: &WorldState, cur: &WorldState, agent: AgentId, cfg: &RewardConfig) -> f64 {
    let (p, c) = (prev.events_of(agent), cur.events_of(agent));
    let speed = cur.vehicle(agent).map(|v| v.state.speed).unwrap_or(0.0);
    match (p, c) {
        (Some(p), Some(c)) => reward_ac_terms(p, c, speed, cfg),
        _ => 0.0,
    }
}

/// Victim flags only count while the victim is still in the world.
pub fn reward_adv(prev: &WorldState, cur: &WorldState, adversary: AgentId, victim: AgentId, cfg: &RewardConfig) -> f64 {
    let (Some(p), Some(c)) = (prev.events_of(adversary), cur.events_of(adversary)) else {
        return 0.0;
    };
    let speed = cur.vehicle(adversary).map(|v| v.state.speed).unwrap_or(0.0);
    let victim_events = match (prev.vehicle(victim), cur.events_of(victim)) {
        (Some(v), Some(ev)) if v.active => *ev,
        _ => AgentEvents::default(),
    };
    reward_adv_terms(p, c, speed, &victim_events, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(d: f64, cv: bool, co: bool, io: bool, in_lane: bool) -> AgentEvents {
        AgentEvents {
            cv,
            co,
            io,
            in_lane,
            distance_to_goal: d,
            collided_with: None,
        }
    }

    #[test]
    fn ac_worked_examples() {
        let cfg = RewardConfig::default();
        let prev = ev(100.0, false, false, false, true);
        let r = reward_ac_terms(&prev, &ev(98.0, false, false, false, true), 5.0, &cfg);
        assert!((r - 3.0).abs() < 1e-12);
        let r = reward_ac_terms(&prev, &ev(98.0, true, false, false, true), 5.0, &cfg);
        assert!((r + 97.0).abs() < 1e-12);
        let r = reward_ac_terms(&prev, &ev(100.0, false, false, false, true), 0.0, &cfg);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn adv_worked_examples() {
        let cfg = RewardConfig::default();
        let clean = AgentEvents::default();
        let r = reward_adv_terms(&ev(50.0, false, false, false, true), &ev(48.0, false, false, false, true), 5.0, &clean, &cfg);
        assert!((r - 3.0).abs() < 1e-12);
        let still = ev(50.0, false, false, true, false);
        let victim = ev(10.0, true, false, true, false);
        let r = reward_adv_terms(&still, &still, 0.0, &victim, &cfg);
        assert!((r - 5.05).abs() < 1e-12);
        assert_eq!(reward_adv_terms(&still, &still, 0.0, &clean, &cfg), 0.0);
    }

    #[test]
    fn collision_costs_exactly_the_penalty() {
        let cfg = RewardConfig::default();
        for &io in &[false, true] {
            for &lane in &[false, true] {
                let prev = ev(30.0, false, false, false, true);
                let a = reward_ac_terms(&prev, &ev(29.0, false, false, io, lane), 3.0, &cfg);
                let b = reward_ac_terms(&prev, &ev(29.0, true, false, io, lane), 3.0, &cfg);
                assert_eq!(a - b, 100.0);
            }
        }
    }

    #[test]
    fn adversary_reward_monotone_in_victim_flags() {
        let cfg = RewardConfig::default();
        let me = ev(20.0, false, false, false, true);
        for bits in 0..8u8 {
            let base = ev(0.0, bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, false);
            let r0 = reward_adv_terms(&me, &me, 2.0, &base, &cfg);
            for flip in 0..3 {
                let mut up = base;
                match flip {
                    0 => up.cv = true,
                    1 => up.co = true,
                    _ => up.io = true,
                }
                assert!(reward_adv_terms(&me, &me, 2.0, &up, &cfg) >= r0);
            }
        }
    }
}
