//! DDPG and TD3 with target networks and soft updates.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::buffer::Transition;
use super::config::NoiseConfig;
use super::grad::accumulate;
use crate::error::{Error, Result};
use crate::nn::{finish_gradients, Adam, AdamConfig, LossEvaluation, Network, ParameterSet};

/// `target <- (1 - tau) target + tau source`, elementwise.
pub fn soft_update(target: &mut ParameterSet, source: &ParameterSet, tau: f64) -> Result<()> {
    if !target.same_layout(source) {
        return Err(Error::protocol("soft update between differently shaped parameter sets"));
    }
    if tau == 1.0 {
        *target = source.clone();
        return Ok(());
    }
    for (t, s) in target.params.iter_mut().zip(&source.params) {
        for (a, b) in t.data.iter_mut().zip(&s.data) {
            *a = ((1.0 - tau) * *a as f64 + tau * *b as f64) as f32;
        }
    }
    Ok(())
}

/// `clamp(mu + N(0, sigma^2), -1, 1)` per component.
pub fn exploration_action<R: Rng + ?Sized>(mu: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    if sigma <= 0.0 {
        return mu.iter().map(|m| m.clamp(-1.0, 1.0)).collect();
    }
    let n = Normal::new(0.0, sigma).expect("valid sigma");
    mu.iter().map(|m| (m + n.sample(rng)).clamp(-1.0, 1.0)).collect()
}

/// Networks shared by a DDPG/TD3 bundle.
#[derive(Debug, Clone)]
pub struct ContinuousNets {
    pub actor: Network,
    pub critic: Network,
}

#[derive(Debug, Clone)]
pub struct ActorCriticBundle {
    pub actor: ParameterSet,
    pub critics: Vec<ParameterSet>,
    pub actor_target: ParameterSet,
    pub critic_targets: Vec<ParameterSet>,
    pub actor_opt: Adam,
    pub critic_opts: Vec<Adam>,
    pub critic_updates: u64,
    pub actor_updates: u64,
    pub clip: f64,
    /// Weight of the penalty on the actor's pre-tanh outputs.
    pub action_reg: f64,
}

impl ActorCriticBundle {
    /// `twins` selects TD3 (two critics) over DDPG (one).
    pub fn new(nets: &ContinuousNets, seed: u64, twins: bool, adam: AdamConfig, clip: f64) -> Self {
        let actor = nets.actor.init(seed);
        let n = if twins { 2 } else { 1 };
        let critics: Vec<ParameterSet> = (0..n).map(|i| nets.critic.init(seed.wrapping_add(1 + i as u64))).collect();
        Self {
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor_opt: Adam::new(adam, &actor),
            critic_opts: critics.iter().map(|c| Adam::new(adam, c)).collect(),
            actor,
            critics,
            critic_updates: 0,
            actor_updates: 0,
            clip,
            action_reg: 0.0,
        }
    }
}

fn q_value(critic: &Network, params: &ParameterSet, features: &[f32], action: &[f64]) -> Result<f64> {
    Ok(critic.forward(params, features, action)?[0])
}

/// `y = r + gamma (1 - done) Q_target(s', mu_target(s'))`.
pub fn ddpg_targets(nets: &ContinuousNets, b: &ActorCriticBundle, batch: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let a = nets.actor.forward(&b.actor_target, &t.next_features, &[])?;
            Ok(t.reward + gamma * q_value(&nets.critic, &b.critic_targets[0], &t.next_features, &a)?)
        })
        .collect()
}

/// TD3 targets with clipped target-policy noise and the twin-critic minimum.
pub fn td3_targets<R: Rng + ?Sized>(
    nets: &ContinuousNets,
    b: &ActorCriticBundle,
    batch: &[Transition],
    gamma: f64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let normal = (noise.sigma_target > 0.0).then(|| Normal::new(0.0, noise.sigma_target).expect("valid sigma"));
    batch
        .iter()
        .map(|t| {
            if t.done {
                return Ok(t.reward);
            }
            let mut a = nets.actor.forward(&b.actor_target, &t.next_features, &[])?;
            for x in a.iter_mut() {
                let eta = normal.map_or(0.0, |n| n.sample(rng)).clamp(-noise.noise_clip, noise.noise_clip);
                *x = (*x + eta).clamp(-1.0, 1.0);
            }
            let mut q = f64::INFINITY;
            for c in &b.critic_targets {
                q = q.min(q_value(&nets.critic, c, &t.next_features, &a)?);
            }
            Ok(t.reward + gamma * q)
        })
        .collect()
}

/// Mean squared error between `Q(s, a)` and `targets`.
pub fn critic_loss(critic: &Network, params: &ParameterSet, batch: &[Transition], targets: &[f64]) -> Result<LossEvaluation> {
    if batch.is_empty() || batch.len() != targets.len() {
        return Err(Error::protocol("critic batch and targets differ in length"));
    }
    let inv = 1.0 / batch.len() as f64;
    let pairs: Vec<(&Transition, f64)> = batch.iter().zip(targets.iter().copied()).collect();
    accumulate(critic, &pairs, |(t, y), g| {
        let a = t.continuous_action();
        let cache = critic.forward_cached(params, &t.features, &a[..critic.spec().extra_inputs])?;
        let err = cache.output()[0] - y;
        critic.backward(params, &cache, &[2.0 * err * inv], g);
        Ok(err * err * inv)
    })
}

/// `-mean Q(s, mu(s)) + reg * mean |atanh mu(s)|^2`, differentiated with
/// respect to the actor only. The penalty keeps the actor out of tanh
/// saturation, where its gradient vanishes.
pub fn actor_loss(
    nets: &ContinuousNets,
    actor: &ParameterSet,
    critic: &ParameterSet,
    batch: &[Transition],
    reg: f64,
) -> Result<LossEvaluation> {
    if batch.is_empty() {
        return Err(Error::protocol("empty actor batch"));
    }
    let inv = 1.0 / batch.len() as f64;
    accumulate(&nets.actor, batch, |t, g| {
        let a_cache = nets.actor.forward_cached(actor, &t.features, &[])?;
        let c_cache = nets.critic.forward_cached(critic, &t.features, a_cache.output())?;
        let q = c_cache.output()[0];
        let mut scratch = nets.critic.zero_grads();
        let mut d_a = nets.critic.backward(critic, &c_cache, &[-inv], &mut scratch);
        let mut penalty = 0.0;
        if reg > 0.0 {
            for (d, &a) in d_a.iter_mut().zip(a_cache.output()) {
                // Saturated outputs carry no gradient; the penalty keeps them rare.
                let s = 1.0 - a * a;
                if s > 0.0 {
                    let u = a.atanh();
                    penalty += u * u;
                    *d += 2.0 * reg * inv * u / s;
                }
            }
        }
        nets.actor.backward(actor, &a_cache, &d_a, g);
        Ok((reg * penalty - q) * inv)
    })
}

fn step_critics(nets: &ContinuousNets, b: &mut ActorCriticBundle, batch: &[Transition], y: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..b.critics.len() {
        let eval = critic_loss(&nets.critic, &b.critics[i], batch, y)?;
        total += eval.loss;
        let g = finish_gradients(eval, b.clip)?;
        b.critic_opts[i].step(&mut b.critics[i], &g)?;
    }
    b.critic_updates += 1;
    Ok(total / b.critics.len() as f64)
}

fn step_actor_and_targets(nets: &ContinuousNets, b: &mut ActorCriticBundle, batch: &[Transition], tau: f64) -> Result<f64> {
    let eval = actor_loss(nets, &b.actor, &b.critics[0], batch, b.action_reg)?;
    let loss = eval.loss;
    let g = finish_gradients(eval, b.clip)?;
    b.actor_opt.step(&mut b.actor, &g)?;
    b.actor_updates += 1;
    soft_update(&mut b.actor_target, &b.actor, tau)?;
    for (t, c) in b.critic_targets.iter_mut().zip(&b.critics) {
        soft_update(t, c, tau)?;
    }
    Ok(loss)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContinuousStats {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
}

pub fn ddpg_update(nets: &ContinuousNets, b: &mut ActorCriticBundle, batch: &[Transition], gamma: f64, tau: f64) -> Result<ContinuousStats> {
    let y = ddpg_targets(nets, b, batch, gamma)?;
    let critic_loss = step_critics(nets, b, batch, &y)?;
    let actor_loss = step_actor_and_targets(nets, b, batch, tau)?;
    Ok(ContinuousStats {
        critic_loss,
        actor_loss: Some(actor_loss),
    })
}

pub fn td3_update<R: Rng + ?Sized>(
    nets: &ContinuousNets,
    b: &mut ActorCriticBundle,
    batch: &[Transition],
    gamma: f64,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<ContinuousStats> {
    if b.critics.len() != 2 {
        return Err(Error::protocol("TD3 needs exactly two critics"));
    }
    let y = td3_targets(nets, b, batch, gamma, noise, rng)?;
    let critic_loss = step_critics(nets, b, batch, &y)?;
    let actor_loss = if b.critic_updates % noise.policy_delay == 0 {
        Some(step_actor_and_targets(nets, b, batch, noise.tau)?)
    } else {
        None
    };
    Ok(ContinuousStats { critic_loss, actor_loss })
}
