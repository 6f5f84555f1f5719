use rand::Rng;

use super::buffer::Transition;
use super::grad::accumulate;
use crate::error::{Error, Result};
use crate::nn::dist::argmax;
use crate::nn::{finish_gradients, Adam, AdamConfig, LossEvaluation, Network, ParameterSet};

const HUBER_DELTA: f64 = 1.0;

fn huber(x: f64) -> f64 {
    if x.abs() <= HUBER_DELTA {
        0.5 * x * x
    } else {
        HUBER_DELTA * (x.abs() - 0.5 * HUBER_DELTA)
    }
}

fn huber_grad(x: f64) -> f64 {
    x.clamp(-HUBER_DELTA, HUBER_DELTA)
}

/// With probability `eps` a uniform action, otherwise the greedy one (lowest index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64], eps: f64, rng: &mut R) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q.len())
    } else {
        argmax(q)
    }
}

/// Linear decay from `start` to `end` over `decay_steps`, then constant.
pub fn linear_epsilon(step: u64, start: f64, end: f64, decay_steps: u64) -> f64 {
    if decay_steps == 0 || step >= decay_steps {
        return end;
    }
    start + (end - start) * step as f64 / decay_steps as f64
}

/// `y = r + gamma (1 - done) max_a' Q_target(s', a')`.
pub fn dqn_targets(net: &Network, target: &ParameterSet, batch: &[Transition], gamma: f64) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            if t.done || gamma == 0.0 {
                return Ok(t.reward);
            }
            let q = net.forward(target, &t.next_features, &[])?;
            Ok(t.reward + gamma * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect()
}

/// Mean Huber loss between `targets` and `Q(s, a)`.
pub fn dqn_loss(net: &Network, params: &ParameterSet, batch: &[Transition], targets: &[f64]) -> Result<LossEvaluation> {
    if batch.is_empty() || batch.len() != targets.len() {
        return Err(Error::protocol("DQN batch and targets differ in length"));
    }
    let inv = 1.0 / batch.len() as f64;
    let pairs: Vec<(&Transition, f64)> = batch.iter().zip(targets.iter().copied()).collect();
    accumulate(net, &pairs, |(t, y), g| {
        let cache = net.forward_cached(params, &t.features, &[])?;
        let a = t.discrete_action();
        let err = y - cache.output()[a];
        let mut d = vec![0.0; cache.output().len()];
        d[a] = -huber_grad(err) * inv;
        net.backward(params, &cache, &d, g);
        Ok(huber(err) * inv)
    })
}

#[derive(Debug, Clone)]
pub struct DqnState {
    pub params: ParameterSet,
    pub target: ParameterSet,
    pub opt: Adam,
    pub updates: u64,
    pub target_sync: u64,
    pub clip: f64,
}

impl DqnState {
    pub fn new(params: ParameterSet, adam: AdamConfig, target_sync: u64, clip: f64) -> Self {
        Self {
            target: params.clone(),
            opt: Adam::new(adam, &params),
            params,
            updates: 0,
            target_sync,
            clip,
        }
    }
}

/// One optimizer step; copies the online parameters into the target every
/// `target_sync` updates. Returns the loss before the step.
pub fn dqn_update(net: &Network, state: &mut DqnState, batch: &[Transition], gamma: f64) -> Result<f64> {
    let y = dqn_targets(net, &state.target, batch, gamma)?;
    let eval = dqn_loss(net, &state.params, batch, &y)?;
    let loss = eval.loss;
    let grads = finish_gradients(eval, state.clip)?;
    state.opt.step(&mut state.params, &grads)?;
    state.updates += 1;
    if state.updates % state.target_sync == 0 {
        state.target = state.params.clone();
    }
    Ok(loss)
}
