use std::collections::VecDeque;

use super::actor_critic::ParameterStore;
use super::advantage::vtrace;
use super::buffer::Trajectory;
use super::policy_gradient::{actor_critic_loss, AcLossConfig, AcSample};
use crate::error::Result;
use crate::nn::dist::log_softmax;
use crate::nn::{finish_gradients, LossEvaluation, Network, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpalaConfig {
    pub gamma: f64,
    pub rho_bar: f64,
    pub c_bar: f64,
    pub loss: AcLossConfig,
    pub clip: f64,
    /// Trajectories consumed per learner step.
    pub batch_trajectories: usize,
}

impl Default for ImpalaConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            rho_bar: 1.0,
            c_bar: 1.0,
            loss: AcLossConfig::default(),
            clip: 40.0,
            batch_trajectories: 4,
        }
    }
}

/// Actor-critic samples with V-trace targets evaluated under `params`.
pub fn vtrace_samples(net: &Network, params: &ParameterSet, traj: &Trajectory, cfg: &ImpalaConfig) -> Result<Vec<AcSample>> {
    traj.validate()?;
    let mut values = Vec::with_capacity(traj.len());
    let mut target_lp = Vec::with_capacity(traj.len());
    for s in &traj.steps {
        let out = net.forward(params, &s.features, &[])?;
        let k = out.len() - 1;
        target_lp.push(log_softmax(&out[..k])[s.action]);
        values.push(out[k]);
    }
    let bootstrap = match &traj.bootstrap {
        Some(f) if !traj.steps.last().unwrap().done => *net.forward(params, f, &[])?.last().unwrap(),
        _ => 0.0,
    };
    let behavior: Vec<f64> = traj.steps.iter().map(|s| s.behavior_log_prob).collect();
    let vt = vtrace(
        &traj.rewards(),
        &values,
        &traj.dones(),
        bootstrap,
        &behavior,
        &target_lp,
        cfg.gamma,
        cfg.rho_bar,
        cfg.c_bar,
    );
    Ok(traj
        .steps
        .iter()
        .zip(vt.vs.iter().zip(&vt.pg_advantages))
        .map(|(s, (&vs, &adv))| AcSample {
            features: s.features.clone(),
            action: s.action,
            advantage: adv,
            value_target: vs,
        })
        .collect())
}

/// Policy loss `-pg_advantage * log pi`, value loss against `v_s`, entropy bonus,
/// averaged over every step of every trajectory.
pub fn impala_loss(net: &Network, params: &ParameterSet, trajs: &[Trajectory], cfg: &ImpalaConfig) -> Result<LossEvaluation> {
    let mut samples = Vec::new();
    for t in trajs {
        samples.extend(vtrace_samples(net, params, t, cfg)?);
    }
    actor_critic_loss(net, params, &samples, &cfg.loss)
}

/// One learner step over up to `batch_trajectories` queued trajectories.
/// Returns `None` when the queue is empty so the caller can retry later.
pub fn impala_learn_step(
    net: &Network,
    store: &mut ParameterStore,
    queue: &mut VecDeque<Trajectory>,
    cfg: &ImpalaConfig,
) -> Result<Option<f64>> {
    if queue.is_empty() {
        return Ok(None);
    }
    let take = cfg.batch_trajectories.max(1).min(queue.len());
    let batch: Vec<Trajectory> = queue.drain(..take).collect();
    let eval = impala_loss(net, store.params(), &batch, cfg)?;
    let loss = eval.loss;
    let grads = finish_gradients(eval, cfg.clip)?;
    store.apply(&grads)?;
    Ok(Some(loss))
}
