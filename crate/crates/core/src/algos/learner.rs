//! Learners: each algorithm wrapped behind one interface that the training
//! harness drives. A learner serves one or more workers (independent
//! environments); acting is read-only so workers can act in parallel, and
//! experience is recorded sequentially in worker order.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::actor_critic::{a2c_update, a3c_apply, a3c_worker_gradient, ParameterStore, WorkerBatch};
use super::advantage::gae;
use super::buffer::{Features, ReplayBuffer, StoredAction, Trajectory, TrajectoryStep, Transition};
use super::config::{AlgoConfig, AlgoTag};
use super::continuous::{ddpg_update, exploration_action, td3_update, ActorCriticBundle, ContinuousNets};
use super::dqn::{dqn_update, epsilon_greedy, linear_epsilon, DqnState};
use super::impala::{impala_learn_step, ImpalaConfig};
use super::policy_gradient::{normalize, ppo_loss_with_stats, AcLossConfig, AcSample, PpoLossConfig, PpoSample};
use crate::env::{Action, CONTINUOUS_ACTION_DIM, NUM_DISCRETE_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::dist::{argmax, log_softmax, sample_categorical, softmax};
use crate::nn::{finish_gradients, Adam, AdamConfig, HeadSpec, Network, NetworkSpec, ParameterSet};
use crate::sim::AgentId;

/// Trunk architecture shared by every network of a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetArch {
    /// Full-size convolutional trunk instead of the pooled MLP.
    pub conv: bool,
    pub pool: usize,
    pub hidden: Vec<usize>,
}

impl NetArch {
    pub fn full() -> Self {
        Self {
            conv: true,
            pool: 1,
            hidden: vec![256],
        }
    }

    pub fn tiny() -> Self {
        Self {
            conv: false,
            pool: 7,
            hidden: vec![64, 64],
        }
    }

    fn spec(&self, head: HeadSpec) -> NetworkSpec {
        let mut s = NetworkSpec::tiny(head, self.pool, self.hidden.clone());
        if self.conv {
            s.convs = NetworkSpec::conv(head).convs;
        }
        s
    }
}

/// The acting network spec for an algorithm; its parameters are what checkpoints hold.
pub fn policy_spec(tag: AlgoTag, arch: &NetArch) -> NetworkSpec {
    let head = match tag {
        AlgoTag::Ppo | AlgoTag::A2c | AlgoTag::A3c | AlgoTag::Impala => HeadSpec::PolicyValue {
            actions: NUM_DISCRETE_ACTIONS,
        },
        AlgoTag::Dqn => HeadSpec::QValues {
            actions: NUM_DISCRETE_ACTIONS,
        },
        AlgoTag::Ddpg | AlgoTag::Td3 => HeadSpec::Deterministic {
            dims: CONTINUOUS_ACTION_DIM,
        },
    };
    arch.spec(head)
}

/// Q(s, a) network; the action joins after the first hidden layer so it is not
/// drowned out by the observation features.
pub fn critic_spec(arch: &NetArch) -> NetworkSpec {
    let mut s = arch.spec(HeadSpec::StateActionValue);
    s.extra_layer = s.hidden.len().min(1);
    s
}

/// Noise-free action for a head's outputs.
pub fn greedy_action(head: HeadSpec, out: &[f64]) -> Action {
    match head {
        HeadSpec::PolicyValue { actions } => Action::Discrete(argmax(&out[..actions])),
        HeadSpec::Categorical { .. } | HeadSpec::QValues { .. } => Action::Discrete(argmax(out)),
        HeadSpec::Deterministic { .. } | HeadSpec::Gaussian { .. } => Action::Continuous([out[0], out[1]]),
        HeadSpec::Value | HeadSpec::StateActionValue => Action::Discrete(0),
    }
}

/// A policy loaded for evaluation only.
#[derive(Debug, Clone)]
pub struct FrozenPolicy {
    pub tag: AlgoTag,
    pub net: Network,
    pub params: Arc<ParameterSet>,
}

impl FrozenPolicy {
    pub fn act(&self, features: &[f32]) -> Result<Action> {
        let out = self.net.forward(&self.params, features, &[])?;
        Ok(greedy_action(self.net.spec().head, &out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub action: Action,
    /// Behavior log-probability (0 for deterministic and value-based learners).
    pub log_prob: f64,
    pub value: f64,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Experience {
    pub features: Features,
    pub decision: Decision,
    pub reward: f64,
    pub next_features: Features,
    /// Goal reached or crashed: no bootstrapping past this step.
    pub terminal: bool,
    /// Terminal or cut by the step limit.
    pub episode_end: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateStats {
    pub updates: u64,
    /// Updates skipped because the loss or gradient was not finite.
    pub skipped: u64,
    /// Mean of each loss component over the iteration's updates.
    pub losses: Vec<(String, f64)>,
}

#[derive(Debug, Default)]
struct LossAcc {
    sums: Vec<(String, f64, u64)>,
    updates: u64,
    skipped: u64,
}

impl LossAcc {
    fn add(&mut self, name: &str, v: f64) {
        match self.sums.iter_mut().find(|(n, _, _)| n == name) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => self.sums.push((name.to_string(), v, 1)),
        }
    }

    fn take(&mut self) -> UpdateStats {
        let acc = std::mem::take(self);
        UpdateStats {
            updates: acc.updates,
            skipped: acc.skipped,
            losses: acc.sums.into_iter().map(|(n, s, c)| (n, s / c as f64)).collect(),
        }
    }

    /// Turns numeric failures into a skipped update.
    fn guard<T>(&mut self, r: Result<T>) -> Result<Option<T>> {
        match r {
            Ok(v) => {
                self.updates += 1;
                Ok(Some(v))
            }
            Err(Error::Numeric(msg)) => {
                log::warn!("skipping update: {msg}");
                self.skipped += 1;
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }
}

pub trait Learner: Send + Sync {
    fn tag(&self) -> AlgoTag;
    /// The acting network; also defines observation encoding.
    fn network(&self) -> &Network;
    fn workers(&self) -> usize;
    fn act(&self, worker: usize, features: &[f32], rng: &mut ChaCha8Rng, explore: bool) -> Result<Decision>;
    fn record(&mut self, worker: usize, exp: Experience) -> Result<()>;
    /// Flushes pending experience and finishes the iteration's updates.
    fn end_iteration(&mut self) -> Result<UpdateStats>;
    /// Current acting parameters.
    fn policy_params(&self) -> &ParameterSet;
}

pub fn build_learner(tag: AlgoTag, cfg: &AlgoConfig, arch: &NetArch, workers: usize, seed: u64) -> Result<Box<dyn Learner>> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::config("a learner needs at least one worker"));
    }
    let net = Network::new(policy_spec(tag, arch))?;
    let adam = AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    };
    let rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1ea2);
    Ok(match tag {
        AlgoTag::Ppo | AlgoTag::A2c | AlgoTag::A3c | AlgoTag::Impala => {
            let params = net.init(seed);
            Box::new(PgLearner {
                tag,
                snapshots: vec![Arc::new(params.clone()); workers],
                snapshot_versions: vec![0; workers],
                store: ParameterStore::new(params, adam),
                net,
                cfg: cfg.clone(),
                kl_coef: cfg.kl_coef,
                rollouts: (0..workers).map(|_| WorkerRollout::default()).collect(),
                queue: VecDeque::new(),
                rng,
                acc: LossAcc::default(),
            })
        }
        AlgoTag::Dqn => {
            let state = DqnState::new(net.init(seed), adam, cfg.target_sync, cfg.grad_clip);
            Box::new(DqnLearner {
                net,
                state,
                replay: ReplayBuffer::new(cfg.buffer_capacity),
                cfg: cfg.clone(),
                steps: 0,
                workers,
                rng,
                acc: LossAcc::default(),
            })
        }
        AlgoTag::Ddpg | AlgoTag::Td3 => {
            let nets = ContinuousNets {
                actor: net,
                critic: Network::new(critic_spec(arch))?,
            };
            let mut bundle = ActorCriticBundle::new(&nets, seed, tag == AlgoTag::Td3, adam, cfg.grad_clip);
            let actor_adam = AdamConfig {
                lr: cfg.lr * cfg.actor_lr_scale,
                ..adam
            };
            bundle.actor_opt = Adam::new(actor_adam, &bundle.actor);
            bundle.action_reg = cfg.action_reg;
            Box::new(ContinuousLearner {
                tag,
                nets,
                bundle,
                replay: ReplayBuffer::new(cfg.buffer_capacity),
                cfg: cfg.clone(),
                steps: 0,
                workers,
                rng,
                acc: LossAcc::default(),
            })
        }
    })
}

/// One worker's on-policy experience since its last hand-off.
#[derive(Debug, Default)]
struct WorkerRollout {
    closed: Vec<Trajectory>,
    open: Vec<TrajectoryStep>,
    last_next: Option<Features>,
    steps: usize,
    episode: u64,
    version: u64,
}

impl WorkerRollout {
    fn push(&mut self, exp: Experience, version: u64) {
        if self.steps == 0 {
            self.version = version;
        }
        self.open.push(TrajectoryStep {
            features: exp.features,
            action: match exp.decision.action {
                Action::Discrete(a) => a,
                Action::Continuous(_) => unreachable!("policy-gradient learners act discretely"),
            },
            reward: exp.reward,
            done: exp.terminal,
            behavior_log_prob: exp.decision.log_prob,
            behavior_value: exp.decision.value,
            behavior_logits: exp.decision.logits,
        });
        self.steps += 1;
        if exp.episode_end {
            let bootstrap = (!exp.terminal).then_some(exp.next_features);
            self.close(bootstrap);
            self.episode += 1;
            self.last_next = None;
        } else {
            self.last_next = Some(exp.next_features);
        }
    }

    fn close(&mut self, bootstrap: Option<Features>) {
        if self.open.is_empty() {
            return;
        }
        self.closed.push(Trajectory {
            agent: AgentId(0),
            episode: self.episode,
            steps: std::mem::take(&mut self.open),
            bootstrap,
            version: self.version,
        });
    }

    fn take(&mut self) -> Vec<Trajectory> {
        let next = self.last_next.clone();
        self.close(next);
        self.steps = 0;
        std::mem::take(&mut self.closed)
    }
}

/// PPO, A2C, A3C and IMPALA over a policy-value network.
struct PgLearner {
    tag: AlgoTag,
    net: Network,
    store: ParameterStore,
    /// Parameters each worker acts with (A3C and IMPALA only lag the store).
    snapshots: Vec<Arc<ParameterSet>>,
    snapshot_versions: Vec<u64>,
    cfg: AlgoConfig,
    kl_coef: f64,
    rollouts: Vec<WorkerRollout>,
    queue: VecDeque<Trajectory>,
    rng: ChaCha8Rng,
    acc: LossAcc,
}

struct GaeStep {
    step: TrajectoryStep,
    advantage: f64,
    target: f64,
}

impl PgLearner {
    fn ac_cfg(&self) -> AcLossConfig {
        AcLossConfig {
            value_coef: self.cfg.value_coef,
            entropy_coef: self.cfg.entropy_coef,
        }
    }

    fn acting_params(&self, worker: usize) -> &ParameterSet {
        match self.tag {
            AlgoTag::A3c | AlgoTag::Impala => &self.snapshots[worker],
            _ => self.store.params(),
        }
    }

    /// GAE over trajectories using the behavior values recorded while acting.
    fn gae_steps(&self, trajs: Vec<Trajectory>, params: &ParameterSet) -> Result<Vec<GaeStep>> {
        let mut out = Vec::new();
        for t in trajs {
            t.validate()?;
            let values: Vec<f64> = t.steps.iter().map(|s| s.behavior_value).collect();
            let bootstrap = match &t.bootstrap {
                Some(f) => *self.net.forward(params, f, &[])?.last().unwrap(),
                None => 0.0,
            };
            let (adv, targets) = gae(&t.rewards(), &values, &t.dones(), bootstrap, self.cfg.gamma, self.cfg.lambda);
            out.extend(t.steps.into_iter().zip(adv.into_iter().zip(targets)).map(|(step, (advantage, target))| GaeStep {
                step,
                advantage,
                target,
            }));
        }
        Ok(out)
    }

    fn ac_samples(steps: Vec<GaeStep>) -> Vec<AcSample> {
        steps
            .into_iter()
            .map(|g| AcSample {
                features: g.step.features,
                action: g.step.action,
                advantage: g.advantage,
                value_target: g.target,
            })
            .collect()
    }

    fn ppo_update(&mut self) -> Result<()> {
        let trajs: Vec<Trajectory> = self.rollouts.iter_mut().flat_map(|r| r.take()).collect();
        if trajs.is_empty() {
            return Ok(());
        }
        let steps = self.gae_steps(trajs, &self.store.snapshot())?;
        let mut adv: Vec<f64> = steps.iter().map(|g| g.advantage).collect();
        normalize(&mut adv);
        let samples: Vec<PpoSample> = steps
            .into_iter()
            .zip(adv)
            .map(|(g, a)| PpoSample {
                features: g.step.features,
                action: g.step.action,
                advantage: a,
                value_target: g.target,
                old_log_prob: g.step.behavior_log_prob,
                old_logits: g.step.behavior_logits,
            })
            .collect();
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut kl_sum = 0.0;
        let mut kl_n = 0.0;
        for _ in 0..self.cfg.ppo_epochs {
            order.shuffle(&mut self.rng);
            for chunk in order.chunks(self.cfg.batch_size) {
                let batch: Vec<PpoSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                let cfg = PpoLossConfig {
                    clip_eps: self.cfg.clip_eps,
                    kl_coef: self.kl_coef,
                    value_coef: self.cfg.value_coef,
                    entropy_coef: self.cfg.entropy_coef,
                };
                let r = ppo_loss_with_stats(&self.net, self.store.params(), &batch, &cfg).and_then(|(eval, st)| {
                    let loss = eval.loss;
                    let g = finish_gradients(eval, self.cfg.grad_clip)?;
                    Ok((loss, st, g))
                });
                if let Some((loss, st, g)) = self.acc.guard(r)? {
                    self.store.apply(&g)?;
                    self.acc.add("loss", loss);
                    self.acc.add("policy", st.policy);
                    self.acc.add("value", st.value);
                    self.acc.add("entropy", st.entropy);
                    self.acc.add("kl", st.kl);
                    kl_sum += st.kl;
                    kl_n += 1.0;
                }
            }
        }
        if self.cfg.kl_adaptive && kl_n > 0.0 {
            let kl = kl_sum / kl_n;
            if kl > 1.5 * self.cfg.kl_target {
                self.kl_coef *= 2.0;
            } else if kl < self.cfg.kl_target / 1.5 {
                self.kl_coef *= 0.5;
            }
        }
        Ok(())
    }

    /// Synchronous step over every worker's pending rollout.
    fn a2c_sync(&mut self) -> Result<()> {
        let version = self.store.version();
        let params = self.store.snapshot();
        let mut batches = Vec::new();
        for w in 0..self.rollouts.len() {
            let v = self.rollouts[w].version;
            let trajs = self.rollouts[w].take();
            if trajs.is_empty() {
                continue;
            }
            let samples = Self::ac_samples(self.gae_steps(trajs, &params)?);
            batches.push(WorkerBatch { version: v, samples });
        }
        if batches.is_empty() {
            return Ok(());
        }
        let cfg = self.ac_cfg();
        let r = a2c_update(&self.net, &mut self.store, &batches, &cfg, self.cfg.grad_clip);
        if let Some(v) = self.acc.guard(r)? {
            debug_assert_eq!(v, version + 1);
            let n: f64 = batches.iter().map(|b| b.samples.len() as f64).sum();
            self.acc.add("samples", n);
        }
        Ok(())
    }

    /// Asynchronous worker step: gradient from the worker's snapshot, applied to the store.
    fn a3c_worker(&mut self, w: usize) -> Result<()> {
        let trajs = self.rollouts[w].take();
        if !trajs.is_empty() {
            let snap = self.snapshots[w].clone();
            let samples = Self::ac_samples(self.gae_steps(trajs, &snap)?);
            let cfg = self.ac_cfg();
            let r = a3c_worker_gradient(&self.net, &snap, &samples, &cfg, self.cfg.grad_clip);
            if let Some(g) = self.acc.guard(r)? {
                a3c_apply(&g, &mut self.store)?;
                self.acc.add("staleness", (self.store.version() - 1 - self.rollouts[w].version) as f64);
            }
        }
        self.refresh(w);
        Ok(())
    }

    fn refresh(&mut self, w: usize) {
        self.snapshots[w] = self.store.snapshot();
        self.snapshot_versions[w] = self.store.version();
    }

    fn impala_cfg(&self) -> ImpalaConfig {
        ImpalaConfig {
            gamma: self.cfg.gamma,
            rho_bar: self.cfg.rho_bar,
            c_bar: self.cfg.c_bar,
            loss: self.ac_cfg(),
            clip: self.cfg.grad_clip,
            batch_trajectories: self.cfg.workers.max(1),
        }
    }

    fn impala_learn(&mut self, drain: bool) -> Result<()> {
        let cfg = self.impala_cfg();
        while self.queue.len() >= cfg.batch_trajectories || (drain && !self.queue.is_empty()) {
            let r = impala_learn_step(&self.net, &mut self.store, &mut self.queue, &cfg);
            if let Some(Some(loss)) = self.acc.guard(r)? {
                self.acc.add("loss", loss);
            }
        }
        Ok(())
    }
}

impl Learner for PgLearner {
    fn tag(&self) -> AlgoTag {
        self.tag
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn workers(&self) -> usize {
        self.rollouts.len()
    }

    fn act(&self, worker: usize, features: &[f32], rng: &mut ChaCha8Rng, explore: bool) -> Result<Decision> {
        let out = self.net.forward(self.acting_params(worker), features, &[])?;
        let logits = out[..NUM_DISCRETE_ACTIONS].to_vec();
        let lp = log_softmax(&logits);
        let a = if explore {
            sample_categorical(&softmax(&logits), rng)
        } else {
            argmax(&logits)
        };
        Ok(Decision {
            action: Action::Discrete(a),
            log_prob: lp[a],
            value: out[NUM_DISCRETE_ACTIONS],
            logits,
        })
    }

    fn record(&mut self, worker: usize, exp: Experience) -> Result<()> {
        let version = match self.tag {
            AlgoTag::A3c | AlgoTag::Impala => self.snapshot_versions[worker],
            _ => self.store.version(),
        };
        let end = exp.episode_end;
        self.rollouts[worker].push(exp, version);
        let full = self.rollouts[worker].steps >= self.cfg.n_steps;
        match self.tag {
            AlgoTag::Ppo => {}
            AlgoTag::A2c => {
                if self.rollouts.iter().all(|r| r.steps >= self.cfg.n_steps) {
                    self.a2c_sync()?;
                }
            }
            AlgoTag::A3c => {
                if full || end {
                    self.a3c_worker(worker)?;
                }
            }
            AlgoTag::Impala => {
                if full {
                    let trajs = self.rollouts[worker].take();
                    self.queue.extend(trajs);
                    // Actors refresh only at rollout boundaries.
                    self.refresh(worker);
                    self.impala_learn(false)?;
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    fn end_iteration(&mut self) -> Result<UpdateStats> {
        match self.tag {
            AlgoTag::Ppo => self.ppo_update()?,
            AlgoTag::A2c => self.a2c_sync()?,
            AlgoTag::A3c => {
                for w in 0..self.rollouts.len() {
                    self.a3c_worker(w)?;
                }
            }
            AlgoTag::Impala => {
                for w in 0..self.rollouts.len() {
                    let trajs = self.rollouts[w].take();
                    self.queue.extend(trajs);
                    self.refresh(w);
                }
                self.impala_learn(true)?;
            }
            _ => unreachable!(),
        }
        Ok(self.acc.take())
    }

    fn policy_params(&self) -> &ParameterSet {
        self.store.params()
    }
}

struct DqnLearner {
    net: Network,
    state: DqnState,
    replay: ReplayBuffer<Transition>,
    cfg: AlgoConfig,
    steps: u64,
    workers: usize,
    rng: ChaCha8Rng,
    acc: LossAcc,
}

impl Learner for DqnLearner {
    fn tag(&self) -> AlgoTag {
        AlgoTag::Dqn
    }

    fn network(&self) -> &Network {
        &self.net
    }

    fn workers(&self) -> usize {
        self.workers
    }

    fn act(&self, _worker: usize, features: &[f32], rng: &mut ChaCha8Rng, explore: bool) -> Result<Decision> {
        let q = self.net.forward(&self.state.params, features, &[])?;
        let a = if explore {
            let eps = linear_epsilon(self.steps, self.cfg.eps_start, self.cfg.eps_end, self.cfg.eps_decay_steps);
            epsilon_greedy(&q, eps, rng)
        } else {
            argmax(&q)
        };
        Ok(Decision {
            action: Action::Discrete(a),
            log_prob: 0.0,
            value: q[a],
            logits: q,
        })
    }

    fn record(&mut self, _worker: usize, exp: Experience) -> Result<()> {
        let Action::Discrete(a) = exp.decision.action else {
            return Err(Error::protocol("DQN received a continuous action"));
        };
        self.replay.push(Transition {
            features: exp.features,
            action: StoredAction::Discrete(a),
            reward: exp.reward,
            next_features: exp.next_features,
            done: exp.terminal,
        });
        self.steps += 1;
        if self.steps >= self.cfg.warmup_steps && self.steps % self.cfg.train_freq == 0 {
            if let Some(batch) = self.replay.sample(self.cfg.batch_size, &mut self.rng) {
                let r = dqn_update(&self.net, &mut self.state, &batch, self.cfg.gamma);
                if let Some(loss) = self.acc.guard(r)? {
                    self.acc.add("loss", loss);
                }
            }
        }
        Ok(())
    }

    fn end_iteration(&mut self) -> Result<UpdateStats> {
        let mut st = self.acc.take();
        st.losses.push((
            "epsilon".into(),
            linear_epsilon(self.steps, self.cfg.eps_start, self.cfg.eps_end, self.cfg.eps_decay_steps),
        ));
        Ok(st)
    }

    fn policy_params(&self) -> &ParameterSet {
        &self.state.params
    }
}

struct ContinuousLearner {
    tag: AlgoTag,
    nets: ContinuousNets,
    bundle: ActorCriticBundle,
    replay: ReplayBuffer<Transition>,
    cfg: AlgoConfig,
    steps: u64,
    workers: usize,
    rng: ChaCha8Rng,
    acc: LossAcc,
}

impl Learner for ContinuousLearner {
    fn tag(&self) -> AlgoTag {
        self.tag
    }

    fn network(&self) -> &Network {
        &self.nets.actor
    }

    fn workers(&self) -> usize {
        self.workers
    }

    fn act(&self, _worker: usize, features: &[f32], rng: &mut ChaCha8Rng, explore: bool) -> Result<Decision> {
        let mu = self.nets.actor.forward(&self.bundle.actor, features, &[])?;
        let a = if !explore {
            mu.clone()
        } else if self.steps < self.cfg.warmup_steps {
            (0..CONTINUOUS_ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            exploration_action(&mu, self.cfg.noise.sigma_explore, rng)
        };
        Ok(Decision {
            action: Action::Continuous([a[0], a[1]]),
            log_prob: 0.0,
            value: 0.0,
            logits: mu,
        })
    }

    fn record(&mut self, _worker: usize, exp: Experience) -> Result<()> {
        let Action::Continuous(a) = exp.decision.action else {
            return Err(Error::protocol("continuous learner received a discrete action"));
        };
        self.replay.push(Transition {
            features: exp.features,
            action: StoredAction::Continuous(a),
            reward: exp.reward,
            next_features: exp.next_features,
            done: exp.terminal,
        });
        self.steps += 1;
        if self.steps >= self.cfg.warmup_steps && self.steps % self.cfg.train_freq == 0 {
            if self.cfg.actor_lr_decay_steps > 0 {
                let left = 1.0 - self.steps as f64 / self.cfg.actor_lr_decay_steps as f64;
                self.bundle.actor_opt.config.lr = self.cfg.lr * self.cfg.actor_lr_scale * left.max(0.0);
            }
            if let Some(batch) = self.replay.sample(self.cfg.batch_size, &mut self.rng) {
                let r = match self.tag {
                    AlgoTag::Ddpg => ddpg_update(&self.nets, &mut self.bundle, &batch, self.cfg.gamma, self.cfg.noise.tau),
                    _ => td3_update(&self.nets, &mut self.bundle, &batch, self.cfg.gamma, &self.cfg.noise, &mut self.rng),
                };
                if let Some(st) = self.acc.guard(r)? {
                    self.acc.add("critic", st.critic_loss);
                    if let Some(a) = st.actor_loss {
                        self.acc.add("actor", a);
                    }
                }
            }
        }
        Ok(())
    }

    fn end_iteration(&mut self) -> Result<UpdateStats> {
        Ok(self.acc.take())
    }

    fn policy_params(&self) -> &ParameterSet {
        &self.bundle.actor
    }
}
