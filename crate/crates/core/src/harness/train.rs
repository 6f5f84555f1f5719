//! Training sessions: learners acting in parallel worker environments
//! alongside fixed cars and scripted traffic.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algos::{build_learner, AlgoConfig, AlgoTag, Experience, Features, FrozenPolicy, Learner, NetArch, UpdateStats};
use crate::env::{DrivingEnv, Observation};
use crate::error::{Error, Result};
use crate::par;
use crate::sim::{AgentId, ControlCommand, MapId, Role};

use super::episode::{build_roster, episode_config, run_episode, EnvParams, EpisodeSetup};
use super::policy::{DrivePolicy, Participant};

/// Evaluation episodes use seeds from here on, disjoint from training seeds.
pub const EVAL_SEED_BASE: u64 = 1_000_000;
const MAX_BAD_ITERATIONS: usize = 3;

/// SplitMix64 finalizer over two words.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SessionSpec {
    pub map: MapId,
    pub tag: AlgoTag,
    pub algo: AlgoConfig,
    pub arch: NetArch,
    /// Role of every learner: `Ac` or `Adversary`.
    pub learner_role: Role,
    pub learners: usize,
    /// Cars after the learners in roster order, such as a frozen victim.
    pub fixed: Vec<Participant>,
    pub scripted: usize,
    pub env: EnvParams,
    pub workers: usize,
    pub episode_steps: usize,
    pub rollout_steps: usize,
    pub iterations: usize,
    pub total_steps: u64,
    pub eval_episodes: usize,
    pub seed: u64,
}

impl SessionSpec {
    fn validate(&self) -> Result<()> {
        if self.learners == 0 {
            return Err(Error::config("a training session needs at least one learner"));
        }
        if self.workers == 0 || self.episode_steps == 0 || self.rollout_steps == 0 {
            return Err(Error::config("workers, episode steps and rollout steps must be positive"));
        }
        if !matches!(self.learner_role, Role::Ac | Role::Adversary) {
            return Err(Error::config("learners must be autonomous cars or adversaries"));
        }
        Ok(())
    }
}

/// Summary of one training iteration for one learner. Iteration 0 is the
/// initial policy before any update.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub learner: usize,
    /// Env steps taken by all workers so far.
    pub env_steps: u64,
    /// Training episodes finished during this iteration.
    pub episodes: usize,
    /// Mean return of those episodes; NaN when none finished.
    pub train_return: f64,
    /// Mean greedy return over the fixed evaluation seeds; NaN when disabled.
    pub eval_return: f64,
    pub stats: UpdateStats,
}

pub const PROGRESS_HEADER: &str = "iteration,learner,env_steps,episodes,train_return,eval_return,updates,skipped,losses";

impl IterationRecord {
    pub fn csv_line(&self) -> String {
        let losses: Vec<String> = self.stats.losses.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.learner,
            self.env_steps,
            self.episodes,
            self.train_return,
            self.eval_return,
            self.stats.updates,
            self.stats.skipped,
            losses.join(";")
        )
    }
}

pub struct SessionOutcome {
    pub learners: Vec<Box<dyn Learner>>,
    pub records: Vec<IterationRecord>,
    pub env_steps: u64,
}

/// Frozen copy of a learner's current acting policy.
pub fn freeze(learner: &dyn Learner) -> FrozenPolicy {
    FrozenPolicy {
        tag: learner.tag(),
        net: learner.network().clone(),
        params: Arc::new(learner.policy_params().clone()),
    }
}

struct Worker {
    index: usize,
    env: Option<DrivingEnv>,
    features: Vec<Option<Features>>,
    fixed_obs: Vec<Option<Observation>>,
    returns: Vec<f64>,
    episodes: u64,
    rng: ChaCha8Rng,
}

#[derive(Default)]
struct TickOutput {
    experience: Vec<(usize, Experience)>,
    /// Per-learner returns of an episode that just ended.
    finished: Option<Vec<f64>>,
}

fn encode(learner: &dyn Learner, obs: Option<Observation>) -> Result<Features> {
    let obs = obs.ok_or_else(|| Error::protocol("learner received no observation"))?;
    Ok(Arc::from(learner.network().encode(&obs)?))
}

impl Worker {
    fn start(&mut self, spec: &SessionSpec, learners: &[Box<dyn Learner>]) -> Result<()> {
        let mut roles = vec![spec.learner_role; spec.learners];
        roles.extend(spec.fixed.iter().map(|p| p.role));
        let mut observe = vec![true; spec.learners];
        observe.extend(spec.fixed.iter().map(|p| p.policy.needs_observation()));
        let roster = build_roster(&roles, &observe, spec.scripted);
        let seed = mix_seed(mix_seed(spec.seed, self.index as u64), self.episodes);
        let (env, initial) = DrivingEnv::reset(episode_config(spec.map, roster, spec.episode_steps, seed, &spec.env))?;
        self.features = vec![None; spec.learners];
        self.fixed_obs = vec![None; spec.fixed.len()];
        for (id, o) in initial {
            let i = id.0 as usize;
            if i < spec.learners {
                self.features[i] = Some(encode(learners[i].as_ref(), Some(o))?);
            } else {
                self.fixed_obs[i - spec.learners] = Some(o);
            }
        }
        self.returns = vec![0.0; spec.learners];
        self.episodes += 1;
        self.env = Some(env);
        Ok(())
    }

    fn tick(&mut self, spec: &SessionSpec, learners: &[Box<dyn Learner>]) -> Result<TickOutput> {
        if self.env.is_none() {
            self.start(spec, learners)?;
        }
        let env = self.env.as_mut().unwrap();
        let n = spec.learners;
        let mut decisions = Vec::new();
        let mut joint: Vec<(AgentId, ControlCommand)> = Vec::new();
        for (i, learner) in learners.iter().enumerate() {
            let id = AgentId(i as u32);
            if env.is_done(id) {
                continue;
            }
            let f = self.features[i].clone().expect("live learner has features");
            let d = learner.act(self.index, &f, &mut self.rng, true)?;
            joint.push((id, d.action.decode()?));
            decisions.push((i, f, d));
        }
        for (j, p) in spec.fixed.iter().enumerate() {
            let id = AgentId((n + j) as u32);
            if !env.is_done(id) {
                joint.push((id, p.policy.control(env.world(), id, self.fixed_obs[j].as_ref())?));
            }
        }
        let results = env.step(&joint)?;
        let mut out = TickOutput::default();
        let mut decisions = decisions.into_iter();
        for (id, r) in results {
            let i = id.0 as usize;
            if i < n {
                let (li, features, decision) = decisions.next().expect("one decision per stepped learner");
                debug_assert_eq!(li, i);
                self.returns[i] += r.reward;
                let next = encode(learners[i].as_ref(), r.observation)?;
                self.features[i] = Some(next.clone());
                out.experience.push((
                    i,
                    Experience {
                        features,
                        decision,
                        reward: r.reward,
                        next_features: next,
                        terminal: r.done && !r.truncated,
                        episode_end: r.done,
                    },
                ));
            } else if i < n + spec.fixed.len() {
                self.fixed_obs[i - n] = r.observation;
            }
        }
        let learners_done = (0..n).all(|i| env.is_done(AgentId(i as u32)));
        if env.is_over() || learners_done {
            out.finished = Some(std::mem::take(&mut self.returns));
            self.env = None;
        }
        Ok(out)
    }
}

/// Mean greedy return of each learner slot's policy over the evaluation seeds.
pub fn evaluate(spec: &SessionSpec, policies: &[DrivePolicy]) -> Result<Vec<f64>> {
    if spec.eval_episodes == 0 {
        return Ok(vec![f64::NAN; policies.len()]);
    }
    let mut participants: Vec<Participant> = policies
        .iter()
        .enumerate()
        .map(|(i, p)| Participant::new(format!("learner{i}"), spec.learner_role, p.clone()))
        .collect();
    participants.extend(spec.fixed.iter().cloned());
    let setup = EpisodeSetup {
        map: spec.map,
        participants: &participants,
        scripted: spec.scripted,
        max_steps: spec.episode_steps,
        env: &spec.env,
        meta: vec![],
    };
    let outcomes = par::map_range(spec.eval_episodes, |k| run_episode(&setup, k as u64, EVAL_SEED_BASE + k as u64, false));
    let mut sums = vec![0.0; policies.len()];
    for o in outcomes {
        for (s, r) in sums.iter_mut().zip(o?.returns) {
            *s += r;
        }
    }
    Ok(sums.into_iter().map(|s| s / spec.eval_episodes as f64).collect())
}

fn eval_learners(spec: &SessionSpec, learners: &[Box<dyn Learner>]) -> Result<Vec<f64>> {
    let policies: Vec<DrivePolicy> = learners.iter().map(|l| DrivePolicy::Learned(freeze(l.as_ref()))).collect();
    evaluate(spec, &policies)
}

/// Trains `spec.learners` independent learners of one algorithm.
/// `on_iteration` sees the learners and the records of every finished
/// iteration, starting with iteration 0.
pub fn train_session(
    spec: &SessionSpec,
    mut on_iteration: impl FnMut(&[Box<dyn Learner>], &[IterationRecord]) -> Result<()>,
) -> Result<SessionOutcome> {
    spec.validate()?;
    let mut learners = (0..spec.learners)
        .map(|i| build_learner(spec.tag, &spec.algo, &spec.arch, spec.workers, mix_seed(spec.seed, 0xa11 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut workers: Vec<Worker> = (0..spec.workers)
        .map(|w| Worker {
            index: w,
            env: None,
            features: Vec::new(),
            fixed_obs: Vec::new(),
            returns: Vec::new(),
            episodes: 0,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xac7 + w as u64)),
        })
        .collect();

    let initial = eval_learners(spec, &learners)?;
    let mut records: Vec<IterationRecord> = initial
        .iter()
        .enumerate()
        .map(|(i, &e)| IterationRecord {
            iteration: 0,
            learner: i,
            env_steps: 0,
            episodes: 0,
            train_return: f64::NAN,
            eval_return: e,
            stats: UpdateStats::default(),
        })
        .collect();
    on_iteration(&learners, &records)?;

    let mut env_steps = 0u64;
    let mut bad = 0usize;
    for it in 1..=spec.iterations {
        if env_steps >= spec.total_steps {
            log::info!("step budget of {} reached before iteration {it}", spec.total_steps);
            break;
        }
        let mut finished: Vec<Vec<f64>> = Vec::new();
        for _ in 0..spec.rollout_steps {
            if env_steps >= spec.total_steps {
                break;
            }
            let outputs = {
                let learners = &learners;
                par::map_mut(&mut workers, |w| w.tick(spec, learners))
            };
            for (w, out) in outputs.into_iter().enumerate() {
                let out = out?;
                for (i, exp) in out.experience {
                    learners[i].record(w, exp)?;
                }
                finished.extend(out.finished);
            }
            env_steps += spec.workers as u64;
        }
        let stats = learners.iter_mut().map(|l| l.end_iteration()).collect::<Result<Vec<_>>>()?;
        let non_finite = stats.iter().any(|s| s.skipped > 0) || learners.iter().any(|l| !l.policy_params().all_finite());
        bad = if non_finite { bad + 1 } else { 0 };
        if bad >= MAX_BAD_ITERATIONS {
            return Err(Error::numeric(format!(
                "{} training aborted: non-finite losses in {MAX_BAD_ITERATIONS} consecutive iterations (last at {it}); \
                 try a lower train.lr or algo.grad_clip",
                spec.tag
            )));
        }
        let eval = eval_learners(spec, &learners)?;
        for (i, s) in stats.into_iter().enumerate() {
            let rets: Vec<f64> = finished.iter().map(|r| r[i]).collect();
            let train_return = if rets.is_empty() {
                f64::NAN
            } else {
                rets.iter().sum::<f64>() / rets.len() as f64
            };
            log::info!(
                "{} iteration {it} learner {i}: {} episodes, train return {train_return:.3}, eval return {:.3}",
                spec.tag,
                rets.len(),
                eval[i]
            );
            records.push(IterationRecord {
                iteration: it,
                learner: i,
                env_steps,
                episodes: rets.len(),
                train_return,
                eval_return: eval[i],
                stats: s,
            });
        }
        on_iteration(&learners, &records)?;
    }
    Ok(SessionOutcome {
        learners,
        records,
        env_steps,
    })
}

/// Index of the learner with the highest final evaluation return, lowest index on ties.
pub fn best_learner(records: &[IterationRecord]) -> usize {
    let last = records.iter().map(|r| r.iteration).max().unwrap_or(0);
    let mut best = (0, f64::NEG_INFINITY);
    for r in records.iter().filter(|r| r.iteration == last) {
        let score = if r.eval_return.is_nan() { r.train_return } else { r.eval_return };
        let score = if score.is_nan() { f64::NEG_INFINITY } else { score };
        if score > best.1 || (score == best.1 && r.learner < best.0) {
            best = (r.learner, score);
        }
    }
    best.0
}
