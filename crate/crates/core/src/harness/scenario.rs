//! The three scenarios: multi-agent training, testing, and adversarial
//! training against a frozen victim.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::algos::{AlgoTag, FrozenPolicy, Learner};
use crate::error::{Error, Result};
use crate::nn::save_checkpoint;
use crate::par;
use crate::sim::{MapId, Role};

use super::config::Config;
use super::episode::{run_episode, EnvParams, EpisodeSetup};
use super::policy::{DrivePolicy, Participant};
use super::registry::{parse_policy_name, policy_name, ActionSpace, PolicyKind, PolicyRegistry, RegistryEntry};
use super::train::{best_learner, freeze, mix_seed, train_session, IterationRecord, SessionSpec, PROGRESS_HEADER};

/// Where the registry lives: `registry.path`, or the output root.
pub fn registry_root(cfg: &Config, out: &Path) -> PathBuf {
    match cfg.get("registry.path").trim() {
        "" => out.to_path_buf(),
        p => PathBuf::from(p),
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub name: String,
    pub checkpoint: PathBuf,
    pub records: Vec<IterationRecord>,
    /// Learner whose parameters were registered.
    pub best: usize,
    pub env_steps: u64,
}

fn base_session(cfg: &Config, tag: AlgoTag) -> Result<SessionSpec> {
    let mut algo = cfg.algo_config()?;
    algo.workers = cfg.get_usize("train.workers")?;
    Ok(SessionSpec {
        map: cfg.map()?,
        tag,
        algo,
        arch: cfg.net_arch()?,
        learner_role: Role::Ac,
        learners: cfg.get_usize("train.n_drl")?,
        fixed: vec![],
        scripted: cfg.get_usize("train.scripted")?,
        env: EnvParams::from_config(cfg)?,
        workers: cfg.get_usize("train.workers")?,
        episode_steps: cfg.get_usize("train.episode_steps")?,
        rollout_steps: cfg.get_usize("train.rollout_steps")?,
        iterations: cfg.get_usize("train.iterations")?,
        total_steps: cfg.get_u64("train.total_steps")?,
        eval_episodes: cfg.get_usize("train.eval_episodes")?,
        seed: cfg.get_u64("seeds.train")?,
    })
}

/// Session settings for scenario-1 training of `algo.tag`.
pub fn scenario1_session(cfg: &Config) -> Result<SessionSpec> {
    base_session(cfg, cfg.algo_tag()?)
}

/// Runs a session, writing progress, intermediate checkpoints and the final
/// registered checkpoint of the best learner.
fn train_and_register(
    cfg: &Config,
    out: &Path,
    spec: &SessionSpec,
    name: &str,
    victim: Option<String>,
) -> Result<TrainReport> {
    let interval = cfg.get_usize("train.checkpoint_interval")?;
    let train_dir = out.join("train").join(name);
    let ck_dir = out.join("checkpoints");
    std::fs::create_dir_all(&train_dir)?;
    std::fs::write(train_dir.join("config.txt"), cfg.to_text())?;
    let progress = train_dir.join("progress.csv");
    let write_progress = |records: &[IterationRecord]| -> Result<()> {
        let mut text = String::from(PROGRESS_HEADER);
        text.push('\n');
        for r in records {
            writeln!(text, "{}", r.csv_line()).unwrap();
        }
        std::fs::write(&progress, text)?;
        Ok(())
    };
    let outcome = train_session(spec, |learners: &[Box<dyn Learner>], records| {
        write_progress(records)?;
        let it = records.last().map(|r| r.iteration).unwrap_or(0);
        if interval > 0 && it > 0 && it % interval == 0 {
            for (i, l) in learners.iter().enumerate() {
                let path = ck_dir.join(name).join(format!("learner{i}_iter{it:04}.ckpt"));
                save_checkpoint(&path, name, l.policy_params())?;
            }
        }
        Ok(())
    })?;
    let best = best_learner(&outcome.records);
    let learner = &outcome.learners[best];
    let rel = PathBuf::from("checkpoints").join(format!("{name}.ckpt"));
    let reg_root = registry_root(cfg, out);
    let checkpoint = out.join(&rel);
    save_checkpoint(&checkpoint, name, learner.policy_params())?;
    let mut registry = PolicyRegistry::open(&reg_root)?;
    let stored = pathdiff(&checkpoint, &reg_root);
    registry.insert(
        name,
        RegistryEntry {
            algo: spec.tag,
            action_space: ActionSpace::of(spec.tag),
            checkpoint: stored,
            spec: learner.network().spec().clone(),
            victim,
        },
    )?;
    registry.save()?;
    log::info!("registered {name} (learner {best}) at {}", checkpoint.display());
    Ok(TrainReport {
        name: name.to_string(),
        checkpoint,
        records: outcome.records,
        best,
        env_steps: outcome.env_steps,
    })
}

/// Path of `target` relative to `base` when it lies below it, else absolute.
fn pathdiff(target: &Path, base: &Path) -> PathBuf {
    match target.strip_prefix(base) {
        Ok(rel) => rel.to_path_buf(),
        Err(_) => std::path::absolute(target).unwrap_or_else(|_| target.to_path_buf()),
    }
}

/// Scenario 1: trains `train.n_drl` learners of `algo.tag` with scripted
/// traffic and registers the best one as `AC-<ALGO>`.
pub fn run_scenario1_training(cfg: &Config, out: &Path) -> Result<TrainReport> {
    let spec = scenario1_session(cfg)?;
    let name = policy_name(PolicyKind::Ac, spec.tag);
    train_and_register(cfg, out, &spec, &name, None)
}

/// Resolves a policy name to a participant policy: `scripted`, `brake`, or a
/// registry entry.
pub fn resolve_policy(name: &str, registry: &PolicyRegistry) -> Result<DrivePolicy> {
    if let Some(p) = DrivePolicy::builtin(name) {
        return Ok(p);
    }
    Ok(DrivePolicy::Learned(registry.load(name)?))
}

/// The adversary as initialized by a session with this config, before any update.
pub fn untrained_adversary(cfg: &Config) -> Result<FrozenPolicy> {
    let spec = scenario3_session(cfg, vec![])?;
    let learner = crate::algos::build_learner(spec.tag, &spec.algo, &spec.arch, spec.workers, mix_seed(spec.seed, 0xa11))?;
    Ok(freeze(learner.as_ref()))
}

fn scenario3_session(cfg: &Config, fixed: Vec<Participant>) -> Result<SessionSpec> {
    let tag: AlgoTag = cfg.get("adversary.algo").parse()?;
    let mut spec = base_session(cfg, tag)?;
    spec.learner_role = Role::Adversary;
    spec.learners = 1;
    spec.fixed = fixed;
    spec.scripted = cfg.get_usize("adversary.scripted")?;
    spec.iterations = cfg.get_usize("adversary.iterations")?;
    spec.total_steps = cfg.get_u64("adversary.total_steps")?;
    Ok(spec)
}

fn victim_participant(cfg: &Config, registry: &PolicyRegistry) -> Result<Participant> {
    let name = cfg.get("adversary.victim").trim().to_string();
    let policy = match name.as_str() {
        "scripted" => DrivePolicy::Scripted,
        _ => {
            let (kind, _) = parse_policy_name(&name)?;
            if kind != PolicyKind::Ac {
                return Err(Error::config(format!("victim {name} is not an AC policy")));
            }
            DrivePolicy::Learned(registry.load(&name)?)
        }
    };
    Ok(Participant::new(name, Role::Ac, policy))
}

/// Snapshot of a frozen victim: parameter bits and checkpoint bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenGuard {
    fingerprint: Vec<u32>,
    file: Option<(PathBuf, Vec<u8>)>,
}

impl FrozenGuard {
    pub fn capture(policy: &DrivePolicy, checkpoint: Option<&Path>) -> Result<Self> {
        let fingerprint = match policy {
            DrivePolicy::Learned(p) => p.params.fingerprint(),
            _ => Vec::new(),
        };
        let file = match checkpoint {
            Some(p) => Some((p.to_path_buf(), std::fs::read(p)?)),
            None => None,
        };
        Ok(Self { fingerprint, file })
    }

    pub fn verify(&self, policy: &DrivePolicy) -> Result<()> {
        let now = Self::capture(policy, self.file.as_ref().map(|(p, _)| p.as_path()))?;
        if now.fingerprint != self.fingerprint {
            return Err(Error::FrozenViolation("victim parameters changed during adversarial training".into()));
        }
        if now.file != self.file {
            return Err(Error::FrozenViolation("victim checkpoint file changed during adversarial training".into()));
        }
        Ok(())
    }
}

/// Scenario 3: trains one `adversary.algo` adversary against the frozen
/// `adversary.victim` and registers it as `alpha-<ALGO>`.
pub fn run_scenario3_adv_training(cfg: &Config, out: &Path) -> Result<TrainReport> {
    let registry = PolicyRegistry::open(&registry_root(cfg, out))?;
    let victim = victim_participant(cfg, &registry)?;
    let victim_ck = match victim.policy {
        DrivePolicy::Learned(_) => Some(registry.checkpoint_path(&victim.label)?),
        _ => None,
    };
    let guard = FrozenGuard::capture(&victim.policy, victim_ck.as_deref())?;
    let spec = scenario3_session(cfg, vec![victim.clone()])?;
    let name = policy_name(PolicyKind::Alpha, spec.tag);
    let report = train_and_register(cfg, out, &spec, &name, Some(victim.label.clone()))?;
    guard.verify(&spec.fixed[0].policy)?;
    Ok(report)
}

/// A testing run: frozen participants over a list of episode seeds.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub kind: u8,
    pub map: MapId,
    pub participants: Vec<Participant>,
    pub scripted: usize,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub env: EnvParams,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.participants.is_empty() {
            return Err(Error::config("testing roster has no policies"));
        }
        if self.steps == 0 || self.seeds.is_empty() {
            return Err(Error::config("testing needs at least one episode and one step"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("duplicate episode seeds"));
        }
        match self.kind {
            1 => {}
            2 => {
                if self.participants.len() != 1 || self.scripted != 0 {
                    return Err(Error::config("scenario 2 runs exactly one policy and no other cars"));
                }
            }
            3 => {
                let adv = self.participants.iter().filter(|p| p.role == Role::Adversary).count();
                let victims = self.participants.iter().filter(|p| p.role == Role::Ac).count();
                if adv != 1 || victims != 1 {
                    return Err(Error::config("scenario 3 runs one adversary against one frozen victim"));
                }
            }
            k => return Err(Error::config(format!("unknown scenario kind {k}"))),
        }
        Ok(())
    }

    /// Directory name for this run's logs.
    pub fn run_label(&self) -> String {
        let mut s = format!("scenario{}_{}", self.kind, self.map.as_str());
        if self.kind == 3 {
            let adv = self.participants.iter().find(|p| p.role == Role::Adversary).unwrap();
            s.push('_');
            s.push_str(&adv.label.replace(':', "_"));
        }
        s
    }

    /// Builds the testing roster from `scenario.*` and `adversary.*` keys.
    pub fn from_config(cfg: &Config, registry: &PolicyRegistry) -> Result<Self> {
        let kind: u8 = cfg
            .get("scenario.kind")
            .parse()
            .map_err(|_| Error::config(format!("scenario.kind = '{}' is not 1, 2 or 3", cfg.get("scenario.kind"))))?;
        let map = cfg.map()?;
        let (participants, scripted) = match kind {
            1 => {
                let mut names = cfg.get_list("scenario.policies");
                if names.len() == 1 && names[0] == "all" {
                    names = AlgoTag::ALL
                        .iter()
                        .map(|&t| policy_name(PolicyKind::Ac, t))
                        .filter(|n| registry.entries.contains_key(n))
                        .collect();
                    if names.is_empty() {
                        return Err(Error::config(format!(
                            "no AC policies registered under {}; run train first",
                            registry.root().display()
                        )));
                    }
                }
                let parts = names
                    .iter()
                    .map(|n| Ok(Participant::new(n.clone(), Role::Ac, resolve_policy(n, registry)?)))
                    .collect::<Result<Vec<_>>>()?;
                (parts, cfg.get_usize("scenario.scripted")?)
            }
            2 => {
                let n = cfg.get("scenario.policy").to_string();
                (vec![Participant::new(n.clone(), Role::Ac, resolve_policy(&n, registry)?)], 0)
            }
            3 => {
                let victim = victim_participant(cfg, registry)?;
                let tag: AlgoTag = cfg.get("adversary.algo").parse()?;
                let name = policy_name(PolicyKind::Alpha, tag);
                let adversary = if cfg.get_bool("adversary.untrained")? {
                    Participant::new(format!("{name}:untrained"), Role::Adversary, DrivePolicy::Learned(untrained_adversary(cfg)?))
                } else {
                    Participant::new(name.clone(), Role::Adversary, resolve_policy(&name, registry)?)
                };
                (vec![adversary, victim], cfg.get_usize("adversary.scripted")?)
            }
            k => return Err(Error::config(format!("unknown scenario kind {k}"))),
        };
        let spec = Self {
            kind,
            map,
            participants,
            scripted,
            seeds: cfg.seeds()?,
            steps: cfg.test_steps(map)?,
            env: EnvParams::from_config(cfg)?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct TestRun {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Steps executed by each episode, in seed order.
    pub steps: Vec<u64>,
}

pub fn episode_file_name(seed: u64) -> String {
    format!("episode_{seed:06}.csv")
}

/// Runs every seed with greedy, frozen policies and writes one log per episode into `dir`.
pub fn run_testing(spec: &ScenarioSpec, dir: &Path) -> Result<TestRun> {
    spec.validate()?;
    std::fs::create_dir_all(dir)?;
    let setup = EpisodeSetup {
        map: spec.map,
        participants: &spec.participants,
        scripted: spec.scripted,
        max_steps: spec.steps,
        env: &spec.env,
        meta: vec![("scenario".into(), spec.kind.to_string())],
    };
    let results = par::map_range(spec.seeds.len(), |k| -> Result<(PathBuf, u64)> {
        let seed = spec.seeds[k];
        let out = run_episode(&setup, k as u64, seed, true)?;
        let path = dir.join(episode_file_name(seed));
        std::fs::write(&path, out.log.expect("log requested").to_text())?;
        Ok((path, out.steps))
    });
    let mut run = TestRun {
        dir: dir.to_path_buf(),
        files: Vec::new(),
        steps: Vec::new(),
    };
    for r in results {
        let (p, s) = r?;
        run.files.push(p);
        run.steps.push(s);
    }
    log::info!("wrote {} episode logs to {}", run.files.len(), dir.display());
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EpisodeLog;

    fn desk(extra: &[&str]) -> Config {
        let mut c = Config::default();
        c.apply_desk_scale();
        for kv in [
            "scenario.map=straight",
            "train.iterations=1",
            "train.rollout_steps=30",
            "train.episode_steps=20",
            "train.n_drl=1",
            "train.scripted=1",
            "net.pool=14",
            "net.hidden=8",
            "algo.warmup_steps=10",
            "algo.ppo_epochs=1",
            "adversary.iterations=1",
            "seeds.list=0..3",
            "scenario.steps=25",
        ] {
            c.set_override(kv).unwrap();
        }
        for kv in extra {
            c.set_override(kv).unwrap();
        }
        c
    }

    #[test]
    fn scenario2_brake_has_no_collisions() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(&["scenario.kind=2", "scenario.policy=brake"]);
        let reg = PolicyRegistry::new(dir.path());
        let spec = ScenarioSpec::from_config(&cfg, &reg).unwrap();
        let run = run_testing(&spec, &dir.path().join("logs")).unwrap();
        assert_eq!(run.files.len(), 3);
        assert_eq!(run.steps, vec![25, 25, 25]);
        for f in &run.files {
            let log = EpisodeLog::parse(&std::fs::read_to_string(f).unwrap()).unwrap();
            assert!(log.records.iter().all(|r| !r.cv));
            assert_eq!(log.meta("scenario"), Some("2"));
        }
    }

    #[test]
    fn scenario2_rejects_extra_cars() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PolicyRegistry::new(dir.path());
        let mut spec = ScenarioSpec::from_config(&desk(&["scenario.kind=2", "scenario.policy=brake"]), &reg).unwrap();
        spec.scripted = 1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn missing_checkpoint_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let reg = PolicyRegistry::new(dir.path());
        let err = ScenarioSpec::from_config(&desk(&["scenario.kind=2", "scenario.policy=AC-PPO"]), &reg).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn train_then_test_then_adversary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = desk(&["algo.tag=A3C"]);
        let rep = run_scenario1_training(&cfg, dir.path()).unwrap();
        assert_eq!(rep.name, "AC-A3C");
        let reg = PolicyRegistry::open(dir.path()).unwrap();
        assert_eq!(*reg.load("AC-A3C").unwrap().params, crate::nn::load_checkpoint(&rep.checkpoint).unwrap().params);

        let test_cfg = desk(&["scenario.kind=1", "scenario.policies=AC-A3C,brake"]);
        let spec = ScenarioSpec::from_config(&test_cfg, &reg).unwrap();
        let run = run_testing(&spec, &dir.path().join("logs")).unwrap();
        assert_eq!(run.files.len(), 3);

        let adv_cfg = desk(&["adversary.victim=AC-A3C", "adversary.algo=PPO"]);
        let before = std::fs::read(&rep.checkpoint).unwrap();
        let adv = run_scenario3_adv_training(&adv_cfg, dir.path()).unwrap();
        assert_eq!(adv.name, "alpha-PPO");
        assert_eq!(std::fs::read(&rep.checkpoint).unwrap(), before);
        let reg = PolicyRegistry::open(dir.path()).unwrap();
        assert_eq!(reg.get("alpha-PPO").unwrap().victim.as_deref(), Some("AC-A3C"));

        let s3 = ScenarioSpec::from_config(&desk(&["scenario.kind=3", "adversary.victim=AC-A3C"]), &reg).unwrap();
        assert_eq!(s3.participants[0].role, Role::Adversary);
        assert_eq!(s3.run_label(), "scenario3_straight_alpha-PPO");
    }

    #[test]
    fn frozen_guard_detects_mutation() {
        let dir = tempfile::tempdir().unwrap();
        let net = crate::nn::Network::new(crate::algos::policy_spec(AlgoTag::Ppo, &crate::algos::NetArch::tiny())).unwrap();
        let params = net.init(1);
        let path = dir.path().join("v.ckpt");
        save_checkpoint(&path, "AC-PPO", &params).unwrap();
        let mut policy = FrozenPolicy {
            tag: AlgoTag::Ppo,
            net,
            params: std::sync::Arc::new(params),
        };
        let guard = FrozenGuard::capture(&DrivePolicy::Learned(policy.clone()), Some(&path)).unwrap();
        guard.verify(&DrivePolicy::Learned(policy.clone())).unwrap();
        let mut changed = (*policy.params).clone();
        changed.params[0].data[0] += 1.0;
        policy.params = std::sync::Arc::new(changed.clone());
        assert!(matches!(guard.verify(&DrivePolicy::Learned(policy.clone())), Err(Error::FrozenViolation(_))));
        save_checkpoint(&path, "AC-PPO", &changed).unwrap();
        let guard2 = FrozenGuard::capture(&DrivePolicy::Learned(policy.clone()), Some(&path)).unwrap();
        std::fs::write(&path, b"tampered").unwrap();
        assert!(matches!(guard2.verify(&DrivePolicy::Learned(policy)), Err(Error::FrozenViolation(_))));
    }
}
