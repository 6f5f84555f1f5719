//! Scenario orchestration: configuration, policy registry, training
//! sessions, testing runs and checkpoints.

pub mod config;
pub mod episode;
pub mod policy;
pub mod registry;
pub mod scenario;
pub mod train;

pub use crate::nn::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint};
pub use config::{parse_seed_list, Config, KeyDef, DESK_PRESET, KEYS};
pub use episode::{build_roster, run_episode, EnvParams, EpisodeOutcome, EpisodeSetup};
pub use policy::{DrivePolicy, Participant, TRAFFIC_LABEL};
pub use registry::{all_policy_names, parse_policy_name, policy_name, ActionSpace, PolicyKind, PolicyRegistry, RegistryEntry};
pub use scenario::{
    registry_root, resolve_policy, run_scenario1_training, run_scenario3_adv_training, run_testing, scenario1_session,
    untrained_adversary, FrozenGuard, ScenarioSpec, TestRun, TrainReport,
};
pub use train::{best_learner, evaluate, freeze, mix_seed, train_session, IterationRecord, SessionOutcome, SessionSpec};
