//! Learning algorithms: PPO, A2C, A3C, IMPALA and DQN over discrete actions,
//! DDPG and TD3 over continuous actions.

pub mod actor_critic;
pub mod advantage;
pub mod buffer;
pub mod config;
pub mod continuous;
pub mod dqn;
mod grad;
pub mod impala;
pub mod learner;
pub mod policy_gradient;

pub use actor_critic::{a2c_update, a3c_apply, ParameterStore, WorkerBatch};
pub use advantage::{gae, vtrace, VTrace};
pub use buffer::{Features, ReplayBuffer, StoredAction, Trajectory, TrajectoryStep, Transition};
pub use config::{AlgoConfig, AlgoTag, NoiseConfig};
pub use continuous::{ddpg_update, exploration_action, soft_update, td3_update, ActorCriticBundle, ContinuousNets};
pub use dqn::{dqn_update, epsilon_greedy, DqnState};
pub use impala::{impala_learn_step, ImpalaConfig};
pub use policy_gradient::{actor_critic_loss, ppo_loss, AcLossConfig, AcSample, PpoLossConfig, PpoSample};
pub use learner::{build_learner, critic_spec, greedy_action, policy_spec, Decision, Experience, FrozenPolicy, Learner, NetArch, UpdateStats};
