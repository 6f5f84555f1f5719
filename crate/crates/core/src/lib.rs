//! Multi-agent driving benchmark: a kinematic 2D world, deep RL learners for
//! autonomous and adversarial cars, and the train/test/report harness.

pub mod algos;
pub mod env;
pub mod error;
pub mod geom;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod par;
pub mod sim;

pub use error::{Error, Result};
