use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ControlCommand;

pub const NUM_DISCRETE_ACTIONS: usize = 9;
pub const CONTINUOUS_ACTION_DIM: usize = 2;

const STEER_LEVELS: [f64; 3] = [-0.5, 0.0, 0.5];
const PEDAL_LEVELS: [(f64, f64); 3] = [(1.0, 0.0), (0.0, 0.0), (0.0, 1.0)];

/// Network-level action before decoding into vehicle controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous([f64; CONTINUOUS_ACTION_DIM]),
}

impl Action {
    pub fn decode(&self) -> Result<ControlCommand> {
        match *self {
            Action::Discrete(i) => decode_discrete_action(i),
            Action::Continuous(a) => Ok(decode_continuous_action(a)),
        }
    }
}

/// Index `3 * s + m`: `s` selects steer left/straight/right, `m` selects
/// throttle/coast/brake.
pub fn decode_discrete_action(index: usize) -> Result<ControlCommand> {
    if index >= NUM_DISCRETE_ACTIONS {
        return Err(Error::protocol(format!(
            "discrete action {index} out of range 0..{NUM_DISCRETE_ACTIONS}"
        )));
    }
    let (throttle, brake) = PEDAL_LEVELS[index % 3];
    Ok(ControlCommand {
        steer: STEER_LEVELS[index / 3],
        throttle,
        brake,
    })
}

/// First component steers, second drives: positive is throttle, negative is brake.
pub fn decode_continuous_action(a: [f64; CONTINUOUS_ACTION_DIM]) -> ControlCommand {
    let steer = a[0].clamp(-1.0, 1.0);
    let pedal = a[1].clamp(-1.0, 1.0);
    ControlCommand {
        steer,
        throttle: pedal.max(0.0),
        brake: (-pedal).max(0.0),
    }
}
