use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{CONTINUOUS_ACTION_DIM, NUM_DISCRETE_ACTIONS};
use crate::env::observation::{OBS_CHANNELS, OBS_SIZE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputSpec {
    /// Channel-last image, average-pooled by `pool` before the first layer.
    Image {
        height: usize,
        width: usize,
        channels: usize,
        pool: usize,
    },
    /// Plain feature vector (used by small test networks).
    Flat { len: usize },
}

impl InputSpec {
    pub fn observation(pool: usize) -> Self {
        InputSpec::Image {
            height: OBS_SIZE,
            width: OBS_SIZE,
            channels: OBS_CHANNELS,
            pool,
        }
    }

    /// Length of the raw input before pooling.
    pub fn raw_len(&self) -> usize {
        match *self {
            InputSpec::Image {
                height,
                width,
                channels,
                ..
            } => height * width * channels,
            InputSpec::Flat { len } => len,
        }
    }

    /// Shape `(h, w, c)` after pooling; flat inputs are `(1, 1, len)`.
    pub fn feature_shape(&self) -> (usize, usize, usize) {
        match *self {
            InputSpec::Image {
                height,
                width,
                channels,
                pool,
            } => (height / pool, width / pool, channels),
            InputSpec::Flat { len } => (1, 1, len),
        }
    }

    pub fn feature_len(&self) -> usize {
        let (h, w, c) = self.feature_shape();
        h * w * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadSpec {
    /// Categorical logits followed by one state value.
    PolicyValue { actions: usize },
    Categorical { actions: usize },
    /// Tanh-squashed mean plus a state-independent log standard deviation.
    Gaussian { dims: usize },
    /// Tanh-squashed deterministic action.
    Deterministic { dims: usize },
    Value,
    /// One Q-value per discrete action.
    QValues { actions: usize },
    /// Scalar Q(s, a); the action enters through `extra_inputs`.
    StateActionValue,
}

impl HeadSpec {
    /// Number of values returned by the forward pass.
    pub fn output_len(&self) -> usize {
        match *self {
            HeadSpec::PolicyValue { actions } => actions + 1,
            HeadSpec::Categorical { actions } | HeadSpec::QValues { actions } => actions,
            HeadSpec::Gaussian { dims } => 2 * dims,
            HeadSpec::Deterministic { dims } => dims,
            HeadSpec::Value | HeadSpec::StateActionValue => 1,
        }
    }

    /// Width of the final dense layer (log-std is a free parameter, not a layer output).
    pub fn dense_len(&self) -> usize {
        match *self {
            HeadSpec::Gaussian { dims } => dims,
            other => other.output_len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputSpec,
    pub convs: Vec<ConvSpec>,
    pub hidden: Vec<usize>,
    /// Values concatenated to the input of dense layer `extra_layer`
    /// (0 is the flattened trunk output).
    pub extra_inputs: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub extra_layer: usize,
    pub head: HeadSpec,
    pub activation: Activation,
}

impl NetworkSpec {
    /// Full-size image network: conv(16, 8x8, /4) -> conv(32, 4x4, /2) -> dense(256).
    pub fn conv(head: HeadSpec) -> Self {
        Self {
            input: InputSpec::observation(1),
            convs: vec![
                ConvSpec {
                    filters: 16,
                    kernel: 8,
                    stride: 4,
                },
                ConvSpec {
                    filters: 32,
                    kernel: 4,
                    stride: 2,
                },
            ],
            hidden: vec![256],
            extra_inputs: extra_for(head),
            extra_layer: 0,
            head,
            activation: Activation::Relu,
        }
    }

    /// Desk-scale network: the observation average-pooled by `pool`, then an MLP.
    pub fn tiny(head: HeadSpec, pool: usize, hidden: Vec<usize>) -> Self {
        Self {
            input: InputSpec::observation(pool),
            convs: Vec::new(),
            hidden,
            extra_inputs: extra_for(head),
            extra_layer: 0,
            head,
            activation: Activation::Relu,
        }
    }

    pub fn flat(len: usize, hidden: Vec<usize>, head: HeadSpec, activation: Activation) -> Self {
        Self {
            input: InputSpec::Flat { len },
            convs: Vec::new(),
            hidden,
            extra_inputs: extra_for(head),
            extra_layer: 0,
            head,
            activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let InputSpec::Image {
            height, width, pool, ..
        } = self.input
        {
            if pool == 0 || height % pool != 0 || width % pool != 0 {
                return Err(Error::config(format!("pool factor {pool} must divide {height}x{width}")));
            }
        } else if !self.convs.is_empty() {
            return Err(Error::config("convolutions need an image input"));
        }
        let (mut h, mut w, _) = self.input.feature_shape();
        for c in &self.convs {
            if c.kernel == 0 || c.stride == 0 || c.filters == 0 || c.kernel > h || c.kernel > w {
                return Err(Error::config(format!("conv layer {c:?} does not fit a {h}x{w} input")));
            }
            h = (h - c.kernel) / c.stride + 1;
            w = (w - c.kernel) / c.stride + 1;
        }
        if self.extra_layer > self.hidden.len() {
            return Err(Error::config("extra inputs must join at an existing dense layer"));
        }
        if self.hidden.iter().any(|&n| n == 0) {
            return Err(Error::config("hidden layer widths must be positive"));
        }
        match self.head {
            HeadSpec::StateActionValue if self.extra_inputs == 0 => {
                Err(Error::config("state-action value head needs extra action inputs"))
            }
            HeadSpec::PolicyValue { actions } | HeadSpec::Categorical { actions } | HeadSpec::QValues { actions }
                if actions == 0 =>
            {
                Err(Error::config("discrete heads need at least one action"))
            }
            _ => Ok(()),
        }
    }

    /// Stable hash binding parameter sets and checkpoints to this spec.
    pub fn hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    /// Whether the head matches the environment's discrete or continuous action contract.
    pub fn matches_action_space(&self) -> bool {
        match self.head {
            HeadSpec::PolicyValue { actions } | HeadSpec::Categorical { actions } | HeadSpec::QValues { actions } => {
                actions == NUM_DISCRETE_ACTIONS
            }
            HeadSpec::Gaussian { dims } | HeadSpec::Deterministic { dims } => dims == CONTINUOUS_ACTION_DIM,
            HeadSpec::Value => true,
            HeadSpec::StateActionValue => self.extra_inputs == CONTINUOUS_ACTION_DIM,
        }
    }
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

fn extra_for(head: HeadSpec) -> usize {
    match head {
        HeadSpec::StateActionValue => CONTINUOUS_ACTION_DIM,
        _ => 0,
    }
}
