//! Function approximation: convolutional and dense networks with exact
//! reverse-mode gradients, Adam, and the checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod dist;
pub mod network;
pub mod params;
pub mod spec;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint};
pub use network::{ForwardCache, Network};
pub use params::{finish_gradients, finite_difference_error, GradientSet, LossEvaluation, Param, ParameterSet, GRAD_CLIP_NORM};
pub use spec::{Activation, ConvSpec, HeadSpec, InputSpec, NetworkSpec};
