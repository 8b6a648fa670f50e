//! A small softmax MLP trained with hand-derived adjoints.
//!
//! The network is recorded on a [`Tape`] of layer nodes during the forward
//! pass; losses that propagate mean fields through time run their own reverse
//! sweep and hand the per-step output gradients to [`Tape::backward`].

mod adam;
mod checkpoint;
mod linalg;
mod losses;
mod mlp;

pub use adam::{adam_step, AdamState, LrSchedule};
pub use checkpoint::{load_policy, read_policy, save_policy, write_policy, CHECKPOINT_MAGIC};
pub use losses::{
    bc_loss_and_grad, l1_flow_loss_and_grad, value_loss_and_grad, BcBatch,
};
pub use mlp::{Batch, Mlp, MlpPolicy, Tape};
