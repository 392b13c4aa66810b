//! Spectrogram encoder trained with the composite feature loss.
//!
//! The encoder is a flatten + MLP stack producing a `D`-dimensional embedding,
//! followed by a linear classifier head. Class centers used by the center and
//! separation terms are learned jointly with the network through Adam.

mod checkpoint;
mod classes;
mod encoder;
mod loss;
mod train;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use classes::{ClassEntry, ClassOrigin, ClassRegistry};
pub use encoder::{Activation, AdamState, EncoderConfig, LayerShape, TrainState};
pub use loss::{
    composite_loss, composite_loss_with_grad, LossBreakdown, LossConfig, LossGradients,
};
pub use train::{
    apply_adam, balanced_batches, batch_loss, class_means, loss_and_gradient, shuffled_batches,
    train_batches, train_epoch, train_model, warmup_and_init_centers, Dataset, EpochSummary,
    Gradients, TrainConfig,
};
