//! The convolutional classifier: parameters, forward/backward passes, loss,
//! Adam, training with early stopping, tuning, inference and checkpoints.

mod adam;
mod checkpoint;
mod gradcheck;
mod kernels;
mod loss;
mod model;
mod params;
mod predict;
mod standardize;
mod tensor;
mod train;
mod tune;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPS_HAT};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, MAGIC, VERSION,
};
pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport, TensorCheck};
pub use loss::{
    inverse_frequency_weights, logits_grad, loss, loss_from_logits, softmax_probs, LossSpec,
    PROB_FLOOR,
};
pub use model::{backward, backward_from_logits, forward, sample_mask, Cache, Dropout};
pub use params::{
    init_params, tensor_shapes, NetParams, Weights, COLS1, COLS2, CONV1_LEN, CONV1_OUT, CONV2_OUT,
    FLAT, HIDDEN, KERNEL, ROWS1, ROWS2, TENSOR_NAMES,
};
pub use predict::{predict_chunked, predict_probs, TrainedModel, PREDICT_CHUNK};
pub use standardize::Standardizer;
pub use tensor::Tensor;
pub use train::{
    evaluate_examples, train, EarlyStopping, EpochRecord, Examples, StopDecision, TrainConfig,
    TrainOutcome,
};
pub use tune::{tune, SearchSpace, Split, Trial, TuneOutcome};
