//! Losses, gradients, the optimizer and the training loops.

mod backward;
mod loss;
mod optim;
mod trainer;

pub use backward::{audio_backward, evaluate_loss, forward_backward, stream_backward, talker_backward, Example};
pub use loss::{loss_gen, loss_mot, loss_total, motion_losses, motion_losses_grad, LossParts, LossWeights};
pub use optim::{clip_global_norm, learning_rate_at, AdamW, AdamWConfig};
pub use trainer::{
    agent_init, mean_loss, task_examples, train_task, train_task_with, write_metrics_jsonl, MetricsRecord, Task,
    TrainOutcome, TrainingConfig,
};
