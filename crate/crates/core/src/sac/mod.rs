//! Soft actor-critic: replay buffer, update rules and the training loop.

mod buffer;
mod config;
mod learner;
mod train;
mod update;

pub use buffer::{ReplayBuffer, Transition};
pub use config::SacConfig;
pub use learner::{Learner, UpdateStats, LOG_ALPHA, POLICY, Q1, Q1_TARGET, Q2, Q2_TARGET};
pub use train::{
    stream_rng, train, LogRow, TrainOptions, TrainOutcome, TrainStatus, TrainingLog,
    TRAINING_LOG_HEADER,
};
pub use update::{
    action_noise, actor_objective, critic_loss, critic_target, soft_update, ActorOutput, Batch,
    Temperature,
};
