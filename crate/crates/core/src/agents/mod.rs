//! Real-time actor-critic and soft actor-critic agents, their replay
//! memory and the training loop.

mod agent;
pub mod exact;
mod hyper;
pub mod replay;
pub mod train;

pub use agent::{polyak_update, Agent, AgentKind, Losses, Prepared, UpdateReport};
pub use hyper::Hyperparameters;
pub use replay::{Batch, ReplayMemory, ReplayRecord};
pub use train::{area_under_curve, evaluate, train, Abort, CurveRecord, TrainConfig, TrainOutcome};
