//! Exact inference on compiled polytrees by λ/π message passing.

mod fastpath;
mod session;
mod tensor;

pub use fastpath::{fast_path_messages, tensor_messages, NodeMessages};
pub use session::{
    BeliefChange, BeliefDelta, ImpactMetric, ImpactReport, MessageStore, Schedule, Session, SessionOptions,
    SettleStats, DELTA_THRESHOLD,
};
pub use tensor::Semiring;
