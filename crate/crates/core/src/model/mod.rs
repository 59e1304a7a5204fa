//! Domain types shared by the simulator, policies and reports.

mod acceptance;
mod cost;
mod request;
mod thresholds;
mod time;

pub use acceptance::{acceptance_rate_at, AcceptanceKind, AcceptanceProcess};
pub use cost::{AcceptanceMode, CostModel};
pub use request::{kv_tokens, RequestId, RequestSpec, RequestState};
pub use thresholds::{queue_thresholds, QueueInterval, QueueThresholds};
pub use time::SimTime;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelError {
    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
    #[error("trace acceptance process needs at least one entry")]
    EmptyTrace,
    #[error("unknown name `{0}`")]
    UnknownName(String),
}
