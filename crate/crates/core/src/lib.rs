//! Scheduling simulator for speculative-decoding LLM inference serving.
//!
//! The [`engine`] executes draft-then-verify rounds for whichever request a
//! [`policies::SchedulerPolicy`] picks at each round boundary. Four policies
//! are provided: FCFS, predicted-length SJF, least-attained-service, and
//! LAPS-SD, which switches requests from attained-service queueing to
//! shortest-job-first once their token acceptance rate has stabilized.

pub mod builtin;
pub mod config;
pub mod engine;
pub mod estimator;
pub mod model;
pub mod policies;
pub mod report;
pub mod workload;

pub use engine::{execute_round, run_simulation, RoundOutcome, SimError, SimReport};
pub use model::{AcceptanceMode, AcceptanceProcess, CostModel, RequestSpec, RequestState, SimTime};
pub use policies::{LapsSdConfig, PolicyKind, SchedulerPolicy};
