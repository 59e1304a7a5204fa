//! Scheduling policies.
//!
//! Every policy is a small state machine driven by the engine: it hears about
//! arrivals and finished rounds and answers `select_next` at each round
//! boundary. Ties always break by `(arrival_time, id)`.

mod fcfs;
mod laps_sd;
mod las;
mod lp_sjf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::RoundOutcome;
use crate::estimator::StabilityConfig;
use crate::model::{CostModel, ModelError, QueueThresholds, RequestId, RequestSpec, RequestState, SimTime};

pub use fcfs::Fcfs;
pub use laps_sd::{estimated_remaining_time, oracle_service_time, LapsSd};
pub use las::Las;
pub use lp_sjf::LpSjf;

pub trait SchedulerPolicy {
    fn name(&self) -> &'static str;

    /// Parameter summary folded into report hashes.
    fn params(&self) -> String {
        String::new()
    }

    fn on_arrival(&mut self, spec: &RequestSpec, state: &mut RequestState, now: SimTime);

    fn on_round_end(
        &mut self,
        spec: &RequestSpec,
        state: &mut RequestState,
        outcome: &RoundOutcome,
        now: SimTime,
    );

    /// Called when a request's acceptance rate has stabilized.
    fn on_stabilized(&mut self, _state: &RequestState, _estimate: SimTime, _now: SimTime) {}

    fn select_next(&mut self, now: SimTime) -> Option<RequestId>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "fcfs")]
    Fcfs,
    #[serde(rename = "lp-sjf")]
    LpSjf,
    #[serde(rename = "las")]
    Las,
    #[serde(rename = "laps-sd")]
    LapsSd,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Fcfs,
        PolicyKind::LpSjf,
        PolicyKind::Las,
        PolicyKind::LapsSd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Fcfs => "fcfs",
            PolicyKind::LpSjf => "lp-sjf",
            PolicyKind::Las => "las",
            PolicyKind::LapsSd => "laps-sd",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(PolicyKind::as_str).join(", ")
    }

    pub fn uses_queues(self) -> bool {
        matches!(self, PolicyKind::Las | PolicyKind::LapsSd)
    }

    pub fn build(self, cfg: &LapsSdConfig) -> Result<Box<dyn SchedulerPolicy + Send>, ModelError> {
        Ok(match self {
            PolicyKind::Fcfs => Box::new(Fcfs::new()),
            PolicyKind::LpSjf => Box::new(LpSjf::new()),
            PolicyKind::Las => Box::new(Las::new(cfg.queues.thresholds()?)),
            PolicyKind::LapsSd => Box::new(LapsSd::new(cfg.clone())?),
        })
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownName(s.to_owned()))
    }
}

/// Multilevel queue layout shared by LAS and LAPS-SD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub k: usize,
    #[serde(rename = "s1_up_us")]
    pub s1_up: SimTime,
    pub m: f64,
}

impl QueueConfig {
    pub fn thresholds(&self) -> Result<QueueThresholds, ModelError> {
        QueueThresholds::new(self.k, self.s1_up, self.m)
    }
}

impl Default for QueueConfig {
    fn default() -> Self {
        QueueConfig {
            k: 4,
            s1_up: SimTime::from_ms_int(250),
            m: 2.0,
        }
    }
}

/// Where a request goes once it becomes perceptible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Queue whose interval contains the estimated total execution time.
    #[default]
    EstimatedTotal,
    /// Stay in the queue given by attained service.
    AttainedService,
}

/// Source of execution-time estimates for LAPS-SD.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateSource {
    /// Detect stabilization from the observed acceptance history.
    #[default]
    Detected,
    /// Every request is perceptible on arrival with its true expected
    /// service time. Used to check the policy against exact schedules.
    Oracle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LapsSdConfig {
    pub queues: QueueConfig,
    pub stability: StabilityConfig,
    /// Mirrors the engine's cost model for execution-time estimates.
    pub cost: CostModel,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub estimates: EstimateSource,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("sjf".parse::<PolicyKind>().is_err());
        assert_eq!(PolicyKind::valid_names(), "fcfs, lp-sjf, las, laps-sd");
    }
}
