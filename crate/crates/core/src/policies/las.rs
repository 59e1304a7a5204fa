use std::collections::BTreeMap;

use super::SchedulerPolicy;
use crate::engine::RoundOutcome;
use crate::model::{QueueThresholds, RequestId, RequestSpec, RequestState, SimTime};

/// Least-attained-service over exponential multilevel queues.
///
/// A request sits in the queue whose interval contains its attained service
/// and is demoted after the round that crosses the queue's upper bound.
/// The lowest-index non-empty queue runs, FCFS within it, with preemption at
/// round boundaries.
#[derive(Debug)]
pub struct Las {
    thresholds: QueueThresholds,
    // (arrival, id) -> one-based queue index
    queued: BTreeMap<(SimTime, RequestId), usize>,
}

impl Las {
    pub fn new(thresholds: QueueThresholds) -> Self {
        Las {
            thresholds,
            queued: BTreeMap::new(),
        }
    }
}

impl SchedulerPolicy for Las {
    fn name(&self) -> &'static str {
        "las"
    }

    fn params(&self) -> String {
        format!("{:?}", self.thresholds.intervals())
    }

    fn on_arrival(&mut self, spec: &RequestSpec, state: &mut RequestState, _now: SimTime) {
        let q = self.thresholds.queue_for(state.attained_service);
        state.queue_index = Some(q);
        self.queued.insert((spec.arrival_time, spec.id), q);
    }

    fn on_round_end(
        &mut self,
        spec: &RequestSpec,
        state: &mut RequestState,
        outcome: &RoundOutcome,
        _now: SimTime,
    ) {
        let key = (spec.arrival_time, spec.id);
        if outcome.request_completed {
            self.queued.remove(&key);
            return;
        }
        let q = self
            .thresholds
            .queue_for(state.attained_service)
            .max(state.queue_index.unwrap_or(1));
        state.queue_index = Some(q);
        self.queued.insert(key, q);
    }

    fn select_next(&mut self, _now: SimTime) -> Option<RequestId> {
        // BTreeMap iterates in (arrival, id) order, so min_by_key keeps FCFS within a queue
        self.queued
            .iter()
            .min_by_key(|(_, &q)| q)
            .map(|(&(_, id), _)| id)
    }
}
