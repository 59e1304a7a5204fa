use std::collections::BTreeSet;

use super::SchedulerPolicy;
use crate::engine::RoundOutcome;
use crate::model::{RequestId, RequestSpec, RequestState, SimTime};

/// Shortest-job-first on predicted output length, non-preemptive.
#[derive(Debug, Default)]
pub struct LpSjf {
    waiting: BTreeSet<(u64, SimTime, RequestId)>,
    running: Option<RequestId>,
}

impl LpSjf {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SchedulerPolicy for LpSjf {
    fn name(&self) -> &'static str {
        "lp-sjf"
    }

    fn on_arrival(&mut self, spec: &RequestSpec, _state: &mut RequestState, _now: SimTime) {
        self.waiting
            .insert((spec.predicted_output_len, spec.arrival_time, spec.id));
    }

    fn on_round_end(
        &mut self,
        spec: &RequestSpec,
        _state: &mut RequestState,
        outcome: &RoundOutcome,
        _now: SimTime,
    ) {
        if outcome.request_completed {
            self.waiting
                .remove(&(spec.predicted_output_len, spec.arrival_time, spec.id));
            self.running = None;
        }
    }

    fn select_next(&mut self, _now: SimTime) -> Option<RequestId> {
        if self.running.is_none() {
            self.running = self.waiting.first().map(|&(_, _, id)| id);
        }
        self.running
    }
}
