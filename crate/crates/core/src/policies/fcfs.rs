use std::collections::BTreeSet;

use super::SchedulerPolicy;
use crate::engine::RoundOutcome;
use crate::model::{RequestId, RequestSpec, RequestState, SimTime};

/// First-come-first-serve, non-preemptive.
#[derive(Debug, Default)]
pub struct Fcfs {
    waiting: BTreeSet<(SimTime, RequestId)>,
}

impl Fcfs {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SchedulerPolicy for Fcfs {
    fn name(&self) -> &'static str {
        "fcfs"
    }

    fn on_arrival(&mut self, spec: &RequestSpec, _state: &mut RequestState, _now: SimTime) {
        self.waiting.insert((spec.arrival_time, spec.id));
    }

    fn on_round_end(
        &mut self,
        spec: &RequestSpec,
        _state: &mut RequestState,
        outcome: &RoundOutcome,
        _now: SimTime,
    ) {
        if outcome.request_completed {
            self.waiting.remove(&(spec.arrival_time, spec.id));
        }
    }

    fn select_next(&mut self, _now: SimTime) -> Option<RequestId> {
        // the head only leaves on completion, so the running request is never displaced
        self.waiting.first().map(|&(_, id)| id)
    }
}
