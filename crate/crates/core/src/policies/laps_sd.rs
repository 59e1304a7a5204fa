use std::collections::BTreeMap;

use super::{EstimateSource, LapsSdConfig, Placement, SchedulerPolicy};
use crate::engine::{execute_round, RoundOutcome};
use crate::estimator::{estimate_execution_time, is_stable, predict_acceptance, EstimatorError};
use crate::model::{
    AcceptanceMode, CostModel, ModelError, QueueThresholds, RequestId, RequestSpec, RequestState,
    SimTime,
};

#[derive(Debug, Clone, Copy)]
struct Entry {
    queue: usize,
    perceptible: bool,
    remaining: SimTime,
}

/// Least-attained/perceived-service scheduling for speculative decoding.
///
/// Requests start non-perceptible in Q1 and are demoted through exponential
/// queues by attained service, with preemption at round boundaries. Once a
/// request's acceptance rate stabilizes it becomes perceptible: its execution
/// time is estimated, it is placed by that estimate, and it is scheduled
/// shortest-remaining-first within its queue. Perceptible requests are
/// preferred over non-perceptible ones in the same queue and, once started,
/// run to completion.
#[derive(Debug)]
pub struct LapsSd {
    cfg: LapsSdConfig,
    thresholds: QueueThresholds,
    entries: BTreeMap<(SimTime, RequestId), Entry>,
    locked: Option<RequestId>,
}

impl LapsSd {
    pub fn new(cfg: LapsSdConfig) -> Result<Self, ModelError> {
        let thresholds = cfg.queues.thresholds()?;
        cfg.cost.validate()?;
        Ok(LapsSd {
            cfg,
            thresholds,
            entries: BTreeMap::new(),
            locked: None,
        })
    }

    pub fn config(&self) -> &LapsSdConfig {
        &self.cfg
    }

    fn placement_queue(&self, state: &RequestState, total: SimTime) -> usize {
        match self.cfg.placement {
            Placement::EstimatedTotal => self.thresholds.queue_for(total),
            Placement::AttainedService => self
                .thresholds
                .queue_for(state.attained_service)
                .max(state.queue_index.unwrap_or(1)),
        }
    }

    fn remaining(&self, spec: &RequestSpec, state: &RequestState) -> SimTime {
        match self.cfg.estimates {
            EstimateSource::Oracle => state
                .estimated_total_time
                .unwrap_or(SimTime::ZERO)
                .saturating_sub(state.attained_service),
            EstimateSource::Detected => {
                estimated_remaining_time(state, spec, &self.cfg.cost).unwrap_or(SimTime::ZERO)
            }
        }
    }
}

/// Estimated time still needed by a perceptible request: the execution-time
/// estimate over its predicted remaining length, at the frozen acceptance rate.
pub fn estimated_remaining_time(
    state: &RequestState,
    spec: &RequestSpec,
    cost: &CostModel,
) -> Result<SimTime, EstimatorError> {
    let rate = match (state.perceptible, state.predicted_accept_rate) {
        (true, Some(a)) => a,
        _ => return Err(EstimatorError::NotPerceptible),
    };
    let left = spec.predicted_output_len.saturating_sub(state.tokens_accepted);
    Ok(estimate_execution_time(
        left,
        rate,
        cost.spec_len,
        cost.t_ssm_per_token,
        cost.t_llm_verify,
    ))
}

/// True service time of `spec` under `cost`: exact for fluid acceptance,
/// the expected value at the process's stable rate otherwise.
pub fn oracle_service_time(spec: &RequestSpec, cost: &CostModel) -> SimTime {
    match cost.acceptance_mode {
        AcceptanceMode::Fluid => {
            let mut st = RequestState::new(spec.id);
            while st.tokens_accepted < spec.true_output_len {
                if execute_round(&mut st, spec, cost, 0).is_err() {
                    break;
                }
            }
            st.attained_service
        }
        AcceptanceMode::Truncated | AcceptanceMode::Independent => {
            let a = spec.acceptance.stable_rate;
            let n = cost.spec_len;
            let per_round = if cost.acceptance_mode == AcceptanceMode::Truncated {
                (1..=n).map(|k| a.powi(k as i32)).sum::<f64>() + 1.0
            } else {
                f64::from(n) * a + 1.0
            };
            let rounds = spec.true_output_len as f64 / per_round;
            SimTime::from_us_f64(rounds * cost.round_duration().as_us() as f64)
        }
    }
}

impl SchedulerPolicy for LapsSd {
    fn name(&self) -> &'static str {
        "laps-sd"
    }

    fn params(&self) -> String {
        serde_json::to_string(&self.cfg).unwrap_or_default()
    }

    fn on_arrival(&mut self, spec: &RequestSpec, state: &mut RequestState, now: SimTime) {
        let mut entry = Entry {
            queue: 1,
            perceptible: false,
            remaining: SimTime::ZERO,
        };
        if self.cfg.estimates == EstimateSource::Oracle {
            let total = oracle_service_time(spec, &self.cfg.cost);
            state.mark_perceptible(spec.acceptance.rate_at(0), total);
            entry.queue = self.placement_queue(state, total);
            entry.perceptible = true;
            entry.remaining = self.remaining(spec, state);
            self.on_stabilized(state, total, now);
        }
        state.queue_index = Some(entry.queue);
        self.entries.insert((spec.arrival_time, spec.id), entry);
    }

    fn on_round_end(
        &mut self,
        spec: &RequestSpec,
        state: &mut RequestState,
        outcome: &RoundOutcome,
        now: SimTime,
    ) {
        let key = (spec.arrival_time, spec.id);
        if outcome.request_completed {
            self.entries.remove(&key);
            if self.locked == Some(spec.id) {
                self.locked = None;
            }
            return;
        }
        let Some(mut entry) = self.entries.get(&key).copied() else {
            return;
        };

        if !entry.perceptible {
            entry.queue = entry.queue.max(self.thresholds.queue_for(state.attained_service));
            state.queue_index = Some(entry.queue);
            let stability = &self.cfg.stability;
            if is_stable(&state.rate_history, stability) {
                if let Ok(rate) = predict_acceptance(&state.rate_history, stability) {
                    let cost = &self.cfg.cost;
                    let total = estimate_execution_time(
                        spec.predicted_output_len,
                        rate,
                        cost.spec_len,
                        cost.t_ssm_per_token,
                        cost.t_llm_verify,
                    );
                    state.mark_perceptible(rate, total);
                    entry.perceptible = true;
                    entry.queue = self.placement_queue(state, total);
                    state.queue_index = Some(entry.queue);
                    self.on_stabilized(state, total, now);
                }
            }
        }
        if entry.perceptible {
            entry.remaining = self.remaining(spec, state);
        }
        self.entries.insert(key, entry);
    }

    fn select_next(&mut self, _now: SimTime) -> Option<RequestId> {
        if let Some(id) = self.locked {
            return Some(id);
        }
        let (&(_, id), entry) = self.entries.iter().min_by_key(|(&(arrival, id), e)| {
            let class = u8::from(!e.perceptible);
            let remaining = if e.perceptible { e.remaining } else { SimTime::ZERO };
            (e.queue, class, remaining, arrival, id)
        })?;
        if entry.perceptible {
            self.locked = Some(id);
        }
        Some(id)
    }
}
