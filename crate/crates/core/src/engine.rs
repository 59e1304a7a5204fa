//! Deterministic discrete-event simulator for a batch-size-1 speculative
//! decoding server.
//!
//! The accelerator runs one draft-then-verify round at a time. Between rounds
//! the policy picks the next request; loading a request whose KV cache is not
//! resident costs `switch_base + switch_per_token * kv_tokens`. Switch time
//! is system overhead and is not added to the request's attained service.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::model::{kv_tokens, AcceptanceMode, CostModel, RequestId, RequestSpec, RequestState, SimTime};
use crate::policies::SchedulerPolicy;
use crate::report::percentile;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("duplicate request id {0}")]
    DuplicateId(RequestId),
    #[error("invalid request {id}: {reason}")]
    InvalidRequest { id: RequestId, reason: String },
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("policy selected unknown request {0}")]
    UnknownSelection(RequestId),
    #[error("policy selected request {0} which has not arrived")]
    NotArrived(RequestId),
    #[error("policy selected completed request {0}")]
    CompletedSelection(RequestId),
    #[error("policy returned no request while {0} runnable requests are waiting")]
    IdleWithRunnable(usize),
    #[error("round executed on completed request {0}")]
    RoundOnCompleted(RequestId),
}

/// Result of one speculative decoding round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    /// Tokens committed this round, bonus token included, clipped at the
    /// request's remaining length.
    pub tokens_accepted: u64,
    /// Draft tokens the verifier accepted, bonus excluded, before clipping.
    pub draft_accepted: u64,
    pub tokens_proposed: u64,
    pub round_duration: SimTime,
    pub request_completed: bool,
}

fn round_rng(seed: u64, id: RequestId, round: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&id.to_le_bytes());
    key[16..24].copy_from_slice(&round.to_le_bytes());
    key[24..].copy_from_slice(b"specrnd1");
    ChaCha8Rng::from_seed(key)
}

/// Runs one draft-then-verify round for `spec`, updating `state`.
///
/// Token outcomes depend only on `(seed, spec.id, round index)`, so the same
/// request sees the same draws under every policy.
pub fn execute_round(
    state: &mut RequestState,
    spec: &RequestSpec,
    cost: &CostModel,
    seed: u64,
) -> Result<RoundOutcome, SimError> {
    let remaining = spec.true_output_len.saturating_sub(state.tokens_accepted);
    if state.is_complete() || remaining == 0 {
        return Err(SimError::RoundOnCompleted(spec.id));
    }
    let n = u64::from(cost.spec_len);
    let rate = spec.acceptance.rate_at(state.rounds_executed);

    let (draft, bonus) = match cost.acceptance_mode {
        AcceptanceMode::Truncated => {
            let mut rng = round_rng(seed, spec.id, state.rounds_executed);
            let mut leading = 0u64;
            let mut rejected = false;
            for _ in 0..n {
                let ok = rng.random::<f64>() < rate;
                if !ok {
                    rejected = true;
                } else if !rejected {
                    leading += 1;
                }
            }
            (leading, 1)
        }
        AcceptanceMode::Independent => {
            let mut rng = round_rng(seed, spec.id, state.rounds_executed);
            let hits = (0..n).filter(|_| rng.random::<f64>() < rate).count() as u64;
            (hits, 1)
        }
        AcceptanceMode::Fluid => {
            let exact = state.fluid_carry + n as f64 * rate;
            let whole = (exact + 1e-9).floor();
            state.fluid_carry = (exact - whole).max(0.0);
            let whole = (whole as u64).min(n);
            if whole == 0 {
                // progress floor: one token per round
                (0, 1)
            } else {
                (whole, 0)
            }
        }
    };

    let committed = (draft + bonus).min(remaining);
    let duration = cost.round_duration();

    state.tokens_accepted += committed;
    state.rounds_executed += 1;
    state.tokens_proposed += n;
    state.draft_accepted += draft;
    state.attained_service += duration;
    state
        .rate_history
        .push(state.draft_accepted as f64 / state.tokens_proposed as f64);

    Ok(RoundOutcome {
        tokens_accepted: committed,
        draft_accepted: draft,
        tokens_proposed: n,
        round_duration: duration,
        request_completed: state.tokens_accepted >= spec.true_output_len,
    })
}

/// Per-request line of a [`SimReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub arrival_us: u64,
    pub first_service_us: u64,
    pub completion_us: u64,
    pub latency_us: u64,
    pub rounds: u64,
    pub tokens_proposed: u64,
    pub tokens_accepted: u64,
    pub preemptions: u32,
    pub service_us: u64,
    pub predicted_accept_rate: Option<f64>,
    pub estimated_total_us: Option<u64>,
}

/// One executed round, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledRound {
    pub start_us: u64,
    pub id: RequestId,
    pub switch_us: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub policy: String,
    pub seed: u64,
    pub config_hash: String,
    pub num_requests: usize,
    pub avg_latency_us: f64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
    pub preemptions: u64,
    pub switch_count: u64,
    pub switch_overhead_us: u64,
    pub busy_us: u64,
    pub makespan_us: u64,
    pub requests: Vec<RequestRecord>,
    #[serde(skip)]
    pub schedule: Vec<ScheduledRound>,
}

impl SimReport {
    /// Request ids in order of first service.
    pub fn start_order(&self) -> Vec<RequestId> {
        let mut recs: Vec<&RequestRecord> = self.requests.iter().collect();
        recs.sort_by_key(|r| (r.first_service_us, r.id));
        recs.into_iter().map(|r| r.id).collect()
    }

    /// Request ids in order of completion.
    pub fn completion_order(&self) -> Vec<RequestId> {
        let mut recs: Vec<&RequestRecord> = self.requests.iter().collect();
        recs.sort_by_key(|r| (r.completion_us, r.id));
        recs.into_iter().map(|r| r.id).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Simulates `requests` to completion under `policy`.
pub fn run_simulation(
    requests: &[RequestSpec],
    policy: &mut dyn SchedulerPolicy,
    cost: &CostModel,
    seed: u64,
) -> Result<SimReport, SimError> {
    cost.validate()
        .map_err(|e| SimError::InvalidCost(e.to_string()))?;
    let mut specs: Vec<RequestSpec> = requests.to_vec();
    specs.sort_by_key(|s| (s.arrival_time, s.id));

    let mut index: HashMap<RequestId, usize> = HashMap::with_capacity(specs.len());
    for (i, s) in specs.iter().enumerate() {
        s.validate().map_err(|e| SimError::InvalidRequest {
            id: s.id,
            reason: e.to_string(),
        })?;
        if index.insert(s.id, i).is_some() {
            return Err(SimError::DuplicateId(s.id));
        }
    }

    let mut states: Vec<RequestState> = specs.iter().map(|s| RequestState::new(s.id)).collect();
    let mut schedule = Vec::new();
    let mut now = SimTime::ZERO;
    let mut next_arrival = 0usize;
    let mut completed = 0usize;
    let mut resident: Option<usize> = None;
    let mut switch_overhead = SimTime::ZERO;
    let mut switch_count = 0u64;
    let mut busy = SimTime::ZERO;

    while completed < specs.len() {
        while next_arrival < specs.len() && specs[next_arrival].arrival_time <= now {
            policy.on_arrival(&specs[next_arrival], &mut states[next_arrival], now);
            next_arrival += 1;
        }
        let runnable = next_arrival - completed;

        let Some(id) = policy.select_next(now) else {
            if runnable > 0 {
                return Err(SimError::IdleWithRunnable(runnable));
            }
            // idle until the next arrival; one must exist since work remains
            now = specs[next_arrival].arrival_time;
            continue;
        };
        let &idx = index.get(&id).ok_or(SimError::UnknownSelection(id))?;
        if idx >= next_arrival {
            return Err(SimError::NotArrived(id));
        }
        if states[idx].is_complete() {
            return Err(SimError::CompletedSelection(id));
        }

        let mut switch = SimTime::ZERO;
        if resident != Some(idx) {
            let preempting = resident.is_some();
            let reloading = states[idx].rounds_executed > 0;
            if preempting || reloading {
                switch = cost.switch_cost(kv_tokens(&states[idx], &specs[idx]));
                switch_count += 1;
            }
            if let Some(prev) = resident {
                states[prev].preemptions += 1;
            }
        }
        now += switch;
        switch_overhead += switch;

        let st = &mut states[idx];
        if st.first_service_time.is_none() {
            st.first_service_time = Some(now);
        }
        schedule.push(ScheduledRound {
            start_us: now.as_us(),
            id,
            switch_us: switch.as_us(),
        });
        let outcome = execute_round(st, &specs[idx], cost, seed)?;
        now += outcome.round_duration;
        busy += switch + outcome.round_duration;
        resident = Some(idx);
        if outcome.request_completed {
            st.completion_time = Some(now);
            resident = None;
            completed += 1;
        }
        policy.on_round_end(&specs[idx], &mut states[idx], &outcome, now);
    }

    let mut records: Vec<RequestRecord> = specs
        .iter()
        .zip(&states)
        .map(|(spec, st)| {
            let completion = st.completion_time.unwrap_or(now);
            RequestRecord {
                id: spec.id,
                arrival_us: spec.arrival_time.as_us(),
                first_service_us: st.first_service_time.unwrap_or(completion).as_us(),
                completion_us: completion.as_us(),
                latency_us: (completion - spec.arrival_time).as_us(),
                rounds: st.rounds_executed,
                tokens_proposed: st.tokens_proposed,
                tokens_accepted: st.tokens_accepted,
                preemptions: st.preemptions,
                service_us: st.attained_service.as_us(),
                predicted_accept_rate: st.predicted_accept_rate,
                estimated_total_us: st.estimated_total_time.map(SimTime::as_us),
            }
        })
        .collect();
    records.sort_by_key(|r| r.id);

    let mut latencies: Vec<u64> = records.iter().map(|r| r.latency_us).collect();
    latencies.sort_unstable();
    let total: u128 = latencies.iter().map(|&l| u128::from(l)).sum();
    let avg = if latencies.is_empty() {
        0.0
    } else {
        total as f64 / latencies.len() as f64
    };

    let mut hasher_input = serde_json::to_vec(cost).expect("cost serializes");
    hasher_input.extend(policy.name().as_bytes());
    hasher_input.extend(policy.params().as_bytes());
    hasher_input.extend(serde_json::to_vec(&specs).expect("specs serialize"));

    Ok(SimReport {
        policy: policy.name().to_owned(),
        seed,
        config_hash: short_hash(&hasher_input),
        num_requests: records.len(),
        avg_latency_us: avg,
        p50_us: percentile(&latencies, 50.0),
        p95_us: percentile(&latencies, 95.0),
        max_us: latencies.last().copied().unwrap_or(0),
        preemptions: records.iter().map(|r| u64::from(r.preemptions)).sum(),
        switch_count,
        switch_overhead_us: switch_overhead.as_us(),
        busy_us: busy.as_us(),
        makespan_us: now.as_us(),
        requests: records,
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AcceptanceProcess;

    fn spec(id: u64, len: u64, rate: f64) -> RequestSpec {
        RequestSpec {
            id,
            arrival_time: SimTime::ZERO,
            prompt_len: 10,
            true_output_len: len,
            predicted_output_len: len,
            acceptance: AcceptanceProcess::constant(rate).unwrap(),
        }
    }

    fn cost(mode: AcceptanceMode) -> CostModel {
        CostModel {
            t_ssm_per_token: SimTime::from_ms_int(1),
            t_llm_verify: SimTime::from_ms_int(10),
            spec_len: 4,
            switch_base: SimTime::ZERO,
            switch_per_token: SimTime::ZERO,
            acceptance_mode: mode,
        }
    }

    #[test]
    fn full_acceptance_gives_n_plus_one() {
        let s = spec(1, 100, 1.0);
        let mut st = RequestState::new(1);
        let out = execute_round(&mut st, &s, &cost(AcceptanceMode::Truncated), 0).unwrap();
        assert_eq!(out.tokens_accepted, 5);
        assert_eq!(out.round_duration, SimTime::from_ms_int(14));
        assert_eq!(st.attained_service, SimTime::from_ms_int(14));
        assert_eq!(st.rate_history, vec![1.0]);
    }

    #[test]
    fn zero_acceptance_gives_bonus_only() {
        let s = spec(1, 100, 0.0);
        let mut st = RequestState::new(1);
        for mode in [AcceptanceMode::Truncated, AcceptanceMode::Independent, AcceptanceMode::Fluid] {
            let out = execute_round(&mut st, &s, &cost(mode), 3).unwrap();
            assert_eq!(out.tokens_accepted, 1);
            assert_eq!(out.draft_accepted, 0);
        }
    }

    #[test]
    fn truncated_mean_matches_geometric_sum() {
        // E[accepted] = sum_{k=1..4} 0.5^k + 1 = 1.9375
        let s = spec(1, u64::MAX, 0.5);
        let mut st = RequestState::new(1);
        let c = cost(AcceptanceMode::Truncated);
        let rounds = 100_000;
        let mut total = 0u64;
        for _ in 0..rounds {
            total += execute_round(&mut st, &s, &c, 42).unwrap().tokens_accepted;
        }
        let mean = total as f64 / rounds as f64;
        assert!((mean - 1.9375).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn clipped_at_completion_but_full_duration() {
        let s = spec(1, 3, 1.0);
        let mut st = RequestState::new(1);
        let out = execute_round(&mut st, &s, &cost(AcceptanceMode::Truncated), 0).unwrap();
        assert_eq!(out.tokens_accepted, 3);
        assert!(out.request_completed);
        assert_eq!(out.round_duration, SimTime::from_ms_int(14));
        st.completion_time = Some(SimTime::from_ms_int(14));
        assert_eq!(
            execute_round(&mut st, &s, &cost(AcceptanceMode::Truncated), 0),
            Err(SimError::RoundOnCompleted(1))
        );
    }

    #[test]
    fn fluid_carries_fractions() {
        let s = spec(1, 1000, 0.3);
        let mut st = RequestState::new(1);
        let c = CostModel {
            spec_len: 10,
            ..cost(AcceptanceMode::Fluid)
        };
        let got: Vec<u64> = (0..3)
            .map(|_| execute_round(&mut st, &s, &c, 0).unwrap().tokens_accepted)
            .collect();
        assert_eq!(got, vec![3, 3, 3]);
        let s = spec(2, 1000, 0.25);
        let mut st = RequestState::new(2);
        let c = CostModel {
            spec_len: 2,
            ..cost(AcceptanceMode::Fluid)
        };
        let got: Vec<u64> = (0..4)
            .map(|_| execute_round(&mut st, &s, &c, 0).unwrap().tokens_accepted)
            .collect();
        // 0.5 per round: progress floor on even rounds, carry pays out on odd
        assert_eq!(got, vec![1, 1, 1, 1]);
    }

    #[test]
    fn same_stream_regardless_of_interleaving() {
        let s = spec(7, 10_000, 0.6);
        let c = cost(AcceptanceMode::Truncated);
        let mut a = RequestState::new(7);
        let mut b = RequestState::new(7);
        let mut other = RequestState::new(8);
        let s8 = spec(8, 10_000, 0.6);
        for _ in 0..50 {
            execute_round(&mut a, &s, &c, 9).unwrap();
        }
        for _ in 0..50 {
            execute_round(&mut other, &s8, &c, 9).unwrap();
            execute_round(&mut b, &s, &c, 9).unwrap();
        }
        assert_eq!(a.tokens_accepted, b.tokens_accepted);
        assert_eq!(a.rate_history, b.rate_history);
    }
}
