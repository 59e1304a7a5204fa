use serde::{Deserialize, Serialize};

use super::{AcceptanceProcess, ModelError, SimTime};

pub type RequestId = u64;

/// Ground-truth description of one inference request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestSpec {
    pub id: RequestId,
    #[serde(rename = "arrival_time_us")]
    pub arrival_time: SimTime,
    pub prompt_len: u64,
    /// Accepted tokens needed to finish.
    pub true_output_len: u64,
    /// Output length as seen by length-aware schedulers.
    pub predicted_output_len: u64,
    pub acceptance: AcceptanceProcess,
}

impl RequestSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.true_output_len == 0 {
            return Err(ModelError::OutOfRange {
                field: "true_output_len",
                value: 0.0,
            });
        }
        if self.predicted_output_len == 0 {
            return Err(ModelError::OutOfRange {
                field: "predicted_output_len",
                value: 0.0,
            });
        }
        self.acceptance.validate()
    }
}

/// Mutable runtime record for one request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestState {
    pub spec_id: RequestId,
    pub tokens_accepted: u64,
    pub rounds_executed: u64,
    /// Draft tokens proposed by the small model (bonus tokens excluded).
    pub tokens_proposed: u64,
    /// Draft tokens accepted by the verifier (bonus tokens excluded).
    pub draft_accepted: u64,
    /// Speculation plus verification time consumed so far. Switch costs excluded.
    pub attained_service: SimTime,
    pub perceptible: bool,
    pub predicted_accept_rate: Option<f64>,
    pub estimated_total_time: Option<SimTime>,
    /// One-based queue index, for queue-based policies.
    pub queue_index: Option<usize>,
    /// Cumulative draft acceptance ratio after each completed round.
    pub rate_history: Vec<f64>,
    pub completion_time: Option<SimTime>,
    pub first_service_time: Option<SimTime>,
    pub preemptions: u32,
    #[serde(skip)]
    pub(crate) fluid_carry: f64,
}

impl RequestState {
    pub fn new(spec_id: RequestId) -> Self {
        RequestState {
            spec_id,
            tokens_accepted: 0,
            rounds_executed: 0,
            tokens_proposed: 0,
            draft_accepted: 0,
            attained_service: SimTime::ZERO,
            perceptible: false,
            predicted_accept_rate: None,
            estimated_total_time: None,
            queue_index: None,
            rate_history: Vec::new(),
            completion_time: None,
            first_service_time: None,
            preemptions: 0,
            fluid_carry: 0.0,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completion_time.is_some()
    }

    /// Marks the request perceptible. The transition is one-way.
    pub fn mark_perceptible(&mut self, accept_rate: f64, estimated_total: SimTime) {
        if self.perceptible {
            return;
        }
        self.perceptible = true;
        self.predicted_accept_rate = Some(accept_rate);
        self.estimated_total_time = Some(estimated_total);
    }
}

/// Resident KV-cache size proxy: prompt plus generated tokens.
pub fn kv_tokens(state: &RequestState, spec: &RequestSpec) -> u64 {
    spec.prompt_len + state.tokens_accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(prompt: u64) -> RequestSpec {
        RequestSpec {
            id: 1,
            arrival_time: SimTime::ZERO,
            prompt_len: prompt,
            true_output_len: 1000,
            predicted_output_len: 1000,
            acceptance: AcceptanceProcess::constant(0.5).unwrap(),
        }
    }

    #[test]
    fn kv_tokens_is_prompt_plus_generated() {
        let mut st = RequestState::new(1);
        assert_eq!(kv_tokens(&st, &spec(100)), 100);
        st.tokens_accepted = 400;
        assert_eq!(kv_tokens(&st, &spec(100)), 500);
        assert_eq!(kv_tokens(&RequestState::new(1), &spec(0)), 0);
    }

    #[test]
    fn perceptible_is_one_way() {
        let mut st = RequestState::new(1);
        st.mark_perceptible(0.5, SimTime::from_ms_int(100));
        st.mark_perceptible(0.9, SimTime::from_ms_int(1));
        assert_eq!(st.predicted_accept_rate, Some(0.5));
        assert_eq!(st.estimated_total_time, Some(SimTime::from_ms_int(100)));
    }

    #[test]
    fn zero_lengths_rejected() {
        let mut s = spec(0);
        s.true_output_len = 0;
        assert!(s.validate().is_err());
        let mut s = spec(0);
        s.predicted_output_len = 0;
        assert!(s.validate().is_err());
    }
}
