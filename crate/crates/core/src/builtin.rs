//! Small named traces addressable as `builtin:<name>`.

use crate::model::{AcceptanceMode, AcceptanceProcess, CostModel, RequestSpec, SimTime};

pub const BUILTIN_PREFIX: &str = "builtin:";
pub const NAMES: [&str; 3] = ["fig1", "tiny-sjf", "stabilizing-demo"];

#[derive(Debug, Clone)]
pub struct BuiltinTrace {
    pub requests: Vec<RequestSpec>,
    /// Cost model the trace is meant to run under, if it has one.
    pub cost: Option<CostModel>,
}

/// Deterministic accounting where verification costs 10ms per proposed
/// token: ten draft tokens per round, 100ms per round, no draft or switch
/// cost, and exactly `10 * rate` tokens accepted per round.
pub fn per_token_verification_cost() -> CostModel {
    CostModel {
        t_ssm_per_token: SimTime::ZERO,
        t_llm_verify: SimTime::from_ms_int(100),
        spec_len: 10,
        switch_base: SimTime::ZERO,
        switch_per_token: SimTime::ZERO,
        acceptance_mode: AcceptanceMode::Fluid,
    }
}

fn constant(id: u64, arrival_ms: u64, len: u64, rate: f64) -> RequestSpec {
    RequestSpec {
        id,
        arrival_time: SimTime::from_ms_int(arrival_ms),
        prompt_len: 0,
        true_output_len: len,
        predicted_output_len: len,
        acceptance: AcceptanceProcess::constant(rate).expect("valid rate"),
    }
}

/// Three simultaneous requests whose output lengths (10, 5, 20) and
/// acceptance rates (0.5, 0.1, 1.0) make length-only SJF pick the slowest
/// request first.
pub fn fig1() -> BuiltinTrace {
    BuiltinTrace {
        requests: vec![
            constant(1, 0, 10, 0.5),
            constant(2, 0, 5, 0.1),
            constant(3, 0, 20, 1.0),
        ],
        cost: Some(per_token_verification_cost()),
    }
}

pub fn tiny_sjf() -> BuiltinTrace {
    BuiltinTrace {
        requests: vec![
            constant(1, 0, 50, 1.0),
            constant(2, 0, 10, 0.1),
            constant(3, 0, 20, 0.5),
            constant(4, 0, 3, 0.3),
        ],
        cost: Some(per_token_verification_cost()),
    }
}

pub fn stabilizing_demo() -> BuiltinTrace {
    let params = [
        (1, 0, 300, 0.8, 0.4, 6),
        (2, 100, 120, 0.3, 0.4, 4),
        (3, 200, 400, 0.6, 0.3, 8),
        (4, 300, 80, 0.5, 0.4, 5),
        (5, 400, 200, 0.2, 0.2, 10),
        (6, 500, 150, 0.9, 0.1, 7),
    ];
    let requests = params
        .into_iter()
        .map(|(id, arrival, len, stable, amp, period)| RequestSpec {
            id,
            arrival_time: SimTime::from_ms_int(arrival),
            prompt_len: 64,
            true_output_len: len,
            predicted_output_len: len,
            acceptance: AcceptanceProcess::stabilizing(stable, amp, 0.8, period)
                .expect("valid process"),
        })
        .collect();
    BuiltinTrace {
        requests,
        cost: None,
    }
}

/// Looks up `name`, with or without the `builtin:` prefix.
pub fn builtin(name: &str) -> Option<BuiltinTrace> {
    match name.strip_prefix(BUILTIN_PREFIX).unwrap_or(name) {
        "fig1" => Some(fig1()),
        "tiny-sjf" => Some(tiny_sjf()),
        "stabilizing-demo" => Some(stabilizing_demo()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_names_resolve() {
        for n in NAMES {
            let t = builtin(n).unwrap();
            assert!(!t.requests.is_empty());
            assert!(builtin(&format!("builtin:{n}")).is_some());
            for r in &t.requests {
                r.validate().unwrap();
            }
        }
        assert!(builtin("nope").is_none());
    }
}
