//! Metrics, comparison tables and the small-instance scheduling oracle.

mod accuracy;
mod compare;
mod oracle;

use std::fmt::Write as _;

use serde::Serialize;

use crate::engine::{RequestRecord, SimError, SimReport};
use crate::model::ModelError;
use crate::workload::ConfigError;

pub use accuracy::{estimator_accuracy, AccuracyRow, AccuracyTable};
pub use compare::{
    compare_policies, run_one, sweep_k, Comparison, PolicyStats, RunRow, WorkloadSource,
};
pub use oracle::{brute_force_optimal, total_completion, OptimalSchedule, MAX_BRUTE_FORCE};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("brute-force oracle handles at most {MAX_BRUTE_FORCE} jobs, got {0}")]
    TooManyJobs(usize),
    #[error("instance has no jobs")]
    EmptyInstance,
    #[error("policy list is empty")]
    NoPolicies,
    #[error("seed list is empty")]
    NoSeeds,
    #[error("invalid K range {0}..={1}")]
    KRange(usize, usize),
    #[error("thread pool: {0}")]
    Threads(String),
}

/// Nearest-rank percentile of sorted values. Zero for an empty slice.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub avg_latency_us: f64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
    pub total_switch_overhead_us: u64,
    pub preemption_count: u64,
    pub rows: Vec<RequestRecord>,
}

pub fn summarize(report: &SimReport) -> Summary {
    let mut lat: Vec<u64> = report.requests.iter().map(|r| r.latency_us).collect();
    lat.sort_unstable();
    let avg = if lat.is_empty() {
        0.0
    } else {
        lat.iter().map(|&l| u128::from(l)).sum::<u128>() as f64 / lat.len() as f64
    };
    Summary {
        avg_latency_us: avg,
        p50_us: percentile(&lat, 50.0),
        p95_us: percentile(&lat, 95.0),
        max_us: lat.last().copied().unwrap_or(0),
        total_switch_overhead_us: report.switch_overhead_us,
        preemption_count: report.requests.iter().map(|r| u64::from(r.preemptions)).sum(),
        rows: report.requests.clone(),
    }
}

pub const CSV_HEADER: &str = "policy,seed,K,num_requests,avg_latency_us,p50_us,p95_us,max_us,preemptions,switch_overhead_us,busy_us";

/// Leading comment line carried by every output file.
pub fn provenance_line(config_hash: &str) -> String {
    format!(
        "# specsched {} defaults=v{} config_hash={}",
        env!("CARGO_PKG_VERSION"),
        crate::config::defaults_version(),
        config_hash
    )
}

pub fn runs_csv(rows: &[RunRow], config_hash: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", provenance_line(config_hash));
    let _ = writeln!(out, "{CSV_HEADER}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.policy,
            r.seed,
            r.k,
            r.num_requests,
            r.avg_latency_us,
            r.p50_us,
            r.p95_us,
            r.max_us,
            r.preemptions,
            r.switch_overhead_us,
            r.busy_us
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::model::{AcceptanceProcess, CostModel, RequestSpec, SimTime};
    use crate::policies::Fcfs;

    #[test]
    fn percentiles_nearest_rank() {
        assert_eq!(percentile(&[], 50.0), 0);
        assert_eq!(percentile(&[14], 50.0), 14);
        assert_eq!(percentile(&[14], 95.0), 14);
        let v: Vec<u64> = (1..=20).collect();
        assert_eq!(percentile(&v, 50.0), 10);
        assert_eq!(percentile(&v, 95.0), 19);
        assert_eq!(percentile(&v, 100.0), 20);
    }

    #[test]
    fn fig1_fcfs_summary() {
        let t = builtin::fig1();
        let rep = crate::engine::run_simulation(&t.requests, &mut Fcfs::new(), &t.cost.unwrap(), 0)
            .unwrap();
        let s = summarize(&rep);
        assert_eq!(s.avg_latency_us, 600_000.0);
        assert_eq!(s.preemption_count, 0);
        assert_eq!(s.rows.len(), 3);
    }

    #[test]
    fn singleton_statistics() {
        let spec = RequestSpec {
            id: 1,
            arrival_time: SimTime::ZERO,
            prompt_len: 0,
            true_output_len: 5,
            predicted_output_len: 5,
            acceptance: AcceptanceProcess::constant(1.0).unwrap(),
        };
        let cost = CostModel {
            t_ssm_per_token: SimTime::from_ms_int(1),
            t_llm_verify: SimTime::from_ms_int(10),
            spec_len: 4,
            switch_base: SimTime::ZERO,
            switch_per_token: SimTime::ZERO,
            acceptance_mode: Default::default(),
        };
        let rep = crate::engine::run_simulation(&[spec], &mut Fcfs::new(), &cost, 1).unwrap();
        let s = summarize(&rep);
        assert_eq!(s.avg_latency_us, 14_000.0);
        assert_eq!((s.p50_us, s.p95_us, s.max_us), (14_000, 14_000, 14_000));
    }

    #[test]
    fn mean_of_two() {
        let mut rep = crate::engine::run_simulation(
            &builtin::fig1().requests[..2],
            &mut Fcfs::new(),
            &builtin::per_token_verification_cost(),
            0,
        )
        .unwrap();
        rep.requests[0].latency_us = 100;
        rep.requests[1].latency_us = 300;
        assert_eq!(summarize(&rep).avg_latency_us, 200.0);
    }

    #[test]
    fn csv_layout() {
        let csv = runs_csv(&[], "abcd");
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# specsched "));
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
    }
}
