use serde::Serialize;

use super::ReportError;
use crate::model::SimTime;

pub const MAX_BRUTE_FORCE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSchedule {
    /// Zero-based job indices in execution order.
    pub order: Vec<usize>,
    pub total_completion_us: u64,
    pub avg_latency_us: f64,
}

/// Sum of completion times when jobs run back to back from time zero.
pub fn total_completion(order: &[usize], service: &[SimTime]) -> u64 {
    let mut clock = 0u64;
    order
        .iter()
        .map(|&i| {
            clock += service[i].as_us();
            clock
        })
        .sum()
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exhaustive search for the non-preemptive order minimizing average
/// completion time of simultaneously arriving jobs. Among optimal orders the
/// lexicographically smallest is returned.
pub fn brute_force_optimal(service: &[SimTime]) -> Result<OptimalSchedule, ReportError> {
    if service.is_empty() {
        return Err(ReportError::EmptyInstance);
    }
    if service.len() > MAX_BRUTE_FORCE {
        return Err(ReportError::TooManyJobs(service.len()));
    }
    let mut perm: Vec<usize> = (0..service.len()).collect();
    let mut best = (total_completion(&perm, service), perm.clone());
    while next_permutation(&mut perm) {
        let total = total_completion(&perm, service);
        if total < best.0 {
            best = (total, perm.clone());
        }
    }
    Ok(OptimalSchedule {
        avg_latency_us: best.0 as f64 / service.len() as f64,
        total_completion_us: best.0,
        order: best.1,
    })
}
