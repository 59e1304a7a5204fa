use rayon::prelude::*;
use serde::Serialize;

use super::ReportError;
use crate::config::ExperimentConfig;
use crate::engine::{run_simulation, SimReport};
use crate::model::RequestSpec;
use crate::policies::PolicyKind;
use crate::workload::{generate_workload, WorkloadConfig};

/// Requests for an experiment: a fixed trace, or a generator reseeded per run.
#[derive(Debug, Clone)]
pub enum WorkloadSource {
    Fixed(Vec<RequestSpec>),
    Generated(WorkloadConfig),
}

impl WorkloadSource {
    pub fn requests(&self, seed: u64) -> Result<Vec<RequestSpec>, ReportError> {
        match self {
            WorkloadSource::Fixed(r) => Ok(r.clone()),
            WorkloadSource::Generated(cfg) => Ok(generate_workload(&WorkloadConfig {
                seed,
                ..cfg.clone()
            })?),
        }
    }
}

/// One simulation in the CSV row layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub policy: String,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub num_requests: usize,
    pub avg_latency_us: f64,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
    pub preemptions: u64,
    pub switch_overhead_us: u64,
    pub busy_us: u64,
}

impl RunRow {
    pub fn new(rep: &SimReport, k: usize) -> Self {
        RunRow {
            policy: rep.policy.clone(),
            seed: rep.seed,
            k,
            num_requests: rep.num_requests,
            avg_latency_us: rep.avg_latency_us,
            p50_us: rep.p50_us,
            p95_us: rep.p95_us,
            max_us: rep.max_us,
            preemptions: rep.preemptions,
            switch_overhead_us: rep.switch_overhead_us,
            busy_us: rep.busy_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyStats {
    pub policy: String,
    pub k: usize,
    pub runs: usize,
    pub mean_avg_latency_us: f64,
    pub stdev_avg_latency_us: f64,
    /// `(this - laps_sd) / this`, when LAPS-SD took part.
    pub laps_sd_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub config_hash: String,
    pub rows: Vec<RunRow>,
    pub stats: Vec<PolicyStats>,
}

impl Comparison {
    pub fn stats_for(&self, policy: &str) -> Option<&PolicyStats> {
        self.stats.iter().find(|s| s.policy == policy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("comparison serializes")
    }
}

/// Simulates one policy on one request set under `cfg`.
pub fn run_one(
    requests: &[RequestSpec],
    kind: PolicyKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SimReport, ReportError> {
    let mut laps = cfg.laps_sd.clone();
    laps.cost = cfg.cost;
    let mut policy = kind.build(&laps)?;
    let mut rep = run_simulation(requests, policy.as_mut(), &cfg.cost, seed)?;
    rep.config_hash = cfg.config_hash();
    Ok(rep)
}

pub(crate) fn par_map<T, R, F>(items: &[T], threads: Option<usize>, f: F) -> Result<Vec<R>, ReportError>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R, ReportError> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| ReportError::Threads(e.to_string()))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn stats(rows: &[RunRow], group: impl Fn(&RunRow) -> (String, usize)) -> Vec<PolicyStats> {
    let mut keys: Vec<(String, usize)> = rows.iter().map(&group).collect();
    keys.dedup();
    keys.sort();
    keys.dedup();
    let mut out: Vec<PolicyStats> = keys
        .into_iter()
        .map(|key| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| group(r) == key)
                .map(|r| r.avg_latency_us)
                .collect();
            let (mean, stdev) = mean_stdev(&vals);
            PolicyStats {
                policy: key.0,
                k: key.1,
                runs: vals.len(),
                mean_avg_latency_us: mean,
                stdev_avg_latency_us: stdev,
                laps_sd_improvement: None,
            }
        })
        .collect();
    let laps = out
        .iter()
        .find(|s| s.policy == PolicyKind::LapsSd.as_str())
        .map(|s| s.mean_avg_latency_us);
    if let Some(laps) = laps {
        for s in &mut out {
            if s.policy != PolicyKind::LapsSd.as_str() && s.mean_avg_latency_us > 0.0 {
                s.laps_sd_improvement = Some((s.mean_avg_latency_us - laps) / s.mean_avg_latency_us);
            }
        }
    }
    out
}

/// Runs every policy on every seed. Rows are ordered by policy name, then seed.
pub fn compare_policies(
    source: &WorkloadSource,
    cfg: &ExperimentConfig,
    policies: &[PolicyKind],
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<Comparison, ReportError> {
    if policies.is_empty() {
        return Err(ReportError::NoPolicies);
    }
    if seeds.is_empty() {
        return Err(ReportError::NoSeeds);
    }
    let jobs: Vec<(PolicyKind, u64)> = policies
        .iter()
        .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let mut rows = par_map(&jobs, threads, |&(kind, seed)| {
        let requests = source.requests(seed)?;
        let rep = run_one(&requests, kind, cfg, seed)?;
        let k = if kind.uses_queues() { cfg.laps_sd.queues.k } else { 0 };
        Ok(RunRow::new(&rep, k))
    })?;
    rows.sort_by(|a, b| a.policy.cmp(&b.policy).then(a.seed.cmp(&b.seed)));
    let stats = stats(&rows, |r| (r.policy.clone(), r.k));
    Ok(Comparison {
        config_hash: cfg.config_hash(),
        rows,
        stats,
    })
}

/// LAPS-SD across queue counts `k_min..=k_max`. Rows are ordered by K, then seed.
pub fn sweep_k(
    source: &WorkloadSource,
    cfg: &ExperimentConfig,
    k_min: usize,
    k_max: usize,
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<Comparison, ReportError> {
    if k_min == 0 || k_min > k_max {
        return Err(ReportError::KRange(k_min, k_max));
    }
    if seeds.is_empty() {
        return Err(ReportError::NoSeeds);
    }
    let jobs: Vec<(usize, u64)> = (k_min..=k_max)
        .flat_map(|k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let mut rows = par_map(&jobs, threads, |&(k, seed)| {
        let requests = source.requests(seed)?;
        let rep = run_one(&requests, PolicyKind::LapsSd, &cfg.with_k(k), seed)?;
        Ok(RunRow::new(&rep, k))
    })?;
    rows.sort_by(|a, b| a.k.cmp(&b.k).then(a.seed.cmp(&b.seed)));
    let mut stats = stats(&rows, |r| (r.policy.clone(), r.k));
    stats.sort_by_key(|s| s.k);
    Ok(Comparison {
        config_hash: cfg.config_hash(),
        rows,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::config::{cost_table, ConfigBuilder};

    fn fig1_cfg() -> ExperimentConfig {
        ConfigBuilder::new()
            .layer(cost_table(&builtin::per_token_verification_cost()))
            .set("laps_sd.estimates=\"oracle\"")
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn fig1_table_ordering() {
        let src = WorkloadSource::Fixed(builtin::fig1().requests);
        let c = compare_policies(&src, &fig1_cfg(), &PolicyKind::ALL, &[0], Some(2)).unwrap();
        let mean = |p: &str| c.stats_for(p).unwrap().mean_avg_latency_us;
        assert_eq!(mean("laps-sd"), 500_000.0);
        assert_eq!(mean("fcfs"), 600_000.0);
        assert_eq!(mean("lp-sjf"), 700_000.0);
        let imp = c.stats_for("fcfs").unwrap().laps_sd_improvement.unwrap();
        assert!((imp - 1.0 / 6.0).abs() < 1e-12);
        let names: Vec<&str> = c.rows.iter().map(|r| r.policy.as_str()).collect();
        assert_eq!(names, vec!["fcfs", "laps-sd", "las", "lp-sjf"]);
    }

    #[test]
    fn single_request_all_equal() {
        let src = WorkloadSource::Fixed(builtin::fig1().requests[..1].to_vec());
        let c = compare_policies(&src, &fig1_cfg(), &PolicyKind::ALL, &[0, 1], None).unwrap();
        let first = c.rows[0].avg_latency_us;
        assert!(c.rows.iter().all(|r| r.avg_latency_us == first));
    }

    #[test]
    fn repeated_policy_rows_identical() {
        let src = WorkloadSource::Fixed(builtin::stabilizing_demo().requests);
        let cfg = ExperimentConfig::default();
        let c = compare_policies(&src, &cfg, &[PolicyKind::Las, PolicyKind::Las], &[3], None).unwrap();
        assert_eq!(c.rows.len(), 2);
        assert_eq!(c.rows[0], c.rows[1]);
    }

    #[test]
    fn sweep_rows_per_k() {
        let src = WorkloadSource::Fixed(builtin::stabilizing_demo().requests);
        let cfg = ExperimentConfig::default();
        let c = sweep_k(&src, &cfg, 2, 10, &[0], None).unwrap();
        assert_eq!(c.rows.len(), 9);
        assert_eq!(c.stats.len(), 9);
        assert!(matches!(
            sweep_k(&src, &cfg, 5, 4, &[0], None),
            Err(ReportError::KRange(5, 4))
        ));
    }

    #[test]
    fn empty_inputs_rejected() {
        let src = WorkloadSource::Fixed(builtin::fig1().requests);
        let cfg = fig1_cfg();
        assert!(matches!(
            compare_policies(&src, &cfg, &[], &[0], None),
            Err(ReportError::NoPolicies)
        ));
        assert!(matches!(
            compare_policies(&src, &cfg, &PolicyKind::ALL, &[], None),
            Err(ReportError::NoSeeds)
        ));
    }
}
