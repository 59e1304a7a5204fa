use std::fmt::Write as _;

use serde::Serialize;

use super::compare::{par_map, run_one, WorkloadSource};
use super::{provenance_line, ReportError};
use crate::config::ExperimentConfig;
use crate::model::RequestId;
use crate::policies::{EstimateSource, PolicyKind};

/// Estimated against actual total service time for one request. The
/// estimate fields are `None` when the request never stabilized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub seed: u64,
    pub id: RequestId,
    pub true_output_len: u64,
    pub predicted_output_len: u64,
    pub accept_rate: Option<f64>,
    pub estimated_us: Option<u64>,
    pub actual_us: u64,
    /// `(estimated - actual) / actual`
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub config_hash: String,
    pub rows: Vec<AccuracyRow>,
    /// Mean absolute percentage error over stabilized requests, in percent.
    pub mape: Option<f64>,
    /// Mean signed relative error over stabilized requests, in percent.
    pub mean_signed_error: Option<f64>,
    pub stabilized: usize,
}

impl AccuracyTable {
    fn new(config_hash: String, rows: Vec<AccuracyRow>) -> Self {
        let errs: Vec<f64> = rows.iter().filter_map(|r| r.rel_error).collect();
        let mean = |f: fn(f64) -> f64| {
            (!errs.is_empty()).then(|| 100.0 * errs.iter().map(|&e| f(e)).sum::<f64>() / errs.len() as f64)
        };
        AccuracyTable {
            config_hash,
            mape: mean(f64::abs),
            mean_signed_error: mean(|e| e),
            stabilized: errs.len(),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let na = |v: Option<String>| v.unwrap_or_else(|| "n/a".to_owned());
        let mut out = String::new();
        let _ = writeln!(out, "{}", provenance_line(&self.config_hash));
        let _ = writeln!(
            out,
            "seed,id,true_output_len,predicted_output_len,accept_rate,estimated_us,actual_us,rel_error"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.seed,
                r.id,
                r.true_output_len,
                r.predicted_output_len,
                na(r.accept_rate.map(|v| v.to_string())),
                na(r.estimated_us.map(|v| v.to_string())),
                r.actual_us,
                na(r.rel_error.map(|v| v.to_string())),
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Runs LAPS-SD with detected stabilization and compares each request's
/// full-length estimate with the service time it actually consumed.
///
/// Token outcomes are keyed per request, so the actual service time does
/// not depend on the schedule.
pub fn estimator_accuracy(
    source: &WorkloadSource,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    threads: Option<usize>,
) -> Result<AccuracyTable, ReportError> {
    if seeds.is_empty() {
        return Err(ReportError::NoSeeds);
    }
    let mut cfg = cfg.clone();
    cfg.laps_sd.estimates = EstimateSource::Detected;
    let per_seed = par_map(seeds, threads, |&seed| {
        let requests = source.requests(seed)?;
        let rep = run_one(&requests, PolicyKind::LapsSd, &cfg, seed)?;
        let rows: Vec<AccuracyRow> = rep
            .requests
            .iter()
            .map(|rec| {
                let spec = requests
                    .iter()
                    .find(|s| s.id == rec.id)
                    .expect("report ids come from the workload");
                let rel = rec.estimated_total_us.map(|est| {
                    (est as f64 - rec.service_us as f64) / rec.service_us as f64
                });
                AccuracyRow {
                    seed,
                    id: rec.id,
                    true_output_len: spec.true_output_len,
                    predicted_output_len: spec.predicted_output_len,
                    accept_rate: rec.predicted_accept_rate,
                    estimated_us: rec.estimated_total_us,
                    actual_us: rec.service_us,
                    rel_error: rel,
                }
            })
            .collect();
        Ok(rows)
    })?;
    Ok(AccuracyTable::new(cfg.config_hash(), per_seed.into_iter().flatten().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigBuilder;
    use crate::model::{AcceptanceProcess, RequestSpec, SimTime};

    fn requests(rate: f64, n: u64) -> Vec<RequestSpec> {
        (1..=n)
            .map(|id| RequestSpec {
                id,
                arrival_time: SimTime::ZERO,
                prompt_len: 16,
                true_output_len: 200,
                predicted_output_len: 200,
                acceptance: AcceptanceProcess::constant(rate).unwrap(),
            })
            .collect()
    }

    #[test]
    fn exact_model_match_at_full_acceptance() {
        // every round accepts n+1 tokens, so the only error is the final
        // partial round: at most one round of 33ms
        let cfg = ExperimentConfig::default();
        let t = estimator_accuracy(&WorkloadSource::Fixed(requests(1.0, 3)), &cfg, &[0], None).unwrap();
        assert_eq!(t.stabilized, 3);
        for r in &t.rows {
            let diff = r.actual_us.abs_diff(r.estimated_us.unwrap());
            assert!(diff <= cfg.cost.round_duration().as_us(), "{r:?}");
            assert_eq!(r.accept_rate, Some(1.0));
        }
    }

    #[test]
    fn disabled_detection_reports_na() {
        let cfg = ConfigBuilder::new().set("stability.delta=0.0").unwrap().build().unwrap();
        let t = estimator_accuracy(&WorkloadSource::Fixed(requests(0.5, 2)), &cfg, &[0], None).unwrap();
        assert_eq!(t.stabilized, 0);
        assert!(t.mape.is_none());
        assert!(t.to_csv().lines().nth(2).unwrap().contains("n/a"));
    }
}
