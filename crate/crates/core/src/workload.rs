//! Synthetic workload generation and JSON Lines trace files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{AcceptanceKind, AcceptanceProcess, RequestSpec, SimTime};

/// A config value failed validation. `path` is the dotted config key.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty trace")]
    Empty,
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ArrivalConfig {
    AllAtZero,
    Poisson { rate_per_sec: f64 },
}

/// Lognormal over token counts, rounded and truncated to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthDist {
    pub mu: f64,
    pub sigma: f64,
    pub min: u64,
    pub max: u64,
}

impl LengthDist {
    fn validate(&self, path: &str, min_floor: u64) -> Result<(), ConfigError> {
        if !self.mu.is_finite() {
            return Err(ConfigError::new(format!("{path}.mu"), "must be finite"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(ConfigError::new(format!("{path}.sigma"), "must be >= 0"));
        }
        if self.min < min_floor {
            return Err(ConfigError::new(
                format!("{path}.min"),
                format!("must be >= {min_floor}"),
            ));
        }
        if self.max < self.min {
            return Err(ConfigError::new(format!("{path}.max"), "must be >= min"));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let dist = LogNormal::new(self.mu, self.sigma).expect("validated lognormal");
        let v: f64 = dist.sample(rng);
        (v.round().max(0.0) as u64).clamp(self.min, self.max)
    }
}

/// Ranges from which each request's acceptance process is drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceProfile {
    pub kind: AcceptanceKind,
    pub stable_rate: [f64; 2],
    pub amplitude: [f64; 2],
    pub decay: [f64; 2],
    pub period: [u32; 2],
}

impl AcceptanceProfile {
    fn validate(&self) -> Result<(), ConfigError> {
        let range = |name: &str, r: [f64; 2], lo: f64, hi: f64, hi_open: bool| {
            let path = format!("acceptance_profile.{name}");
            let ok = |v: f64| v >= lo && if hi_open { v < hi } else { v <= hi };
            if !(ok(r[0]) && ok(r[1])) {
                let bracket = if hi_open { ")" } else { "]" };
                return Err(ConfigError::new(
                    path,
                    format!("values must lie in [{lo}, {hi}{bracket}, got [{}, {}]", r[0], r[1]),
                ));
            }
            if r[0] > r[1] {
                return Err(ConfigError::new(path, "range lower bound exceeds upper bound"));
            }
            Ok(())
        };
        if self.kind == AcceptanceKind::Trace {
            return Err(ConfigError::new(
                "acceptance_profile.kind",
                "must be `constant` or `stabilizing`",
            ));
        }
        range("stable_rate", self.stable_rate, 0.0, 1.0, false)?;
        range("amplitude", self.amplitude, 0.0, f64::MAX, false)?;
        range("decay", self.decay, 0.0, 1.0, true)?;
        if self.period[0] == 0 || self.period[0] > self.period[1] {
            return Err(ConfigError::new(
                "acceptance_profile.period",
                "must be a non-empty range of positive round counts",
            ));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> AcceptanceProcess {
        let uni = |rng: &mut ChaCha8Rng, r: [f64; 2]| {
            if r[0] == r[1] {
                r[0]
            } else {
                rng.random_range(r[0]..=r[1])
            }
        };
        let stable = uni(rng, self.stable_rate);
        match self.kind {
            AcceptanceKind::Stabilizing => {
                let amplitude = uni(rng, self.amplitude);
                let decay = uni(rng, self.decay);
                let period = rng.random_range(self.period[0]..=self.period[1]);
                AcceptanceProcess::stabilizing(stable, amplitude, decay, period)
            }
            _ => AcceptanceProcess::constant(stable),
        }
        .expect("validated acceptance profile")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub num_requests: usize,
    pub arrival: ArrivalConfig,
    pub output_len: LengthDist,
    pub prompt_len: LengthDist,
    pub acceptance_profile: AcceptanceProfile,
    /// Standard deviation of the multiplicative lognormal length-prediction error.
    pub predictor_noise: f64,
    pub seed: u64,
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_requests == 0 {
            return Err(ConfigError::new("num_requests", "must be >= 1"));
        }
        if let ArrivalConfig::Poisson { rate_per_sec } = self.arrival {
            if !(rate_per_sec > 0.0 && rate_per_sec.is_finite()) {
                return Err(ConfigError::new("arrival.rate_per_sec", "must be > 0"));
            }
        }
        self.output_len.validate("output_len", 1)?;
        self.prompt_len.validate("prompt_len", 0)?;
        self.acceptance_profile.validate()?;
        if !(self.predictor_noise >= 0.0 && self.predictor_noise.is_finite()) {
            return Err(ConfigError::new("predictor_noise", "must be >= 0"));
        }
        Ok(())
    }
}

/// Draws a workload. Deterministic in `cfg` (including its seed); arrivals
/// are non-decreasing and ids run from 1.
pub fn generate_workload(cfg: &WorkloadConfig) -> Result<Vec<RequestSpec>, ConfigError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gaps = match cfg.arrival {
        ArrivalConfig::Poisson { rate_per_sec } => Some(Exp::new(rate_per_sec).expect("validated rate")),
        ArrivalConfig::AllAtZero => None,
    };
    let noise = (cfg.predictor_noise > 0.0)
        .then(|| Normal::new(0.0, cfg.predictor_noise).expect("validated noise"));

    let mut clock = SimTime::ZERO;
    let mut out = Vec::with_capacity(cfg.num_requests);
    for i in 0..cfg.num_requests {
        if let Some(exp) = &gaps {
            let gap_sec: f64 = exp.sample(&mut rng);
            clock += SimTime::from_us_f64(gap_sec * 1e6);
        }
        let true_len = cfg.output_len.sample(&mut rng);
        let prompt = cfg.prompt_len.sample(&mut rng);
        let acceptance = cfg.acceptance_profile.sample(&mut rng);
        let predicted = match &noise {
            Some(n) => {
                let z: f64 = n.sample(&mut rng);
                ((true_len as f64 * z.exp()).round() as u64).max(1)
            }
            None => true_len,
        };
        out.push(RequestSpec {
            id: i as u64 + 1,
            arrival_time: clock,
            prompt_len: prompt,
            true_output_len: true_len,
            predicted_output_len: predicted,
            acceptance,
        });
    }
    Ok(out)
}

pub fn trace_to_string(requests: &[RequestSpec]) -> String {
    let mut out = String::new();
    for r in requests {
        let line = serde_json::to_string(r).expect("request serializes");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn save_trace(path: impl AsRef<Path>, requests: &[RequestSpec]) -> Result<(), TraceError> {
    let path = path.as_ref();
    fs::write(path, trace_to_string(requests)).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses JSON Lines trace text. Blank lines are skipped; line numbers in
/// errors are one-based.
pub fn parse_trace(text: &str) -> Result<Vec<RequestSpec>, TraceError> {
    let mut out: Vec<RequestSpec> = Vec::new();
    let mut ids = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let spec: RequestSpec = serde_json::from_str(line).map_err(|e| TraceError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        spec.validate().map_err(|e| TraceError::Schema {
            line: line_no,
            message: e.to_string(),
        })?;
        if !ids.insert(spec.id) {
            return Err(TraceError::Schema {
                line: line_no,
                message: format!("duplicate id {}", spec.id),
            });
        }
        out.push(spec);
    }
    if out.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(out)
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<RequestSpec>, TraceError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_trace(&text)
}
