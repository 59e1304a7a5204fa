//! Experiment configuration files.
//!
//! A config is a TOML document whose top level holds workload keys
//! (`num_requests`, `arrival`, `acceptance_profile`, ...) plus the sections
//! `[cost]`, `[laps_sd]` and `[stability]`. Layers are merged key by key in
//! this order: built-in defaults, the selected profile, caller-supplied
//! layers, then dotted `key=value` overrides.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::estimator::{SpreadRule, StabilityConfig};
use crate::model::{AcceptanceMode, CostModel, SimTime};
use crate::policies::{EstimateSource, LapsSdConfig, Placement, QueueConfig};
use crate::workload::{ConfigError, WorkloadConfig};

pub const DEFAULTS_TOML: &str = include_str!("../defaults.toml");
pub const DEFAULT_PROFILE: &str = "chat";
pub const PROFILES: [&str; 3] = ["chat", "code", "reasoning"];

const WORKLOAD_KEYS: [&str; 7] = [
    "num_requests",
    "arrival",
    "output_len",
    "prompt_len",
    "acceptance_profile",
    "predictor_noise",
    "seed",
];

fn defaults() -> Table {
    DEFAULTS_TOML.parse().expect("defaults.toml parses")
}

pub fn defaults_version() -> i64 {
    defaults()
        .get("version")
        .and_then(Value::as_integer)
        .unwrap_or(0)
}

fn profile_table(name: &str) -> Result<Table, ConfigError> {
    defaults()
        .get("profiles")
        .and_then(|p| p.get(name))
        .and_then(Value::as_table)
        .cloned()
        .ok_or_else(|| {
            ConfigError::new(
                "profile",
                format!("unknown profile `{name}` (expected one of {})", PROFILES.join(", ")),
            )
        })
}

/// Workload parameters of a built-in profile.
pub fn profile(name: &str) -> Result<WorkloadConfig, ConfigError> {
    let table = profile_table(name)?;
    WorkloadConfig::deserialize(table)
        .map_err(|e| ConfigError::new(format!("profiles.{name}"), e.to_string()))
}

fn merge(base: &mut Table, overlay: Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_path(table: &mut Table, path: &str, value: Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
        ConfigError::new(path, "empty key")
    })?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_owned())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(path, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_owned(), value);
    Ok(())
}

/// Parses the value half of a `key=value` override as TOML, falling back to
/// a bare string.
fn parse_override_value(raw: &str) -> Value {
    let doc = format!("v = {raw}");
    doc.parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_owned()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostSection {
    t_ssm_per_token_ms: f64,
    t_llm_verify_ms: f64,
    spec_len: u32,
    switch_base_ms: f64,
    switch_per_token_ms: f64,
    #[serde(default)]
    acceptance_mode: AcceptanceMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LapsSdSection {
    k: usize,
    s1_up_ms: f64,
    m: f64,
    #[serde(default)]
    placement: Placement,
    #[serde(default)]
    estimates: EstimateSource,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StabilitySection {
    gamma: usize,
    delta: f64,
    #[serde(default)]
    spread: SpreadRule,
}

fn non_negative_ms(path: &str, v: f64) -> Result<SimTime, ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(SimTime::from_ms(v))
    } else {
        Err(ConfigError::new(path, format!("must be a non-negative duration, got {v}")))
    }
}

/// Renders a cost model as a `[cost]` table layer.
pub fn cost_table(cost: &CostModel) -> Table {
    let mut t = Table::new();
    t.insert("t_ssm_per_token_ms".into(), Value::Float(cost.t_ssm_per_token.as_ms()));
    t.insert("t_llm_verify_ms".into(), Value::Float(cost.t_llm_verify.as_ms()));
    t.insert("spec_len".into(), Value::Integer(i64::from(cost.spec_len)));
    t.insert("switch_base_ms".into(), Value::Float(cost.switch_base.as_ms()));
    t.insert("switch_per_token_ms".into(), Value::Float(cost.switch_per_token.as_ms()));
    t.insert(
        "acceptance_mode".into(),
        Value::String(cost.acceptance_mode.to_string()),
    );
    let mut root = Table::new();
    root.insert("cost".into(), Value::Table(t));
    root
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub defaults_version: i64,
    pub profile: String,
    pub workload: WorkloadConfig,
    pub cost: CostModel,
    pub laps_sd: LapsSdConfig,
}

impl ExperimentConfig {
    /// Short hex digest of the canonical JSON form.
    pub fn config_hash(&self) -> String {
        crate::engine::short_hash(&serde_json::to_vec(self).expect("config serializes"))
    }

    pub fn with_seed(&self, seed: u64) -> ExperimentConfig {
        let mut c = self.clone();
        c.workload.seed = seed;
        c
    }

    pub fn with_k(&self, k: usize) -> ExperimentConfig {
        let mut c = self.clone();
        c.laps_sd.queues.k = k;
        c
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ConfigBuilder::new().build().expect("defaults are valid")
    }
}

/// Layered config assembly.
#[derive(Debug, Default)]
pub struct ConfigBuilder {
    layers: Vec<Table>,
    overrides: Vec<(String, Value)>,
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layer(mut self, table: Table) -> Self {
        self.layers.push(table);
        self
    }

    pub fn layer_str(self, text: &str) -> Result<Self, ConfigError> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("<config>", e.to_string()))?;
        Ok(self.layer(table))
    }

    /// A file holding only cost keys, with or without a `[cost]` header.
    pub fn cost_layer_str(self, text: &str) -> Result<Self, ConfigError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("cost", e.to_string()))?;
        if !table.contains_key("cost") {
            let mut root = Table::new();
            root.insert("cost".into(), Value::Table(std::mem::take(&mut table)));
            table = root;
        }
        Ok(self.layer(table))
    }

    /// `key=value` with a dotted key, e.g. `stability.delta=0.02`.
    pub fn set(mut self, assignment: &str) -> Result<Self, ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::new(assignment, "expected key=value"))?;
        self.overrides
            .push((key.trim().to_owned(), parse_override_value(raw.trim())));
        Ok(self)
    }

    pub fn build(self) -> Result<ExperimentConfig, ConfigError> {
        let mut user = Table::new();
        for layer in self.layers {
            merge(&mut user, layer);
        }
        for (k, v) in self.overrides {
            set_path(&mut user, &k, v)?;
        }

        let profile_name = match user.remove("profile") {
            Some(Value::String(s)) => s,
            Some(_) => return Err(ConfigError::new("profile", "must be a string")),
            None => DEFAULT_PROFILE.to_owned(),
        };
        let mut merged = defaults();
        merged.remove("profiles");
        merged.remove("version");
        merge(&mut merged, profile_table(&profile_name)?);
        merge(&mut merged, user);

        let mut workload_table = Table::new();
        for key in WORKLOAD_KEYS {
            if let Some(v) = merged.remove(key) {
                workload_table.insert(key.to_owned(), v);
            }
        }
        let section = |merged: &mut Table, name: &str| -> Table {
            match merged.remove(name) {
                Some(Value::Table(t)) => t,
                _ => Table::new(),
            }
        };
        let cost_t = section(&mut merged, "cost");
        let laps_t = section(&mut merged, "laps_sd");
        let stab_t = section(&mut merged, "stability");
        if let Some(key) = merged.keys().next() {
            return Err(ConfigError::new(key.clone(), "unknown config key"));
        }

        let workload = WorkloadConfig::deserialize(workload_table)
            .map_err(|e| ConfigError::new(workload_error_path(&e.to_string()), e.to_string()))?;
        workload.validate()?;

        let cs = CostSection::deserialize(cost_t)
            .map_err(|e| ConfigError::new("cost", e.to_string()))?;
        if cs.spec_len == 0 {
            return Err(ConfigError::new("cost.spec_len", "must be >= 1"));
        }
        let cost = CostModel {
            t_ssm_per_token: non_negative_ms("cost.t_ssm_per_token_ms", cs.t_ssm_per_token_ms)?,
            t_llm_verify: non_negative_ms("cost.t_llm_verify_ms", cs.t_llm_verify_ms)?,
            spec_len: cs.spec_len,
            switch_base: non_negative_ms("cost.switch_base_ms", cs.switch_base_ms)?,
            switch_per_token: non_negative_ms("cost.switch_per_token_ms", cs.switch_per_token_ms)?,
            acceptance_mode: cs.acceptance_mode,
        };

        let ls = LapsSdSection::deserialize(laps_t)
            .map_err(|e| ConfigError::new("laps_sd", e.to_string()))?;
        if ls.k == 0 {
            return Err(ConfigError::new("laps_sd.k", "must be >= 1"));
        }
        if !(ls.s1_up_ms > 0.0 && ls.s1_up_ms.is_finite()) || SimTime::from_ms(ls.s1_up_ms) == SimTime::ZERO {
            return Err(ConfigError::new("laps_sd.s1_up_ms", "must be > 0"));
        }
        if !(ls.m > 1.0 && ls.m.is_finite()) {
            return Err(ConfigError::new("laps_sd.m", "must be > 1"));
        }

        let ss = StabilitySection::deserialize(stab_t)
            .map_err(|e| ConfigError::new("stability", e.to_string()))?;
        if ss.gamma < 2 {
            return Err(ConfigError::new("stability.gamma", "must be >= 2"));
        }
        if ss.delta.is_nan() || ss.delta < 0.0 {
            return Err(ConfigError::new("stability.delta", "must be >= 0"));
        }

        Ok(ExperimentConfig {
            defaults_version: defaults_version(),
            profile: profile_name,
            workload,
            cost,
            laps_sd: LapsSdConfig {
                queues: QueueConfig {
                    k: ls.k,
                    s1_up: SimTime::from_ms(ls.s1_up_ms),
                    m: ls.m,
                },
                stability: StabilityConfig {
                    gamma: ss.gamma,
                    delta: ss.delta,
                    spread: ss.spread,
                },
                cost,
                placement: ls.placement,
                estimates: ls.estimates,
            },
        })
    }
}

fn workload_error_path(message: &str) -> String {
    WORKLOAD_KEYS
        .iter()
        .find(|k| message.contains(*k))
        .map_or_else(|| "workload".to_owned(), |k| (*k).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build() {
        let c = ExperimentConfig::default();
        assert_eq!(c.profile, "chat");
        assert_eq!(c.laps_sd.stability, StabilityConfig::new(5, 0.05));
        assert_eq!(c.laps_sd.cost, c.cost);
        assert!(c.defaults_version >= 1);
    }

    #[test]
    fn all_profiles_valid() {
        for p in PROFILES {
            profile(p).unwrap().validate().unwrap();
        }
        assert_eq!(profile("nope").unwrap_err().path, "profile");
    }

    #[test]
    fn code_profile_has_highest_acceptance() {
        let mid = |p: &str| {
            let r = profile(p).unwrap().acceptance_profile.stable_rate;
            (r[0] + r[1]) / 2.0
        };
        assert!(mid("code") > mid("chat"));
        assert!(mid("code") > mid("reasoning"));
    }

    #[test]
    fn overrides_and_layers() {
        let c = ConfigBuilder::new()
            .layer_str("profile = \"code\"\nnum_requests = 7\n[stability]\ndelta = 0.02")
            .unwrap()
            .set("laps_sd.k=6")
            .unwrap()
            .set("cost.acceptance_mode=fluid")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.profile, "code");
        assert_eq!(c.workload.num_requests, 7);
        assert_eq!(c.laps_sd.stability.delta, 0.02);
        assert_eq!(c.laps_sd.stability.gamma, 5);
        assert_eq!(c.laps_sd.queues.k, 6);
        assert_eq!(c.cost.acceptance_mode, AcceptanceMode::Fluid);
        assert_eq!(c.laps_sd.cost.acceptance_mode, AcceptanceMode::Fluid);
    }

    #[test]
    fn invalid_stable_rate_names_key() {
        let err = ConfigBuilder::new()
            .layer_str("[acceptance_profile]\nstable_rate = [0.2, 1.5]")
            .unwrap()
            .build()
            .unwrap_err();
        assert_eq!(err.path, "acceptance_profile.stable_rate");
    }

    #[test]
    fn bad_sections_name_keys() {
        let cases = [
            ("laps_sd.k=0", "laps_sd.k"),
            ("laps_sd.m=1.0", "laps_sd.m"),
            ("stability.gamma=1", "stability.gamma"),
            ("cost.spec_len=0", "cost.spec_len"),
            ("cost.t_llm_verify_ms=-1.0", "cost.t_llm_verify_ms"),
            ("bogus=1", "bogus"),
        ];
        for (set, path) in cases {
            let err = ConfigBuilder::new().set(set).unwrap().build().unwrap_err();
            assert_eq!(err.path, path, "{set}");
        }
    }

    #[test]
    fn cost_file_without_header() {
        let c = ConfigBuilder::new()
            .cost_layer_str("t_llm_verify_ms = 10.0\nswitch_base_ms = 0.0")
            .unwrap()
            .build()
            .unwrap();
        assert_eq!(c.cost.t_llm_verify, SimTime::from_ms_int(10));
        assert_eq!(c.cost.switch_base, SimTime::ZERO);
    }

    #[test]
    fn cost_table_round_trips() {
        let cost = CostModel {
            acceptance_mode: AcceptanceMode::Independent,
            ..CostModel::default()
        };
        let c = ConfigBuilder::new().layer(cost_table(&cost)).build().unwrap();
        assert_eq!(c.cost, cost);
    }

    #[test]
    fn hash_changes_with_config() {
        let a = ExperimentConfig::default();
        assert_eq!(a.config_hash(), ExperimentConfig::default().config_hash());
        assert_ne!(a.config_hash(), a.with_k(7).config_hash());
        assert_eq!(a.config_hash().len(), 16);
    }
}
