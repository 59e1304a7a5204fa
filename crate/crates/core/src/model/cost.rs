use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelError, SimTime};

/// How a verification round turns an acceptance probability into tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceMode {
    /// Draft tokens are accepted up to the first rejection, plus one bonus token.
    #[default]
    Truncated,
    /// Each draft token is accepted independently, plus one bonus token.
    Independent,
    /// Exactly `spec_len * rate` tokens per round (fractions carried over),
    /// no bonus token, at least one token per round. No randomness.
    Fluid,
}

impl FromStr for AcceptanceMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncated" => Ok(AcceptanceMode::Truncated),
            "independent" => Ok(AcceptanceMode::Independent),
            "fluid" => Ok(AcceptanceMode::Fluid),
            other => Err(ModelError::UnknownName(other.to_owned())),
        }
    }
}

impl fmt::Display for AcceptanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AcceptanceMode::Truncated => "truncated",
            AcceptanceMode::Independent => "independent",
            AcceptanceMode::Fluid => "fluid",
        })
    }
}

/// Timing constants for the simulated accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Draft-model time per proposed token.
    #[serde(rename = "t_ssm_per_token_us")]
    pub t_ssm_per_token: SimTime,
    /// One verification forward pass of the large model.
    #[serde(rename = "t_llm_verify_us")]
    pub t_llm_verify: SimTime,
    /// Draft tokens proposed per round.
    pub spec_len: u32,
    #[serde(rename = "switch_base_us")]
    pub switch_base: SimTime,
    /// Per resident KV token of the incoming request.
    #[serde(rename = "switch_per_token_us")]
    pub switch_per_token: SimTime,
    #[serde(default)]
    pub acceptance_mode: AcceptanceMode,
}

impl CostModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.spec_len == 0 {
            return Err(ModelError::OutOfRange {
                field: "spec_len",
                value: 0.0,
            });
        }
        Ok(())
    }

    pub fn round_duration(&self) -> SimTime {
        self.t_ssm_per_token * u64::from(self.spec_len) + self.t_llm_verify
    }

    pub fn switch_cost(&self, kv_tokens: u64) -> SimTime {
        self.switch_base + self.switch_per_token * kv_tokens
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            t_ssm_per_token: SimTime::from_ms_int(2),
            t_llm_verify: SimTime::from_ms_int(25),
            spec_len: 4,
            switch_base: SimTime::from_ms_int(2),
            switch_per_token: SimTime::from_us(50),
            acceptance_mode: AcceptanceMode::Truncated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_and_switch() {
        let c = CostModel {
            t_ssm_per_token: SimTime::from_ms_int(1),
            t_llm_verify: SimTime::from_ms_int(10),
            spec_len: 4,
            switch_base: SimTime::from_ms_int(3),
            switch_per_token: SimTime::from_us(10),
            acceptance_mode: AcceptanceMode::Truncated,
        };
        assert_eq!(c.round_duration(), SimTime::from_ms_int(14));
        assert_eq!(c.switch_cost(500), SimTime::from_ms_int(8));
        assert!(c.validate().is_ok());
        assert!(CostModel { spec_len: 0, ..c }.validate().is_err());
    }

    #[test]
    fn mode_names() {
        for m in [
            AcceptanceMode::Truncated,
            AcceptanceMode::Independent,
            AcceptanceMode::Fluid,
        ] {
            assert_eq!(m.to_string().parse::<AcceptanceMode>().unwrap(), m);
        }
        assert!("greedy".parse::<AcceptanceMode>().is_err());
    }
}
