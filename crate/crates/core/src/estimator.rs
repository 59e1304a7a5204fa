//! Acceptance-rate stability detection and execution-time estimation.
//!
//! A request's cumulative draft acceptance ratio is noisy for the first
//! rounds and then settles. Once the last `gamma` entries of that series lie
//! within `delta` of each other the request is considered stable, its rate is
//! frozen as the window mean, and its execution time is estimated as
//!
//! ```text
//! T = n*L*t_ssm / (n*A + 1) + L*t_llm / (n*A + 1)
//! ```
//!
//! where `n*A + 1` is the expected number of tokens accepted per round
//! (draft tokens plus the verifier's bonus token).

use serde::{Deserialize, Serialize};

use crate::model::SimTime;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EstimatorError {
    #[error("acceptance history is not stable")]
    NotStable,
    #[error("request is not perceptible")]
    NotPerceptible,
}

/// How the spread of the stability window is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadRule {
    /// `max - min` over the window.
    #[default]
    Window,
    /// Largest difference between adjacent entries of the window.
    Adjacent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub gamma: usize,
    /// Strict upper bound on the spread. Zero disables detection.
    pub delta: f64,
    #[serde(default)]
    pub spread: SpreadRule,
}

impl StabilityConfig {
    pub fn new(gamma: usize, delta: f64) -> Self {
        StabilityConfig {
            gamma,
            delta,
            spread: SpreadRule::Window,
        }
    }

    /// A configuration under which no history is ever stable.
    pub fn disabled() -> Self {
        StabilityConfig::new(2, 0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.gamma < 2 {
            return Err(format!("stability.gamma must be >= 2, got {}", self.gamma));
        }
        if self.delta.is_nan() || self.delta < 0.0 {
            return Err(format!("stability.delta must be >= 0, got {}", self.delta));
        }
        Ok(())
    }
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig::new(5, 0.05)
    }
}

/// Cumulative draft acceptance ratio after each round, from per-round
/// `(proposed, accepted)` counts with bonus tokens excluded.
pub fn cumulative_rate_history(rounds: &[(u64, u64)]) -> Vec<f64> {
    let mut proposed = 0u64;
    let mut accepted = 0u64;
    rounds
        .iter()
        .map(|&(p, a)| {
            proposed += p;
            accepted += a;
            if proposed == 0 {
                0.0
            } else {
                accepted as f64 / proposed as f64
            }
        })
        .collect()
}

fn window<'a>(history: &'a [f64], cfg: &StabilityConfig) -> Option<&'a [f64]> {
    if cfg.gamma == 0 || history.len() < cfg.gamma {
        None
    } else {
        Some(&history[history.len() - cfg.gamma..])
    }
}

fn spread(win: &[f64], rule: SpreadRule) -> f64 {
    match rule {
        SpreadRule::Window => {
            let (lo, hi) = win
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        }
        SpreadRule::Adjacent => win
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max),
    }
}

pub fn is_stable(history: &[f64], cfg: &StabilityConfig) -> bool {
    window(history, cfg).is_some_and(|w| spread(w, cfg.spread) < cfg.delta)
}

/// Mean of the stability window.
pub fn predict_acceptance(history: &[f64], cfg: &StabilityConfig) -> Result<f64, EstimatorError> {
    if !is_stable(history, cfg) {
        return Err(EstimatorError::NotStable);
    }
    let win = window(history, cfg).ok_or(EstimatorError::NotStable)?;
    Ok(win.iter().sum::<f64>() / win.len() as f64)
}

pub fn estimate_execution_time(
    length: u64,
    accept_rate: f64,
    spec_len: u32,
    t_ssm: SimTime,
    t_llm: SimTime,
) -> SimTime {
    if length == 0 {
        return SimTime::ZERO;
    }
    let n = f64::from(spec_len);
    let l = length as f64;
    let per_round_tokens = n * accept_rate.clamp(0.0, 1.0) + 1.0;
    let speculation = n * l * t_ssm.as_us() as f64 / per_round_tokens;
    let verification = l * t_llm.as_us() as f64 / per_round_tokens;
    SimTime::from_us_f64(speculation + verification)
}
