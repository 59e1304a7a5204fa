use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceKind {
    Constant,
    Stabilizing,
    Trace,
}

/// Generative model of a request's per-round token acceptance probability.
///
/// `Stabilizing` is a damped sinusoid around `stable_rate`: noisy in the first
/// rounds, converging as decoding progresses. `Trace` replays a recorded
/// per-round series and holds its last value.
///
/// The field layout mirrors the trace-file record, so all fields are present
/// for every kind; kinds ignore the fields they do not use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceProcess {
    pub kind: AcceptanceKind,
    pub stable_rate: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub period: u32,
    pub trace: Option<Vec<f64>>,
}

impl AcceptanceProcess {
    pub fn constant(rate: f64) -> Result<Self, ModelError> {
        let p = AcceptanceProcess {
            kind: AcceptanceKind::Constant,
            stable_rate: rate,
            amplitude: 0.0,
            decay: 0.0,
            period: 1,
            trace: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn stabilizing(
        stable_rate: f64,
        amplitude: f64,
        decay: f64,
        period: u32,
    ) -> Result<Self, ModelError> {
        let p = AcceptanceProcess {
            kind: AcceptanceKind::Stabilizing,
            stable_rate,
            amplitude,
            decay,
            period,
            trace: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// `stable_rate` is set to the last entry of the trace.
    pub fn from_trace(trace: Vec<f64>) -> Result<Self, ModelError> {
        let last = trace.last().copied().unwrap_or(0.0);
        let p = AcceptanceProcess {
            kind: AcceptanceKind::Trace,
            stable_rate: last,
            amplitude: 0.0,
            decay: 0.0,
            period: 1,
            trace: Some(trace),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let prob = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(ModelError::OutOfRange { field: name, value: v })
            }
        };
        prob("stable_rate", self.stable_rate)?;
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(ModelError::OutOfRange {
                field: "amplitude",
                value: self.amplitude,
            });
        }
        if !(0.0..1.0).contains(&self.decay) {
            return Err(ModelError::OutOfRange {
                field: "decay",
                value: self.decay,
            });
        }
        if self.period == 0 {
            return Err(ModelError::OutOfRange {
                field: "period",
                value: 0.0,
            });
        }
        if self.kind == AcceptanceKind::Trace {
            match &self.trace {
                None => return Err(ModelError::EmptyTrace),
                Some(t) if t.is_empty() => return Err(ModelError::EmptyTrace),
                Some(t) => {
                    for &v in t {
                        prob("trace", v)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Acceptance probability for the given zero-based decoding round.
    pub fn rate_at(&self, round: u64) -> f64 {
        match self.kind {
            AcceptanceKind::Constant => self.stable_rate,
            AcceptanceKind::Stabilizing => {
                let t = round as f64;
                let envelope = self.amplitude * self.decay.powf(t);
                let phase = 2.0 * PI * t / f64::from(self.period);
                clamp01(self.stable_rate + envelope * phase.sin())
            }
            AcceptanceKind::Trace => {
                let trace = self.trace.as_deref().unwrap_or(&[]);
                match trace.len() {
                    0 => self.stable_rate,
                    len => trace[(round as usize).min(len - 1)],
                }
            }
        }
    }
}

/// Free-function form of [`AcceptanceProcess::rate_at`].
pub fn acceptance_rate_at(proc: &AcceptanceProcess, round: u64) -> f64 {
    proc.rate_at(round)
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_rate() {
        let p = AcceptanceProcess::constant(0.7).unwrap();
        assert_eq!(p.rate_at(12), 0.7);
    }

    #[test]
    fn zero_amplitude_is_constant() {
        let p = AcceptanceProcess::stabilizing(0.5, 0.0, 0.9, 8).unwrap();
        for r in 0..50 {
            assert_eq!(p.rate_at(r), 0.5);
        }
    }

    #[test]
    fn damped_sinusoid_hand_value() {
        // 0.5 + 0.4 * 0.5^1 * sin(2*pi*1/4) = 0.7
        let p = AcceptanceProcess::stabilizing(0.5, 0.4, 0.5, 4).unwrap();
        assert!((p.rate_at(1) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn trace_holds_last_value() {
        let p = AcceptanceProcess::from_trace(vec![0.2, 0.4, 0.6]).unwrap();
        assert_eq!(p.rate_at(0), 0.2);
        assert_eq!(p.rate_at(2), 0.6);
        assert_eq!(p.rate_at(100), 0.6);
    }

    #[test]
    fn empty_trace_rejected() {
        assert!(matches!(
            AcceptanceProcess::from_trace(vec![]),
            Err(ModelError::EmptyTrace)
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(AcceptanceProcess::constant(1.5).is_err());
        assert!(AcceptanceProcess::stabilizing(0.5, 0.1, 1.0, 4).is_err());
        assert!(AcceptanceProcess::stabilizing(0.5, -0.1, 0.5, 4).is_err());
        assert!(AcceptanceProcess::stabilizing(0.5, 0.1, 0.5, 0).is_err());
    }

    proptest! {
        #[test]
        fn stabilizing_converges(
            stable in 0.0f64..=1.0,
            amp in 0.0f64..1.0,
            decay in 0.0f64..0.999,
            period in 1u32..32,
            round in 0u64..500,
        ) {
            let p = AcceptanceProcess::stabilizing(stable, amp, decay, period).unwrap();
            let r = p.rate_at(round);
            prop_assert!((0.0..=1.0).contains(&r));
            let bound = amp * decay.powf(round as f64);
            prop_assert!((r - stable).abs() <= bound + 1e-12);
            prop_assert_eq!(r, acceptance_rate_at(&p, round));
        }
    }
}
