use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A sampling policy the simulator can run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicySpec {
    /// Sample `k` after the last sample unless its ACK arrives first; after
    /// entering state 2 wait `(beta - (X + Y))^+` from the ACK.
    EarlySampling { k: f64, beta: f64 },
    /// Always wait for the ACK, then wait `(beta - (X + Y))^+`.
    WaitForAck { beta: f64 },
    /// Sample every `period`, preempting transmissions known to be corrupted.
    PeriodicPreempt { period: f64 },
}

impl PolicySpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPolicy(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let non_negative = |v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidPolicy(format!("beta must be >= 0 and finite, got {v}")))
            }
        };
        match *self {
            PolicySpec::EarlySampling { k, beta } => {
                positive("k", k)?;
                non_negative(beta)
            }
            PolicySpec::WaitForAck { beta } => non_negative(beta),
            PolicySpec::PeriodicPreempt { period } => positive("period", period),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::EarlySampling { .. } => "early",
            PolicySpec::WaitForAck { .. } => "wait_ack",
            PolicySpec::PeriodicPreempt { .. } => "periodic",
        }
    }
}
