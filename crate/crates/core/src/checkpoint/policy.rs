use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Checkpoint interval that minimizes expected waste for exponentially
/// distributed failures: `sqrt(2 * C * MTTF)`.
pub fn optimal_interval(checkpoint_cost: f64, mttf: f64) -> Result<f64> {
    if !(mttf > 0.0) {
        return Err(Error::InvalidArgument(format!("MTTF must be positive, got {mttf}")));
    }
    if !(checkpoint_cost >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "checkpoint cost must be non-negative, got {checkpoint_cost}"
        )));
    }
    Ok((2.0 * checkpoint_cost * mttf).sqrt())
}

/// When dynamic state is checkpointed, counted in outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CheckpointPolicy {
    /// No dynamic or static checkpoints at all.
    Disabled,
    FixedInterval {
        k: u64,
    },
    /// Interval from `optimal_interval`; `c_s` defaults to the measured cost
    /// of the first checkpoint.
    Young {
        #[serde(default)]
        c_s: Option<f64>,
        mttf_s: f64,
    },
}

impl Default for CheckpointPolicy {
    fn default() -> Self {
        CheckpointPolicy::FixedInterval { k: 1 }
    }
}

impl CheckpointPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CheckpointPolicy::Disabled => Ok(()),
            CheckpointPolicy::FixedInterval { k } if k >= 1 => Ok(()),
            CheckpointPolicy::FixedInterval { .. } => {
                Err(Error::Config("checkpoint interval k must be at least 1".into()))
            }
            CheckpointPolicy::Young { c_s, mttf_s } => {
                if !(mttf_s > 0.0) {
                    return Err(Error::Config("MTTF must be positive".into()));
                }
                if c_s.is_some_and(|c| !(c >= 0.0)) {
                    return Err(Error::Config("checkpoint cost must be non-negative".into()));
                }
                Ok(())
            }
        }
    }

    pub fn enabled(&self) -> bool {
        !matches!(self, CheckpointPolicy::Disabled)
    }
}

/// Turns a policy into a concrete cadence once the costs are known.
#[derive(Debug, Clone, PartialEq)]
pub struct Cadence {
    policy: CheckpointPolicy,
    every: Option<u64>,
}

impl Cadence {
    pub fn new(policy: CheckpointPolicy) -> Self {
        let every = match policy {
            CheckpointPolicy::FixedInterval { k } => Some(k),
            _ => None,
        };
        Self { policy, every }
    }

    pub fn interval(&self) -> Option<u64> {
        self.every
    }

    /// Fixes the Young cadence from the measured first checkpoint cost and the
    /// simulated duration of one outer iteration. Rounds to at least 1.
    pub fn calibrate(&mut self, measured_checkpoint_s: f64, outer_iteration_s: f64) -> Result<()> {
        if let CheckpointPolicy::Young { c_s, mttf_s } = self.policy {
            if self.every.is_none() {
                let interval = optimal_interval(c_s.unwrap_or(measured_checkpoint_s), mttf_s)?;
                let k = if outer_iteration_s > 0.0 {
                    (interval / outer_iteration_s).round().max(1.0)
                } else {
                    1.0
                };
                self.every = Some(k.min(u64::MAX as f64) as u64);
            }
        }
        Ok(())
    }

    /// Whether the state after outer iteration `tag` is checkpointed.
    pub fn due(&self, tag: u64) -> bool {
        match (self.policy, self.every) {
            (CheckpointPolicy::Disabled, _) => false,
            (_, Some(k)) => tag % k == 0,
            // Young before calibration: checkpoint every iteration.
            (_, None) => true,
        }
    }
}
