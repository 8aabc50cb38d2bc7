//! Dataset generation, rollouts through the self-financing portfolio, and
//! mini-batch Adam training with validation-epoch selection.

mod config;
mod engine;
mod features;
mod trainer;

pub use config::{
    Budget, ContractSection, ExperimentConfig, HedgeSection, MarketSection, NetworkSection,
    OptimizerSection, Seeds, V0Source, PRESET_NAMES, SCHEMA_VERSION,
};
pub use engine::{evaluate, rollout, Evaluation, HedgeEnv};
pub use features::build_features;
pub use trainer::{train, Checkpoint, EpochRecord, TrainReport, Trainer};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};

/// Penalty applied to terminal hedging errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    /// mean squared error (QDH)
    Mse,
    /// mean squared positive error (SQDH)
    Smse,
}

impl Penalty {
    pub const ALL: [Penalty; 2] = [Penalty::Mse, Penalty::Smse];

    #[inline]
    pub fn value(self, error: f64) -> f64 {
        match self {
            Penalty::Mse => error * error,
            Penalty::Smse => {
                let e = error.max(0.0);
                e * e
            }
        }
    }

    /// Derivative in the error; the SMSE subgradient at zero is zero.
    #[inline]
    pub fn derivative(self, error: f64) -> f64 {
        match self {
            Penalty::Mse => 2.0 * error,
            Penalty::Smse => {
                if error > 0.0 {
                    2.0 * error
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Penalty::Mse => "mse",
            Penalty::Smse => "smse",
        }
    }

    /// Strategy label used in presets and reports.
    pub fn method(self) -> &'static str {
        match self {
            Penalty::Mse => "qdh",
            Penalty::Smse => "sqdh",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            Penalty::Mse => 0.01,
            Penalty::Smse => 0.01 / 6.0,
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Penalty {
    type Err = HedgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" | "qdh" => Ok(Penalty::Mse),
            "smse" | "sqdh" => Ok(Penalty::Smse),
            _ => Err(HedgeError::Parse(format!("unknown penalty `{s}`"))),
        }
    }
}

/// Empirical penalty: the mean of `penalty(e)` over the batch.
pub fn loss(errors: &[f64], penalty: Penalty) -> Result<f64> {
    if errors.is_empty() {
        return Err(HedgeError::Contract("loss of an empty batch".into()));
    }
    Ok(errors.iter().map(|&e| penalty.value(e)).sum::<f64>() / errors.len() as f64)
}

/// Which slice of the data a path set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataRole {
    Train,
    Validation,
    Test,
}

impl DataRole {
    fn tag(self) -> u64 {
        match self {
            DataRole::Train => 0x7472_6169_6e00_0001,
            DataRole::Validation => 0x7661_6c69_6400_0002,
            DataRole::Test => 0x7465_7374_0000_0003,
        }
    }

    /// Root seed of this role's per-path streams.
    pub fn seed(self, data_seed: u64) -> u64 {
        splitmix64(data_seed ^ self.tag())
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[1.0, -1.0], Penalty::Mse).unwrap(), 1.0);
        assert_eq!(loss(&[1.0, -1.0], Penalty::Smse).unwrap(), 0.5);
        assert_eq!(loss(&[-3.0, -0.1], Penalty::Smse).unwrap(), 0.0);
        assert!(loss(&[], Penalty::Mse).is_err());
    }

    #[test]
    fn smse_flat_side() {
        for e in [-5.0, -1e-12, 0.0] {
            assert_eq!(Penalty::Smse.derivative(e), 0.0);
        }
        assert_eq!(Penalty::Smse.derivative(1.5), Penalty::Mse.derivative(1.5));
    }

    #[test]
    fn derivatives_match_differences() {
        for p in Penalty::ALL {
            for e in [-2.0, 0.3, 4.0] {
                let h = 1e-6;
                let fd = (p.value(e + h) - p.value(e - h)) / (2.0 * h);
                assert!((fd - p.derivative(e)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn role_seeds_are_distinct() {
        for seed in [0, 1, 42, u64::MAX] {
            let s = [DataRole::Train, DataRole::Validation, DataRole::Test].map(|r| r.seed(seed));
            assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
        }
    }

    #[test]
    fn penalty_names() {
        assert_eq!("sqdh".parse::<Penalty>().unwrap(), Penalty::Smse);
        assert_eq!("mse".parse::<Penalty>().unwrap(), Penalty::Mse);
        assert!("mae".parse::<Penalty>().is_err());
    }
}
