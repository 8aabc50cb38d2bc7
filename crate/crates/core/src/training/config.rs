//! Experiment configuration and the shipped presets.
//!
//! Configurations are TOML documents. Rates are continuously compounded per
//! year, volatilities are per square-root year, `spot` and `v0` are currency
//! amounts and `maturity_years` counts whole years.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataRole, Penalty};
use crate::error::{ensure_finite, ensure_positive, HedgeError, Result};
use crate::instruments::InstrumentSet;
use crate::market::{Dynamics, Grid, MarketModel};
use crate::neural::{AdamHyper, LstmConfig};

pub const SCHEMA_VERSION: u32 = 1;

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// Names of the shipped full-budget presets. Appending `-desk` to any
        /// of them selects the reduced budget.
        pub const PRESET_NAMES: &[&str] = &[$($name),*];

        fn preset_text(name: &str) -> Option<&'static str> {
            match name {
                $($name => Some(include_str!(concat!("../../presets/", $name, ".toml"))),)*
                _ => None,
            }
        }
    };
}

presets!(
    "bsm-stock-yearly-qdh",
    "bsm-stock-yearly-sqdh",
    "bsm-stock-monthly-qdh",
    "bsm-stock-monthly-sqdh",
    "bsm-two-options-qdh",
    "bsm-two-options-sqdh",
    "bsm-six-options-qdh",
    "bsm-six-options-sqdh",
    "mjd-stock-yearly-qdh",
    "mjd-stock-yearly-sqdh",
    "mjd-stock-monthly-qdh",
    "mjd-stock-monthly-sqdh",
    "mjd-two-options-qdh",
    "mjd-two-options-sqdh",
    "mjd-six-options-qdh",
    "mjd-six-options-sqdh",
    "bsm-stock-yearly-qdh-lrm",
    "bsm-stock-monthly-qdh-lrm",
    "bsm-two-options-qdh-lrm",
    "bsm-six-options-qdh-lrm",
    "mjd-stock-yearly-qdh-lrm",
    "mjd-stock-monthly-qdh-lrm",
    "mjd-two-options-qdh-lrm",
    "mjd-six-options-qdh-lrm",
);

const DESK_SUFFIX: &str = "-desk";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketSection {
    #[serde(flatten)]
    pub dynamics: Dynamics,
    pub rate: f64,
    pub spot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub maturity_years: u32,
    /// rebalancing dates over the life of the contract
    pub n_steps: usize,
}

/// Where the initial capital comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum V0Source {
    RiskNeutral,
    LocalRiskMinimization,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HedgeSection {
    pub instruments: InstrumentSet,
    pub penalty: Penalty,
    pub v0: f64,
    pub v0_source: V0Source,
    /// Replace log prices by log price relatives to the first date.
    #[serde(default)]
    pub normalize_features: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_widths")]
    pub widths: Vec<usize>,
}

fn default_widths() -> Vec<usize> {
    vec![24, 24]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    pub train_paths: usize,
    pub valid_paths: usize,
    pub test_paths: usize,
    pub epochs: usize,
    pub batch_size: usize,
}

impl Budget {
    pub const FULL: Budget = Budget {
        train_paths: 350_000,
        valid_paths: 75_000,
        test_paths: 75_000,
        epochs: 150,
        batch_size: 1000,
    };

    pub const DESK: Budget = Budget {
        train_paths: 20_000,
        valid_paths: 5_000,
        test_paths: 5_000,
        epochs: 30,
        batch_size: 500,
    };

    pub fn batches_per_epoch(&self) -> usize {
        self.train_paths / self.batch_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub learning_rate: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.999
}

fn default_epsilon() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data: u64,
    pub init: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub market: MarketSection,
    pub contract: ContractSection,
    pub hedge: HedgeSection,
    #[serde(default = "default_network")]
    pub network: NetworkSection,
    pub budget: Budget,
    pub optimizer: OptimizerSection,
    pub seeds: Seeds,
}

fn default_network() -> NetworkSection {
    NetworkSection { widths: default_widths() }
}

impl ExperimentConfig {
    /// Shipped preset by name, e.g. `bsm-six-options-qdh` or
    /// `mjd-stock-yearly-sqdh-desk`.
    pub fn preset(name: &str) -> Result<Self> {
        let (base, desk) = match name.strip_suffix(DESK_SUFFIX) {
            Some(base) => (base, true),
            None => (name, false),
        };
        let text = preset_text(base).ok_or_else(|| {
            HedgeError::Config(format!(
                "unknown preset `{name}`; known presets: {} (each also with `{DESK_SUFFIX}`)",
                PRESET_NAMES.join(", ")
            ))
        })?;
        let cfg = Self::from_toml_str(text)?;
        Ok(if desk { cfg.with_budget(Budget::DESK) } else { cfg })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HedgeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HedgeError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn with_budget(mut self, budget: Budget) -> Self {
        self.budget = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HedgeError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let wrap = |e: HedgeError| HedgeError::Config(e.to_string());
        self.market.dynamics.validate().map_err(wrap)?;
        ensure_finite("rate", self.market.rate).map_err(wrap)?;
        ensure_positive("spot", self.market.spot).map_err(wrap)?;
        ensure_positive("v0", self.hedge.v0).map_err(wrap)?;
        let set = self.hedge.instruments;
        if self.contract.maturity_years == 0 {
            return Err(HedgeError::Config("maturity_years must be >= 1".into()));
        }
        let expected = set.rebalance_steps(self.contract.maturity_years);
        if self.contract.n_steps != expected {
            return Err(HedgeError::Config(format!(
                "{set} rebalances {} times a year: n_steps must be {expected}, got {}",
                set.rebalances_per_year(),
                self.contract.n_steps
            )));
        }
        self.lstm_config().map_err(wrap)?;
        let b = &self.budget;
        if b.batch_size == 0 || b.train_paths == 0 || !b.train_paths.is_multiple_of(b.batch_size) {
            return Err(HedgeError::Config(format!(
                "batch_size {} must divide train_paths {}",
                b.batch_size, b.train_paths
            )));
        }
        if b.valid_paths == 0 || b.test_paths == 0 {
            return Err(HedgeError::Config("valid_paths and test_paths must be >= 1".into()));
        }
        let o = &self.optimizer;
        ensure_positive("learning_rate", o.learning_rate).map_err(wrap)?;
        ensure_positive("epsilon", o.epsilon).map_err(wrap)?;
        if !(0.0..1.0).contains(&o.beta1) || !(0.0..1.0).contains(&o.beta2) {
            return Err(HedgeError::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Key `dynamics-instruments-method`, e.g. `bsm-six-options-qdh`.
    /// Experiment key such as `bsm-six-options-qdh`; capital taken from
    /// local risk minimization adds `-lrm`, a custom capital `-custom`.
    pub fn key(&self) -> String {
        let suffix = match self.hedge.v0_source {
            V0Source::RiskNeutral => "",
            V0Source::LocalRiskMinimization => "-lrm",
            V0Source::Custom => "-custom",
        };
        format!(
            "{}-{}-{}{suffix}",
            self.market.dynamics.name(),
            self.hedge.instruments,
            self.hedge.penalty.method()
        )
    }

    pub fn model(&self) -> MarketModel {
        MarketModel { dynamics: self.market.dynamics, rate: self.market.rate }
    }

    pub fn grid(&self, role: DataRole) -> Grid {
        let n_paths = match role {
            DataRole::Train => self.budget.train_paths,
            DataRole::Validation => self.budget.valid_paths,
            DataRole::Test => self.budget.test_paths,
        };
        Grid {
            n_paths,
            n_steps: self.contract.n_steps,
            maturity: self.contract.maturity_years,
            spot: self.market.spot,
        }
    }

    pub fn lstm_config(&self) -> Result<LstmConfig> {
        let set = self.hedge.instruments;
        LstmConfig::new(set.feature_dim(), self.network.widths.clone(), set.decision_dim())
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.optimizer.learning_rate,
            beta1: self.optimizer.beta1,
            beta2: self.optimizer.beta2,
            epsilon: self.optimizer.epsilon,
        }
    }
}
