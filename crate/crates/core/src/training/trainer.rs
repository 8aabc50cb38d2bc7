use std::io::Write;
use std::path::Path;
#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;
#[cfg(target_arch = "wasm32")]
use web_time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{splitmix64, DataRole, ExperimentConfig, HedgeEnv};
use crate::error::{HedgeError, Result};
use crate::market::PathSet;
use crate::neural::{adam_step, AdamState, PolicyParams};

const SHUFFLE_TAG: u64 = 0x7368_7566_666c_6500;
const CHECKPOINT_FORMAT: u32 = 1;

/// Losses recorded at the end of an epoch; epoch 0 is the initialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// mean of the mini-batch losses seen during the epoch
    pub train_loss: Option<f64>,
    pub valid_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: ExperimentConfig,
    pub records: Vec<EpochRecord>,
    pub selected_epoch: usize,
    /// parameters of the selected epoch
    pub params: PolicyParams,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    pub fn best_valid_loss(&self) -> f64 {
        self.records[self.selected_epoch].valid_loss
    }

    /// `epoch,train_loss,valid_loss,selected`, one row per epoch.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| HedgeError::Io(std::io::Error::other(e));
        w.write_record(["epoch", "train_loss", "valid_loss", "selected"]).map_err(io)?;
        for r in &self.records {
            w.write_record(&[
                r.epoch.to_string(),
                r.train_loss.map(|l| format!("{l:?}")).unwrap_or_default(),
                format!("{:?}", r.valid_loss),
                u8::from(r.epoch == self.selected_epoch).to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Serialized training state; resuming from it continues bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: ExperimentConfig,
    pub epoch: usize,
    pub params: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_epoch: usize,
    pub adam_step: u64,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub records: Vec<EpochRecord>,
    pub elapsed_secs: f64,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| HedgeError::Parse(e.to_string()))?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| HedgeError::Parse(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(HedgeError::Parse(format!("unsupported checkpoint format {}", ck.format)));
        }
        Ok(ck)
    }
}

impl ExperimentConfig {
    /// Physical-measure paths of one data role.
    pub fn simulate(&self, role: DataRole) -> Result<PathSet> {
        crate::market::simulate_paths(
            &self.model(),
            crate::market::Measure::Physical,
            self.grid(role),
            role.seed(self.seeds.data),
        )
    }
}

/// Mini-batch Adam over the training paths, one epoch at a time.
pub struct Trainer {
    config: ExperimentConfig,
    env: HedgeEnv,
    train: PathSet,
    valid: PathSet,
    params: PolicyParams,
    adam: AdamState,
    best: PolicyParams,
    best_epoch: usize,
    records: Vec<EpochRecord>,
    epoch: usize,
    elapsed_before: f64,
    started: Instant,
}

impl Trainer {
    /// Simulate the data, initialize the network and score it on the
    /// validation set.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let params = PolicyParams::glorot(&config.lstm_config()?, config.seeds.init)?;
        let adam = AdamState::new(&params, config.adam())?;
        Self::assemble(config, params, adam, None)
    }

    pub fn resume(ck: Checkpoint) -> Result<Self> {
        let lstm = ck.config.lstm_config()?;
        let params = PolicyParams::from_flat(&lstm, &ck.params)?;
        let mut adam = AdamState::new(&params, ck.config.adam())?;
        adam.step = ck.adam_step;
        adam.m = PolicyParams::from_flat(&lstm, &ck.adam_m)?;
        adam.v = PolicyParams::from_flat(&lstm, &ck.adam_v)?;
        let best = PolicyParams::from_flat(&lstm, &ck.best_params)?;
        if ck.records.len() != ck.epoch + 1 || ck.best_epoch > ck.epoch {
            return Err(HedgeError::Parse("inconsistent checkpoint records".into()));
        }
        let resumed = (ck.epoch, best, ck.best_epoch, ck.records, ck.elapsed_secs);
        Self::assemble(ck.config, params, adam, Some(resumed))
    }

    #[allow(clippy::type_complexity)]
    fn assemble(
        config: ExperimentConfig,
        params: PolicyParams,
        adam: AdamState,
        resumed: Option<(usize, PolicyParams, usize, Vec<EpochRecord>, f64)>,
    ) -> Result<Self> {
        let started = Instant::now();
        let env = HedgeEnv::new(&config)?;
        let train = config.simulate(DataRole::Train)?;
        let valid = config.simulate(DataRole::Validation)?;
        let (epoch, best, best_epoch, records, elapsed_before) = match resumed {
            Some(r) => r,
            None => {
                let valid_loss = env.mean_loss(&params, &valid)?;
                let first = EpochRecord { epoch: 0, train_loss: None, valid_loss };
                (0, params.clone(), 0, vec![first], 0.0)
            }
        };
        Ok(Trainer {
            config,
            env,
            train,
            valid,
            params,
            adam,
            best,
            best_epoch,
            records,
            epoch,
            elapsed_before,
            started,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn env(&self) -> &HedgeEnv {
        &self.env
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn is_done(&self) -> bool {
        self.epoch >= self.config.budget.epochs
    }

    /// Current (latest) parameters.
    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn records(&self) -> &[EpochRecord] {
        &self.records
    }

    fn elapsed(&self) -> f64 {
        self.elapsed_before + self.started.elapsed().as_secs_f64()
    }

    fn order(&self, epoch: usize) -> Vec<usize> {
        let seed = splitmix64(splitmix64(self.config.seeds.init ^ SHUFFLE_TAG).wrapping_add(epoch as u64));
        let mut rows: Vec<usize> = (0..self.train.n_paths()).collect();
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        rows
    }

    /// One pass over the training set followed by validation.
    ///
    /// On divergence the parameters stay at their last finite values.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch + 1;
        let order = self.order(epoch);
        let mut total = 0.0;
        let batches = order.chunks(self.config.budget.batch_size);
        let n_batches = batches.len();
        for (k, rows) in batches.enumerate() {
            let tag = |msg: String| HedgeError::Diverged(format!("epoch {epoch}, batch {}: {msg}", k + 1));
            let (loss, grads) = self.env.batch_gradient(&self.params, &self.train, rows).map_err(|e| match e {
                HedgeError::Diverged(m) => tag(m),
                other => other,
            })?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(tag(format!("loss {loss}")));
            }
            let mut next = self.params.clone();
            adam_step(&mut next, &grads, &mut self.adam)?;
            if !next.is_finite() {
                return Err(tag("non-finite parameters after update".into()));
            }
            self.params = next;
            total += loss;
        }
        let valid_loss = self.env.mean_loss(&self.params, &self.valid).map_err(|e| match e {
            HedgeError::Diverged(m) => HedgeError::Diverged(format!("epoch {epoch}, validation: {m}")),
            other => other,
        })?;
        let record = EpochRecord { epoch, train_loss: Some(total / n_batches as f64), valid_loss };
        if valid_loss < self.records[self.best_epoch].valid_loss {
            self.best = self.params.clone();
            self.best_epoch = epoch;
        }
        self.records.push(record);
        self.epoch = epoch;
        Ok(record)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT,
            config: self.config.clone(),
            epoch: self.epoch,
            params: self.params.to_flat(),
            best_params: self.best.to_flat(),
            best_epoch: self.best_epoch,
            adam_step: self.adam.step,
            adam_m: self.adam.m.to_flat(),
            adam_v: self.adam.v.to_flat(),
            records: self.records.clone(),
            elapsed_secs: self.elapsed(),
        }
    }

    pub fn into_report(self) -> TrainReport {
        let wall_clock_secs = self.elapsed();
        TrainReport {
            config: self.config,
            records: self.records,
            selected_epoch: self.best_epoch,
            params: self.best,
            wall_clock_secs,
        }
    }

    /// Train to the end of the budget, calling `after_epoch` after each epoch.
    pub fn run<F>(mut self, mut after_epoch: F) -> Result<TrainReport>
    where
        F: FnMut(&Trainer, &EpochRecord) -> Result<()>,
    {
        while !self.is_done() {
            let record = self.run_epoch()?;
            after_epoch(&self, &record)?;
        }
        Ok(self.into_report())
    }
}

/// Train a policy with the configured budget.
pub fn train(config: &ExperimentConfig) -> Result<TrainReport> {
    Trainer::new(config.clone())?.run(|_, _| Ok(()))
}
