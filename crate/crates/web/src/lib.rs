//! Browser bindings: path simulation, vanilla price curves and a small
//! in-browser hedging run.
//!
//! Every exported function returns a JSON string. The plain Rust functions
//! underneath are what the native tests exercise.

use hedge_core::instruments::{lookback_payoff, InstrumentSet};
use hedge_core::market::{simulate_paths, BsmParams, Dynamics, Grid, MarketModel, Measure, MjdParams};
use hedge_core::metrics::{hedge_stats, HedgeStats};
use hedge_core::neural::PolicyParams;
use hedge_core::pricing::{OptionKind, VanillaPricer};
use hedge_core::training::{
    Budget, DataRole, EpochRecord, ExperimentConfig, HedgeEnv, Penalty, Trainer,
};
use hedge_core::HedgeError;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MATURITY: u32 = 10;
const RATE: f64 = 0.03;
const SPOT: f64 = 100.0;
const MAX_PATHS: usize = 20_000;

fn model(dynamics: &str, jump_intensity: f64) -> Result<MarketModel, HedgeError> {
    let dynamics = match dynamics {
        "bsm" => Dynamics::Bsm(BsmParams::BENCHMARK),
        "mjd" => Dynamics::Mjd(MjdParams { lambda: jump_intensity, ..MjdParams::BENCHMARK }),
        other => return Err(HedgeError::Config(format!("unknown dynamics `{other}`"))),
    };
    let m = MarketModel { dynamics, rate: RATE };
    m.dynamics.validate()?;
    Ok(m)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

fn js_err(e: HedgeError) -> JsError {
    JsError::new(&e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedPaths {
    pub times: Vec<f64>,
    pub spots: Vec<Vec<f64>>,
    pub running_max: Vec<Vec<f64>>,
    pub payoffs: Vec<f64>,
}

/// Physical-measure paths over ten years.
pub fn simulate_demo(
    dynamics: &str,
    n_paths: usize,
    steps_per_year: usize,
    seed: u32,
) -> Result<SimulatedPaths, HedgeError> {
    if n_paths == 0 || n_paths > MAX_PATHS {
        return Err(HedgeError::Config(format!("paths must be in 1..={MAX_PATHS}")));
    }
    let grid = Grid {
        n_paths,
        n_steps: steps_per_year * MATURITY as usize,
        maturity: MATURITY,
        spot: SPOT,
    };
    let paths = simulate_paths(&model(dynamics, MjdParams::BENCHMARK.lambda)?, Measure::Physical, grid, u64::from(seed))?;
    let dt = paths.dt();
    Ok(SimulatedPaths {
        times: (0..=grid.n_steps).map(|n| n as f64 * dt).collect(),
        spots: paths.spot_begin.rows().into_iter().map(|r| r.to_vec()).collect(),
        running_max: paths.running_max.rows().into_iter().map(|r| r.to_vec()).collect(),
        payoffs: (0..n_paths)
            .map(|p| lookback_payoff(paths.terminal_spot(p), paths.terminal_max(p)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceCurves {
    pub strikes: Vec<f64>,
    pub bs_call: Vec<f64>,
    pub bs_put: Vec<f64>,
    pub merton_call: Vec<f64>,
    pub merton_put: Vec<f64>,
    pub bs_call_delta: Vec<f64>,
    pub merton_call_delta: Vec<f64>,
    /// risk-neutral jump intensity used by the Merton curves
    pub merton_intensity: f64,
}

/// Black-Scholes and Merton quotes across strikes for spot 100.
pub fn price_curves_demo(
    strike_lo: f64,
    strike_hi: f64,
    points: usize,
    tau: f64,
    jump_intensity: f64,
) -> Result<PriceCurves, HedgeError> {
    if !(strike_lo > 0.0 && strike_hi > strike_lo) || !(2..=1000).contains(&points) {
        return Err(HedgeError::Config("need 0 < low < high strike and 2..=1000 points".into()));
    }
    // same diffusion volatility as the jump model, so the gap is the jumps
    let bs = VanillaPricer::BlackScholes { sigma: MjdParams::BENCHMARK.sigma, rate: RATE };
    let merton = VanillaPricer::for_market(&model("mjd", jump_intensity)?)?;
    let merton_intensity = match merton {
        VanillaPricer::Merton { jumps, .. } => jumps.intensity,
        VanillaPricer::BlackScholes { .. } => 0.0,
    };
    let mut c = PriceCurves {
        strikes: Vec::with_capacity(points),
        bs_call: Vec::new(),
        bs_put: Vec::new(),
        merton_call: Vec::new(),
        merton_put: Vec::new(),
        bs_call_delta: Vec::new(),
        merton_call_delta: Vec::new(),
        merton_intensity,
    };
    for i in 0..points {
        let k = strike_lo + (strike_hi - strike_lo) * i as f64 / (points - 1) as f64;
        let bc = bs.quote(SPOT, k, tau, OptionKind::Call)?;
        let mc = merton.quote(SPOT, k, tau, OptionKind::Call)?;
        c.strikes.push(k);
        c.bs_call.push(bc.price);
        c.bs_call_delta.push(bc.delta);
        c.bs_put.push(bs.quote(SPOT, k, tau, OptionKind::Put)?.price);
        c.merton_call.push(mc.price);
        c.merton_call_delta.push(mc.delta);
        c.merton_put.push(merton.quote(SPOT, k, tau, OptionKind::Put)?.price);
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub policy: Vec<usize>,
    pub bank_only: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoEvaluation {
    pub epoch: usize,
    pub selected_epoch: usize,
    pub policy: HedgeStats,
    pub bank_only: HedgeStats,
    pub policy_exposure: f64,
    pub histogram: Histogram,
}

/// A reduced-budget training run driven one epoch at a time.
pub struct Demo {
    trainer: Trainer,
}

impl Demo {
    pub fn new(
        dynamics: &str,
        instruments: &str,
        penalty: &str,
        train_paths: usize,
        seed: u32,
    ) -> Result<Self, HedgeError> {
        let set: InstrumentSet = instruments.parse()?;
        let penalty: Penalty = penalty.parse()?;
        let batch_size = 250;
        if train_paths < batch_size || !train_paths.is_multiple_of(batch_size) || train_paths > MAX_PATHS {
            return Err(HedgeError::Config(format!(
                "training paths must be a multiple of {batch_size} up to {MAX_PATHS}"
            )));
        }
        let preset = format!("{dynamics}-{set}-{}", penalty.method());
        let mut config = ExperimentConfig::preset(&preset)?.with_budget(Budget {
            train_paths,
            valid_paths: 1000,
            test_paths: 2000,
            epochs: 100,
            batch_size,
        });
        config.network.widths = vec![12, 12];
        config.seeds.data = u64::from(seed);
        config.seeds.init = u64::from(seed);
        config.validate()?;
        Ok(Demo { trainer: Trainer::new(config)? })
    }

    pub fn config(&self) -> &ExperimentConfig {
        self.trainer.config()
    }

    pub fn records(&self) -> &[EpochRecord] {
        self.trainer.records()
    }

    pub fn train_epoch(&mut self) -> Result<EpochRecord, HedgeError> {
        if self.trainer.is_done() {
            return Err(HedgeError::Config("epoch budget exhausted".into()));
        }
        self.trainer.run_epoch()
    }

    /// Test-set statistics of the best validation snapshot against the
    /// bank-only policy.
    pub fn evaluate(&self, bins: usize) -> Result<DemoEvaluation, HedgeError> {
        let config = self.trainer.config();
        let env: &HedgeEnv = self.trainer.env();
        let ck = self.trainer.checkpoint();
        let best = PolicyParams::from_flat(&config.lstm_config()?, &ck.best_params)?;
        let test = config.simulate(DataRole::Test)?;
        let ev = env.evaluate(&best, &test)?;
        let zero = PolicyParams::zeros(&config.lstm_config()?);
        let base = env.evaluate(&zero, &test)?;
        let exposure = ev.deltas.iter().sum::<f64>() / ev.deltas.len().max(1) as f64;
        Ok(DemoEvaluation {
            epoch: self.trainer.epoch(),
            selected_epoch: ck.best_epoch,
            policy: hedge_stats(&ev.errors)?,
            bank_only: hedge_stats(&base.errors)?,
            policy_exposure: exposure,
            histogram: histogram(&ev.errors, &base.errors, bins.clamp(5, 200)),
        })
    }
}

/// Shared-edge histogram of two samples over their 1%..99% range.
pub fn histogram(a: &[f64], b: &[f64], bins: usize) -> Histogram {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let q = |p: f64| all[((all.len() - 1) as f64 * p).round() as usize];
    let (lo, mut hi) = (q(0.01), q(0.99));
    if hi <= lo {
        hi = lo + 1.0;
    }
    let width = (hi - lo) / bins as f64;
    let count = |xs: &[f64]| {
        let mut c = vec![0; bins];
        for &x in xs {
            let i = ((x - lo) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
            c[i] += 1;
        }
        c
    };
    Histogram {
        edges: (0..=bins).map(|i| lo + width * i as f64).collect(),
        policy: count(a),
        bank_only: count(b),
    }
}

#[wasm_bindgen]
pub fn simulate(dynamics: &str, n_paths: usize, steps_per_year: usize, seed: u32) -> Result<String, JsError> {
    simulate_demo(dynamics, n_paths, steps_per_year, seed).map(|p| to_json(&p)).map_err(js_err)
}

#[wasm_bindgen]
pub fn price_curves(
    strike_lo: f64,
    strike_hi: f64,
    points: usize,
    tau: f64,
    jump_intensity: f64,
) -> Result<String, JsError> {
    price_curves_demo(strike_lo, strike_hi, points, tau, jump_intensity)
        .map(|c| to_json(&c))
        .map_err(js_err)
}

#[wasm_bindgen]
pub struct HedgeDemo {
    inner: Demo,
}

#[wasm_bindgen]
impl HedgeDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        dynamics: &str,
        instruments: &str,
        penalty: &str,
        train_paths: usize,
        seed: u32,
    ) -> Result<HedgeDemo, JsError> {
        Demo::new(dynamics, instruments, penalty, train_paths, seed)
            .map(|inner| HedgeDemo { inner })
            .map_err(js_err)
    }

    /// Validation loss of the initial network.
    pub fn initial_loss(&self) -> f64 {
        self.inner.records()[0].valid_loss
    }

    pub fn train_epoch(&mut self) -> Result<String, JsError> {
        self.inner.train_epoch().map(|r| to_json(&r)).map_err(js_err)
    }

    pub fn evaluate(&self, bins: usize) -> Result<String, JsError> {
        self.inner.evaluate(bins).map(|e| to_json(&e)).map_err(js_err)
    }

    pub fn experiment(&self) -> String {
        self.inner.config().key()
    }
}
