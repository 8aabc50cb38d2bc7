//! Discrete-time market dynamics for the underlying.
//!
//! Log-returns over a period of length `dt` follow either a Black-Scholes
//! (normal) law or a Merton jump-diffusion law, under the physical measure or
//! the risk-neutral measure. Paths are generated per path from a ChaCha8
//! stream keyed by `(seed, path index)`, so path `i` is the same no matter how
//! many paths are requested or how many threads generate them.
//!
//! Sampling pipeline (fixed):
//! * standard normals: `rand_distr::StandardNormal` (ziggurat),
//! * jump counts: `rand_distr::Poisson` with mean `intensity * dt`,
//! * per step the draws are taken in the order diffusion noise, jump count,
//!   then that many jump sizes.

use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, HedgeError, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Physical,
    RiskNeutral,
}

/// Black-Scholes parameters on a yearly scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsmParams {
    pub mu: f64,
    pub sigma: f64,
}

impl BsmParams {
    /// Parameters used throughout the benchmark experiments.
    pub const BENCHMARK: BsmParams = BsmParams {
        mu: 0.10,
        sigma: 0.15,
    };

    pub fn validate(&self) -> Result<()> {
        ensure_finite("mu", self.mu)?;
        // zero volatility is accepted for deterministic checks
        ensure_non_negative("sigma", self.sigma)
    }
}

/// Merton jump-diffusion parameters on a yearly scale.
///
/// `gamma` is the risk-aversion parameter driving the change of measure of
/// the jump component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MjdParams {
    pub alpha: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub mu_j: f64,
    pub sigma_j: f64,
    pub gamma: f64,
}

impl MjdParams {
    pub const BENCHMARK: MjdParams = MjdParams {
        alpha: 0.10,
        sigma: 0.15,
        lambda: 0.10,
        mu_j: -0.20,
        sigma_j: 0.15,
        gamma: -1.5,
    };

    pub fn validate(&self) -> Result<()> {
        ensure_finite("alpha", self.alpha)?;
        ensure_non_negative("sigma", self.sigma)?;
        ensure_finite("mu_j", self.mu_j)?;
        ensure_positive("sigma_j", self.sigma_j)?;
        ensure_finite("gamma", self.gamma)?;
        // zero intensity is accepted: it degenerates to Black-Scholes
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(HedgeError::invalid("lambda", "must be >= 0"));
        }
        if self.gamma > 1.0 {
            return Err(HedgeError::invalid("gamma", "must be <= 1"));
        }
        Ok(())
    }

    /// Jump law under the physical measure.
    pub fn physical_jumps(&self) -> JumpLaw {
        JumpLaw {
            intensity: self.lambda,
            mean: self.mu_j,
            vol: self.sigma_j,
        }
    }

    /// Jump law under the risk-neutral measure obtained from the
    /// risk-aversion transform.
    pub fn to_risk_neutral(&self) -> Result<JumpLaw> {
        if self.gamma > 1.0 {
            return Err(HedgeError::invalid("gamma", "must be <= 1"));
        }
        let shift = 1.0 - self.gamma;
        let var_j = self.sigma_j * self.sigma_j;
        Ok(JumpLaw {
            intensity: self.lambda * (-shift * (self.mu_j - 0.5 * shift * var_j)).exp(),
            mean: self.mu_j - shift * var_j,
            vol: self.sigma_j,
        })
    }

    pub fn jumps(&self, measure: Measure) -> Result<JumpLaw> {
        match measure {
            Measure::Physical => Ok(self.physical_jumps()),
            Measure::RiskNeutral => self.to_risk_neutral(),
        }
    }
}

/// Compound-Poisson law of log-jumps: intensity per year, normal jump sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
    pub intensity: f64,
    pub mean: f64,
    pub vol: f64,
}

impl JumpLaw {
    /// Mean relative price jump `E[e^J] - 1`.
    pub fn kappa(&self) -> f64 {
        (self.mean + 0.5 * self.vol * self.vol).exp_m1()
    }
}

/// One-period log-return of the Black-Scholes model.
///
/// `rate` is only read under the risk-neutral measure.
pub fn bsm_log_return(
    params: &BsmParams,
    measure: Measure,
    rate: f64,
    dt: f64,
    noise: f64,
) -> Result<f64> {
    ensure_positive("dt", dt)?;
    ensure_finite("noise", noise)?;
    let drift = match measure {
        Measure::Physical => params.mu,
        Measure::RiskNeutral => rate,
    };
    Ok((drift - 0.5 * params.sigma * params.sigma) * dt + params.sigma * dt.sqrt() * noise)
}

/// One-period log-return of the Merton model given the realised jumps.
pub fn mjd_log_return(
    params: &MjdParams,
    measure: Measure,
    rate: f64,
    dt: f64,
    noise: f64,
    jump_count: usize,
    jump_sizes: &[f64],
) -> Result<f64> {
    ensure_positive("dt", dt)?;
    ensure_finite("noise", noise)?;
    if jump_count != jump_sizes.len() {
        return Err(HedgeError::invalid(
            "jump_sizes",
            format!("expected {jump_count} sizes, got {}", jump_sizes.len()),
        ));
    }
    let (drift, law) = match measure {
        Measure::Physical => (params.alpha, params.physical_jumps()),
        Measure::RiskNeutral => (rate, params.to_risk_neutral()?),
    };
    Ok(mjd_increment(drift, params.sigma, &law, dt, noise, jump_sizes.iter().sum()))
}

#[inline]
fn mjd_increment(drift: f64, sigma: f64, law: &JumpLaw, dt: f64, noise: f64, jump_sum: f64) -> f64 {
    (drift - law.intensity * law.kappa() - 0.5 * sigma * sigma) * dt
        + sigma * dt.sqrt() * noise
        + jump_sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum Dynamics {
    Bsm(BsmParams),
    Mjd(MjdParams),
}

impl Dynamics {
    pub fn validate(&self) -> Result<()> {
        match self {
            Dynamics::Bsm(p) => p.validate(),
            Dynamics::Mjd(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Dynamics::Bsm(_) => "bsm",
            Dynamics::Mjd(_) => "mjd",
        }
    }

    /// Diffusive volatility, shared by both measures.
    pub fn sigma(&self) -> f64 {
        match self {
            Dynamics::Bsm(p) => p.sigma,
            Dynamics::Mjd(p) => p.sigma,
        }
    }
}

/// Dynamics plus the continuously-compounded risk-free rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub dynamics: Dynamics,
    pub rate: f64,
}

/// Per-measure sampler with everything resolved ahead of the path loop.
#[derive(Debug, Clone, Copy)]
struct StepLaw {
    drift: f64,
    sigma: f64,
    jumps: Option<JumpLaw>,
}

impl StepLaw {
    fn new(model: &MarketModel, measure: Measure) -> Result<Self> {
        model.dynamics.validate()?;
        ensure_finite("rate", model.rate)?;
        Ok(match model.dynamics {
            Dynamics::Bsm(p) => StepLaw {
                drift: match measure {
                    Measure::Physical => p.mu,
                    Measure::RiskNeutral => model.rate,
                },
                sigma: p.sigma,
                jumps: None,
            },
            Dynamics::Mjd(p) => StepLaw {
                drift: match measure {
                    Measure::Physical => p.alpha,
                    Measure::RiskNeutral => model.rate,
                },
                sigma: p.sigma,
                jumps: Some(p.jumps(measure)?),
            },
        })
    }

    fn sample<R: Rng>(&self, rng: &mut R, dt: f64, poisson: Option<&Poisson<f64>>) -> f64 {
        let noise: f64 = StandardNormal.sample(rng);
        match (&self.jumps, poisson) {
            (Some(law), Some(poisson)) => {
                let count = poisson.sample(rng) as usize;
                let mut jump_sum = 0.0;
                for _ in 0..count {
                    let z: f64 = StandardNormal.sample(rng);
                    jump_sum += law.mean + law.vol * z;
                }
                mjd_increment(self.drift, self.sigma, law, dt, noise, jump_sum)
            }
            (Some(law), None) => mjd_increment(self.drift, self.sigma, law, dt, noise, 0.0),
            (None, _) => {
                (self.drift - 0.5 * self.sigma * self.sigma) * dt + self.sigma * dt.sqrt() * noise
            }
        }
    }
}

/// Shape of a simulation grid: `n_steps` equal periods over `maturity` years.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n_paths: usize,
    pub n_steps: usize,
    pub maturity: u32,
    pub spot: f64,
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(HedgeError::invalid("n_paths", "must be >= 1"));
        }
        if self.n_steps == 0 {
            return Err(HedgeError::invalid("n_steps", "must be >= 1"));
        }
        if self.maturity == 0 {
            return Err(HedgeError::invalid("maturity", "must be >= 1 year"));
        }
        if !self.n_steps.is_multiple_of(self.maturity as usize) {
            return Err(HedgeError::invalid(
                "n_steps",
                format!(
                    "anniversaries must fall on the grid: {} steps over {} years",
                    self.n_steps, self.maturity
                ),
            ));
        }
        ensure_positive("spot", self.spot)
    }

    pub fn dt(&self) -> f64 {
        self.maturity as f64 / self.n_steps as f64
    }

    pub fn steps_per_year(&self) -> usize {
        self.n_steps / self.maturity as usize
    }
}

/// Simulated begin-of-period spot prices and the running anniversary maximum.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub grid: Grid,
    pub seed: u64,
    /// `n_paths x (n_steps + 1)`; column `n` holds the spot at `t_n`.
    pub spot_begin: Array2<f64>,
    /// `n_paths x (n_steps + 1)`; column `n` holds `Z_{t_n}`.
    pub running_max: Array2<f64>,
}

impl PathSet {
    pub fn n_paths(&self) -> usize {
        self.grid.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.grid.dt()
    }

    pub fn terminal_spot(&self, path: usize) -> f64 {
        self.spot_begin[[path, self.grid.n_steps]]
    }

    pub fn terminal_max(&self, path: usize) -> f64 {
        self.running_max[[path, self.grid.n_steps]]
    }

    /// All period log-returns, path-major.
    pub fn log_returns(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n_paths * self.grid.n_steps);
        for row in self.spot_begin.rows() {
            for w in row.as_slice().expect("standard layout").windows(2) {
                out.push((w[1] / w[0]).ln());
            }
        }
        out
    }

    /// Columnar export, one row per path-step:
    /// `path,step,t,spot_begin,running_max`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path", "step", "t", "spot_begin", "running_max"])
            .map_err(csv_err)?;
        let dt = self.dt();
        for p in 0..self.grid.n_paths {
            for n in 0..=self.grid.n_steps {
                w.write_record(&[
                    p.to_string(),
                    n.to_string(),
                    format!("{}", n as f64 * dt),
                    format!("{:?}", self.spot_begin[[p, n]]),
                    format!("{:?}", self.running_max[[p, n]]),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> HedgeError {
    HedgeError::Io(std::io::Error::other(e))
}

/// Random stream for one path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Running anniversary maximum for a single path of begin-of-period spots.
///
/// Off-anniversary steps carry the last anniversary maximum forward; the
/// maturity date uses the anniversaries `0..T-1` only.
pub fn running_max_into(spots: &[f64], steps_per_year: usize, maturity: u32, out: &mut [f64]) {
    let last_year = maturity as usize - 1;
    let mut current = f64::NEG_INFINITY;
    let mut seen_year = None;
    for (n, z) in out.iter_mut().enumerate() {
        let year = (n / steps_per_year).min(last_year);
        if seen_year != Some(year) {
            current = current.max(spots[year * steps_per_year]);
            seen_year = Some(year);
        }
        *z = current;
    }
}

/// Simulate begin-of-period spot paths and their running anniversary maximum.
pub fn simulate_paths(model: &MarketModel, measure: Measure, grid: Grid, seed: u64) -> Result<PathSet> {
    grid.validate()?;
    let law = StepLaw::new(model, measure)?;
    let dt = grid.dt();
    let poisson = match law.jumps {
        Some(j) if j.intensity * dt > 0.0 => Some(
            Poisson::new(j.intensity * dt)
                .map_err(|e| HedgeError::invalid("lambda", e.to_string()))?,
        ),
        _ => None,
    };
    let width = grid.n_steps + 1;
    let steps_per_year = grid.steps_per_year();

    let mut spot_begin = Array2::zeros((grid.n_paths, width));
    let mut running_max = Array2::zeros((grid.n_paths, width));
    par::fill_row_pairs(&mut spot_begin, &mut running_max, |p, mut spots, mut maxima| {
        let mut rng = path_rng(seed, p as u64);
        spots[0] = grid.spot;
        let mut log_s = grid.spot.ln();
        for n in 1..width {
            log_s += law.sample(&mut rng, dt, poisson.as_ref());
            spots[n] = log_s.exp();
        }
        running_max_into(
            spots.as_slice().expect("row is contiguous"),
            steps_per_year,
            grid.maturity,
            maxima.as_slice_mut().expect("row is contiguous"),
        );
    });
    Ok(PathSet {
        grid,
        seed,
        spot_begin,
        running_max,
    })
}
