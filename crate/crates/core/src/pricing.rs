//! Closed-form vanilla prices and deltas, and Monte Carlo valuation of the
//! lookback option.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{ensure_finite, ensure_non_negative, ensure_positive, HedgeError, Result};
use crate::instruments::lookback_payoff;
use crate::market::{simulate_paths, Dynamics, Grid, JumpLaw, MarketModel, Measure};

/// Default number of Poisson terms kept in the Merton series.
pub const DEFAULT_SERIES_CUTOFF: usize = 60;

/// Largest Poisson tail mass tolerated after truncating the Merton series.
pub const MAX_TAIL_MASS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(self, spot: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (spot - strike).max(0.0),
            OptionKind::Put => (strike - spot).max(0.0),
        }
    }
}

/// A vanilla contract described relative to the spot at inception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanillaSpec {
    pub kind: OptionKind,
    /// strike / spot
    pub moneyness: f64,
    /// years
    pub maturity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceQuote {
    pub price: f64,
    pub delta: f64,
}

/// Standard normal CDF through the complementary error function.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Black-Scholes price and spot delta of a European option.
///
/// With zero total variance (`tau == 0` or `sigma == 0`) the option is worth
/// its discounted-forward intrinsic value; the delta at the kink is taken
/// from the in-the-money side.
pub fn bs_price_delta(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    tau: f64,
    kind: OptionKind,
) -> Result<PriceQuote> {
    ensure_positive("spot", spot)?;
    ensure_positive("strike", strike)?;
    ensure_finite("rate", rate)?;
    ensure_non_negative("sigma", sigma)?;
    ensure_non_negative("tau", tau)?;
    Ok(bs_unchecked(spot, strike, rate, sigma, tau, kind))
}

#[inline]
fn bs_unchecked(spot: f64, strike: f64, rate: f64, sigma: f64, tau: f64, kind: OptionKind) -> PriceQuote {
    let discount = (-rate * tau).exp();
    let vol = sigma * tau.sqrt();
    if vol == 0.0 {
        let forward_strike = strike * discount;
        return match kind {
            OptionKind::Call => PriceQuote {
                price: (spot - forward_strike).max(0.0),
                delta: if spot >= forward_strike { 1.0 } else { 0.0 },
            },
            OptionKind::Put => PriceQuote {
                price: (forward_strike - spot).max(0.0),
                delta: if spot <= forward_strike { -1.0 } else { 0.0 },
            },
        };
    }
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * tau) / vol;
    let d2 = d1 - vol;
    match kind {
        OptionKind::Call => PriceQuote {
            price: spot * norm_cdf(d1) - strike * discount * norm_cdf(d2),
            delta: norm_cdf(d1),
        },
        OptionKind::Put => PriceQuote {
            price: strike * discount * norm_cdf(-d2) - spot * norm_cdf(-d1),
            delta: -norm_cdf(-d1),
        },
    }
}

/// Merton jump-diffusion price and delta under risk-neutral jump law `jumps`.
///
/// Conditional on `k` jumps during the life of the option the terminal price
/// is lognormal, so the price is a Poisson mixture of Black-Scholes prices
/// with weights of mean `intensity * (1 + kappa) * tau`, variance
/// `sigma^2 + k vol^2 / tau` and rate `r - intensity kappa + k ln(1 + kappa) / tau`.
#[allow(clippy::too_many_arguments)]
pub fn merton_price_delta(
    spot: f64,
    strike: f64,
    rate: f64,
    sigma: f64,
    jumps: &JumpLaw,
    tau: f64,
    kind: OptionKind,
    series_cutoff: usize,
) -> Result<PriceQuote> {
    ensure_positive("spot", spot)?;
    ensure_positive("strike", strike)?;
    ensure_finite("rate", rate)?;
    ensure_non_negative("sigma", sigma)?;
    ensure_positive("tau", tau)?;
    ensure_non_negative("intensity", jumps.intensity)?;
    ensure_finite("jump mean", jumps.mean)?;
    ensure_non_negative("jump vol", jumps.vol)?;
    if series_cutoff < 1 {
        return Err(HedgeError::invalid("series_cutoff", "must be >= 1"));
    }

    let kappa = jumps.kappa();
    let log_jump = jumps.mean + 0.5 * jumps.vol * jumps.vol;
    let mean_count = jumps.intensity * (1.0 + kappa) * tau;

    let mut weight = (-mean_count).exp();
    let mut price = 0.0;
    let mut delta = 0.0;
    for k in 0..=series_cutoff {
        if k > 0 {
            weight *= mean_count / k as f64;
        }
        let kf = k as f64;
        let sigma_k = (sigma * sigma + kf * jumps.vol * jumps.vol / tau).sqrt();
        let rate_k = rate - jumps.intensity * kappa + kf * log_jump / tau;
        let q = bs_unchecked(spot, strike, rate_k, sigma_k, tau, kind);
        price += weight * q.price;
        delta += weight * q.delta;
    }

    let tail = poisson_tail(mean_count, series_cutoff, weight);
    if tail > MAX_TAIL_MASS {
        return Err(HedgeError::SeriesTruncation {
            cutoff: series_cutoff,
            tail,
        });
    }
    Ok(PriceQuote { price, delta })
}

/// `P(K > cutoff)` for `K ~ Poisson(mean)`, summed forward from the last
/// retained weight to avoid cancellation in `1 - cdf`.
fn poisson_tail(mean: f64, cutoff: usize, last_weight: f64) -> f64 {
    let mut term = last_weight;
    let mut tail = 0.0;
    let mut k = cutoff;
    loop {
        k += 1;
        term *= mean / k as f64;
        tail += term;
        if term <= tail * 1e-17 || term == 0.0 || k > cutoff + 10_000 {
            break;
        }
    }
    tail
}

/// Risk-neutral vanilla pricer matching a simulation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VanillaPricer {
    BlackScholes { sigma: f64, rate: f64 },
    Merton { sigma: f64, rate: f64, jumps: JumpLaw, cutoff: usize },
}

impl VanillaPricer {
    /// Black-Scholes quotes for Black-Scholes paths, Merton quotes for
    /// jump-diffusion paths.
    pub fn for_market(model: &MarketModel) -> Result<Self> {
        model.dynamics.validate()?;
        Ok(match model.dynamics {
            Dynamics::Bsm(p) => VanillaPricer::BlackScholes {
                sigma: p.sigma,
                rate: model.rate,
            },
            Dynamics::Mjd(p) => VanillaPricer::Merton {
                sigma: p.sigma,
                rate: model.rate,
                jumps: p.to_risk_neutral()?,
                cutoff: DEFAULT_SERIES_CUTOFF,
            },
        })
    }

    pub fn rate(&self) -> f64 {
        match self {
            VanillaPricer::BlackScholes { rate, .. } | VanillaPricer::Merton { rate, .. } => *rate,
        }
    }

    pub fn quote(&self, spot: f64, strike: f64, tau: f64, kind: OptionKind) -> Result<PriceQuote> {
        match *self {
            VanillaPricer::BlackScholes { sigma, rate } => bs_price_delta(spot, strike, rate, sigma, tau, kind),
            VanillaPricer::Merton {
                sigma,
                rate,
                jumps,
                cutoff,
            } => merton_price_delta(spot, strike, rate, sigma, &jumps, tau, kind, cutoff),
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        McEstimate {
            value: mean,
            std_error: (var / n).sqrt(),
            n_samples: samples.len(),
        }
    }
}

/// Risk-neutral price of the lookback option paying `max(Z_T - S_T, 0)`,
/// estimated on a yearly grid.
pub fn lookback_rn_price(
    model: &MarketModel,
    maturity: u32,
    spot: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let grid = Grid {
        n_paths,
        n_steps: maturity as usize,
        maturity,
        spot,
    };
    let paths = simulate_paths(model, Measure::RiskNeutral, grid, seed)?;
    let discount = (-model.rate * maturity as f64).exp();
    let samples: Vec<f64> = (0..n_paths)
        .map(|p| discount * lookback_payoff(paths.terminal_spot(p), paths.terminal_max(p)))
        .collect();
    Ok(McEstimate::from_samples(&samples))
}
