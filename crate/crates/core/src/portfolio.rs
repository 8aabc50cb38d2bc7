//! Self-financing portfolio accounting.
//!
//! A period runs from rebalancing date `t_n` to `t_{n+1}`. At `t_n` the risky
//! positions are set and the bank account absorbs the remainder of the
//! portfolio value; at `t_{n+1}` the portfolio is marked with end-of-period
//! values and the grown bank account.

use serde::{Deserialize, Serialize};

use crate::error::{HedgeError, Result};
use crate::instruments::PeriodQuotes;

/// Risk-free asset `B_{t_n} = exp(r t_n)` on an even grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bank {
    pub rate: f64,
    pub dt: f64,
}

impl Bank {
    #[inline]
    pub fn price(&self, n: usize) -> f64 {
        (self.rate * self.dt * n as f64).exp()
    }

    /// One-period growth factor.
    #[inline]
    pub fn growth(&self) -> f64 {
        (self.rate * self.dt).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioState {
    /// Value before rebalancing at `t_n` (after rebalancing it is unchanged).
    pub value: f64,
    pub bank_units: f64,
    pub risky_positions: Vec<f64>,
    pub time_index: usize,
}

impl PortfolioState {
    /// Initial capital held entirely in the bank account.
    pub fn initial(capital: f64, n_assets: usize) -> Self {
        PortfolioState {
            value: capital,
            bank_units: capital,
            risky_positions: vec![0.0; n_assets],
            time_index: 0,
        }
    }

    /// Trade into `positions` at begin-of-period prices; the bank position
    /// is whatever keeps the value unchanged.
    pub fn rebalance(&self, positions: &[f64], quotes: &PeriodQuotes, bank: &Bank) -> Result<Self> {
        if positions.len() != quotes.begin_prices.len() {
            return Err(HedgeError::Contract(format!(
                "{} positions for {} assets",
                positions.len(),
                quotes.begin_prices.len()
            )));
        }
        if !self.value.is_finite() {
            return Err(HedgeError::Diverged(format!("portfolio value {}", self.value)));
        }
        if let Some(bad) = positions.iter().find(|p| !p.is_finite()) {
            return Err(HedgeError::Diverged(format!("non-finite position {bad}")));
        }
        let risky = dot(positions, &quotes.begin_prices);
        Ok(PortfolioState {
            value: self.value,
            bank_units: (self.value - risky) / bank.price(self.time_index),
            risky_positions: positions.to_vec(),
            time_index: self.time_index,
        })
    }

    /// Mark the held positions at the end of the period.
    pub fn settle_period(&self, quotes: &PeriodQuotes, bank: &Bank) -> Self {
        let next = self.time_index + 1;
        PortfolioState {
            value: dot(&self.risky_positions, &quotes.end_values) + self.bank_units * bank.price(next),
            bank_units: self.bank_units,
            risky_positions: self.risky_positions.clone(),
            time_index: next,
        }
    }

    /// Spot sensitivity of the portfolio held over the current period.
    pub fn portfolio_delta(&self, quotes: &PeriodQuotes) -> f64 {
        portfolio_delta(&self.risky_positions, &quotes.deltas)
    }
}

/// `delta^(0) + sum_j delta^(j) Delta^(j)` with the underlying's delta equal to one.
#[inline]
pub fn portfolio_delta(positions: &[f64], deltas: &[f64]) -> f64 {
    dot(positions, deltas)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of hedging the short lookback position along one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeOutcome {
    /// payoff minus terminal portfolio value; positive is a loss
    pub terminal_error: f64,
    pub value_path: Vec<f64>,
    pub delta_path: Vec<f64>,
}

/// Run a fixed sequence of positions through the accounting, returning the
/// outcome and the discounted gain process `G_{t_0..t_N}`.
pub fn run_strategy(
    capital: f64,
    positions: &[Vec<f64>],
    quotes: &[PeriodQuotes],
    bank: &Bank,
    payoff: f64,
) -> Result<(HedgeOutcome, Vec<f64>)> {
    if positions.len() != quotes.len() {
        return Err(HedgeError::Contract(format!(
            "{} decisions for {} periods",
            positions.len(),
            quotes.len()
        )));
    }
    let n_assets = quotes.first().map_or(1, |q| q.begin_prices.len());
    let mut state = PortfolioState::initial(capital, n_assets);
    let mut value_path = vec![capital];
    let mut delta_path = Vec::with_capacity(quotes.len());
    let mut gains = vec![0.0];
    for (n, (pos, q)) in positions.iter().zip(quotes).enumerate() {
        state = state.rebalance(pos, q, bank)?;
        delta_path.push(state.portfolio_delta(q));
        let increment: f64 = pos
            .iter()
            .zip(q.end_values.iter().zip(&q.begin_prices))
            .map(|(d, (e, b))| d * (e / bank.price(n + 1) - b / bank.price(n)))
            .sum();
        gains.push(gains[n] + increment);
        state = state.settle_period(q, bank);
        value_path.push(state.value);
    }
    Ok((
        HedgeOutcome {
            terminal_error: payoff - state.value,
            value_path,
            delta_path,
        },
        gains,
    ))
}
