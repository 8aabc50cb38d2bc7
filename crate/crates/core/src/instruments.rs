//! Hedging-instrument menus and their per-period quotes.
//!
//! Asset index 0 is always the underlying; indices `1..=D` are the options of
//! the menu. Options are bought at the start of a period and held to expiry at
//! its end, so their end-of-period value is the payoff.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, HedgeError, Result};
use crate::pricing::{OptionKind, PriceQuote, VanillaPricer, VanillaSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstrumentSet {
    StockYearly,
    StockMonthly,
    TwoOptions,
    SixOptions,
}

const TWO_OPTIONS: [VanillaSpec; 2] = [
    VanillaSpec { kind: OptionKind::Call, moneyness: 1.0, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Put, moneyness: 1.0, maturity: 1.0 },
];

const SIX_OPTIONS: [VanillaSpec; 6] = [
    VanillaSpec { kind: OptionKind::Call, moneyness: 1.0, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Call, moneyness: 1.1, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Call, moneyness: 1.2, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Put, moneyness: 1.0, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Put, moneyness: 0.9, maturity: 1.0 },
    VanillaSpec { kind: OptionKind::Put, moneyness: 0.8, maturity: 1.0 },
];

impl InstrumentSet {
    pub const ALL: [InstrumentSet; 4] = [
        InstrumentSet::StockYearly,
        InstrumentSet::StockMonthly,
        InstrumentSet::TwoOptions,
        InstrumentSet::SixOptions,
    ];

    pub fn options(self) -> &'static [VanillaSpec] {
        match self {
            InstrumentSet::StockYearly | InstrumentSet::StockMonthly => &[],
            InstrumentSet::TwoOptions => &TWO_OPTIONS,
            InstrumentSet::SixOptions => &SIX_OPTIONS,
        }
    }

    /// Number of options `D`.
    pub fn n_options(self) -> usize {
        self.options().len()
    }

    pub fn n_assets(self) -> usize {
        1 + self.n_options()
    }

    pub fn trades_stock(self) -> bool {
        self.n_options() == 0
    }

    /// Assets whose positions are chosen by the policy.
    pub fn traded(self) -> Range<usize> {
        if self.trades_stock() {
            0..1
        } else {
            1..self.n_assets()
        }
    }

    pub fn rebalances_per_year(self) -> usize {
        match self {
            InstrumentSet::StockMonthly => 12,
            _ => 1,
        }
    }

    pub fn rebalance_steps(self, maturity: u32) -> usize {
        self.rebalances_per_year() * maturity as usize
    }

    /// Feature width: log prices of every quoted asset, log running max and
    /// the relative portfolio value.
    pub fn feature_dim(self) -> usize {
        self.n_assets() + 2
    }

    pub fn decision_dim(self) -> usize {
        self.traded().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            InstrumentSet::StockYearly => "stock-yearly",
            InstrumentSet::StockMonthly => "stock-monthly",
            InstrumentSet::TwoOptions => "two-options",
            InstrumentSet::SixOptions => "six-options",
        }
    }
}

impl fmt::Display for InstrumentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstrumentSet {
    type Err = HedgeError;

    fn from_str(s: &str) -> Result<Self> {
        InstrumentSet::ALL
            .into_iter()
            .find(|set| set.name() == s)
            .ok_or_else(|| HedgeError::Parse(format!("unknown instrument set `{s}`")))
    }
}

/// Prices at the start of a period, values at its end, and spot deltas.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeriodQuotes {
    pub begin_prices: Vec<f64>,
    pub end_values: Vec<f64>,
    pub deltas: Vec<f64>,
}

/// Quote every asset of `set` over one period, pricing options with `pricer`.
pub fn quotes_at(
    set: InstrumentSet,
    pricer: &VanillaPricer,
    spot_begin: f64,
    spot_end: f64,
) -> Result<PeriodQuotes> {
    ensure_positive("spot_begin", spot_begin)?;
    ensure_positive("spot_end", spot_end)?;
    let mut quotes = PeriodQuotes {
        begin_prices: vec![spot_begin],
        end_values: vec![spot_end],
        deltas: vec![1.0],
    };
    for spec in set.options() {
        let strike = spec.moneyness * spot_begin;
        let q = pricer.quote(spot_begin, strike, spec.maturity, spec.kind)?;
        quotes.begin_prices.push(q.price);
        quotes.end_values.push(spec.kind.payoff(spot_end, strike));
        quotes.deltas.push(q.delta);
    }
    Ok(quotes)
}

/// Lookback payoff `max(Z_T - S_T, 0)`.
#[inline]
pub fn lookback_payoff(spot: f64, running_max: f64) -> f64 {
    (running_max - spot).max(0.0)
}

/// Instrument menu with option quotes cached per unit of spot.
///
/// Prices are homogeneous of degree one in (spot, strike), so an option of
/// fixed moneyness costs a constant fraction of the spot and has a constant
/// delta at every rebalancing date.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentMenu {
    pub set: InstrumentSet,
    unit: Vec<PriceQuote>,
}

impl InstrumentMenu {
    pub fn new(set: InstrumentSet, pricer: &VanillaPricer) -> Result<Self> {
        let unit = set
            .options()
            .iter()
            .map(|spec| pricer.quote(1.0, spec.moneyness, spec.maturity, spec.kind))
            .collect::<Result<Vec<_>>>()?;
        Ok(InstrumentMenu { set, unit })
    }

    /// Spot deltas of every asset, underlying first.
    pub fn deltas(&self) -> Vec<f64> {
        std::iter::once(1.0).chain(self.unit.iter().map(|q| q.delta)).collect()
    }

    /// Fill `begin` and `end` (length `1 + D`) for a period.
    #[inline]
    pub fn fill(&self, spot_begin: f64, spot_end: f64, begin: &mut [f64], end: &mut [f64]) {
        begin[0] = spot_begin;
        end[0] = spot_end;
        for (j, (spec, q)) in self.set.options().iter().zip(&self.unit).enumerate() {
            begin[j + 1] = q.price * spot_begin;
            end[j + 1] = spec.kind.payoff(spot_end, spec.moneyness * spot_begin);
        }
    }

    pub fn quotes(&self, spot_begin: f64, spot_end: f64) -> PeriodQuotes {
        let n = self.set.n_assets();
        let mut quotes = PeriodQuotes {
            begin_prices: vec![0.0; n],
            end_values: vec![0.0; n],
            deltas: self.deltas(),
        };
        self.fill(spot_begin, spot_end, &mut quotes.begin_prices, &mut quotes.end_values);
        quotes
    }
}
