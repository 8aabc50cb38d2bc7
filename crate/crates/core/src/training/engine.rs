//! Batched policy rollouts over simulated paths.
//!
//! Over a period the portfolio value evolves as
//! `V_{n+1} = e^{r dt} V_n + sum_k delta_k (P^e_k - e^{r dt} P^b_k)`,
//! which is the self-financing update with the bank account absorbing the
//! cash. The training gradient runs backwards through this recursion and
//! through the `V / V0` feature seen by the network.

use ndarray::{Array1, Array2, Axis};

use super::features::fill_features;
use super::{ExperimentConfig, Penalty};
use crate::error::{HedgeError, Result};
use crate::instruments::{lookback_payoff, InstrumentMenu, InstrumentSet};
use crate::market::PathSet;
use crate::neural::{
    backward_step, forward_step, infer_step, BackwardCarry, LstmState, PolicyParams,
};
use crate::par;
use crate::portfolio::{Bank, HedgeOutcome, PortfolioState};
use crate::pricing::VanillaPricer;

/// Paths per gradient work unit. Fixed so the reduction order, and hence
/// every bit of the result, does not depend on the thread count.
const GRAD_CHUNK: usize = 250;
const EVAL_CHUNK: usize = 1000;

/// Everything about the hedging problem that does not change during training.
#[derive(Debug, Clone)]
pub struct HedgeEnv {
    pub set: InstrumentSet,
    pub penalty: Penalty,
    pub v0: f64,
    pub n_steps: usize,
    menu: InstrumentMenu,
    deltas: Vec<f64>,
    bank: Bank,
    growth: f64,
    base: Option<Vec<f64>>,
}

impl HedgeEnv {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let set = config.hedge.instruments;
        let pricer = VanillaPricer::for_market(&config.model())?;
        let menu = InstrumentMenu::new(set, &pricer)?;
        let spot = config.market.spot;
        let first = menu.quotes(spot, spot);
        if let Some(p) = first.begin_prices.iter().find(|&&p| !(p > 0.0)) {
            return Err(HedgeError::Contract(format!(
                "option price {p} is not positive, log-price features are undefined"
            )));
        }
        let base = config.hedge.normalize_features.then(|| {
            let mut b: Vec<f64> = first.begin_prices.iter().map(|p| p.ln()).collect();
            b.push(spot.ln());
            b
        });
        let bank = Bank {
            rate: config.market.rate,
            dt: config.contract.maturity_years as f64 / config.contract.n_steps as f64,
        };
        Ok(HedgeEnv {
            set,
            penalty: config.hedge.penalty,
            v0: config.hedge.v0,
            n_steps: config.contract.n_steps,
            deltas: menu.deltas(),
            menu,
            growth: bank.growth(),
            bank,
            base,
        })
    }

    fn check(&self, params: &PolicyParams, paths: &PathSet) -> Result<()> {
        if paths.n_steps() != self.n_steps {
            return Err(HedgeError::Contract(format!(
                "paths have {} steps, the hedge rebalances {} times",
                paths.n_steps(),
                self.n_steps
            )));
        }
        let cfg = &params.config;
        if cfg.d_in != self.set.feature_dim() || cfg.d_out != self.set.decision_dim() {
            return Err(HedgeError::Contract(format!(
                "network maps {} -> {}, {} needs {} -> {}",
                cfg.d_in,
                cfg.d_out,
                self.set,
                self.set.feature_dim(),
                self.set.decision_dim()
            )));
        }
        Ok(())
    }

    /// Features and per-unit discounted gains of the traded assets for the
    /// rows of one period.
    fn period_inputs(
        &self,
        paths: &PathSet,
        rows: &[usize],
        n: usize,
        value: &[f64],
        x: &mut Array2<f64>,
        gains: &mut Array2<f64>,
    ) -> Result<()> {
        let a = self.set.n_assets();
        let traded = self.set.traded();
        let mut begin = vec![0.0; a];
        let mut end = vec![0.0; a];
        for (i, &p) in rows.iter().enumerate() {
            let (sb, se) = (paths.spot_begin[[p, n]], paths.spot_begin[[p, n + 1]]);
            self.menu.fill(sb, se, &mut begin, &mut end);
            let mut row = x.row_mut(i);
            fill_features(
                row.as_slice_mut().expect("row-major"),
                &begin,
                self.base.as_deref(),
                paths.running_max[[p, n]],
                value[i],
                self.v0,
            )?;
            for (k, j) in traded.clone().enumerate() {
                gains[[i, k]] = end[j] - begin[j] * self.growth;
            }
        }
        Ok(())
    }

    fn payoff(&self, paths: &PathSet, p: usize) -> f64 {
        lookback_payoff(paths.terminal_spot(p), paths.terminal_max(p))
    }

    /// Penalty summed over `rows` and its gradient scaled by `scale`.
    fn chunk_gradient(
        &self,
        params: &PolicyParams,
        paths: &PathSet,
        rows: &[usize],
        scale: f64,
    ) -> Result<(f64, PolicyParams)> {
        let b = rows.len();
        let nt = self.set.decision_dim();
        let mut state = LstmState::zeros(&params.config, b);
        let mut value = vec![self.v0; b];
        let mut x = Array2::zeros((b, self.set.feature_dim()));
        let mut tapes = Vec::with_capacity(self.n_steps);
        let mut gains = Vec::with_capacity(self.n_steps);
        for n in 0..self.n_steps {
            let mut g = Array2::zeros((b, nt));
            self.period_inputs(paths, rows, n, &value, &mut x, &mut g)?;
            let (y, tape) = forward_step(params, &mut state, x.view())?;
            for (i, v) in value.iter_mut().enumerate() {
                *v = self.growth * *v + y.row(i).dot(&g.row(i));
            }
            tapes.push(tape);
            gains.push(g);
        }

        let mut loss = 0.0;
        let mut adjoint = Array1::zeros(b);
        for (i, &p) in rows.iter().enumerate() {
            let err = self.payoff(paths, p) - value[i];
            if !err.is_finite() {
                return Err(HedgeError::Diverged(format!("terminal error {err} on path {p}")));
            }
            loss += self.penalty.value(err);
            adjoint[i] = -self.penalty.derivative(err) * scale;
        }

        let v_col = self.set.n_assets() + 1;
        let mut grads = PolicyParams::zeros(&params.config);
        let mut carry = BackwardCarry::zeros(&params.config, b);
        for n in (0..self.n_steps).rev() {
            let dy = &gains[n] * &adjoint.view().insert_axis(Axis(1));
            let dx = backward_step(params, &tapes[n], dy.view(), &mut carry, &mut grads)?;
            for (i, a) in adjoint.iter_mut().enumerate() {
                *a = *a * self.growth + dx[[i, v_col]] / self.v0;
            }
        }
        Ok((loss, grads))
    }

    /// Mean penalty over `rows` and its exact gradient.
    pub fn batch_gradient(
        &self,
        params: &PolicyParams,
        paths: &PathSet,
        rows: &[usize],
    ) -> Result<(f64, PolicyParams)> {
        self.check(params, paths)?;
        if rows.is_empty() {
            return Err(HedgeError::Contract("empty mini-batch".into()));
        }
        let scale = 1.0 / rows.len() as f64;
        let chunks: Vec<&[usize]> = rows.chunks(GRAD_CHUNK).collect();
        let parts = par::map_range(chunks.len(), |c| self.chunk_gradient(params, paths, chunks[c], scale));
        let mut total = 0.0;
        let mut grads = PolicyParams::zeros(&params.config);
        for part in parts {
            let (loss, g) = part?;
            total += loss;
            grads.add_assign(&g);
        }
        Ok((total * scale, grads))
    }

    fn chunk_evaluate(
        &self,
        params: &PolicyParams,
        paths: &PathSet,
        rows: &[usize],
    ) -> Result<Evaluation> {
        let b = rows.len();
        let traded = self.set.traded();
        let mut state = LstmState::zeros(&params.config, b);
        let mut value = vec![self.v0; b];
        let mut x = Array2::zeros((b, self.set.feature_dim()));
        let mut g = Array2::zeros((b, traded.len()));
        let mut values = Array2::zeros((b, self.n_steps + 1));
        let mut deltas = Array2::zeros((b, self.n_steps));
        values.column_mut(0).fill(self.v0);
        for n in 0..self.n_steps {
            self.period_inputs(paths, rows, n, &value, &mut x, &mut g)?;
            let y = infer_step(params, &mut state, x.view())?;
            for (i, v) in value.iter_mut().enumerate() {
                let pos = y.row(i);
                *v = self.growth * *v + pos.dot(&g.row(i));
                values[[i, n + 1]] = *v;
                deltas[[i, n]] =
                    traded.clone().zip(pos.iter()).map(|(j, q)| q * self.deltas[j]).sum();
            }
        }
        let errors = rows
            .iter()
            .zip(&value)
            .map(|(&p, v)| self.payoff(paths, p) - v)
            .collect::<Vec<_>>();
        if let Some((i, e)) = errors.iter().enumerate().find(|(_, e)| !e.is_finite()) {
            return Err(HedgeError::Diverged(format!("terminal error {e} on path {}", rows[i])));
        }
        Ok(Evaluation { errors, values, deltas })
    }

    /// Run the policy on every path.
    pub fn evaluate(&self, params: &PolicyParams, paths: &PathSet) -> Result<Evaluation> {
        self.check(params, paths)?;
        let rows: Vec<usize> = (0..paths.n_paths()).collect();
        let chunks: Vec<&[usize]> = rows.chunks(EVAL_CHUNK).collect();
        let parts = par::map_range(chunks.len(), |c| self.chunk_evaluate(params, paths, chunks[c]));
        let mut errors = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(chunks.len());
        let mut deltas = Vec::with_capacity(chunks.len());
        for part in parts {
            let part = part?;
            errors.extend(part.errors);
            values.push(part.values);
            deltas.push(part.deltas);
        }
        let stack = |parts: Vec<Array2<f64>>| {
            let views: Vec<_> = parts.iter().map(|m| m.view()).collect();
            ndarray::concatenate(Axis(0), &views).expect("equal widths")
        };
        Ok(Evaluation { errors, values: stack(values), deltas: stack(deltas) })
    }

    /// Mean penalty of the policy over every path.
    pub fn mean_loss(&self, params: &PolicyParams, paths: &PathSet) -> Result<f64> {
        super::loss(&self.evaluate(params, paths)?.errors, self.penalty)
    }

    /// Hedge a single path step by step through [`PortfolioState`].
    pub fn rollout(&self, params: &PolicyParams, paths: &PathSet, path: usize) -> Result<HedgeOutcome> {
        self.check(params, paths)?;
        let a = self.set.n_assets();
        let mut state = PortfolioState::initial(self.v0, a);
        let mut lstm = LstmState::zeros(&params.config, 1);
        let mut x = Array2::zeros((1, self.set.feature_dim()));
        let mut value_path = vec![self.v0];
        let mut delta_path = Vec::with_capacity(self.n_steps);
        for n in 0..self.n_steps {
            let q = self.menu.quotes(paths.spot_begin[[path, n]], paths.spot_begin[[path, n + 1]]);
            let mut row = x.row_mut(0);
            fill_features(
                row.as_slice_mut().expect("row-major"),
                &q.begin_prices,
                self.base.as_deref(),
                paths.running_max[[path, n]],
                state.value,
                self.v0,
            )?;
            let y = infer_step(params, &mut lstm, x.view())?;
            let mut positions = vec![0.0; a];
            for (j, v) in self.set.traded().zip(y.iter()) {
                positions[j] = *v;
            }
            state = state.rebalance(&positions, &q, &self.bank)?;
            delta_path.push(state.portfolio_delta(&q));
            state = state.settle_period(&q, &self.bank);
            value_path.push(state.value);
        }
        Ok(HedgeOutcome {
            terminal_error: self.payoff(paths, path) - state.value,
            value_path,
            delta_path,
        })
    }
}

/// Terminal errors, portfolio values and portfolio deltas per path.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub errors: Vec<f64>,
    /// `n_paths x (N + 1)`
    pub values: Array2<f64>,
    /// `n_paths x N`
    pub deltas: Array2<f64>,
}

impl Evaluation {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn outcome(&self, path: usize) -> HedgeOutcome {
        HedgeOutcome {
            terminal_error: self.errors[path],
            value_path: self.values.row(path).to_vec(),
            delta_path: self.deltas.row(path).to_vec(),
        }
    }
}

/// Run `params` over every path of `paths`.
pub fn evaluate(params: &PolicyParams, paths: &PathSet, config: &ExperimentConfig) -> Result<Evaluation> {
    HedgeEnv::new(config)?.evaluate(params, paths)
}

/// Hedge one path through the portfolio accounting.
pub fn rollout(
    params: &PolicyParams,
    paths: &PathSet,
    path: usize,
    config: &ExperimentConfig,
) -> Result<HedgeOutcome> {
    HedgeEnv::new(config)?.rollout(params, paths, path)
}
