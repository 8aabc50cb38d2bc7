//! Acceptance suite: one line per criterion.
//!
//! Gradient checks use the max-norm relative error against Richardson-
//! extrapolated central differences.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion numbers to run
//! a subset, e.g. `cargo test -p hedge-core --test acceptance -- 1 3 8`.
//! Criterion 7 trains every full-budget experiment and only runs with
//! `HEDGE_FULL_BUDGET=1`; `HEDGE_FULL_BUDGET_STATS=<dir>` makes it read `stats.csv`
//! files written by `hedge train --evaluate` instead of training in-process.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hedge_core::instruments::{lookback_payoff, InstrumentMenu, InstrumentSet, PeriodQuotes};
use hedge_core::market::{
    simulate_paths, BsmParams, Dynamics, Grid, MarketModel, Measure, MjdParams, PathSet,
};
use hedge_core::metrics::{
    hedge_stats, read_stats_csv, tail_risk, write_stats_csv, ExperimentStats, ReferenceTables,
    Statistic,
};
use hedge_core::neural::{backward, forward, LstmConfig, PolicyParams};
use hedge_core::portfolio::{run_strategy, Bank};
use hedge_core::pricing::{
    bs_price_delta, lookback_rn_price, merton_price_delta, McEstimate, OptionKind, VanillaPricer,
    DEFAULT_SERIES_CUTOFF,
};
use hedge_core::training::{Budget, DataRole, ExperimentConfig, HedgeEnv, Penalty, Trainer, V0Source};
use hedge_core::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const RATE: f64 = 0.03;
const SPOT: f64 = 100.0;
const MATURITY: u32 = 10;

enum Verdict {
    Pass,
    Fail,
    Skip,
}

struct Outcome {
    verdict: Verdict,
    lines: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { verdict: Verdict::Pass, lines: Vec::new() }
    }

    fn skip(reason: &str) -> Self {
        Outcome { verdict: Verdict::Skip, lines: vec![reason.to_string()] }
    }

    /// Record one check; any failing check fails the criterion.
    fn check(&mut self, ok: bool, line: String) {
        if !ok {
            self.verdict = Verdict::Fail;
        }
        let mark = if ok { "ok  " } else { "FAIL" };
        self.lines.push(format!("{mark} {line}"));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("     {line}"));
    }
}

fn bsm() -> MarketModel {
    MarketModel { dynamics: Dynamics::Bsm(BsmParams::BENCHMARK), rate: RATE }
}

fn mjd() -> MarketModel {
    MarketModel { dynamics: Dynamics::Mjd(MjdParams::BENCHMARK), rate: RATE }
}

fn within_se(est: &McEstimate, target: f64, k: f64) -> bool {
    (est.value - target).abs() <= k * est.std_error
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Composite Simpson rule on `n` (even) intervals.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}

fn one_year_grid(n_paths: usize) -> Grid {
    Grid { n_paths, n_steps: 1, maturity: 1, spot: SPOT }
}

// ---------------------------------------------------------------- 1

fn pricing_oracles() -> Result<Outcome> {
    let mut out = Outcome::new();
    let sigma = BsmParams::BENCHMARK.sigma;

    // expectation of the discounted payoff over the standard normal driver
    let drift = (RATE - 0.5 * sigma * sigma) * 1.0;
    let strike = SPOT;
    let z_star = ((strike / SPOT).ln() - drift) / sigma;
    let integrand = |z: f64| (SPOT * (drift + sigma * z).exp() - strike) * normal_pdf(z);
    let oracle = (-RATE).exp() * simpson(integrand, z_star, z_star + 14.0, 40_000);
    let closed = bs_price_delta(SPOT, SPOT, RATE, sigma, 1.0, OptionKind::Call)?.price;
    let rel = (closed - oracle).abs() / oracle;
    out.check(
        rel <= 1e-8,
        format!("ATM 1y Black-Scholes call {closed:.10} vs quadrature {oracle:.10}, rel err {rel:.2e} (<= 1e-8)"),
    );

    let model = mjd();
    let pricer = VanillaPricer::for_market(&model)?;
    let paths = simulate_paths(&model, Measure::RiskNeutral, one_year_grid(1_000_000), 20_240_101)?;
    let disc = (-RATE).exp();
    for (kind, strike) in [(OptionKind::Call, 100.0), (OptionKind::Put, 90.0), (OptionKind::Call, 115.0)] {
        let closed = pricer.quote(SPOT, strike, 1.0, kind)?.price;
        let samples: Vec<f64> =
            (0..paths.n_paths()).map(|p| disc * kind.payoff(paths.terminal_spot(p), strike)).collect();
        let mc = McEstimate::from_samples(&samples);
        let z = (mc.value - closed) / mc.std_error;
        out.check(
            within_se(&mc, closed, 3.0),
            format!(
                "Merton {kind:?} K={strike}: series {closed:.5}, Q Monte Carlo {:.5} +- {:.5} (10^6 paths), z = {z:+.2}",
                mc.value, mc.std_error
            ),
        );
    }

    let jumps = MjdParams::BENCHMARK.to_risk_neutral()?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_bs: f64 = 0.0;
    let mut worst_mj: f64 = 0.0;
    for _ in 0..100 {
        let s = rng.random_range(50.0..150.0);
        let k = rng.random_range(50.0..150.0);
        let tau = rng.random_range(0.1..3.0);
        let forward = s - k * (-RATE * tau).exp();
        let c = bs_price_delta(s, k, RATE, sigma, tau, OptionKind::Call)?.price;
        let p = bs_price_delta(s, k, RATE, sigma, tau, OptionKind::Put)?.price;
        worst_bs = worst_bs.max((c - p - forward).abs());
        let c = merton_price_delta(s, k, RATE, sigma, &jumps, tau, OptionKind::Call, DEFAULT_SERIES_CUTOFF)?.price;
        let p = merton_price_delta(s, k, RATE, sigma, &jumps, tau, OptionKind::Put, DEFAULT_SERIES_CUTOFF)?.price;
        worst_mj = worst_mj.max((c - p - forward).abs());
    }
    out.check(worst_bs <= 1e-12, format!("put-call parity, Black-Scholes, 100 random points: max |C - P - F| = {worst_bs:.2e}"));
    out.check(worst_mj <= 1e-12, format!("put-call parity, Merton, 100 random points: max |C - P - F| = {worst_mj:.2e}"));
    Ok(out)
}

// ---------------------------------------------------------------- 2

fn lookback_price() -> Result<Outcome> {
    let mut out = Outcome::new();
    for (name, model, target, tol) in [("BSM", bsm(), 17.7, 0.2), ("MJD", mjd(), 25.3, 0.3)] {
        let est = lookback_rn_price(&model, MATURITY, SPOT, 500_000, 4_242)?;
        out.check(
            (est.value - target).abs() <= tol,
            format!("{name} lookback price {:.4} +- {:.4} (500k paths), expected {target} +- {tol}", est.value, est.std_error),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------- 3

fn measure_change() -> Result<Outcome> {
    let mut out = Outcome::new();
    let q = MjdParams::BENCHMARK.to_risk_neutral()?;
    // recomputed from the raw inputs with nothing shared with the library
    let (lambda, mu_j, sigma_j, gamma) = (0.10f64, -0.20f64, 0.15f64, -1.5f64);
    let a = 1.0 - gamma;
    let mean = mu_j - a * sigma_j.powi(2);
    let intensity = lambda * (-(a * mu_j) + 0.5 * a * a * sigma_j.powi(2)).exp();
    out.check(
        (q.mean + 0.25625).abs() <= 1e-12 && (q.mean - mean).abs() <= 1e-15,
        format!("risk-neutral jump mean {:.8} (expected -0.25625)", q.mean),
    );
    out.check(
        (q.intensity - intensity).abs() <= 1e-6,
        format!("risk-neutral jump intensity {:.7} vs recomputation {intensity:.7}", q.intensity),
    );
    out.note(format!(
        "the quoted value 0.176877 differs from the recomputation by {:.1e}",
        intensity - 0.176877
    ));
    out.check((q.vol - 0.15).abs() <= 1e-15, format!("jump volatility unchanged: {}", q.vol));
    Ok(out)
}

// ---------------------------------------------------------------- 4

/// Central differences with one Richardson step, `O(h^4)` truncation.
fn richardson(f: &mut dyn FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    let d = |f: &mut dyn FnMut(f64) -> Result<f64>, h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let coarse = d(f, h)?;
    let fine = d(f, h / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Max-norm relative error `|a - n|_inf / |a|_inf`, and the worst elementwise
/// relative error over entries above `1e-3 |a|_inf`.
fn rel_errors(analytic: &[f64], numeric: &[f64]) -> (f64, f64) {
    let scale = analytic.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let elementwise = analytic
        .iter()
        .zip(numeric)
        .filter(|(a, _)| a.abs() >= 1e-3 * scale)
        .map(|(a, n)| (a - n).abs() / a.abs())
        .fold(0.0, f64::max);
    (diff / scale, elementwise)
}

fn perturbed(config: &LstmConfig, seed: u64, rng: &mut ChaCha8Rng) -> Result<PolicyParams> {
    let mut p = PolicyParams::glorot(config, seed)?;
    for t in p.tensors_mut() {
        for x in t.iter_mut() {
            *x += 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(p)
}

fn linear_functional(params: &PolicyParams, xs: &[Array2<f64>], g: &[Array2<f64>]) -> Result<f64> {
    let (ys, _) = forward(params, xs)?;
    Ok(ys.iter().zip(g).map(|(y, g)| (y * g).sum()).sum())
}

fn gradients() -> Result<Outcome> {
    let mut out = Outcome::new();
    const TOL: f64 = 1e-6;
    let h = 1e-3;
    for net in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + net);
        let (d_in, widths, d_out, steps) = if net == 0 {
            (2, vec![3], 1, 4)
        } else {
            let depth = rng.random_range(1..=2);
            let widths = (0..depth).map(|_| rng.random_range(1..=4)).collect();
            (rng.random_range(1..=4), widths, rng.random_range(1..=3), rng.random_range(2..=5))
        };
        let batch = 3;
        let config = LstmConfig::new(d_in, widths.clone(), d_out)?;
        let params = perturbed(&config, net, &mut rng)?;
        let normal = |rng: &mut ChaCha8Rng, r: usize, c: usize| {
            Array2::from_shape_simple_fn((r, c), || rng.sample::<f64, _>(StandardNormal))
        };
        let xs: Vec<_> = (0..steps).map(|_| normal(&mut rng, batch, d_in)).collect();
        let g: Vec<_> = (0..steps).map(|_| normal(&mut rng, batch, d_out)).collect();

        let (_, tape) = forward(&params, &xs)?;
        let (grads, dx) = backward(&params, &tape, &g)?;
        let analytic = grads.to_flat();
        let flat = params.to_flat();
        let mut numeric = Vec::with_capacity(flat.len());
        for i in 0..flat.len() {
            let mut f = |e: f64| {
                let mut v = flat.clone();
                v[i] += e;
                linear_functional(&PolicyParams::from_flat(&config, &v)?, &xs, &g)
            };
            numeric.push(richardson(&mut f, h)?);
        }
        let (err_p, elem_p) = rel_errors(&analytic, &numeric);

        let analytic_x: Vec<f64> = dx.iter().flat_map(|m| m.iter().copied()).collect();
        let mut numeric_x = Vec::with_capacity(analytic_x.len());
        for n in 0..steps {
            for (r, c) in (0..batch).flat_map(|r| (0..d_in).map(move |c| (r, c))) {
                let mut f = |e: f64| {
                    let mut v = xs.clone();
                    v[n][[r, c]] += e;
                    linear_functional(&params, &v, &g)
                };
                numeric_x.push(richardson(&mut f, h)?);
            }
        }
        let (err_x, _) = rel_errors(&analytic_x, &numeric_x);
        out.check(
            err_p <= TOL && err_x <= TOL,
            format!(
                "network {net:2}: inputs {d_in}, widths {widths:?}, outputs {d_out}, {steps} steps, {} params: rel err {err_p:.1e} (params, elementwise {elem_p:.1e}), {err_x:.1e} (inputs)",
                flat.len()
            ),
        );
    }

    for (preset, widths) in [
        ("bsm-stock-yearly-qdh", vec![3]),
        ("mjd-six-options-sqdh", vec![3, 2]),
    ] {
        let mut cfg = ExperimentConfig::preset(preset)?.with_budget(Budget {
            train_paths: 16,
            valid_paths: 1,
            test_paths: 1,
            epochs: 1,
            batch_size: 16,
        });
        cfg.contract.maturity_years = 2;
        cfg.contract.n_steps = cfg.hedge.instruments.rebalance_steps(2);
        cfg.network.widths = widths;
        cfg.validate()?;
        let env = HedgeEnv::new(&cfg)?;
        let paths = cfg.simulate(DataRole::Train)?;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let lstm = cfg.lstm_config()?;
        let params = perturbed(&lstm, 5, &mut rng)?;
        let rows: Vec<usize> = (0..paths.n_paths()).collect();
        let (loss, grads) = env.batch_gradient(&params, &paths, &rows)?;
        let direct = env.mean_loss(&params, &paths)?;
        let analytic = grads.to_flat();
        let flat = params.to_flat();
        let mut numeric = Vec::with_capacity(flat.len());
        for i in 0..flat.len() {
            let mut f = |e: f64| {
                let mut v = flat.clone();
                v[i] += e;
                env.mean_loss(&PolicyParams::from_flat(&lstm, &v)?, &paths)
            };
            numeric.push(richardson(&mut f, h)?);
        }
        let (err, elem) = rel_errors(&analytic, &numeric);
        let loss_err = (loss - direct).abs() / direct.abs();
        out.check(
            err <= TOL && loss_err <= 1e-12,
            format!(
                "rollout loss, {} N=2, {} params, 16 paths: rel err {err:.1e} (elementwise {elem:.1e}), loss {loss:.6} vs evaluation {direct:.6}",
                cfg.key(),
                flat.len()
            ),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------- 5

fn random_positions(set: InstrumentSet, steps: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let traded = set.traded();
    (0..steps)
        .map(|_| {
            (0..set.n_assets())
                .map(|j| if traded.contains(&j) { rng.random_range(-2.0..2.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn period_quotes(menu: &InstrumentMenu, paths: &PathSet, p: usize) -> Vec<PeriodQuotes> {
    (0..paths.n_steps())
        .map(|n| menu.quotes(paths.spot_begin[[p, n]], paths.spot_begin[[p, n + 1]]))
        .collect()
}

fn accounting() -> Result<Outcome> {
    let mut out = Outcome::new();
    let v0 = 17.7;
    for (name, model) in [("bsm", bsm()), ("mjd", mjd())] {
        let pricer = VanillaPricer::for_market(&model)?;
        for set in InstrumentSet::ALL {
            let n_steps = set.rebalance_steps(MATURITY);
            let grid = Grid { n_paths: 10_000, n_steps, maturity: MATURITY, spot: SPOT };
            let paths = simulate_paths(&model, Measure::Physical, grid, 31)?;
            let menu = InstrumentMenu::new(set, &pricer)?;
            let bank = Bank { rate: RATE, dt: paths.dt() };
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut worst: f64 = 0.0;
            for p in 0..paths.n_paths() {
                let quotes = period_quotes(&menu, &paths, p);
                let positions = random_positions(set, n_steps, &mut rng);
                let payoff = lookback_payoff(paths.terminal_spot(p), paths.terminal_max(p));
                let (outcome, _) = run_strategy(v0, &positions, &quotes, &bank, payoff)?;
                // discounted gains accumulated here, independently of the library
                let mut gain = 0.0;
                for n in 0..=n_steps {
                    let b = (RATE * paths.dt() * n as f64).exp();
                    let expected = b * (v0 + gain);
                    let v = outcome.value_path[n];
                    worst = worst.max((v - expected).abs() / v.abs().max(expected.abs()).max(1.0));
                    if n < n_steps {
                        let b_next = (RATE * paths.dt() * (n + 1) as f64).exp();
                        let q = &quotes[n];
                        gain += positions[n]
                            .iter()
                            .enumerate()
                            .map(|(j, d)| d * (q.end_values[j] / b_next - q.begin_prices[j] / b))
                            .sum::<f64>();
                    }
                }
                worst = worst.max((outcome.terminal_error - (payoff - outcome.value_path[n_steps])).abs());
            }
            out.check(
                worst <= 1e-10,
                format!("{name} {set}: V = B (V0 + G) on 10^4 random strategies, worst rel err {worst:.1e}"),
            );
        }
    }

    // under Q every discounted traded price is a martingale
    for (name, model) in [("bsm", bsm()), ("mjd", mjd())] {
        let pricer = VanillaPricer::for_market(&model)?;
        let set = InstrumentSet::SixOptions;
        let menu = InstrumentMenu::new(set, &pricer)?;
        let grid = Grid { n_paths: 200_000, n_steps: MATURITY as usize, maturity: MATURITY, spot: SPOT };
        let paths = simulate_paths(&model, Measure::RiskNeutral, grid, 57)?;
        let disc = (-RATE * paths.dt()).exp();
        let mut z_worst: f64 = 0.0;
        let mut all_ok = true;
        for n in [0, MATURITY as usize - 1] {
            for j in 0..set.n_assets() {
                // normalized by the period's start price so the samples are iid
                let samples: Vec<f64> = (0..paths.n_paths())
                    .map(|p| {
                        let s = paths.spot_begin[[p, n]];
                        let q = menu.quotes(s, paths.spot_begin[[p, n + 1]]);
                        (disc * q.end_values[j] - q.begin_prices[j]) / s
                    })
                    .collect();
                let mc = McEstimate::from_samples(&samples);
                let z = mc.value / mc.std_error;
                z_worst = z_worst.max(z.abs());
                all_ok &= z.abs() <= 3.0;
            }
        }
        out.check(
            all_ok,
            format!("{name}: discounted one-period values of the stock and six options, periods 1 and 10, worst |z| = {z_worst:.2}"),
        );

        let bank = Bank { rate: RATE, dt: paths.dt() };
        let coef: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..2 * set.n_assets()).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let samples: Vec<f64> = (0..paths.n_paths())
            .map(|p| {
                let quotes = period_quotes(&menu, &paths, p);
                let positions: Vec<Vec<f64>> = (0..paths.n_steps())
                    .map(|n| {
                        let x = (paths.spot_begin[[p, n]] / SPOT).ln();
                        (0..set.n_assets()).map(|j| coef[2 * j] + coef[2 * j + 1] * x).collect()
                    })
                    .collect();
                let (o, _) = run_strategy(v0, &positions, &quotes, &bank, 0.0).expect("valid strategy");
                o.value_path[paths.n_steps()] / bank.price(paths.n_steps())
            })
            .collect();
        let mc = McEstimate::from_samples(&samples);
        out.check(
            within_se(&mc, v0, 3.0),
            format!(
                "{name}: discounted terminal wealth of a state-dependent strategy {:.4} +- {:.4} vs V0 {v0}, z = {:+.2}",
                mc.value,
                mc.std_error,
                (mc.value - v0) / mc.std_error
            ),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------- 6

fn scratch_dir() -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("scratch directory");
    dir
}

fn train_and_test(cfg: &ExperimentConfig) -> Result<ExperimentStats> {
    let report = Trainer::new(cfg.clone())?.run(|_, _| Ok(()))?;
    let env = HedgeEnv::new(cfg)?;
    let test = cfg.simulate(DataRole::Test)?;
    let ev = env.evaluate(&report.params, &test)?;
    ExperimentStats::new(cfg, &ev.errors, ev.deltas.view())
}

type Runs = BTreeMap<(String, InstrumentSet, Penalty), ExperimentStats>;

fn desk_training() -> Result<Outcome> {
    let mut out = Outcome::new();
    let mut runs: Runs = BTreeMap::new();
    let mut rows = Vec::new();
    for dynamics in ["bsm", "mjd"] {
        for set in InstrumentSet::ALL {
            for penalty in Penalty::ALL {
                let name = format!("{dynamics}-{set}-{}-desk", penalty.method());
                let cfg = ExperimentConfig::preset(&name)?;
                assert_eq!(cfg.budget, Budget::DESK);
                let started = Instant::now();
                let stats = train_and_test(&cfg)?;
                out.note(format!(
                    "{name}: rmse {:.3}  semi-rmse {:.3}  mean {:+.3}  exposure {:+.3}  ({:.0}s)",
                    stats.rmse,
                    stats.semi_rmse,
                    stats.mean,
                    stats.avg_exposure,
                    started.elapsed().as_secs_f64()
                ));
                rows.push(stats.clone());
                runs.insert((dynamics.to_string(), set, penalty), stats);
            }
        }
    }
    let csv = scratch_dir().join("desk_stats.csv");
    write_stats_csv(&rows, std::fs::File::create(&csv)?)?;
    out.note(format!("statistics written to {}", csv.display()));

    use InstrumentSet::*;
    for dynamics in ["bsm", "mjd"] {
        let get = |set, penalty| &runs[&(dynamics.to_string(), set, penalty)];

        let cfg = ExperimentConfig::preset(&format!("{dynamics}-six-options-qdh-desk"))?;
        let env = HedgeEnv::new(&cfg)?;
        let test = cfg.simulate(DataRole::Test)?;
        let zero = PolicyParams::zeros(&cfg.lstm_config()?);
        let bank_only = hedge_stats(&env.evaluate(&zero, &test)?.errors)?;
        let six = get(SixOptions, Penalty::Mse).rmse;
        out.check(
            six <= bank_only.rmse / 3.0,
            format!("{dynamics} (a): QDH six-options RMSE {six:.3} <= bank-only {:.3} / 3 = {:.3}", bank_only.rmse, bank_only.rmse / 3.0),
        );

        let r: Vec<f64> = [SixOptions, TwoOptions, StockMonthly, StockYearly]
            .iter()
            .map(|&s| get(s, Penalty::Mse).rmse)
            .collect();
        out.check(
            r[0] < r[1] && r[1] < r[2] && r[2] < r[3],
            format!(
                "{dynamics} (b): QDH RMSE six {:.3} < two {:.3} < monthly {:.3} < yearly {:.3}",
                r[0], r[1], r[2], r[3]
            ),
        );

        for set in InstrumentSet::ALL {
            let (s, q) = (get(set, Penalty::Smse).semi_rmse, get(set, Penalty::Mse).semi_rmse);
            out.check(s < q, format!("{dynamics} (c): {set} semi-RMSE SQDH {s:.3} < QDH {q:.3}"));
        }

        let m = get(StockYearly, Penalty::Smse).mean;
        out.check(m < 0.0, format!("{dynamics} (d): SQDH stock-yearly mean error {m:+.3} < 0"));

        let (s, q) = (get(StockYearly, Penalty::Smse).avg_exposure, get(StockYearly, Penalty::Mse).avg_exposure);
        out.check(s > q, format!("{dynamics} (e): stock-yearly exposure SQDH {s:+.3} > QDH {q:+.3}"));
    }
    Ok(out)
}

// ---------------------------------------------------------------- 7

fn collect_stats(dir: &Path) -> Result<Vec<ExperimentStats>> {
    let mut rows = Vec::new();
    let mut visit = |p: PathBuf| -> Result<()> {
        let f = p.join("stats.csv");
        if f.is_file() {
            rows.extend(read_stats_csv(std::fs::File::open(f)?)?);
        }
        Ok(())
    };
    visit(dir.to_path_buf())?;
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            visit(p)?;
        }
    }
    Ok(rows)
}

fn full_budget() -> Result<Outcome> {
    if std::env::var("HEDGE_FULL_BUDGET").as_deref() != Ok("1") {
        return Ok(Outcome::skip("set HEDGE_FULL_BUDGET=1 to train the full-budget experiments"));
    }
    let mut out = Outcome::new();
    let mut runs: BTreeMap<String, ExperimentStats> = BTreeMap::new();
    let keys: Vec<String> = ["bsm", "mjd"]
        .iter()
        .flat_map(|d| InstrumentSet::ALL.into_iter().map(move |s| (d, s)))
        .flat_map(|(d, s)| Penalty::ALL.into_iter().map(move |p| format!("{d}-{s}-{}", p.method())))
        .collect();
    match std::env::var_os("HEDGE_FULL_BUDGET_STATS") {
        Some(dir) => {
            for row in collect_stats(Path::new(&dir))? {
                runs.insert(row.experiment.clone(), row);
            }
            out.note(format!("read {} runs from {}", runs.len(), Path::new(&dir).display()));
        }
        None => {
            for key in &keys {
                let cfg = ExperimentConfig::preset(key)?;
                assert_eq!(cfg.hedge.v0_source, V0Source::RiskNeutral);
                let started = Instant::now();
                let stats = train_and_test(&cfg)?;
                out.note(format!("{key}: trained in {:.0}s", started.elapsed().as_secs_f64()));
                runs.insert(key.clone(), stats);
            }
            let rows: Vec<_> = runs.values().cloned().collect();
            let csv = scratch_dir().join("full_budget_stats.csv");
            write_stats_csv(&rows, std::fs::File::create(&csv)?)?;
            out.note(format!("statistics written to {}", csv.display()));
        }
    }

    let refs = ReferenceTables::shipped();
    for key in &keys {
        let reference = refs.get(key).expect("shipped reference row");
        let Some(run) = runs.get(key) else {
            out.check(false, format!("{key}: no run found"));
            continue;
        };
        let mut line = String::new();
        let mut ok = true;
        for stat in [Statistic::Rmse, Statistic::SemiRmse, Statistic::Var95, Statistic::Cvar95] {
            if let Some(r) = reference.get(stat) {
                let c = run.get(stat);
                let dev = (c - r) / r.abs();
                ok &= dev.abs() <= 0.20;
                let _ = write!(line, "  {} {c:.2} vs {r} ({:+.0}%)", stat.name(), 100.0 * dev);
            }
        }
        out.check(ok, format!("{key}:{line}"));
    }
    for key in keys.iter().filter(|k| k.contains("stock-yearly")) {
        let (Some(run), Some(r)) = (runs.get(key), refs.get(key).and_then(|r| r.avg_exposure)) else {
            out.check(false, format!("{key}: exposure missing"));
            continue;
        };
        let c = run.avg_exposure;
        out.check(
            c.signum() == r.signum() && (c - r).abs() <= 0.07,
            format!("{key}: average exposure {c:+.3} vs {r:+.2} (sign and +-0.07)"),
        );
    }
    Ok(out)
}

// ---------------------------------------------------------------- 8

fn metrics() -> Result<Outcome> {
    let mut out = Outcome::new();
    let grid: Vec<f64> = (1..=100).map(f64::from).collect();
    let (var, cvar) = tail_risk(&grid, 0.95)?;
    out.check(var == 95.0 && cvar == 97.5, format!("1..100 grid: VaR95 {var}, CVaR95 {cvar} (expected 95 / 97.5)"));
    let s = hedge_stats(&grid)?;
    out.check(s.var_95 == 95.0 && s.cvar_95 == 97.5, "hedge_stats agrees with tail_risk on the grid".to_string());

    // phi(z_0.95) / 0.05
    let z: f64 = 1.644_853_626_951_472_2;
    let closed = normal_pdf(z) / 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(2_024);
    let sample: Vec<f64> = (0..1_000_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let cvar = hedge_stats(&sample)?.cvar_95;
    let rel = (cvar - closed).abs() / closed;
    out.check(
        rel <= 0.01 && (closed - 2.0627).abs() < 5e-5,
        format!("standard normal CVaR95 {cvar:.4} vs closed form {closed:.4}, rel err {:.2}%", 100.0 * rel),
    );
    Ok(out)
}

// ----------------------------------------------------------------

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "pricing oracles", pricing_oracles),
        (2, "risk-neutral lookback price", lookback_price),
        (3, "measure-change constants", measure_change),
        (4, "gradient exactness", gradients),
        (5, "accounting invariants", accounting),
        (6, "desk-scale training properties", desk_training),
        (7, "full-budget table reproduction", full_budget),
        (8, "metrics correctness", metrics),
    ];
    // libtest flags such as --nocapture are ignored
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut summary = Vec::new();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = run().unwrap_or_else(|e| {
            let mut o = Outcome::new();
            o.check(false, format!("error: {e}"));
            o
        });
        for line in &outcome.lines {
            println!("    {line}");
        }
        let verdict = match outcome.verdict {
            Verdict::Pass => "PASS",
            Verdict::Skip => "SKIPPED",
            Verdict::Fail => {
                failed += 1;
                "FAIL"
            }
        };
        let line = format!("criterion {id} ({name}): {verdict} [{:.1}s]", started.elapsed().as_secs_f64());
        println!("{line}");
        summary.push(line);
    }
    println!("\n{}", summary.join("\n"));
    if failed > 0 {
        std::process::exit(1);
    }
}
