use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hedge_core::instruments::lookback_payoff;
use hedge_core::market::{simulate_paths, Dynamics, Measure, PathSet};
use hedge_core::metrics::{read_stats_csv, report as compare, write_stats_csv, ExperimentStats, ReferenceTables};
use hedge_core::neural::PolicyParams;
use hedge_core::pricing::{lookback_rn_price, OptionKind, VanillaPricer};
use hedge_core::training::{Checkpoint, DataRole, Evaluation, ExperimentConfig, HedgeEnv, Trainer};
use hedge_core::HedgeError;
use serde::Serialize;

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{
    CliError, EvaluateArgs, KindArg, MeasureArg, PriceArgs, ReportArgs, Runtime, SimulateArgs, TrainArgs,
};

const CHECKPOINT_FILE: &str = "checkpoint.json";
const PARAMS_FILE: &str = "params.txt";
const STATS_FILE: &str = "stats.csv";
const EVALUATION_MANIFEST: &str = "evaluation.toml";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    HedgeError::Io(std::io::Error::other(e)).into()
}

/// Moments of the simulated period log-returns and terminal quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub return_mean: f64,
    /// population standard deviation
    pub return_std: f64,
    pub terminal_spot_mean: f64,
    pub payoff_mean: f64,
}

pub fn simulate_summary(
    config: &ExperimentConfig,
    role: DataRole,
    measure: Measure,
    n_paths: Option<usize>,
) -> Result<(PathSet, SimulationSummary), CliError> {
    let mut grid = config.grid(role);
    if let Some(n) = n_paths {
        grid.n_paths = n;
    }
    let paths = simulate_paths(&config.model(), measure, grid, role.seed(config.seeds.data))?;
    let r = paths.log_returns();
    let n = r.len() as f64;
    let return_mean = r.iter().sum::<f64>() / n;
    let return_std = (r.iter().map(|x| (x - return_mean).powi(2)).sum::<f64>() / n).sqrt();
    let np = paths.n_paths() as f64;
    let terminal_spot_mean = (0..paths.n_paths()).map(|p| paths.terminal_spot(p)).sum::<f64>() / np;
    let payoff_mean = (0..paths.n_paths())
        .map(|p| lookback_payoff(paths.terminal_spot(p), paths.terminal_max(p)))
        .sum::<f64>()
        / np;
    let summary = SimulationSummary {
        n_paths: paths.n_paths(),
        n_steps: paths.n_steps(),
        dt: paths.dt(),
        return_mean,
        return_std,
        terminal_spot_mean,
        payoff_mean,
    };
    Ok((paths, summary))
}

pub(crate) fn simulate(args: &SimulateArgs, rt: Runtime) -> Result<(), CliError> {
    let (config, preset) = args.experiment.resolve()?;
    let measure = match args.measure {
        MeasureArg::Physical => Measure::Physical,
        MeasureArg::RiskNeutral => Measure::RiskNeutral,
    };
    let mut manifest = RunManifest::new("simulate", &config, preset, rt);
    let (paths, s) = simulate_summary(&config, args.role.into(), measure, args.paths)?;
    create_dir(&args.out)?;
    let file = args.out.join("paths.csv");
    paths.write_csv(std::io::BufWriter::new(fs::File::create(&file)?))?;

    println!("experiment        {}", config.key());
    println!("paths x steps     {} x {} (dt = {})", s.n_paths, s.n_steps, s.dt);
    println!("log-return mean   {:.6}", s.return_mean);
    println!("log-return stdev  {:.6}", s.return_std);
    println!("mean S_T          {:.4}", s.terminal_spot_mean);
    println!("mean payoff       {:.4}", s.payoff_mean);
    println!("wrote {}", file.display());

    manifest.add_artifact("paths", &args.out, &file)?;
    manifest.summary.insert("return_mean".into(), s.return_mean);
    manifest.summary.insert("return_std".into(), s.return_std);
    manifest.summary.insert("payoff_mean".into(), s.payoff_mean);
    manifest.finish();
    manifest.save(&args.out)?;
    Ok(())
}

/// One line of `hedge price` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceRow {
    pub instrument: String,
    pub strike: Option<f64>,
    pub tau: f64,
    pub price: f64,
    pub delta: Option<f64>,
    /// Monte Carlo standard error, blank for closed forms
    pub std_error: Option<f64>,
}

pub fn price_quotes(
    config: &ExperimentConfig,
    strike: Option<f64>,
    tau: f64,
    kind: KindArg,
    lookback_paths: usize,
) -> Result<Vec<PriceRow>, CliError> {
    let model = config.model();
    let pricer = VanillaPricer::for_market(&model)?;
    let spot = config.market.spot;
    let strike = strike.unwrap_or(spot);
    let kinds: &[OptionKind] = match kind {
        KindArg::Call => &[OptionKind::Call],
        KindArg::Put => &[OptionKind::Put],
        KindArg::Both => &[OptionKind::Call, OptionKind::Put],
    };
    let label = match pricer {
        VanillaPricer::BlackScholes { .. } => "black-scholes",
        VanillaPricer::Merton { .. } => "merton",
    };
    let mut rows = Vec::new();
    for &k in kinds {
        let q = pricer.quote(spot, strike, tau, k)?;
        let name = match k {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        };
        rows.push(PriceRow {
            instrument: format!("{label}-{name}"),
            strike: Some(strike),
            tau,
            price: q.price,
            delta: Some(q.delta),
            std_error: None,
        });
    }
    if lookback_paths > 0 {
        let maturity = config.contract.maturity_years;
        let est = lookback_rn_price(&model, maturity, spot, lookback_paths, config.seeds.data)?;
        rows.push(PriceRow {
            instrument: "lookback".into(),
            strike: None,
            tau: f64::from(maturity),
            price: est.value,
            delta: None,
            std_error: Some(est.std_error),
        });
    }
    Ok(rows)
}

pub(crate) fn price(args: &PriceArgs) -> Result<(), CliError> {
    let (config, _) = args.experiment.resolve()?;
    let rows = price_quotes(&config, args.strike, args.tau, args.kind, args.lookback_paths)?;
    println!("market {} spot {} rate {}", config.market.dynamics.name(), config.market.spot, config.market.rate);
    if let Dynamics::Mjd(p) = config.market.dynamics {
        let q = p.to_risk_neutral()?;
        println!("risk-neutral jumps: intensity {:.7} mean {:.5} vol {:.5}", q.intensity, q.mean, q.vol);
    }
    for r in &rows {
        let strike = r.strike.map(|k| format!("K={k}")).unwrap_or_default();
        let delta = r.delta.map(|d| format!(" delta {d:.6}")).unwrap_or_default();
        let se = r.std_error.map(|s| format!(" (s.e. {s:.4})")).unwrap_or_default();
        println!("{:<22} {strike:<8} tau={:<4} price {:.6}{delta}{se}", r.instrument, r.tau, r.price);
    }
    if let Some(out) = &args.out {
        create_dir(out)?;
        let mut w = csv::Writer::from_path(out.join("quotes.csv")).map_err(csv_err)?;
        for r in &rows {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn default_run_dir(config: &ExperimentConfig, preset: Option<&str>) -> PathBuf {
    PathBuf::from("runs").join(preset.map(str::to_string).unwrap_or_else(|| config.key()))
}

/// Trains and writes the run directory; returns its manifest.
pub fn train_run(args: &TrainArgs, rt: Runtime) -> Result<RunManifest, CliError> {
    let (config, preset) = args.experiment.resolve()?;
    let out = args.out.clone().unwrap_or_else(|| default_run_dir(&config, preset.as_deref()));
    create_dir(&out)?;
    let ck_path = out.join(CHECKPOINT_FILE);
    let mut manifest = RunManifest::new("train", &config, preset, rt);
    config.save(&out.join("config.toml"))?;

    let trainer = if args.resume && ck_path.exists() {
        let ck = Checkpoint::load(&ck_path)?;
        if ck.config != config {
            return Err(HedgeError::Config(format!(
                "{} was written for a different configuration",
                ck_path.display()
            ))
            .into());
        }
        eprintln!("resuming {} at epoch {}", config.key(), ck.epoch);
        Trainer::resume(ck)?
    } else {
        Trainer::new(config.clone())?
    };
    if !args.quiet {
        if let Some(r) = trainer.records().first() {
            eprintln!("epoch {:>4}  valid {:.6}", r.epoch, r.valid_loss);
        }
    }
    let total = config.budget.epochs;
    let quiet = args.quiet;
    let result = trainer.run(|t, r| {
        t.checkpoint().save(&ck_path)?;
        if !quiet {
            eprintln!(
                "epoch {:>4}/{total}  train {:.6}  valid {:.6}",
                r.epoch,
                r.train_loss.unwrap_or(f64::NAN),
                r.valid_loss
            );
        }
        Ok(())
    });
    let report = match result {
        Ok(r) => r,
        Err(e @ HedgeError::Diverged(_)) => {
            eprintln!("training diverged; last finite state is in {}", ck_path.display());
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };

    let params_path = out.join(PARAMS_FILE);
    report.params.save(&params_path)?;
    let report_path = out.join("train_report.csv");
    report.write_csv(fs::File::create(&report_path)?)?;

    manifest.add_artifact("config", &out, &out.join("config.toml"))?;
    manifest.add_artifact("params", &out, &params_path)?;
    manifest.add_artifact("train_report", &out, &report_path)?;
    manifest.add_artifact("checkpoint", &out, &ck_path)?;
    manifest.summary.insert("selected_epoch".into(), report.selected_epoch as f64);
    manifest.summary.insert("best_valid_loss".into(), report.best_valid_loss());
    manifest.summary.insert("train_seconds".into(), report.wall_clock_secs);
    println!(
        "{}: selected epoch {} of {}, validation loss {:.6}, {:.1}s",
        config.key(),
        report.selected_epoch,
        total,
        report.best_valid_loss(),
        report.wall_clock_secs
    );

    if args.evaluate {
        let stats = write_evaluation(&config, &report.params, &out, false)?;
        print_stats(&stats);
        manifest.add_artifact("stats", &out, &out.join(STATS_FILE))?;
        manifest.add_artifact("errors", &out, &out.join("errors.csv"))?;
        manifest.summary.insert("test_rmse".into(), stats.rmse);
    }
    manifest.finish();
    manifest.save(&out)?;
    Ok(manifest)
}

pub(crate) fn train(args: &TrainArgs, rt: Runtime) -> Result<(), CliError> {
    train_run(args, rt).map(|_| ())
}

/// Evaluates on the test set and writes `stats.csv` and `errors.csv`.
fn write_evaluation(
    config: &ExperimentConfig,
    params: &PolicyParams,
    out: &Path,
    baseline: bool,
) -> Result<ExperimentStats, CliError> {
    let env = HedgeEnv::new(config)?;
    let test = config.simulate(DataRole::Test)?;
    let ev: Evaluation = env.evaluate(params, &test)?;
    let mut stats = ExperimentStats::new(config, &ev.errors, ev.deltas.view())?;
    if baseline {
        stats.experiment.push_str("-bank-only");
    }
    create_dir(out)?;
    write_stats_csv(std::slice::from_ref(&stats), fs::File::create(out.join(STATS_FILE))?)?;

    let mut w = std::io::BufWriter::new(fs::File::create(out.join("errors.csv"))?);
    writeln!(w, "path,error,terminal_value,mean_delta")?;
    let n = ev.values.ncols() - 1;
    for (p, e) in ev.errors.iter().enumerate() {
        let d = ev.deltas.row(p);
        let mean_delta = d.sum() / d.len().max(1) as f64;
        writeln!(w, "{p},{e:?},{:?},{mean_delta:?}", ev.values[[p, n]])?;
    }
    w.flush()?;
    Ok(stats)
}

fn print_stats(s: &ExperimentStats) {
    println!("{} on {} test paths (v0 = {})", s.experiment, s.n_paths, s.v0);
    println!(
        "  mean {:.3}  rmse {:.3}  semi-rmse {:.3}  skew {:.3}",
        s.mean, s.rmse, s.semi_rmse, s.skew
    );
    println!(
        "  VaR95 {:.3}  VaR99 {:.3}  CVaR95 {:.3}  CVaR99 {:.3}  avg exposure {:.3}",
        s.var_95, s.var_99, s.cvar_95, s.cvar_99, s.avg_exposure
    );
}

/// Loads config and parameters from the arguments, evaluates and writes the
/// output directory.
pub fn evaluate_run(args: &EvaluateArgs, rt: Runtime) -> Result<ExperimentStats, CliError> {
    let (config, preset, params_path, default_out) = match &args.run {
        Some(dir) => {
            if args.experiment.source.preset.is_some() || args.experiment.source.config.is_some() {
                return Err(CliError::Usage("--run cannot be combined with --preset or --config".into()));
            }
            let m = RunManifest::load(&dir.join(MANIFEST_FILE))?;
            let params = m.artifact_path(dir, "params").unwrap_or_else(|| dir.join(PARAMS_FILE));
            (m.config, m.preset, Some(params), Some(dir.clone()))
        }
        None => {
            let (config, preset) = args.experiment.resolve()?;
            (config, preset, args.params.clone(), None)
        }
    };
    let params = if args.baseline {
        PolicyParams::zeros(&config.lstm_config()?)
    } else {
        let path = params_path
            .ok_or_else(|| CliError::Usage("give --run, --params or --baseline".into()))?;
        let p = PolicyParams::load(&path)?;
        if p.config != config.lstm_config()? {
            return Err(HedgeError::Config(format!(
                "{} does not fit the network of {}",
                path.display(),
                config.key()
            ))
            .into());
        }
        p
    };
    let out = args
        .out
        .clone()
        .or(default_out)
        .unwrap_or_else(|| default_run_dir(&config, preset.as_deref()));
    let mut manifest = RunManifest::new("evaluate", &config, preset, rt);
    let stats = write_evaluation(&config, &params, &out, args.baseline)?;
    manifest.add_artifact("stats", &out, &out.join(STATS_FILE))?;
    manifest.add_artifact("errors", &out, &out.join("errors.csv"))?;
    manifest.summary.insert("test_rmse".into(), stats.rmse);
    manifest.summary.insert("test_mean".into(), stats.mean);
    manifest.finish();
    let text = toml::to_string(&manifest).map_err(|e| HedgeError::Config(e.to_string()))?;
    fs::write(out.join(EVALUATION_MANIFEST), text)?;
    Ok(stats)
}

pub(crate) fn evaluate(args: &EvaluateArgs, rt: Runtime) -> Result<(), CliError> {
    let stats = evaluate_run(args, rt)?;
    print_stats(&stats);
    Ok(())
}

/// `stats.csv` files named directly or found in a directory and its
/// immediate subdirectories, sorted by path.
fn stats_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut found = Vec::new();
    for input in inputs {
        if input.is_file() {
            found.push(input.clone());
            continue;
        }
        if !input.is_dir() {
            return Err(HedgeError::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} not found", input.display()),
            ))
            .into());
        }
        let own = input.join(STATS_FILE);
        if own.is_file() {
            found.push(own);
        }
        let mut subdirs: Vec<PathBuf> = fs::read_dir(input)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(STATS_FILE).is_file())
            .collect();
        subdirs.sort();
        found.extend(subdirs.into_iter().map(|d| d.join(STATS_FILE)));
    }
    Ok(found)
}

pub(crate) fn report(args: &ReportArgs) -> Result<(), CliError> {
    let mut runs = Vec::new();
    for file in stats_files(&args.runs)? {
        runs.extend(read_stats_csv(fs::File::open(&file)?)?);
    }
    let rep = compare(&runs, &ReferenceTables::shipped())?;
    print!("{}", rep.to_text());
    if let Some(out) = &args.out {
        create_dir(out)?;
        rep.write_csv(fs::File::create(out.join("report.csv"))?)?;
    }
    Ok(())
}
