use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{average_exposure, hedge_stats, HedgeStats};
use crate::error::{HedgeError, Result};
use crate::training::ExperimentConfig;

const SHIPPED: &str = include_str!("../../data/reference_tables.csv");

/// Columns shared by computed and reference rows, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Rmse,
    SemiRmse,
    Var95,
    Var99,
    Cvar95,
    Cvar99,
    Skew,
    AvgExposure,
}

impl Statistic {
    pub const ALL: [Statistic; 9] = [
        Statistic::Mean,
        Statistic::Rmse,
        Statistic::SemiRmse,
        Statistic::Var95,
        Statistic::Var99,
        Statistic::Cvar95,
        Statistic::Cvar99,
        Statistic::Skew,
        Statistic::AvgExposure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::Rmse => "rmse",
            Statistic::SemiRmse => "semi_rmse",
            Statistic::Var95 => "var_95",
            Statistic::Var99 => "var_99",
            Statistic::Cvar95 => "cvar_95",
            Statistic::Cvar99 => "cvar_99",
            Statistic::Skew => "skew",
            Statistic::AvgExposure => "avg_exposure",
        }
    }
}

/// Statistics of one evaluated experiment; one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStats {
    pub experiment: String,
    pub dynamics: String,
    pub instruments: String,
    pub penalty: String,
    pub v0: f64,
    pub n_paths: usize,
    pub mean: f64,
    pub rmse: f64,
    pub semi_rmse: f64,
    pub var_95: f64,
    pub var_99: f64,
    pub cvar_95: f64,
    pub cvar_99: f64,
    pub skew: f64,
    pub avg_exposure: f64,
}

impl ExperimentStats {
    pub fn new(config: &ExperimentConfig, errors: &[f64], deltas: ArrayView2<f64>) -> Result<Self> {
        let s = hedge_stats(errors)?;
        let exposure = average_exposure(deltas)?;
        Ok(ExperimentStats {
            experiment: config.key(),
            dynamics: config.market.dynamics.name().to_string(),
            instruments: config.hedge.instruments.name().to_string(),
            penalty: config.hedge.penalty.method().to_string(),
            v0: config.hedge.v0,
            n_paths: errors.len(),
            mean: s.mean,
            rmse: s.rmse,
            semi_rmse: s.semi_rmse,
            var_95: s.var_95,
            var_99: s.var_99,
            cvar_95: s.cvar_95,
            cvar_99: s.cvar_99,
            skew: s.skew,
            avg_exposure: exposure.avg_exposure,
        })
    }

    pub fn stats(&self) -> HedgeStats {
        HedgeStats {
            mean: self.mean,
            rmse: self.rmse,
            semi_rmse: self.semi_rmse,
            var_95: self.var_95,
            var_99: self.var_99,
            cvar_95: self.cvar_95,
            cvar_99: self.cvar_99,
            skew: self.skew,
        }
    }

    pub fn get(&self, stat: Statistic) -> f64 {
        match stat {
            Statistic::Mean => self.mean,
            Statistic::Rmse => self.rmse,
            Statistic::SemiRmse => self.semi_rmse,
            Statistic::Var95 => self.var_95,
            Statistic::Var99 => self.var_99,
            Statistic::Cvar95 => self.cvar_95,
            Statistic::Cvar99 => self.cvar_99,
            Statistic::Skew => self.skew,
            Statistic::AvgExposure => self.avg_exposure,
        }
    }
}

pub fn write_stats_csv<W: Write>(rows: &[ExperimentStats], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_stats_csv<R: Read>(reader: R) -> Result<Vec<ExperimentStats>> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| HedgeError::Parse(format!("statistics csv: {e}")))
}

fn csv_err(e: csv::Error) -> HedgeError {
    HedgeError::Io(std::io::Error::other(e))
}

/// Published statistics for one experiment; blank cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub experiment: String,
    pub capital: String,
    pub dynamics: String,
    pub instruments: String,
    /// `qdh`, `sqdh`, or `local` for the local-risk-minimization baseline.
    pub method: String,
    pub v0: f64,
    pub mean: Option<f64>,
    pub rmse: Option<f64>,
    pub semi_rmse: Option<f64>,
    pub var_95: Option<f64>,
    pub var_99: Option<f64>,
    pub cvar_95: Option<f64>,
    pub cvar_99: Option<f64>,
    pub skew: Option<f64>,
    pub avg_exposure: Option<f64>,
}

impl ReferenceRow {
    pub fn get(&self, stat: Statistic) -> Option<f64> {
        match stat {
            Statistic::Mean => self.mean,
            Statistic::Rmse => self.rmse,
            Statistic::SemiRmse => self.semi_rmse,
            Statistic::Var95 => self.var_95,
            Statistic::Var99 => self.var_99,
            Statistic::Cvar95 => self.cvar_95,
            Statistic::Cvar99 => self.cvar_99,
            Statistic::Skew => self.skew,
            Statistic::AvgExposure => self.avg_exposure,
        }
    }
}

/// Reference statistics keyed by experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTables {
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTables {
    /// The tables compiled into the crate from `data/reference_tables.csv`.
    pub fn shipped() -> Self {
        Self::from_csv(SHIPPED.as_bytes()).expect("shipped reference tables parse")
    }

    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let rows: Vec<ReferenceRow> = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader)
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| HedgeError::Parse(format!("reference csv: {e}")))?;
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.experiment.as_str()) {
                return Err(HedgeError::Parse(format!("duplicate reference row {}", r.experiment)));
            }
        }
        Ok(ReferenceTables { rows })
    }

    pub fn get(&self, experiment: &str) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.experiment == experiment)
    }
}

/// One line of a comparison: either side may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub computed: Option<ExperimentStats>,
    pub reference: Option<ReferenceRow>,
}

impl ReportRow {
    pub fn computed(&self, stat: Statistic) -> Option<f64> {
        self.computed.as_ref().map(|c| c.get(stat))
    }

    pub fn reference(&self, stat: Statistic) -> Option<f64> {
        self.reference.as_ref().and_then(|r| r.get(stat))
    }

    /// `100 (computed - reference) / |reference|`; blank without both sides
    /// or against a zero reference.
    pub fn deviation_pct(&self, stat: Statistic) -> Option<f64> {
        let (c, r) = (self.computed(stat)?, self.reference(stat)?);
        (r != 0.0).then(|| 100.0 * (c - r) / r.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
}

/// Lines up computed statistics against the references.
///
/// Every reference row appears, in file order, followed by computed
/// experiments without a reference. A computed row whose key matches a
/// reference with different dynamics, instruments, method or capital, or a key
/// listed twice, is a contract violation.
pub fn report(runs: &[ExperimentStats], references: &ReferenceTables) -> Result<ComparisonReport> {
    let mut seen = HashSet::new();
    for run in runs {
        if !seen.insert(run.experiment.as_str()) {
            return Err(HedgeError::Contract(format!("experiment {} listed twice", run.experiment)));
        }
        if let Some(r) = references.get(&run.experiment) {
            let same = r.dynamics == run.dynamics
                && r.instruments == run.instruments
                && r.method == run.penalty
                && (r.v0 - run.v0).abs() < 1e-9;
            if !same {
                return Err(HedgeError::Contract(format!(
                    "experiment {} ({} {} {} v0={}) does not match its reference ({} {} {} v0={})",
                    run.experiment,
                    run.dynamics,
                    run.instruments,
                    run.penalty,
                    run.v0,
                    r.dynamics,
                    r.instruments,
                    r.method,
                    r.v0
                )));
            }
        }
    }
    let find = |key: &str| runs.iter().find(|r| r.experiment == key).cloned();
    let mut rows: Vec<ReportRow> = references
        .rows
        .iter()
        .map(|r| ReportRow {
            experiment: r.experiment.clone(),
            computed: find(&r.experiment),
            reference: Some(r.clone()),
        })
        .collect();
    rows.extend(runs.iter().filter(|r| references.get(&r.experiment).is_none()).map(|r| ReportRow {
        experiment: r.experiment.clone(),
        computed: Some(r.clone()),
        reference: None,
    }));
    Ok(ComparisonReport { rows })
}

fn cell(x: Option<f64>, digits: usize) -> String {
    x.map(|v| format!("{v:.digits$}")).unwrap_or_default()
}

impl ComparisonReport {
    /// Columns: `experiment`, then `<stat>,<stat>_ref,<stat>_dev_pct` for
    /// every statistic.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["experiment".to_string()];
        for s in Statistic::ALL {
            header.push(s.name().to_string());
            header.push(format!("{}_ref", s.name()));
            header.push(format!("{}_dev_pct", s.name()));
        }
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut rec = vec![row.experiment.clone()];
            for s in Statistic::ALL {
                rec.push(row.computed(s).map(|v| v.to_string()).unwrap_or_default());
                rec.push(row.reference(s).map(|v| v.to_string()).unwrap_or_default());
                rec.push(row.deviation_pct(s).map(|v| format!("{v:.2}")).unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Fixed-width table; each statistic shows `computed / reference (dev%)`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<28}", "experiment");
        for s in Statistic::ALL {
            let _ = write!(out, " {:>24}", s.name());
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{:<28}", row.experiment);
            for s in Statistic::ALL {
                let digits = if s == Statistic::AvgExposure { 2 } else { 1 };
                let dev = row.deviation_pct(s).map(|d| format!(" ({d:+.0}%)")).unwrap_or_default();
                let text = format!(
                    "{} / {}{dev}",
                    cell(row.computed(s), digits),
                    cell(row.reference(s), digits)
                );
                let _ = write!(out, " {text:>24}");
            }
            out.push('\n');
        }
        out
    }
}
