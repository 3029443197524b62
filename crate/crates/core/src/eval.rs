//! Error metrics and evaluation reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::dataio::{EncodedRecord, QoSRecord};
use crate::error::{Error, Result};

fn check(y: &[f64], y_hat: &[f64]) -> Result<()> {
    if y.len() != y_hat.len() {
        return Err(Error::InvalidArgument(format!(
            "metric inputs differ in length: {} vs {}",
            y.len(),
            y_hat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("metric over zero records".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    Ok(y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64)
}

/// Root mean squared error.
pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    check(y, y_hat)?;
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubsetMetrics {
    pub count: usize,
    /// `None` when the subset is empty.
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
}

impl SubsetMetrics {
    pub fn compute(y: &[f64], y_hat: &[f64]) -> Result<Self> {
        if y.is_empty() && y_hat.is_empty() {
            return Ok(SubsetMetrics {
                count: 0,
                mae: None,
                rmse: None,
            });
        }
        Ok(SubsetMetrics {
            count: y.len(),
            mae: Some(mae(y, y_hat)?),
            rmse: Some(rmse(y, y_hat)?),
        })
    }
}

/// Metrics of one method on one split, broken down by subset.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub dataset: String,
    pub method: String,
    pub fingerprint: String,
    pub seed: u64,
    pub all: SubsetMetrics,
    /// Records with any MISSING location feature.
    pub missing: SubsetMetrics,
    /// Records whose user had forged features.
    pub corrupted: SubsetMetrics,
    /// Not written to CSV so that reports stay byte-identical across runs.
    pub wall_clock_secs: f64,
}

/// Which evaluated records fall in each subset.
#[derive(Clone, Debug, Default)]
pub struct SubsetMasks {
    pub missing: Vec<bool>,
    pub corrupted: Vec<bool>,
}

impl SubsetMasks {
    pub fn from_records(records: &[QoSRecord], corrupted_users: &[u32]) -> Self {
        let corrupted_users: BTreeSet<u32> = corrupted_users.iter().copied().collect();
        SubsetMasks {
            missing: records.iter().map(QoSRecord::has_missing).collect(),
            corrupted: records.iter().map(|r| corrupted_users.contains(&r.user_id)).collect(),
        }
    }
}

fn masked(values: &[f64], mask: &[bool]) -> Vec<f64> {
    values.iter().zip(mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect()
}

impl EvalReport {
    pub fn compute(
        dataset: &str,
        method: &str,
        fingerprint: &str,
        seed: u64,
        y: &[f64],
        y_hat: &[f64],
        masks: &SubsetMasks,
    ) -> Result<Self> {
        check(y, y_hat)?;
        if masks.missing.len() != y.len() || masks.corrupted.len() != y.len() {
            return Err(Error::InvalidArgument("subset masks do not match the evaluated records".into()));
        }
        Ok(EvalReport {
            dataset: dataset.to_string(),
            method: method.to_string(),
            fingerprint: fingerprint.to_string(),
            seed,
            all: SubsetMetrics::compute(y, y_hat)?,
            missing: SubsetMetrics::compute(&masked(y, &masks.missing), &masked(y_hat, &masks.missing))?,
            corrupted: SubsetMetrics::compute(&masked(y, &masks.corrupted), &masked(y_hat, &masks.corrupted))?,
            wall_clock_secs: 0.0,
        })
    }
}

/// Labels of encoded records.
pub fn labels(records: &[EncodedRecord]) -> Vec<f64> {
    records.iter().map(|r| r.rt).collect()
}

pub const REPORT_HEADER: &str = "dataset,method,seed,fingerprint,count,mae,rmse,missing_count,missing_mae,missing_rmse,corrupted_count,corrupted_mae,corrupted_rmse";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// CSV with one row per report.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let subset = |s: &SubsetMetrics| format!("{},{},{}", s.count, opt(s.mae), opt(s.rmse));
        let _ = writeln!(
            out,
            "{},{},{},\"{}\",{},{},{}",
            r.dataset,
            r.method,
            r.seed,
            r.fingerprint,
            subset(&r.all),
            subset(&r.missing),
            subset(&r.corrupted)
        );
    }
    out
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fixed-width table of per-method `mean ± std` over seeds.
pub fn summary_table(reports: &[EvalReport]) -> String {
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut out = format!(
        "{:<24} {:>5} {:>19} {:>19} {:>19} {:>19}\n",
        "method", "runs", "MAE", "RMSE", "MAE (missing)", "MAE (corrupted)"
    );
    for m in methods {
        let rows: Vec<&EvalReport> = reports.iter().filter(|r| r.method == m).collect();
        let cell = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
            let vals: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
            if vals.is_empty() {
                return "-".to_string();
            }
            let (mean, std) = mean_std(&vals);
            format!("{mean:.4} ± {std:.4}")
        };
        let _ = writeln!(
            out,
            "{:<24} {:>5} {:>19} {:>19} {:>19} {:>19}",
            m,
            rows.len(),
            cell(&|r| r.all.mae),
            cell(&|r| r.all.rmse),
            cell(&|r| r.missing.mae),
            cell(&|r| r.corrupted.mae)
        );
    }
    out
}
