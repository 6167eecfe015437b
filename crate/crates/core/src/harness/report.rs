use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{ResultRow, Scheme, SweepVar};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "scheme",
    "sweep_var",
    "sweep_value",
    "trial",
    "seed",
    "sum_rate_bps_hz",
    "iters",
    "wall_ms",
    "user_rates",
];

fn csv_error(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_string(),
            source,
        },
        other => Error::Io {
            path: path.to_string(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

/// Writes `rows` as CSV to any writer; `label` names the destination in errors.
pub fn write_csv_to<W: Write>(out: W, rows: &[ResultRow], label: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(|e| csv_error(label, e))?;
    for r in rows {
        let rates: Vec<String> = r.user_rates.iter().map(|x| x.to_string()).collect();
        w.write_record([
            r.scheme.name().to_string(),
            r.sweep_var.name().to_string(),
            r.sweep_value.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.sum_rate.to_string(),
            r.iterations.to_string(),
            r.wall_ms.to_string(),
            rates.join(";"),
        ])
        .map_err(|e| csv_error(label, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: label.to_string(),
        source,
    })
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let label = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: label.clone(),
        source,
    })?;
    write_csv_to(std::io::BufWriter::new(file), rows, &label)
}

/// Sum-rate statistics of one scheme at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single trial.
    pub std_dev: f64,
    pub std_error: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci95: f64,
}

/// Groups rows by scheme and sweep value, in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(Scheme, SweepVar, f64, Vec<f64>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|g| g.0 == r.scheme && g.1 == r.sweep_var && g.2 == r.sweep_value)
        {
            Some(g) => g.3.push(r.sum_rate),
            None => groups.push((r.scheme, r.sweep_var, r.sweep_value, vec![r.sum_rate])),
        }
    }
    groups
        .into_iter()
        .map(|(scheme, sweep_var, sweep_value, v)| {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std_dev = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let std_error = std_dev / n.sqrt();
            SummaryRow {
                scheme,
                sweep_var,
                sweep_value,
                trials: v.len(),
                mean,
                std_dev,
                std_error,
                ci95: 1.96 * std_error,
            }
        })
        .collect()
}

/// Fixed-width text table of a summary.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>9} {:>12} {:>6} {:>12} {:>10}",
        "scheme", "variable", "value", "n", "mean", "ci95"
    );
    for r in summary {
        let _ = writeln!(
            s,
            "{:<20} {:>9} {:>12.4} {:>6} {:>12.4} {:>10.4}",
            r.scheme.name(),
            r.sweep_var.name(),
            r.sweep_value,
            r.trials,
            r.mean,
            r.ci95
        );
    }
    s
}
