//! CSV tables and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use nomamec::solver::SolverOptions;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 11] = [
    "axis",
    "value",
    "scheme",
    "seed",
    "delay_s",
    "sum_rate_bps",
    "total_power_w",
    "ee_bpj",
    "pe",
    "iterations",
    "case_label",
];

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "axis",
    "value",
    "scheme",
    "seeds",
    "feasible",
    "mean_delay_s",
    "mean_sum_rate_bps",
    "mean_total_power_w",
    "mean_ee_bpj",
    "mean_pe",
];

/// 17 significant digits in scientific notation; `nan` for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// One result row. Infeasible runs keep their row with `nan` metrics and
/// `infeasible` as the case label.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub axis: String,
    pub value: f64,
    pub scheme: String,
    pub seed: u64,
    pub delay: f64,
    pub sum_rate: f64,
    pub total_power: f64,
    pub ee: f64,
    pub pe: f64,
    pub iterations: usize,
    pub case_label: String,
}

impl Row {
    pub fn feasible(&self) -> bool {
        self.case_label != "infeasible"
    }

    fn record(&self) -> [String; 11] {
        [
            self.axis.clone(),
            num(self.value),
            self.scheme.clone(),
            self.seed.to_string(),
            num(self.delay),
            num(self.sum_rate),
            num(self.total_power),
            num(self.ee),
            num(self.pe),
            self.iterations.to_string(),
            self.case_label.clone(),
        ]
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(COLUMNS).map_err(io(path))?;
    for r in rows {
        w.write_record(r.record()).map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (n, s) = xs.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Means over feasible seeds, one line per (value, scheme) in row order.
pub fn summarize(rows: &[Row]) -> Vec<[String; 10]> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let key = (&rows[i].axis, rows[i].value.to_bits(), &rows[i].scheme);
        let mut j = i;
        while j < rows.len() && (&rows[j].axis, rows[j].value.to_bits(), &rows[j].scheme) == key {
            j += 1;
        }
        let group = &rows[i..j];
        let ok: Vec<&Row> = group.iter().filter(|r| r.feasible()).collect();
        out.push([
            rows[i].axis.clone(),
            num(rows[i].value),
            rows[i].scheme.clone(),
            group.len().to_string(),
            ok.len().to_string(),
            num(mean(ok.iter().map(|r| r.delay))),
            num(mean(ok.iter().map(|r| r.sum_rate))),
            num(mean(ok.iter().map(|r| r.total_power))),
            num(mean(ok.iter().map(|r| r.ee))),
            num(mean(ok.iter().map(|r| r.pe).filter(|p| !p.is_nan()))),
        ]);
        i = j;
    }
    out
}

pub fn write_summary(path: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_COLUMNS).map_err(io(path))?;
    for rec in summarize(rows) {
        w.write_record(rec).map_err(io(path))?;
    }
    w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Everything needed to regenerate the files listed in `outputs`.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, P: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub generator: &'static str,
    pub config: &'a ConfigFile,
    pub tolerances: SolverOptions,
    /// `(master, trial)` of every generated channel.
    pub seeds: Vec<(u64, u64)>,
    pub params: P,
    pub outputs: Vec<String>,
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(value: f64, scheme: &str, seed: u64, delay: f64) -> Row {
        Row {
            axis: "p_max".into(),
            value,
            scheme: scheme.into(),
            seed,
            delay,
            sum_rate: 1.0,
            total_power: 0.02,
            ee: 2.0,
            pe: f64::NAN,
            iterations: 14,
            case_label: if delay.is_nan() { "infeasible" } else { "" }.into(),
        }
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(1.6), "1.6000000000000001e0");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn summary_skips_infeasible_seeds() {
        let rows = [
            row(0.01, "local", 0, 1.0),
            row(0.01, "local", 1, 3.0),
            row(0.01, "local", 2, f64::NAN),
            row(0.02, "local", 0, 5.0),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0][3], "3");
        assert_eq!(s[0][4], "2");
        assert_eq!(s[0][5], num(2.0));
        assert_eq!(s[0][9], "nan");
    }

    #[test]
    fn csv_uses_lf_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_rows(&p, &[row(0.01, "local", 0, 1.0)]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
        assert_eq!(text.lines().count(), 2);
    }
}
