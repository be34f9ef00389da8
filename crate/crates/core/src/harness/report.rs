use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub variant: String,
    pub fold: usize,
    pub subject: String,
    pub rmse_bpm: f64,
    pub accuracy_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub variant: String,
    pub n: usize,
    pub rmse_median: f64,
    pub rmse_q1: f64,
    pub rmse_q3: f64,
    pub accuracy_median: f64,
    pub accuracy_q1: f64,
    pub accuracy_q3: f64,
}

/// Per-subject results of an experiment plus free-text notes (reference
/// source, induced phases, ...).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
}

/// Linearly interpolated quantile of unsorted data, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

impl ReportTable {
    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    pub fn merge(&mut self, other: ReportTable) {
        self.rows.extend(other.rows);
        self.notes.extend(other.notes);
    }

    /// Orders rows by `(experiment, variant, fold, subject)`.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (&a.experiment, &a.variant, a.fold, &a.subject).cmp(&(
                &b.experiment,
                &b.variant,
                b.fold,
                &b.subject,
            ))
        });
    }

    /// Variants in first-appearance order.
    pub fn variants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.variant) {
                out.push(r.variant.clone());
            }
        }
        out
    }

    pub fn rows_for<'a>(&'a self, variant: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    pub fn median_rmse(&self, variant: &str) -> f64 {
        median(
            &self
                .rows_for(variant)
                .map(|r| r.rmse_bpm)
                .collect::<Vec<_>>(),
        )
    }

    pub fn median_accuracy(&self, variant: &str) -> f64 {
        median(
            &self
                .rows_for(variant)
                .map(|r| r.accuracy_pct)
                .collect::<Vec<_>>(),
        )
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &self.rows {
            let k = (r.experiment.clone(), r.variant.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.into_iter()
            .map(|(experiment, variant)| {
                let rows: Vec<&ReportRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.experiment == experiment && r.variant == variant)
                    .collect();
                let rmse: Vec<f64> = rows.iter().map(|r| r.rmse_bpm).collect();
                let acc: Vec<f64> = rows.iter().map(|r| r.accuracy_pct).collect();
                SummaryRow {
                    experiment,
                    variant,
                    n: rows.len(),
                    rmse_median: median(&rmse),
                    rmse_q1: quantile(&rmse, 0.25),
                    rmse_q3: quantile(&rmse, 0.75),
                    accuracy_median: median(&acc),
                    accuracy_q1: quantile(&acc, 0.25),
                    accuracy_q3: quantile(&acc, 0.75),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> Result<String> {
        to_csv(&self.summary())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rows = reader
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()
            .map_err(|e| Error::Csv(e.to_string()))?;
        Ok(Self {
            rows,
            notes: Vec::new(),
        })
    }

    /// Writes `report.csv`, `summary.csv` and, when there are notes,
    /// `notes.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join("report.csv"), self.to_csv()?.as_bytes())?;
        write_atomic(&dir.join("summary.csv"), self.summary_csv()?.as_bytes())?;
        if !self.notes.is_empty() {
            write_atomic(
                &dir.join("notes.txt"),
                (self.notes.join("\n") + "\n").as_bytes(),
            )?;
        }
        Ok(())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: &str, fold: usize, rmse: f64, acc: f64) -> ReportRow {
        ReportRow {
            experiment: "E1".into(),
            variant: variant.into(),
            fold,
            subject: format!("s{fold}"),
            rmse_bpm: rmse,
            accuracy_pct: acc,
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn csv_header_and_round_trip() {
        let mut t = ReportTable::default();
        t.push(row("RGB", 0, 1.5, 90.0));
        t.push(row("RBG", 0, 20.0, 10.0));
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("experiment,variant,fold,subject,rmse_bpm,accuracy_pct\n"));
        assert_eq!(ReportTable::from_csv(&csv).unwrap().rows, t.rows);
        let summary = t.summary();
        assert_eq!(summary.len(), 2);
        assert_eq!(summary[0].rmse_median, 1.5);
        assert!(t
            .summary_csv()
            .unwrap()
            .starts_with("experiment,variant,n,rmse_median"));
    }

    #[test]
    fn sorting_is_by_variant_then_fold() {
        let mut t = ReportTable::default();
        t.push(row("b", 1, 0.0, 0.0));
        t.push(row("a", 2, 0.0, 0.0));
        t.push(row("a", 0, 0.0, 0.0));
        t.sort();
        let keys: Vec<(String, usize)> =
            t.rows.iter().map(|r| (r.variant.clone(), r.fold)).collect();
        assert_eq!(
            keys,
            vec![("a".into(), 0), ("a".into(), 2), ("b".into(), 1)]
        );
    }
}
