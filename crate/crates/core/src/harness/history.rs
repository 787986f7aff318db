//! Per-iteration training records and CSV export.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::{invalid, Result};

pub const CSV_HEADER: &str = "iter,objective,recovered,replacements,seconds";

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRecord {
    /// 1-based.
    pub iter: usize,
    /// `f_N` of the operator entering the iteration, on that iteration's batch.
    pub objective: f64,
    /// Recovered fraction after the update, when a target is known.
    pub recovered: Option<f64>,
    pub replacements: usize,
    /// Elapsed since the start of training.
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<HistoryRecord>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&HistoryRecord> {
        self.records.last()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn total_replacements(&self) -> usize {
        self.records.iter().map(|r| r.replacements).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.records {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.iter,
                r.objective,
                opt(r.recovered),
                r.replacements,
                opt(r.seconds)
            )
            .unwrap();
        }
        s
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Per-iteration mean over runs of equal length. A column is left empty
/// when any run lacks it.
pub fn mean_curve_csv(histories: &[TrainHistory]) -> Result<String> {
    let Some(first) = histories.first() else {
        return Err(invalid("no histories to average"));
    };
    if histories.iter().any(|h| h.len() != first.len()) {
        return Err(invalid("histories differ in length"));
    }
    let runs = histories.len() as f64;
    let mean = |f: &dyn Fn(&HistoryRecord) -> Option<f64>, t: usize| -> Option<f64> {
        let mut sum = 0.0;
        for h in histories {
            sum += f(&h.records[t])?;
        }
        Some(sum / runs)
    };
    let mut s = String::new();
    writeln!(s, "{CSV_HEADER}").unwrap();
    for t in 0..first.len() {
        writeln!(
            s,
            "{},{},{},{},{}",
            first.records[t].iter,
            mean(&|r| Some(r.objective), t).unwrap(),
            opt(mean(&|r| r.recovered, t)),
            mean(&|r| Some(r.replacements as f64), t).unwrap(),
            opt(mean(&|r| r.seconds, t))
        )
        .unwrap();
    }
    Ok(s)
}
