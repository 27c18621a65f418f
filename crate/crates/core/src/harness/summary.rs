use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};

use super::fmt_num;
use super::runner::SlotRecord;

/// Mean and standard error over repetitions for one `(method, slot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub slot: u32,
    pub reps: usize,
    pub mean_avg_regret: f64,
    pub se_avg_regret: f64,
    /// Per-slot EDC averaged over slots `1..=slot`, then over repetitions.
    pub mean_avg_edc: f64,
    pub se_avg_edc: f64,
}

pub const SUMMARY_COLUMNS: [&str; 7] = [
    "method",
    "slot",
    "reps",
    "mean_avg_regret",
    "se_avg_regret",
    "mean_avg_edc",
    "se_avg_edc",
];

/// Sample mean and standard error `s / √n`; the error is 0 for one sample.
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregate records by `(method, slot)`, sorted by method then slot.
pub fn summarize(records: &[SlotRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    // running EDC sum per (method, rep); records of a rep arrive in slot order
    let mut running: BTreeMap<(&str, u32), (f64, u32)> = BTreeMap::new();
    let mut groups: BTreeMap<(&str, u32), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut sorted: Vec<&SlotRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.method, a.rep, a.slot).cmp(&(&b.method, b.rep, b.slot)));
    for r in sorted {
        let acc = running.entry((&r.method, r.rep)).or_insert((0.0, 0));
        acc.0 += r.edc_total;
        acc.1 += 1;
        let g = groups.entry((&r.method, r.slot)).or_default();
        g.0.push(r.avg_regret);
        g.1.push(acc.0 / acc.1 as f64);
    }
    Ok(groups
        .into_iter()
        .map(|((method, slot), (reg, edc))| {
            let (mr, sr) = mean_stderr(&reg);
            let (me, se) = mean_stderr(&edc);
            SummaryRow {
                method: method.to_string(),
                slot,
                reps: reg.len(),
                mean_avg_regret: mr,
                se_avg_regret: sr,
                mean_avg_edc: me,
                se_avg_edc: se,
            }
        })
        .collect())
}

/// Final-slot row of `method`.
pub fn final_row<'a>(rows: &'a [SummaryRow], method: &str) -> Option<&'a SummaryRow> {
    rows.iter()
        .filter(|r| r.method == method)
        .max_by_key(|r| r.slot)
}

/// Relative improvement of `a` over `b`: `(b - a) / |b|`. Positive when
/// `a` is smaller (better for regret and cost).
pub fn relative_difference(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a) / b.abs()
    }
}

pub fn write_summary_csv<W: Write>(w: W, rows: &[SummaryRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.to_string());
    wr.write_record(SUMMARY_COLUMNS).map_err(io)?;
    for r in rows {
        wr.write_record([
            r.method.clone(),
            r.slot.to_string(),
            r.reps.to_string(),
            fmt_num(r.mean_avg_regret),
            fmt_num(r.se_avg_regret),
            fmt_num(r.mean_avg_edc),
            fmt_num(r.se_avg_edc),
        ])
        .map_err(io)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct CsvRow {
    rep: u32,
    slot: u32,
    method: String,
    y: f64,
    oracle_value: f64,
    regret: f64,
    cum_regret: f64,
    avg_regret: f64,
    edc_total: f64,
}

/// Read a per-run CSV back. Decisions and per-device costs are not part of
/// the file and come back empty.
pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<SlotRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<CsvRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::Io(e.to_string()))?;
            Ok(SlotRecord {
                rep: row.rep,
                slot: row.slot,
                method: row.method,
                decision: Default::default(),
                y: row.y,
                oracle_value: row.oracle_value,
                regret: row.regret,
                cum_regret: row.cum_regret,
                avg_regret: row.avg_regret,
                edc_total: row.edc_total,
                edc_per_wd: Vec::new(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_has_zero_error() {
        assert_eq!(mean_stderr(&[2.5]), (2.5, 0.0));
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_values_give_zero_difference() {
        assert_eq!(relative_difference(0.3, 0.3), 0.0);
        assert!((relative_difference(0.75, 1.0) - 0.25).abs() < 1e-15);
    }
}
