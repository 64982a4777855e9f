use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::stats::{median_quartiles, wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};
use super::MetricsRecord;
use crate::{Error, Result};

/// `"median (q1, q3)"` with a fixed number of decimals.
pub fn format_median_quartiles((q1, median, q3): (f64, f64, f64), decimals: usize) -> String {
    format!("{median:.decimals$} ({q1:.decimals$}, {q3:.decimals$})")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: String,
    pub metric: String,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Values summarised.
    pub n: usize,
    /// Records left out because the ground truth was empty.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub rows: Vec<SummaryRow>,
    /// `None` when every paired DSC difference is zero.
    pub wilcoxon: Option<WilcoxonResult>,
    pub interobserver_median: Option<f64>,
}

const METRICS: [(&str, usize); 3] = [("DSC", 2), ("Abs. area error %", 1), ("Area bias %", 1)];

fn metric_values(records: &[MetricsRecord], metric: usize) -> (Vec<f64>, usize) {
    let raw: Vec<Option<f64>> = records
        .iter()
        .map(|r| match metric {
            0 => Some(r.dsc),
            1 => r.abs_area_error_pct,
            _ => r.area_bias_pct,
        })
        .collect();
    let excluded = raw.iter().filter(|v| v.is_none()).count();
    (raw.into_iter().flatten().collect(), excluded)
}

fn by_id(records: &[MetricsRecord]) -> Result<BTreeMap<&str, &MetricsRecord>> {
    let map: BTreeMap<&str, &MetricsRecord> = records.iter().map(|r| (r.id.as_str(), r)).collect();
    if map.len() != records.len() {
        return Err(Error::config("duplicate ids in metrics records"));
    }
    Ok(map)
}

/// Side-by-side summary of the two variants plus the inter-observer median
/// DSC, with a paired two-tailed Wilcoxon test on DSC (coordconv minus
/// baseline) flagged at the 0.05 level.
pub fn summarize_report(
    baseline: &[MetricsRecord],
    coordconv: &[MetricsRecord],
    interobserver: &[f64],
) -> Result<Report> {
    if baseline.is_empty() || coordconv.is_empty() {
        return Err(Error::Empty(
            "report needs records for both variants".into(),
        ));
    }
    let base = by_id(baseline)?;
    let coord = by_id(coordconv)?;
    if !base.keys().eq(coord.keys()) {
        return Err(Error::config(
            "baseline and coordconv records cover different ids",
        ));
    }
    let a: Vec<f64> = coord.values().map(|r| r.dsc).collect();
    let b: Vec<f64> = base.values().map(|r| r.dsc).collect();
    let wilcoxon = match wilcoxon_signed_rank(&a, &b) {
        Ok(w) => Some(w),
        Err(Error::NoNonzeroPairs) => None,
        Err(e) => return Err(e),
    };
    let interobserver_median = if interobserver.is_empty() {
        None
    } else {
        Some(median_quartiles(interobserver)?.1)
    };

    let mut rows = Vec::new();
    let mut cells: Vec<[String; 3]> = Vec::new();
    for (m, &(name, decimals)) in METRICS.iter().enumerate() {
        let mut line: [String; 3] = Default::default();
        for (col, (label, recs)) in [("baseline", baseline), ("coordconv", coordconv)]
            .into_iter()
            .enumerate()
        {
            let (values, excluded) = metric_values(recs, m);
            line[col] = if values.is_empty() {
                "n/a".to_string()
            } else {
                let q = median_quartiles(&values)?;
                rows.push(SummaryRow {
                    variant: label.to_string(),
                    metric: name.to_string(),
                    median: q.1,
                    q1: q.0,
                    q3: q.2,
                    n: values.len(),
                    excluded,
                });
                format_median_quartiles(q, decimals)
            };
        }
        line[2] = match (m, interobserver_median) {
            (0, Some(v)) => format!("{v:.2}"),
            (0, None) => "n/a".to_string(),
            _ => "-".to_string(),
        };
        cells.push(line);
    }

    let mut text = String::new();
    let w0 = 20;
    let w = 24;
    writeln!(
        text,
        "{:w0$}{:w$}{:w$}{}",
        "", "Baseline", "Coord. conv.", "Inter-observer var."
    )
    .unwrap();
    for ((name, _), line) in METRICS.iter().zip(&cells) {
        writeln!(text, "{name:w0$}{:w$}{:w$}{}", line[0], line[1], line[2]).unwrap();
    }
    writeln!(
        text,
        "{:w0$}{:<w$}{:<w$}{}",
        "Images",
        baseline.len(),
        coordconv.len(),
        interobserver.len()
    )
    .unwrap();
    let empty_gt =
        |recs: &[MetricsRecord]| recs.iter().filter(|r| r.area_bias_pct.is_none()).count();
    writeln!(
        text,
        "{:w0$}{:<w$}{:<w$}-",
        "Empty ground truth",
        empty_gt(baseline),
        empty_gt(coordconv)
    )
    .unwrap();
    match &wilcoxon {
        Some(r) => {
            let method = match r.method {
                WilcoxonMethod::Exact => "exact",
                WilcoxonMethod::NormalApproximation => "normal approximation",
            };
            let verdict = if r.p < 0.05 { "significant" } else { "not significant" };
            writeln!(
                text,
                "Wilcoxon signed-rank on DSC (coord. conv. vs baseline, two-tailed): p = {} ({method}, n = {}, W = {}), {verdict} at 0.05",
                format_p(r.p),
                r.n_effective,
                r.w
            )
            .unwrap();
        }
        None => writeln!(
            text,
            "Wilcoxon signed-rank on DSC (coord. conv. vs baseline, two-tailed): p = n/a (no nonzero pairs)"
        )
        .unwrap(),
    }
    Ok(Report {
        text,
        rows,
        wilcoxon,
        interobserver_median,
    })
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

/// `bin_left,bin_right,count` lines for [`histogram_counts`](super::histogram_counts) output.
pub fn histogram_csv(counts: &[usize], (lo, hi): (f64, f64)) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    let width = (hi - lo) / counts.len().max(1) as f64;
    for (i, c) in counts.iter().enumerate() {
        let left = lo + i as f64 * width;
        let right = if i + 1 == counts.len() {
            hi
        } else {
            lo + (i + 1) as f64 * width
        };
        writeln!(out, "{left:.4},{right:.4},{c}").unwrap();
    }
    out
}
