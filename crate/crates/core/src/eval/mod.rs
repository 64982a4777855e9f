//! Measurement: overlap and area metrics, quartile summaries, the k-fold
//! protocol, the Wilcoxon signed-rank test and report rendering.

mod cv;
mod report;
mod stats;

use serde::{Deserialize, Serialize};

pub use cv::{cross_validate, kfold_split, predict, CvOutcome, FoldSplit};
pub use report::{format_median_quartiles, histogram_csv, summarize_report, Report, SummaryRow};
pub use stats::{
    histogram_counts, median_quartiles, wilcoxon_exact, wilcoxon_normal, wilcoxon_signed_rank,
    WilcoxonMethod, WilcoxonResult, EXACT_MAX_N,
};

use crate::net::CoordMode;
use crate::{Error, Mask, Result};

/// Which network produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Baseline,
    Coordconv,
}

impl Variant {
    pub fn of(mode: CoordMode) -> Self {
        match mode {
            CoordMode::None => Variant::Baseline,
            CoordMode::Cartesian | CoordMode::Radial => Variant::Coordconv,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Coordconv => "coordconv",
        }
    }
}

/// Per-image evaluation result; area metrics are `None` when the ground
/// truth is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub id: String,
    pub variant: Variant,
    pub fold: usize,
    pub dsc: f64,
    pub abs_area_error_pct: Option<f64>,
    pub area_bias_pct: Option<f64>,
}

impl MetricsRecord {
    pub fn new(id: &str, variant: Variant, fold: usize, pred: &Mask, gt: &Mask) -> Result<Self> {
        Ok(Self {
            id: id.to_string(),
            variant,
            fold,
            dsc: dsc(pred, gt)?,
            abs_area_error_pct: area_error_pct(pred, gt).ok(),
            area_bias_pct: area_bias_pct(pred, gt).ok(),
        })
    }
}

fn check_dims(pred: &Mask, gt: &Mask) -> Result<()> {
    if pred.dims() != gt.dims() {
        return Err(Error::shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    Ok(())
}

/// Dice similarity coefficient `2|X ∩ Y| / (|X| + |Y|)`; two empty masks score 1.
pub fn dsc(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_dims(pred, gt)?;
    let total = pred.area() + gt.area();
    if total == 0 {
        return Ok(1.0);
    }
    let inter = pred
        .data()
        .iter()
        .zip(gt.data())
        .filter(|(&a, &b)| a & b != 0)
        .count();
    Ok(2.0 * inter as f64 / total as f64)
}

/// `(|X| - |Y|) / |Y| * 100`, positive when the prediction is too large.
pub fn area_bias_pct(pred: &Mask, gt: &Mask) -> Result<f64> {
    check_dims(pred, gt)?;
    let y = gt.area();
    if y == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    Ok((pred.area() as f64 - y as f64) / y as f64 * 100.0)
}

/// `||X| - |Y|| / |Y| * 100`.
pub fn area_error_pct(pred: &Mask, gt: &Mask) -> Result<f64> {
    area_bias_pct(pred, gt).map(f64::abs)
}
