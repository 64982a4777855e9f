use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{Error, Result};

/// Largest number of nonzero pairs tested with the exact null distribution.
pub const EXACT_MAX_N: usize = 25;

/// `(q1, median, q3)` by linear interpolation at positions `(n - 1) * q`
/// of the sorted values.
pub fn median_quartiles(values: &[f64]) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::Empty("quartiles of an empty list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("NaN among quartile inputs".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |q: f64| {
        let pos = (v.len() - 1) as f64 * q;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Ok((at(0.25), at(0.5), at(0.75)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Pairs left after dropping zero differences.
    pub n_effective: usize,
    /// Sum of the ranks of positive differences.
    pub w: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub method: WilcoxonMethod,
}

/// Nonzero differences ranked by magnitude with average ranks for ties,
/// returned as doubled (integer) ranks with their signs, plus tie group sizes.
fn signed_ranks(a: &[f64], b: &[f64]) -> Result<(Vec<(u64, bool)>, Vec<usize>)> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "paired samples of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Empty("Wilcoxon test on no pairs".into()));
    }
    let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("non-finite paired difference".into()));
    }
    d.retain(|&v| v != 0.0);
    if d.is_empty() {
        return Err(Error::NoNonzeroPairs);
    }
    d.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut ranks = Vec::with_capacity(d.len());
    let mut ties = Vec::new();
    let mut i = 0;
    while i < d.len() {
        let mut j = i;
        while j + 1 < d.len() && d[j + 1].abs() == d[i].abs() {
            j += 1;
        }
        // ranks i+1..=j+1 share their mean; doubled that is i + j + 2
        for v in &d[i..=j] {
            ranks.push(((i + j + 2) as u64, *v > 0.0));
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    Ok((ranks, ties))
}

fn positive_rank_sum(ranks: &[(u64, bool)]) -> f64 {
    ranks.iter().filter(|r| r.1).map(|r| r.0).sum::<u64>() as f64 / 2.0
}

/// Exact two-tailed p-value from the permutation distribution of `W` over
/// all `2^n` sign assignments (computed by counting subset sums), tied
/// ranks included. The smaller tail is doubled and capped at 1.
pub fn wilcoxon_exact(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let (ranks, _) = signed_ranks(a, b)?;
    let n = ranks.len();
    if n > 60 {
        return Err(Error::config(format!(
            "exact Wilcoxon with {n} pairs would overflow"
        )));
    }
    let total: u64 = ranks.iter().map(|r| r.0).sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &(r, _) in &ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            counts[s + r] += counts[s];
        }
        reach += r;
    }
    let w2: u64 = ranks.iter().filter(|r| r.1).map(|r| r.0).sum();
    let all = 2f64.powi(n as i32);
    let lower: f64 = counts[..=w2 as usize]
        .iter()
        .map(|&c| c as f64)
        .sum::<f64>()
        / all;
    let upper: f64 = counts[w2 as usize..].iter().map(|&c| c as f64).sum::<f64>() / all;
    Ok(WilcoxonResult {
        n_effective: n,
        w: w2 as f64 / 2.0,
        p: (2.0 * lower.min(upper)).min(1.0),
        method: WilcoxonMethod::Exact,
    })
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity correction.
pub fn wilcoxon_normal(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let (ranks, ties) = signed_ranks(a, b)?;
    let n = ranks.len() as f64;
    let w = positive_rank_sum(&ranks);
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term;
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
    };
    Ok(WilcoxonResult {
        n_effective: ranks.len(),
        w,
        p,
        method: WilcoxonMethod::NormalApproximation,
    })
}

/// Two-tailed paired signed-rank test on `a - b`: exact for at most
/// [`EXACT_MAX_N`] nonzero differences, normal approximation above.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    let (ranks, _) = signed_ranks(a, b)?;
    if ranks.len() <= EXACT_MAX_N {
        wilcoxon_exact(a, b)
    } else {
        wilcoxon_normal(a, b)
    }
}

/// Counts per equal-width bin over `[lo, hi]`; the last bin includes `hi`.
/// Values outside the range (and NaN) are not counted.
pub fn histogram_counts(values: &[f64], bins: usize, (lo, hi): (f64, f64)) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::config("histogram needs at least one bin"));
    }
    if !(lo < hi) {
        return Err(Error::config(format!(
            "histogram range [{lo}, {hi}] is empty"
        )));
    }
    let mut counts = vec![0; bins];
    for &v in values {
        if v >= lo && v <= hi {
            let idx = (((v - lo) / (hi - lo)) * bins as f64) as usize;
            counts[idx.min(bins - 1)] += 1;
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_by_hand() {
        assert_eq!(
            median_quartiles(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap(),
            (2.0, 3.0, 4.0)
        );
        assert_eq!(
            median_quartiles(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            (1.75, 2.5, 3.25)
        );
        assert_eq!(median_quartiles(&[0.3]).unwrap(), (0.3, 0.3, 0.3));
        assert!(median_quartiles(&[]).is_err());
    }

    #[test]
    fn all_positive_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let zero = [0.0; 6];
        let r = wilcoxon_signed_rank(&a, &zero).unwrap();
        assert_eq!(
            (r.w, r.n_effective, r.method),
            (21.0, 6, WilcoxonMethod::Exact)
        );
        assert!((r.p - 2.0 / 64.0).abs() < 1e-15);
        let r = wilcoxon_signed_rank(&zero[..5], &a[..5]).unwrap();
        assert_eq!(r.w, 0.0);
        assert!((r.p - 2.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn zero_differences_are_dropped_or_fatal() {
        let a = [0.5, 0.7, 0.9];
        assert!(matches!(
            wilcoxon_signed_rank(&a, &a),
            Err(Error::NoNonzeroPairs)
        ));
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.n_effective, 2);
    }

    #[test]
    fn ties_get_average_ranks() {
        // |d| = 1, 1, 2 -> ranks 1.5, 1.5, 3; positives are the first and last
        let r = wilcoxon_exact(&[1.0, 0.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.w, 4.5);
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(
            histogram_counts(&[0.05, 0.15], 10, (0.0, 1.0)).unwrap(),
            vec![1, 1, 0, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            histogram_counts(&[1.0], 4, (0.0, 1.0)).unwrap(),
            vec![0, 0, 0, 1]
        );
        assert_eq!(histogram_counts(&[], 3, (0.0, 1.0)).unwrap(), vec![0, 0, 0]);
        assert_eq!(
            histogram_counts(&[-0.1, 1.2, f64::NAN], 2, (0.0, 1.0)).unwrap(),
            vec![0, 0]
        );
        assert!(histogram_counts(&[0.5], 0, (0.0, 1.0)).is_err());
    }
}
