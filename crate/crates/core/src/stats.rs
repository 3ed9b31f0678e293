//! Goodness-of-fit helpers shared by the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square statistic against a known law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Upper tail `P[χ²_df >= chi2]`.
pub fn chi2_upper_tail(chi2: f64, df: usize) -> f64 {
    if df == 0 {
        return if chi2 > 0.0 { 0.0 } else { 1.0 };
    }
    if chi2.is_infinite() {
        return 0.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df > 0");
    dist.sf(chi2)
}

/// Tests `counts` against cell probabilities `probs`.
///
/// Cells with zero probability contribute no degree of freedom; any count in
/// such a cell makes the statistic infinite and `p = 0`.
pub fn chi_square(counts: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(counts.len(), probs.len());
    let total: u64 = counts.iter().sum();
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    for (&c, &p) in counts.iter().zip(probs) {
        if p <= 0.0 {
            if c > 0 {
                chi2 = f64::INFINITY;
            }
            continue;
        }
        cells += 1;
        let e = p * total as f64;
        chi2 += (c as f64 - e).powi(2) / e;
    }
    let df = cells.saturating_sub(1);
    ChiSquare { chi2, df, p: chi2_upper_tail(chi2, df) }
}

/// Smallest expected count among the cells of positive probability.
pub fn min_expected(total: u64, probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * total as f64)
        .fold(f64::INFINITY, f64::min)
}

/// Sum of independent chi-square statistics.
pub fn pool(parts: &[ChiSquare]) -> ChiSquare {
    let chi2: f64 = parts.iter().map(|c| c.chi2).sum();
    let df: usize = parts.iter().map(|c| c.df).sum();
    ChiSquare { chi2, df, p: chi2_upper_tail(chi2, df) }
}

/// Binomial proportion and its standard error.
pub fn proportion(successes: u64, trials: u64) -> (f64, f64) {
    let p = successes as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Total-variation distance between two empirical or exact laws on the same cells.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn normalize(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
}
