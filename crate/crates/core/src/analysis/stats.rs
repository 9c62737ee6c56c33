//! Interval estimates, goodness-of-fit, and plug-in mutual information.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, SqkdError};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

pub const MIN_CHI_SQUARE_SAMPLES: u64 = 20;

/// Point estimate with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }
}

pub fn wilson_interval(successes: u64, trials: u64) -> Interval {
    if trials == 0 {
        return Interval {
            estimate: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        estimate: p,
        lower: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        upper: if successes == trials { 1.0 } else { (center + half).min(1.0) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub degrees_of_freedom: u32,
    pub p_value: f64,
}

/// Pearson chi-square of `histogram` against the uniform distribution over
/// its bins (`k − 1` degrees of freedom).
pub fn chi_square_uniform(histogram: &[u64]) -> Result<ChiSquare> {
    let total: u64 = histogram.iter().sum();
    if total < MIN_CHI_SQUARE_SAMPLES {
        return Err(SqkdError::TooFewSamples {
            actual: total,
            required: MIN_CHI_SQUARE_SAMPLES,
        });
    }
    if histogram.len() < 2 {
        return Err(SqkdError::InvalidConfig("chi-square needs at least two bins".into()));
    }
    let expected = total as f64 / histogram.len() as f64;
    let statistic = histogram
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum::<f64>();
    let df = histogram.len() as u32 - 1;
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    Ok(ChiSquare {
        statistic,
        degrees_of_freedom: df,
        p_value: dist.sf(statistic),
    })
}

/// Mutual information in bits of a joint weight table (rows × columns). The
/// table is normalized internally; empty tables give 0.
pub fn mutual_information_weights(table: &[Vec<f64>]) -> f64 {
    let total: f64 = table.iter().flatten().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let row_sums: Vec<f64> = table.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let col_sums: Vec<f64> = (0..cols)
        .map(|c| table.iter().map(|r| r.get(c).copied().unwrap_or(0.0)).sum::<f64>() / total)
        .collect();
    let mut mi = 0.0;
    for (r, row) in table.iter().enumerate() {
        for (c, &w) in row.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            let p = w / total;
            mi += p * (p / (row_sums[r] * col_sums[c])).log2();
        }
    }
    mi.max(0.0)
}

/// Plug-in mutual information of a contingency table of counts.
pub fn mutual_information(table: &[&[u64]]) -> f64 {
    let weights: Vec<Vec<f64>> = table
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    mutual_information_weights(&weights)
}
