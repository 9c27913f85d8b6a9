use serde::{Deserialize, Serialize};

use crate::dsp::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Combiner {
    Mean,
    Median,
    Std,
    Skewness,
    Kurtosis,
}

impl Combiner {
    pub const ALL: [Combiner; 5] = [Combiner::Mean, Combiner::Median, Combiner::Std, Combiner::Skewness, Combiner::Kurtosis];

    pub fn name(self) -> &'static str {
        match self {
            Combiner::Mean => "Mean",
            Combiner::Median => "Median",
            Combiner::Std => "Std",
            Combiner::Skewness => "Skewness",
            Combiner::Kurtosis => "Kurtosis",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Combiner::ALL.iter().copied().find(|c| c.name().eq_ignore_ascii_case(s))
    }

    /// Statistic of one feature's values across windows. Std uses the
    /// sample (n-1) form; skewness and kurtosis are the bias-corrected
    /// G1/G2 estimators and are NaN below 3 and 4 windows respectively.
    pub fn reduce(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        match self {
            Combiner::Mean => stats::mean(values),
            Combiner::Median => stats::median(values),
            Combiner::Std => {
                if values.len() < 2 {
                    f64::NAN
                } else {
                    stats::std_dev(values, 1)
                }
            }
            Combiner::Skewness => stats::skewness(values),
            Combiner::Kurtosis => stats::kurtosis(values),
        }
    }
}

/// Elementwise statistic across per-window feature vectors.
pub fn apply_combiner(windows: &[Vec<f64>], combiner: Combiner) -> Vec<f64> {
    let d = windows.first().map_or(0, Vec::len);
    let mut column = Vec::with_capacity(windows.len());
    (0..d)
        .map(|k| {
            column.clear();
            column.extend(windows.iter().map(|w| w[k]));
            combiner.reduce(&column)
        })
        .collect()
}
