//! Metric helpers shared by the tuner and the experiment harness.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Percentage change of a treatment metric over its baseline.
pub fn lift(metric_treatment: f64, metric_baseline: f64) -> Result<f64> {
    if metric_baseline == 0.0 {
        return Err(Error::UndefinedLift);
    }
    Ok(100.0 * (metric_treatment - metric_baseline) / metric_baseline)
}

/// Sum of squared shares of each distinct label.
pub fn herfindahl<'a>(labels: impl IntoIterator<Item = &'a str>) -> f64 {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for label in labels {
        *counts.entry(label).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts.values().map(|&c| (c as f64 / n).powi(2)).sum()
}

pub fn distinct_count<'a>(labels: impl IntoIterator<Item = &'a str>) -> usize {
    let mut seen: Vec<&str> = labels.into_iter().collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Running mean and variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = MeanVar::default();
        for v in values {
            acc.push(v);
        }
        acc
    }

    /// Unbiased sample variance; zero with fewer than two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Significance marker convention for lift tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Significance {
    None,
    /// p < 0.01
    OnePercent,
    /// p < 0.001
    PointOnePercent,
}

impl Significance {
    pub fn from_p_value(p: f64) -> Self {
        if p < 0.001 {
            Significance::PointOnePercent
        } else if p < 0.01 {
            Significance::OnePercent
        } else {
            Significance::None
        }
    }

    pub fn marker(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::OnePercent => "*",
            Significance::PointOnePercent => "**",
        }
    }
}

/// Two-sided p-value of a two-sample z-test on means.
pub fn two_sample_z_p_value(treatment: &MeanVar, control: &MeanVar) -> f64 {
    if treatment.n == 0 || control.n == 0 {
        return 1.0;
    }
    let se = (treatment.variance() / treatment.n as f64 + control.variance() / control.n as f64)
        .sqrt();
    let diff = treatment.mean - control.mean;
    if se == 0.0 {
        return if diff == 0.0 { 1.0 } else { 0.0 };
    }
    let z = (diff / se).abs();
    let normal = Normal::standard();
    2.0 * (1.0 - normal.cdf(z))
}
