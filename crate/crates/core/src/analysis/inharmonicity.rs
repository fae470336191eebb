use serde::{Deserialize, Serialize};

use super::PeakEstimate;
use crate::error::{Error, Result};

/// Estimates this close below zero are rounding noise and read as zero.
const NEGATIVE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InharmonicityEstimate {
    pub mean: f64,
    pub samples: Vec<f64>,
    /// Partial indices `(m, j)` behind each sample.
    pub pairs: Vec<(usize, usize)>,
}

/// B from the ratio of two partial frequencies.
pub fn pair_estimate(m: usize, fm: f64, j: usize, fj: f64) -> f64 {
    let (m, j) = (m as f64, j as f64);
    let r = fm / fj;
    (r * j - m) / (m.powi(3) - r * j.powi(3))
}

/// One estimate per ordered pair of distinct peaks; negative and non-finite
/// estimates are dropped.
pub fn estimate_b(peaks: &[PeakEstimate]) -> Result<InharmonicityEstimate> {
    if peaks.len() < 2 {
        return Err(Error::EstimationFailed(format!(
            "need at least 2 peaks, got {}",
            peaks.len()
        )));
    }
    let mut samples = Vec::with_capacity(peaks.len() * (peaks.len() - 1));
    let mut pairs = Vec::with_capacity(samples.capacity());
    for a in peaks {
        for b in peaks {
            if a.partial == b.partial {
                continue;
            }
            let est = pair_estimate(a.partial, a.frequency, b.partial, b.frequency);
            if est.is_finite() && est >= -NEGATIVE_TOLERANCE {
                samples.push(est.max(0.0));
                pairs.push((a.partial, b.partial));
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::EstimationFailed(
            "every pair estimate was negative or non-finite".into(),
        ));
    }
    Ok(InharmonicityEstimate {
        mean: samples.iter().sum::<f64>() / samples.len() as f64,
        samples,
        pairs,
    })
}

/// Pooled mean over every retained sample of every group.
pub fn aggregate_b(groups: &[Vec<f64>]) -> Result<f64> {
    let (sum, n) = groups
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        return Err(Error::EstimationFailed(
            "no inharmonicity samples to aggregate".into(),
        ));
    }
    Ok(sum / n as f64)
}
