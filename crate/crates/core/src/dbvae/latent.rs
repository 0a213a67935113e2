use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Histogram of one latent dimension over the training set. A dimension
/// whose values are all equal gets a single bin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl LatentHistogram {
    pub fn build(values: &[f64], bins: usize) -> Self {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return Self { edges: vec![lo, hi], counts: vec![values.len()] };
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| if i == bins { hi } else { lo + width * i as f64 }).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            counts[Self::bin_of(v, lo, hi, bins)] += 1;
        }
        Self { edges, counts }
    }

    fn bin_of(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
        (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Fraction of the samples that fall in the bin containing `v`.
    pub fn density(&self, v: f64) -> f64 {
        let total: usize = self.counts.iter().sum();
        let bins = self.bins();
        let bin = if bins == 1 { 0 } else { Self::bin_of(v, self.edges[0], self.edges[bins], bins) };
        self.counts[bin] as f64 / total as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentStats {
    pub histograms: Vec<LatentHistogram>,
    /// `sum_j ln density_j(mu_j(x))` per sample; lower means sparser.
    pub log_density: Vec<f64>,
    /// Resampling probability per sample; sums to one.
    pub probabilities: Vec<f64>,
}

/// Normalised weights `w(x) ∝ prod_j 1 / (density_j(x) + alpha)`, computed
/// in log space so a hundred small factors do not overflow.
pub fn resampling_weights(densities: &[Vec<f64>], alpha: f64) -> Vec<f64> {
    let logw: Vec<f64> = densities.iter().map(|d| -d.iter().map(|&p| (p + alpha).ln()).sum::<f64>()).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Per-dimension histograms of the encoder means (`mu[i]` is sample `i`)
/// and the resulting resampling distribution.
pub fn update_latent_histograms(mu: &[Vec<f64>], bins: usize, alpha: f64) -> Result<LatentStats> {
    let Some(first) = mu.first() else {
        return Err(Error::Domain("latent statistics need at least one sample".into()));
    };
    let k = first.len();
    if k == 0 || mu.iter().any(|m| m.len() != k) {
        return Err(Error::dim("latent vectors must share one non-zero length"));
    }
    if bins < 2 || alpha.is_nan() || alpha < 0.0 {
        return Err(Error::config("histogram bins must be at least 2 and alpha non-negative"));
    }
    let histograms: Vec<LatentHistogram> = (0..k)
        .map(|j| LatentHistogram::build(&mu.iter().map(|m| m[j]).collect::<Vec<_>>(), bins))
        .collect();
    let densities: Vec<Vec<f64>> =
        mu.iter().map(|m| histograms.iter().zip(m).map(|(h, &v)| h.density(v)).collect()).collect();
    let log_density = densities.iter().map(|d| d.iter().map(|p| p.ln()).sum()).collect();
    let probabilities = resampling_weights(&densities, alpha);
    Ok(LatentStats { histograms, log_density, probabilities })
}
