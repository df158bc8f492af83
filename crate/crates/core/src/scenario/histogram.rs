use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability-weighted histogram with its running CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` ascending edges.
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    /// Cumulative probability at each edge; starts at 0, ends at 1.
    pub cdf: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn bin_width(&self, k: usize) -> f64 {
        self.bin_edges[k + 1] - self.bin_edges[k]
    }

    /// Mean of the piecewise-uniform density.
    pub fn mean(&self) -> f64 {
        (0..self.bins())
            .map(|k| {
                let mid = 0.5 * (self.bin_edges[k] + self.bin_edges[k + 1]);
                mid * self.densities[k] * self.bin_width(k)
            })
            .sum()
    }
}

/// Builds a histogram of `(value, weight)` samples over `[min, max]`.
///
/// Weights are normalized to unit mass. When every sample has the same
/// value the range is widened to `value ± 0.5` so the density stays finite.
pub fn empirical_distribution(samples: &[(f64, f64)], bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples for histogram".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if samples
        .iter()
        .any(|&(v, w)| !v.is_finite() || !w.is_finite() || w < 0.0)
    {
        return Err(Error::InvalidInput(
            "histogram samples must be finite with non-negative weight".into(),
        ));
    }
    let total: f64 = samples.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("histogram weights sum to zero".into()));
    }

    let (mut lo, mut hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(v, _)| (lo.min(v), hi.max(v)));
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();

    let mut mass = vec![0.0; bins];
    for &(v, w) in samples {
        let k = (((v - lo) / width).floor() as usize).min(bins - 1);
        mass[k] += w / total;
    }
    let densities = mass
        .iter()
        .enumerate()
        .map(|(k, m)| m / (bin_edges[k + 1] - bin_edges[k]))
        .collect();
    let mut cdf = Vec::with_capacity(bins + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for m in &mass {
        acc += m;
        cdf.push(acc);
    }
    // pin the endpoint against rounding drift
    cdf[bins] = 1.0;
    Ok(Histogram {
        bin_edges,
        densities,
        cdf,
    })
}
