//! Five Haralick-style statistics over a normalized GLCM.

use serde::Serialize;
use thiserror::Error;

use crate::glcm::NormalizedGlcm;

/// Accepted deviation of the total probability mass from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("probabilities sum to {0}, not 1")]
    Unnormalized(f64),
    #[error("negative or non-finite probability at cell {0}")]
    BadProbability(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeatureVector {
    pub energy: f64,
    pub contrast: f64,
    pub homogeneity: f64,
    pub entropy: f64,
    pub correlation: f64,
}

/// Energy, contrast, homogeneity, entropy (bits) and correlation.
///
/// Rows are indexed by `i`, columns by `j`. Correlation is 0 when either
/// marginal has zero variance.
pub fn extract_features(p: &NormalizedGlcm) -> Result<FeatureVector, FeatureError> {
    let l = p.levels();
    let values = p.values();
    if let Some(bad) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(FeatureError::BadProbability(bad));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(FeatureError::Unnormalized(sum));
    }

    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut homogeneity = 0.0;
    let mut entropy = 0.0;
    let (mut mu_i, mut mu_j, mut ij) = (0.0, 0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let v = values[i * l + j];
            if v == 0.0 {
                continue;
            }
            let (fi, fj) = (i as f64, j as f64);
            let diff2 = (fi - fj).powi(2);
            energy += v * v;
            contrast += diff2 * v;
            homogeneity += v / (1.0 + diff2);
            entropy -= v * v.log2();
            mu_i += fi * v;
            mu_j += fj * v;
            ij += fi * fj * v;
        }
    }
    let (mut var_i, mut var_j) = (0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let v = values[i * l + j];
            var_i += (i as f64 - mu_i).powi(2) * v;
            var_j += (j as f64 - mu_j).powi(2) * v;
        }
    }
    let sigma = (var_i * var_j).sqrt();
    let correlation = if sigma > 0.0 {
        (ij - mu_i * mu_j) / sigma
    } else {
        0.0
    };

    Ok(FeatureVector {
        energy,
        contrast,
        homogeneity,
        entropy: entropy.max(0.0),
        correlation,
    })
}
