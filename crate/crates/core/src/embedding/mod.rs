//! Joint vision-language embeddings: unit vectors, cosine similarity and the
//! spherical mean, plus the provider interface and cache that produce them.

mod cache;
mod provider;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::stable_sum;
use crate::provider::ProviderError;

pub use cache::{CacheKey, EmbedContent, Embedder, EmbeddingCache};
pub use provider::{EmbeddingProvider, HashEmbeddingProvider, HttpEmbeddingProvider, ImageRef};

/// Maximum deviation of a stored vector's norm from 1.
pub const UNIT_TOLERANCE: f64 = 1e-6;
/// Arithmetic means shorter than this cannot be projected back to the sphere.
pub const DEGENERATE_MEAN_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mean of the vectors has norm below {DEGENERATE_MEAN_THRESHOLD} and has no direction")]
    DegenerateMean,
    #[error("cannot normalize a zero or non-finite vector")]
    ZeroVector,
    #[error("vector norm {norm} is not within {UNIT_TOLERANCE} of 1")]
    NotUnit { norm: f64 },
    #[error("no vectors given")]
    EmptyInput,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("embedding cache: {0}")]
    Cache(String),
}

/// An L2-normalized embedding.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Scales `components` to unit length.
    pub fn normalize(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.is_empty() || components.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::ZeroVector);
        }
        let norm = l2_norm(&components);
        if norm == 0.0 || !norm.is_finite() {
            return Err(EmbeddingError::ZeroVector);
        }
        Ok(Self(components.into_iter().map(|c| c / norm).collect()))
    }

    /// Accepts `components` as-is if they are already unit length.
    pub fn from_unit(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        let norm = l2_norm(&components);
        if components.is_empty() || norm.is_nan() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(EmbeddingError::NotUnit { norm });
        }
        Ok(Self(components))
    }

    pub fn from_f32(components: &[f32]) -> Result<Self, EmbeddingError> {
        Self::normalize(components.iter().map(|&c| c as f64).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&c| c as f32).collect()
    }

    /// Round-trips through 32-bit storage precision.
    pub fn quantized(&self) -> Self {
        Self(self.0.iter().map(|&c| c as f32 as f64).collect())
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Unit basis vector `e_index` in `dim` dimensions.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[index] = 1.0;
        Self(v)
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        UnitVector::normalize(raw).map_err(serde::de::Error::custom)
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<(), EmbeddingError> {
    if expected == found {
        Ok(())
    } else {
        Err(EmbeddingError::DimensionMismatch { expected, found })
    }
}

/// Inner product of two unit vectors.
pub fn cosine(u: &UnitVector, v: &UnitVector) -> Result<f64, EmbeddingError> {
    check_dim(u.dim(), v.dim())?;
    Ok(u.0.iter().zip(&v.0).map(|(a, b)| a * b).sum())
}

/// Mean direction of a set of unit vectors: the arithmetic mean projected
/// back onto the unit sphere.
pub fn spherical_mean(vectors: &[UnitVector]) -> Result<UnitVector, EmbeddingError> {
    let first = vectors.first().ok_or(EmbeddingError::EmptyInput)?;
    let dim = first.dim();
    for v in vectors {
        check_dim(dim, v.dim())?;
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|i| stable_sum(vectors.iter().map(|v| v.0[i])) / n).collect();
    if l2_norm(&mean) < DEGENERATE_MEAN_THRESHOLD {
        return Err(EmbeddingError::DegenerateMean);
    }
    UnitVector::normalize(mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uv(c: &[f64]) -> UnitVector {
        UnitVector::normalize(c.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine(&uv(&[1.0, 0.0]), &uv(&[0.0, 1.0])).unwrap(), 0.0);
        let u = uv(&[0.6, 0.8]);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        // 0.6*0.8 + 0.8*0.6 by hand
        assert!((cosine(&uv(&[0.6, 0.8]), &uv(&[0.8, 0.6])).unwrap() - 0.96).abs() < 1e-12);
    }

    #[test]
    fn cosine_dimension_mismatch() {
        assert_eq!(
            cosine(&uv(&[1.0, 0.0]), &uv(&[1.0, 0.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch { expected: 2, found: 3 })
        );
    }

    #[test]
    fn spherical_mean_examples() {
        assert_eq!(spherical_mean(&[uv(&[1.0, 0.0])]).unwrap(), uv(&[1.0, 0.0]));
        let m = spherical_mean(&[uv(&[1.0, 0.0]), uv(&[0.0, 1.0])]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((m.as_slice()[0] - h).abs() < 1e-15 && (m.as_slice()[1] - h).abs() < 1e-15);
        let v = uv(&[0.3, -0.2, 0.9]);
        assert_eq!(spherical_mean(&[v.clone(), v.negated()]), Err(EmbeddingError::DegenerateMean));
        assert_eq!(spherical_mean(&[]), Err(EmbeddingError::EmptyInput));
    }

    #[test]
    fn normalization_rules() {
        let v = UnitVector::normalize(vec![2.0, 0.0]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0]);
        assert_eq!(UnitVector::normalize(vec![0.0, 0.0]), Err(EmbeddingError::ZeroVector));
        assert!(UnitVector::from_unit(vec![2.0, 0.0]).is_err());
        let parsed: UnitVector = serde_json::from_str("[0.0, 3.0, 4.0]").unwrap();
        assert!((parsed.norm() - 1.0).abs() < 1e-15);
        assert!(serde_json::from_str::<UnitVector>("[0.0, 0.0]").is_err());
    }

    #[test]
    fn quantized_stays_unit() {
        let v = uv(&[0.123, 0.456, -0.789, 0.1]);
        assert!((v.quantized().norm() - 1.0).abs() < UNIT_TOLERANCE);
    }
}
