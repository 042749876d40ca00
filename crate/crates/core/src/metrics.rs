//! Angle and inner-product measurements between sample and population
//! eigenstructure.

use crate::sampler::Basis;
use serde::Serialize;
use ndarray::ArrayView1;
use std::ops::Range;
use thiserror::Error;

/// Allowed deviation of an input vector's norm from 1.
const UNIT_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("vector norm {0} is not within 1e-8 of 1")]
    NotUnit(f64),
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("division by a nonpositive population eigenvalue")]
    ZeroDivision,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Cosine of the angle between a unit vector and a population eigenvector
/// span, together with its square.
///
/// The cosine is the Euclidean norm of the projection,
/// sqrt(sum_k <v, u_k>^2); the squared form is reported alongside because
/// asymptotic statements are equivalent under either reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubspaceAngle {
    pub cos: f64,
    pub cos_sq: f64,
}

/// Per-index consistency measurements recorded for one trial.
///
/// `index` and `tier` are 0-based. Fields are absent when the measure does
/// not apply (no sample eigenvector available, or the measure was not
/// requested).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyMeasures {
    pub index: usize,
    pub tier: usize,
    pub is_spike: bool,
    pub eigen_ratio: Option<f64>,
    pub abs_inner: Option<f64>,
    pub inner_sq: Option<f64>,
    pub subspace_cos: Option<f64>,
    pub subspace_cos_sq: Option<f64>,
}

/// |<u, v>| for two unit vectors, clamped to [0, 1].
pub fn abs_inner(u: &ArrayView1<f64>, v: &ArrayView1<f64>) -> Result<f64, MetricsError> {
    if u.len() != v.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "lengths {} and {} differ",
            u.len(),
            v.len()
        )));
    }
    check_unit(u)?;
    check_unit(v)?;
    Ok(u.dot(v).abs().clamp(0.0, 1.0))
}

/// Cosine of the angle between unit vector `v` and the span of the
/// population eigenvectors indexed by `h` in the given basis.
pub fn subspace_cos(
    v: &ArrayView1<f64>,
    h: Range<usize>,
    basis: &Basis,
) -> Result<SubspaceAngle, MetricsError> {
    if h.is_empty() {
        return Err(MetricsError::EmptyIndexSet);
    }
    if h.end > v.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "index set end {} exceeds dimension {}",
            h.end,
            v.len()
        )));
    }
    check_unit(v)?;
    let mut sum = 0.0;
    for k in h {
        let c = basis.inner(v, k);
        sum += c * c;
    }
    let cos_sq = sum.clamp(0.0, 1.0);
    Ok(SubspaceAngle {
        cos: cos_sq.sqrt(),
        cos_sq,
    })
}

/// Elementwise sample-to-population eigenvalue ratios over a common range.
pub fn eigen_ratios(sample_vals: &[f64], pop_vals: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if sample_vals.len() != pop_vals.len() {
        return Err(MetricsError::DimensionMismatch(format!(
            "lengths {} and {} differ",
            sample_vals.len(),
            pop_vals.len()
        )));
    }
    if pop_vals.iter().any(|v| !(*v > 0.0)) {
        return Err(MetricsError::ZeroDivision);
    }
    Ok(sample_vals
        .iter()
        .zip(pop_vals.iter())
        .map(|(s, p)| s / p)
        .collect())
}

fn check_unit(v: &ArrayView1<f64>) -> Result<(), MetricsError> {
    let norm = v.dot(v).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(MetricsError::NotUnit(norm));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};

    fn unit(v: Vec<f64>) -> Array1<f64> {
        let a = arr1(&v);
        let norm = a.dot(&a).sqrt();
        a / norm
    }

    #[test]
    fn abs_inner_identical_vectors() {
        let u = unit(vec![0.3, -0.4, 0.5]);
        let got = abs_inner(&u.view(), &u.view()).unwrap();
        assert!((got - 1.0).abs() < 1e-12);
    }

    #[test]
    fn abs_inner_orthogonal_pair() {
        let u = arr1(&[1.0, 0.0]);
        let v = arr1(&[0.0, 1.0]);
        assert_eq!(abs_inner(&u.view(), &v.view()).unwrap(), 0.0);
    }

    #[test]
    fn abs_inner_forty_five_degrees() {
        let u = arr1(&[1.0, 0.0]);
        let r = 0.5f64.sqrt();
        let v = arr1(&[r, r]);
        let got = abs_inner(&u.view(), &v.view()).unwrap();
        assert!((got - r).abs() < 1e-12);
    }

    #[test]
    fn abs_inner_rejects_non_unit() {
        let u = arr1(&[2.0, 0.0]);
        let v = arr1(&[1.0, 0.0]);
        assert!(matches!(
            abs_inner(&u.view(), &v.view()),
            Err(MetricsError::NotUnit(_))
        ));
    }

    #[test]
    fn subspace_cos_inside_and_orthogonal() {
        let basis = Basis::Identity;
        let v = unit(vec![0.6, 0.8, 0.0]);
        let inside = subspace_cos(&v.view(), 0..2, &basis).unwrap();
        assert!((inside.cos - 1.0).abs() < 1e-12);
        let out = subspace_cos(&v.view(), 2..3, &basis).unwrap();
        assert_eq!(out.cos, 0.0);
    }

    #[test]
    fn subspace_cos_projection_norm_by_hand() {
        let basis = Basis::Identity;
        let v = arr1(&[0.5f64.sqrt(), 0.5f64.sqrt(), 0.0]);
        let got = subspace_cos(&v.view(), 0..1, &basis).unwrap();
        assert!((got.cos - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((got.cos_sq - 0.5).abs() < 1e-12);
    }

    #[test]
    fn subspace_cos_full_set_is_complete() {
        let basis = Basis::Identity;
        let v = unit(vec![0.1, -0.7, 0.2, 0.5]);
        let got = subspace_cos(&v.view(), 0..4, &basis).unwrap();
        assert!((got.cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subspace_cos_monotone_under_enlargement() {
        let basis = Basis::Identity;
        let v = unit(vec![0.4, 0.3, -0.2, 0.6, 0.1]);
        let mut prev = 0.0;
        for end in 1..=5 {
            let cur = subspace_cos(&v.view(), 0..end, &basis).unwrap().cos;
            assert!(cur >= prev - 1e-15);
            prev = cur;
        }
    }

    #[test]
    fn abs_inner_bounded_by_subspace_cos() {
        let basis = Basis::Identity;
        let v = unit(vec![0.4, 0.3, -0.2, 0.6, 0.1]);
        for j in 0..5 {
            let e = basis.column(5, j);
            let ai = abs_inner(&v.view(), &e.view()).unwrap();
            let sc = subspace_cos(&v.view(), j..j + 1, &basis).unwrap().cos;
            assert!(ai <= sc + 1e-15);
            let wider = subspace_cos(&v.view(), 0..j + 1, &basis).unwrap().cos;
            assert!(ai <= wider + 1e-15);
        }
    }

    #[test]
    fn subspace_cos_rejects_empty_set() {
        let basis = Basis::Identity;
        let v = arr1(&[1.0, 0.0]);
        assert!(matches!(
            subspace_cos(&v.view(), 1..1, &basis),
            Err(MetricsError::EmptyIndexSet)
        ));
    }

    #[test]
    fn eigen_ratios_basic() {
        assert_eq!(
            eigen_ratios(&[2.0, 1.0], &[1.0, 1.0]).unwrap(),
            vec![2.0, 1.0]
        );
        assert_eq!(
            eigen_ratios(&[3.0, 3.0], &[3.0, 3.0]).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn eigen_ratios_rejects_zero_population() {
        assert!(matches!(
            eigen_ratios(&[1.0], &[0.0]),
            Err(MetricsError::ZeroDivision)
        ));
    }
}
