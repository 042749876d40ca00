//! Seeded generation of i.i.d. score matrices with zero mean, unit variance,
//! and finite fourth moment, plus synthesis of the data matrix
//! X = U Lambda^{1/2} Z.
//!
//! Every generator is value-semantic: a trial derives its own stream from a
//! 64-bit seed and nothing is shared across threads, so identical seeds give
//! bit-identical output regardless of execution schedule.

use crate::spike_model::{ScalingLaw, SpectrumError, SpectrumSpec};
use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Score distributions, each with mean 0, variance 1, and finite fourth
/// moment (Gaussian: 3, Rademacher: 1, ScaledUniform: 1.8).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDistribution {
    #[default]
    Gaussian,
    Rademacher,
    ScaledUniform,
}

impl ScoreDistribution {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ScoreDistribution::Gaussian => rng.sample(StandardNormal),
            ScoreDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ScoreDistribution::ScaledUniform => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * 3f64.sqrt()
            }
        }
    }

    /// Analytic fourth moment E[z^4].
    pub fn fourth_moment(&self) -> f64 {
        match self {
            ScoreDistribution::Gaussian => 3.0,
            ScoreDistribution::Rademacher => 1.0,
            ScoreDistribution::ScaledUniform => 1.8,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreDistribution::Gaussian => "gaussian",
            ScoreDistribution::Rademacher => "rademacher",
            ScoreDistribution::ScaledUniform => "scaled_uniform",
        }
    }
}

/// Requested population basis. The default Identity basis is both the fastest
/// and, by the angle invariance of the measures, fully general; the Haar mode
/// exists to test exactly that invariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisSpec {
    #[default]
    Identity,
    Haar {
        seed: u64,
    },
}

/// Realized population basis carried by a dataset.
#[derive(Debug, Clone)]
pub enum Basis {
    Identity,
    Rotation(Array2<f64>),
}

impl Basis {
    /// Inner product of `v` with population eigenvector k.
    pub fn inner(&self, v: &ArrayView1<f64>, k: usize) -> f64 {
        match self {
            Basis::Identity => v[k],
            Basis::Rotation(q) => v.dot(&q.column(k)),
        }
    }

    /// Population eigenvector k as an owned vector of length `d`.
    pub fn column(&self, d: usize, k: usize) -> Array1<f64> {
        match self {
            Basis::Identity => {
                let mut e = Array1::zeros(d);
                e[k] = 1.0;
                e
            }
            Basis::Rotation(q) => q.column(k).to_owned(),
        }
    }
}

/// Synthesized dataset: the observed matrix X (d-by-n, one column per
/// observation), the raw scores Z with X = U Lambda^{1/2} Z, the realized
/// basis U, the population spectrum, and the seed that produced it all.
///
/// Row j of `scores` is the dual score vector for coordinate j.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub scores: Option<Array2<f64>>,
    pub basis: Basis,
    pub spectrum: Vec<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn sample_size(&self) -> usize {
        self.x.ncols()
    }

    /// Dual score vector for coordinate j (length n).
    pub fn score_row(&self, j: usize) -> Option<ArrayView1<'_, f64>> {
        self.scores.as_ref().map(|s| s.row(j))
    }

    /// Drops the stored scores, keeping only the observed data.
    pub fn without_scores(mut self) -> Self {
        self.scores = None;
        self
    }
}

/// d-by-n matrix of i.i.d. scores, filled in row-major order from a ChaCha
/// stream seeded by `seed`. Identical arguments give bit-identical output.
pub fn sample_scores(d: usize, n: usize, dist: ScoreDistribution, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        data.push(dist.sample(&mut rng));
    }
    Array2::from_shape_vec((d, n), data).expect("shape matches data length")
}

/// Synthesizes a dataset with population covariance U Lambda U^T: scores are
/// drawn from `dist`, scaled by the square-root spectrum, and rotated into
/// the requested basis.
pub fn synthesize(
    spec: &SpectrumSpec,
    law: &ScalingLaw,
    d: usize,
    dist: ScoreDistribution,
    basis: &BasisSpec,
    seed: u64,
) -> Result<Dataset, SpectrumError> {
    let spectrum = spec.build_spectrum(d)?;
    let n = law.resolve_n(d);
    if n < 2 {
        return Err(SpectrumError::InvalidSpec(format!(
            "resolved sample size must be at least 2, got {n}"
        )));
    }
    let scores = sample_scores(d, n, dist, seed);

    let mut x = scores.clone();
    for (j, lambda) in spectrum.iter().enumerate() {
        let scale = lambda.sqrt();
        for v in x.row_mut(j) {
            *v *= scale;
        }
    }
    let basis = match basis {
        BasisSpec::Identity => Basis::Identity,
        BasisSpec::Haar { seed } => {
            let q = haar_orthogonal(d, *seed);
            x = q.dot(&x);
            Basis::Rotation(q)
        }
    };

    Ok(Dataset {
        x,
        scores: Some(scores),
        basis,
        spectrum,
        seed,
    })
}

/// Haar-distributed orthogonal matrix: QR of a square standard Gaussian
/// matrix with the R diagonal sign-fixed to be positive.
pub fn haar_orthogonal(d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Array2::from_shape_fn((d, d), |_| rng.sample::<f64, _>(StandardNormal));
    let (mut q, r_diag) = householder_qr(g);
    for k in 0..d {
        if r_diag[k] < 0.0 {
            for v in q.column_mut(k) {
                *v = -*v;
            }
        }
    }
    q
}

/// Householder QR returning the accumulated Q and the diagonal of R.
fn householder_qr(mut a: Array2<f64>) -> (Array2<f64>, Vec<f64>) {
    let d = a.nrows();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(d);

    for k in 0..d {
        let mut v: Vec<f64> = (k..d).map(|i| a[[i, k]]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            reflectors.push(Vec::new());
            a[[k, k]] = alpha;
            continue;
        }
        // Apply H = I - 2 v v^T / (v^T v) to the trailing columns.
        for j in k..d {
            let dot: f64 = (k..d).map(|i| v[i - k] * a[[i, j]]).sum();
            let factor = 2.0 * dot / vnorm2;
            for i in k..d {
                a[[i, j]] -= factor * v[i - k];
            }
        }
        reflectors.push(v);
    }
    let r_diag: Vec<f64> = (0..d).map(|k| a[[k, k]]).collect();

    // Q = H_0 H_1 ... H_{d-1}: apply reflectors to the identity in reverse.
    let mut q = Array2::<f64>::eye(d);
    for k in (0..d).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for j in 0..d {
            let dot: f64 = (k..d).map(|i| v[i - k] * q[[i, j]]).sum();
            let factor = 2.0 * dot / vnorm2;
            for i in k..d {
                q[[i, j]] -= factor * v[i - k];
            }
        }
    }
    (q, r_diag)
}
