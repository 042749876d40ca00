//! Dense symmetric eigendecomposition and the dual-matrix computation path.
//!
//! The solver is a cyclic Jacobi iteration: backward stable, simple, and
//! adequate for the dense orders this crate targets (d up to ~2000). The dual
//! path computes the eigenstructure of the d-by-d sample covariance through
//! its n-by-n dual when samples are scarce, recovering d-dimensional
//! eigenvectors from the dual eigenvectors. A checker for Wielandt's
//! eigenvalue sandwich on sums of symmetric matrices doubles as a runtime
//! invariant in the Monte Carlo harness.

use ndarray::{Array2, ArrayView1, ArrayView2};
use thiserror::Error;

/// Relative off-diagonal Frobenius tolerance for Jacobi convergence.
const JACOBI_REL_TOL: f64 = 1e-12;
/// Full-sweep budget before the solver gives up.
const JACOBI_MAX_SWEEPS: usize = 64;
/// Dual eigenvalues at or below this fraction of the largest are reported as
/// zero and carry no reconstructed eigenvector.
const DUAL_ZERO_REL_TOL: f64 = 1e-12;
/// Absolute slack allowed when checking Wielandt's inequality.
const WIELANDT_SLACK: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EigenError {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("Jacobi iteration did not converge within {JACOBI_MAX_SWEEPS} sweeps")]
    NoConvergence,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Square symmetric matrix of reals. Construction symmetrizes the input as
/// (M + M^T)/2, so the stored entries satisfy m[i][j] == m[j][i] exactly.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    data: Array2<f64>,
}

impl SymMatrix {
    /// Builds from an arbitrary square matrix, averaging it with its
    /// transpose. Rejects non-square input.
    pub fn new(m: Array2<f64>) -> Result<Self, EigenError> {
        let (r, c) = m.dim();
        if r != c || r == 0 {
            return Err(EigenError::DimensionMismatch(format!(
                "expected a nonempty square matrix, got {r}x{c}"
            )));
        }
        let mut data = m;
        for i in 0..r {
            for j in (i + 1)..r {
                let avg = 0.5 * (data[[i, j]] + data[[j, i]]);
                data[[i, j]] = avg;
                data[[j, i]] = avg;
            }
        }
        Ok(Self { data })
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = Array2::zeros((n, n));
        for (i, &v) in diag.iter().enumerate() {
            data[[i, i]] = v;
        }
        Self { data }
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise sum with another matrix of the same order.
    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix, EigenError> {
        if self.order() != other.order() {
            return Err(EigenError::DimensionMismatch(format!(
                "orders {} and {} differ",
                self.order(),
                other.order()
            )));
        }
        Ok(SymMatrix {
            data: &self.data + &other.data,
        })
    }

    fn check_finite(&self) -> Result<(), EigenError> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(EigenError::NonFinite)
        }
    }
}

/// Which computation produced an [`EigenResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenPath {
    Direct,
    Dual,
}

impl EigenPath {
    pub fn as_str(&self) -> &'static str {
        match self {
            EigenPath::Direct => "direct",
            EigenPath::Dual => "dual",
        }
    }
}

/// Descending eigenvalues with orthonormal eigenvectors.
///
/// `vectors` holds one unit column per eigenvector. The dual path may report
/// fewer vectors than values: trailing near-zero eigenvalues are clamped to
/// zero and carry no column. Each vector's sign is fixed so its
/// largest-magnitude component is positive (ties: lowest index wins).
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
    pub path: EigenPath,
}

impl EigenResult {
    /// Eigenvector for index `j` (0-based, matching `values[j]`), if one was
    /// computed.
    pub fn vector(&self, j: usize) -> Option<ArrayView1<'_, f64>> {
        if j < self.vectors.ncols() {
            Some(self.vectors.column(j))
        } else {
            None
        }
    }

    /// Number of eigenvalues strictly above the dual-path zero threshold.
    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }

    /// Max |V^T V - I| over the computed vectors.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.vectors.ncols();
        let gram = self.vectors.t().dot(&self.vectors);
        let mut worst = 0.0_f64;
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[[i, j]] - target).abs());
            }
        }
        worst
    }

    /// ||M - V diag(values) V^T||_F against the supplied matrix.
    pub fn reconstruction_residual(&self, m: &SymMatrix) -> f64 {
        let k = self.vectors.ncols();
        let mut approx = Array2::<f64>::zeros((m.order(), m.order()));
        for j in 0..k {
            let v = self.vectors.column(j);
            let lambda = self.values[j];
            for a in 0..m.order() {
                let va = lambda * v[a];
                for b in 0..m.order() {
                    approx[[a, b]] += va * v[b];
                }
            }
        }
        let diff = m.as_array() - &approx;
        diff.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm drops to 1e-12 of the
/// matrix Frobenius norm, within a budget of 64 full sweeps.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenResult, EigenError> {
    m.check_finite()?;
    let n = m.order();
    let mut a: Vec<f64> = m.as_array().iter().copied().collect();
    let mut vt = identity_flat(n);
    jacobi(&mut a, &mut vt, n)?;
    Ok(assemble(&a, &vt, n, EigenPath::Direct))
}

/// Sample covariance n^{-1} X X^T of a d-by-n data matrix whose columns are
/// observations. The model is mean-zero, so no centering is applied.
pub fn sample_cov(x: &ArrayView2<f64>) -> Result<SymMatrix, EigenError> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let (d, n) = x.dim();
    if d == 0 || n == 0 {
        return Err(EigenError::DimensionMismatch(format!(
            "data matrix must be nonempty, got {d}x{n}"
        )));
    }
    let cov = x.dot(&x.t()) / n as f64;
    SymMatrix::new(cov)
}

/// Leading eigenstructure of the sample covariance computed through the dual
/// matrix n^{-1} X^T X, which shares its nonzero eigenvalues.
///
/// Returns the min(n, d) leading eigenvalues; each eigenvalue at or below
/// 1e-12 of the largest is reported as exactly zero and has no eigenvector.
/// Full-dimensional eigenvectors are recovered as X v / sqrt(n * lambda) from
/// the dual eigenvectors v.
pub fn dual_eigen(x: &ArrayView2<f64>) -> Result<EigenResult, EigenError> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let (d, n) = x.dim();
    if d == 0 || n == 0 {
        return Err(EigenError::DimensionMismatch(format!(
            "data matrix must be nonempty, got {d}x{n}"
        )));
    }
    let dual = SymMatrix::new(x.t().dot(x) / n as f64)?;
    let inner = sym_eigen(&dual)?;

    let k = n.min(d);
    let mut values: Vec<f64> = inner.values[..k].to_vec();
    let threshold = DUAL_ZERO_REL_TOL * values.first().copied().unwrap_or(0.0).max(0.0);
    let kept = values.iter().take_while(|v| **v > threshold).count();
    for v in values.iter_mut().skip(kept) {
        *v = 0.0;
    }

    let mut vectors = Array2::<f64>::zeros((d, kept));
    for j in 0..kept {
        let dual_vec = inner.vectors.column(j);
        let mut full = x.dot(&dual_vec);
        let norm = full.iter().map(|v| v * v).sum::<f64>().sqrt();
        full /= norm;
        fix_sign_slice(full.as_slice_mut().expect("contiguous"));
        vectors.column_mut(j).assign(&full);
    }

    Ok(EigenResult {
        values,
        vectors,
        path: EigenPath::Dual,
    })
}

/// Bounds from Wielandt's inequality for the j-th largest eigenvalue
/// (0-based) of A + B.
#[derive(Debug, Clone, Copy)]
pub struct WielandtBounds {
    pub lower: f64,
    pub upper: f64,
    pub observed: f64,
    pub holds: bool,
}

/// Evaluates Wielandt's sandwich for eigenvalue rank `j` (0-based) of A + B:
/// the tightest lower bound max_k lambda_{j+k}(A) + lambda_{p-1-k}(B) and
/// upper bound min_k lambda_{j-k}(A) + lambda_k(B), checked with 1e-10 slack.
pub fn wielandt_check(a: &SymMatrix, b: &SymMatrix, j: usize) -> Result<WielandtBounds, EigenError> {
    let p = a.order();
    if j >= p {
        return Err(EigenError::DimensionMismatch(format!(
            "eigenvalue rank {j} out of range for order {p}"
        )));
    }
    Ok(wielandt_check_all(a, b)?.swap_remove(j))
}

/// Wielandt bounds for every eigenvalue rank of A + B, sharing the three
/// eigendecompositions across ranks.
pub fn wielandt_check_all(a: &SymMatrix, b: &SymMatrix) -> Result<Vec<WielandtBounds>, EigenError> {
    let p = a.order();
    if b.order() != p {
        return Err(EigenError::DimensionMismatch(format!(
            "orders {} and {} differ",
            p,
            b.order()
        )));
    }
    let ea = sym_eigen(a)?.values;
    let eb = sym_eigen(b)?.values;
    let esum = sym_eigen(&a.add(b)?)?.values;

    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let observed = esum[j];
        let mut lower = f64::NEG_INFINITY;
        for k in 0..(p - j) {
            lower = lower.max(ea[j + k] + eb[p - 1 - k]);
        }
        let mut upper = f64::INFINITY;
        for k in 0..=j {
            upper = upper.min(ea[j - k] + eb[k]);
        }
        let holds = lower - WIELANDT_SLACK <= observed && observed <= upper + WIELANDT_SLACK;
        out.push(WielandtBounds {
            lower,
            upper,
            observed,
            holds,
        });
    }
    Ok(out)
}

fn identity_flat(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

fn off_diagonal_frobenius(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for p in 0..n {
        for q in (p + 1)..n {
            let v = a[p * n + q];
            sum += 2.0 * v * v;
        }
    }
    sum.sqrt()
}

/// Cyclic Jacobi on a flat row-major symmetric matrix. Only the upper
/// triangle is maintained; `vt` accumulates eigenvectors as rows. Returns the
/// number of sweeps used.
fn jacobi(a: &mut [f64], vt: &mut [f64], n: usize) -> Result<usize, EigenError> {
    let fro = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok(0);
    }
    let stop = JACOBI_REL_TOL * fro;
    // Rotating only entries above stop/n keeps the residual mass of skipped
    // entries below the stop threshold.
    let skip = stop / n as f64;

    for sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_frobenius(a, n) <= stop {
            return Ok(sweep);
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= skip {
                    continue;
                }
                rotate(a, vt, n, p, q, apq);
            }
        }
    }
    if off_diagonal_frobenius(a, n) <= stop {
        Ok(JACOBI_MAX_SWEEPS)
    } else {
        Err(EigenError::NoConvergence)
    }
}

#[inline]
fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize, apq: f64) {
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = 0.5 * (aqq - app) / apq;
    let t = if theta.abs() > 1e153 {
        0.5 / theta
    } else {
        let root = (1.0 + theta * theta).sqrt();
        if theta >= 0.0 {
            1.0 / (theta + root)
        } else {
            1.0 / (theta - root)
        }
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let h = t * apq;
    a[p * n + p] = app - h;
    a[q * n + q] = aqq + h;
    a[p * n + q] = 0.0;

    // Pairs (a[j][p], a[j][q]) for j < p: two strided columns.
    for j in 0..p {
        let jp = j * n + p;
        let jq = j * n + q;
        let g = a[jp];
        let hh = a[jq];
        a[jp] = g - s * (hh + g * tau);
        a[jq] = hh + s * (g - hh * tau);
    }
    // Pairs (a[p][j], a[j][q]) for p < j < q: row p is contiguous.
    for j in (p + 1)..q {
        let pj = p * n + j;
        let jq = j * n + q;
        let g = a[pj];
        let hh = a[jq];
        a[pj] = g - s * (hh + g * tau);
        a[jq] = hh + s * (g - hh * tau);
    }
    // Pairs (a[p][j], a[q][j]) for j > q: two contiguous row tails.
    if q + 1 < n {
        let (head, tail) = a.split_at_mut(q * n);
        let rowp = &mut head[(p * n + q + 1)..(p * n + n)];
        let rowq = &mut tail[(q + 1)..n];
        for (gp, gq) in rowp.iter_mut().zip(rowq.iter_mut()) {
            let g = *gp;
            let hh = *gq;
            *gp = g - s * (hh + g * tau);
            *gq = hh + s * (g - hh * tau);
        }
    }
    // Eigenvector rows p and q of V^T, both contiguous.
    {
        let (head, tail) = vt.split_at_mut(q * n);
        let rowp = &mut head[(p * n)..(p * n + n)];
        let rowq = &mut tail[..n];
        for (gp, gq) in rowp.iter_mut().zip(rowq.iter_mut()) {
            let g = *gp;
            let hh = *gq;
            *gp = g - s * (hh + g * tau);
            *gq = hh + s * (g - hh * tau);
        }
    }
}

/// Sorts eigenpairs descending, fixes signs, and packs the result.
fn assemble(a: &[f64], vt: &[f64], n: usize, path: EigenPath) -> EigenResult {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("eigenvalues are finite")
    });

    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    let mut column = vec![0.0; n];
    for (dst, &src) in order.iter().enumerate() {
        column.copy_from_slice(&vt[src * n..(src + 1) * n]);
        fix_sign_slice(&mut column);
        for (i, &v) in column.iter().enumerate() {
            vectors[[i, dst]] = v;
        }
    }
    EigenResult {
        values,
        vectors,
        path,
    }
}

/// Flips the vector so its largest-magnitude component is positive; on ties
/// the lowest index wins.
fn fix_sign_slice(v: &mut [f64]) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, &x) in v.iter().enumerate() {
        let mag = x.abs();
        if mag > best {
            best = mag;
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
