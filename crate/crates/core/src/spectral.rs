//! Symmetric-matrix spectral primitives.
//!
//! Everything here works on [`SymMatrix`], a dense square matrix that is
//! exactly symmetric by construction. The learned metric `Σ` and every
//! gradient of the objective live in this type.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues closer than this are reported as a tie by
/// [`SpectralDecomposition::tie_at`].
pub const TIE_TOLERANCE: f64 = 1e-12;

/// A dense, exactly symmetric `p × p` matrix with `p ≥ 1`.
#[derive(Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

/// The optimization variable `Σ`.
pub type MetricMatrix = SymMatrix;

impl SymMatrix {
    /// Builds a symmetric matrix from `a`, storing `(a + aᵀ)/2`.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidInput("matrix dimension must be at least 1".into()));
        }
        Ok(Self::symmetrized(a))
    }

    /// Symmetrizes without shape checks. Callers guarantee a non-empty square matrix.
    pub(crate) fn symmetrized(mut a: DMatrix<f64>) -> Self {
        let p = a.nrows();
        for j in 0..p {
            for i in (j + 1)..p {
                let s = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        SymMatrix(a)
    }

    pub fn from_row_slice(p: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != p * p {
            return Err(Error::InvalidInput(format!(
                "expected {} entries for a {p}x{p} matrix, got {}",
                p * p,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(p, p, entries))
    }

    pub fn zeros(p: usize) -> Self {
        assert!(p >= 1, "matrix dimension must be at least 1");
        SymMatrix(DMatrix::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        assert!(p >= 1, "matrix dimension must be at least 1");
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "matrix dimension must be at least 1");
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `scale · I_p`.
    pub fn scaled_identity(p: usize, scale: f64) -> Self {
        Self::identity(p) * scale
    }

    /// `B Bᵀ` for any `p × k` matrix `B`.
    pub fn gram_of(b: &DMatrix<f64>) -> Self {
        assert!(b.nrows() >= 1, "matrix dimension must be at least 1");
        Self::symmetrized(b * b.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// Trace inner product `⟨A, B⟩ = tr(AᵀB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// `Bᵀ A B` for a `p × k` matrix `B`.
    pub fn congruence(&self, b: &DMatrix<f64>) -> Result<SymMatrix> {
        if b.nrows() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "congruence basis has {} rows, matrix has dimension {}",
                b.nrows(),
                self.dim()
            )));
        }
        if b.ncols() == 0 {
            return Err(Error::InvalidInput("congruence basis has no columns".into()));
        }
        Ok(Self::symmetrized(b.transpose() * &self.0 * b))
    }

    fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.0)
    }
}

impl Add<&SymMatrix> for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub<&SymMatrix> for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(self.0 * rhs)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

/// `A = Q Λ Qᵀ` with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `Q f(Λ) Qᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[j]);
        }
        SymMatrix::symmetrized(scaled * q.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|v| v)
    }

    /// Whether the `r`-th and `(r+1)`-th eigenvalues (1-based `r`) agree to
    /// within [`TIE_TOLERANCE`], which makes the top-`r` eigenspace ill-defined.
    pub fn tie_at(&self, r: usize) -> bool {
        r >= 1
            && r < self.dim()
            && (self.eigenvalues[r - 1] - self.eigenvalues[r]).abs() <= TIE_TOLERANCE
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
pub fn eigh(a: &SymMatrix) -> Result<SpectralDecomposition> {
    if !a.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let SymmetricEigen {
        eigenvalues,
        eigenvectors,
    } = SymmetricEigen::new(a.0.clone());
    let p = eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    // Stable sort keeps the solver's order among exactly equal eigenvalues.
    order.sort_by(|&i, &j| eigenvalues[j].total_cmp(&eigenvalues[i]));
    let sorted_values = DVector::from_iterator(p, order.iter().map(|&i| eigenvalues[i]));
    let mut sorted_vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &eigenvectors.column(src));
    }
    Ok(SpectralDecomposition {
        eigenvalues: sorted_values,
        eigenvectors: sorted_vectors,
    })
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
pub fn project_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let dec = eigh(a)?;
    Ok(dec.reconstruct_with(|v| v.max(0.0)))
}

/// Projection onto `{Σ ⪰ 0, ‖Σ‖_op ≤ cap}`: eigenvalues clipped to `[0, cap]`.
pub fn project_psd_capped(a: &SymMatrix, cap: f64) -> Result<SymMatrix> {
    if !(cap > 0.0) || !cap.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "operator-norm cap must be positive and finite, got {cap}"
        )));
    }
    let dec = eigh(a)?;
    Ok(dec.reconstruct_with(|v| v.clamp(0.0, cap)))
}

/// Thresholds used to read an integer rank off a noisy PSD matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        RankTolerance {
            rel_tol: 1e-3,
            abs_tol: 1e-8,
        }
    }
}

impl RankTolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rank tolerances must be nonnegative, got rel_tol={} abs_tol={}",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }

    /// Eigenvalues strictly above this value count towards the rank.
    pub fn threshold(&self, max_eigenvalue: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * max_eigenvalue)
    }
}

/// Number of eigenvalues strictly greater than `max(abs_tol, rel_tol·λ_max)`.
pub fn estimate_rank(a: &SymMatrix, tol: RankTolerance) -> Result<usize> {
    tol.validate()?;
    let dec = eigh(a)?;
    Ok(rank_of_decomposition(&dec, tol))
}

pub fn rank_of_decomposition(dec: &SpectralDecomposition, tol: RankTolerance) -> usize {
    let cut = tol.threshold(dec.max_eigenvalue());
    dec.eigenvalues.iter().filter(|&&v| v > cut).count()
}

/// Orthogonal projector onto the span of the top-`r` eigenvectors of `a`.
pub fn column_space_projector(a: &SymMatrix, r: usize) -> Result<SymMatrix> {
    let dec = eigh(a)?;
    projector_from_decomposition(&dec, r)
}

pub fn projector_from_decomposition(dec: &SpectralDecomposition, r: usize) -> Result<SymMatrix> {
    let p = dec.dim();
    if r > p {
        return Err(Error::InvalidConfig(format!(
            "projector rank {r} exceeds dimension {p}"
        )));
    }
    if r == 0 {
        return Ok(SymMatrix::zeros(p));
    }
    let top = dec.eigenvectors.columns(0, r).into_owned();
    Ok(SymMatrix::gram_of(&top))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceNorm {
    Frobenius,
    Operator,
}

/// `‖P₁ − P₂‖` between two orthogonal projectors.
pub fn subspace_distance(p1: &SymMatrix, p2: &SymMatrix, norm: SubspaceNorm) -> Result<f64> {
    p1.check_same_dim(p2)?;
    let diff = p1 - p2;
    match norm {
        SubspaceNorm::Frobenius => Ok(diff.frobenius_norm()),
        SubspaceNorm::Operator => {
            let dec = eigh(&diff)?;
            Ok(dec.max_eigenvalue().abs().max(dec.min_eigenvalue().abs()))
        }
    }
}
