//! Dense symmetric linear algebra: validated symmetric matrices, Hadamard
//! products, ridge-regularized positive-definite solves with jitter
//! escalation, and PSD matrix square roots.
//!
//! Backed by [`faer`]; the types re-exported here are the only faer surface
//! the rest of the crate touches.

use faer::linalg::solvers::{Llt, SelfAdjointEigen, Solve};
use faer::{Par, Side};

pub use faer::{Mat, MatRef};

use crate::error::{Error, Result};

/// First jitter tried after a failed factorization, as a multiple of
/// `trace(k)/dim`.
pub const JITTER_INITIAL_SCALE: f64 = 1e-12;
/// Largest jitter tried before giving up, as a multiple of `trace(k)/dim`.
pub const JITTER_MAX_SCALE: f64 = 1e-6;
/// Eigenvalues in `[-EIG_CLIP_REL * lambda_max, 0)` are treated as roundoff
/// and clipped to zero by [`sqrt_psd`]; anything lower is an error.
pub const EIG_CLIP_REL: f64 = 1e-10;

/// Pins the linear-algebra backend to sequential execution so results do not
/// depend on how many threads the surrounding program uses.
pub fn set_sequential_backend() {
    faer::set_global_parallelism(Par::Seq);
}

/// Square matrix with exact entrywise symmetry (`m[(i,j)]` and `m[(j,i)]` are
/// bitwise equal) and all entries finite. Constructors enforce both.
#[derive(Clone, Debug)]
pub struct SymMatrix {
    m: Mat<f64>,
}

impl SymMatrix {
    /// Builds an `n x n` symmetric matrix by evaluating `f(i, j)` once per
    /// unordered pair with `i >= j` and mirroring the value.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "symmetric matrix entry ({i}, {j})"
                    )));
                }
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self { m })
    }

    /// Validates that `m` is square, finite, and exactly symmetric.
    pub fn try_new(m: Mat<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..m.nrows() {
            for j in 0..=i {
                if !m[(i, j)].is_finite() {
                    return Err(Error::NonFinite(format!(
                        "symmetric matrix entry ({i}, {j})"
                    )));
                }
                if m[(i, j)].to_bits() != m[(j, i)].to_bits() {
                    return Err(Error::InvalidData(format!(
                        "matrix not symmetric at ({i}, {j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        Ok(Self { m })
    }

    /// Wraps a square matrix that is symmetric only up to roundoff by
    /// averaging it with its transpose.
    pub fn symmetrize(m: MatRef<'_, f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot symmetrize a {}x{} matrix",
                m.nrows(),
                m.ncols()
            )));
        }
        Self::from_fn(m.nrows(), |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
            .expect("identity entries are finite")
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_ref(&self) -> MatRef<'_, f64> {
        self.m.as_ref()
    }

    pub fn into_inner(self) -> Mat<f64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// `trace / dim`; the scale used by the jitter ladder.
    fn mean_diagonal(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let tr: f64 = (0..self.dim()).map(|i| self.m[(i, i)]).sum();
        tr / self.dim() as f64
    }
}

/// Entrywise product of two same-shape matrices.
pub fn hadamard(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "hadamard product needs equal shapes, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        a[(i, j)] * b[(i, j)]
    }))
}

/// Entrywise product of two symmetric matrices; exact symmetry is preserved
/// because each mirrored pair multiplies bitwise-identical operands.
pub fn hadamard_sym(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "hadamard product needs equal dims, got {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    SymMatrix::from_fn(a.dim(), |i, j| a.get(i, j) * b.get(i, j))
}

fn check_rhs(k: &SymMatrix, rhs: MatRef<'_, f64>) -> Result<()> {
    if rhs.nrows() != k.dim() {
        return Err(Error::DimensionMismatch(format!(
            "solve: matrix dim {} vs rhs rows {}",
            k.dim(),
            rhs.nrows()
        )));
    }
    for j in 0..rhs.ncols() {
        for i in 0..rhs.nrows() {
            if !rhs[(i, j)].is_finite() {
                return Err(Error::NonFinite(format!("rhs entry ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn shifted(k: &SymMatrix, shift: f64) -> Mat<f64> {
    Mat::from_fn(k.dim(), k.dim(), |i, j| {
        k.get(i, j) + if i == j { shift } else { 0.0 }
    })
}

/// Solves `(k + ridge * I) X = rhs` for a symmetric positive semidefinite
/// `k` via Cholesky.
///
/// If the factorization fails, a diagonal jitter is added starting at
/// [`JITTER_INITIAL_SCALE`]` * trace(k)/dim` and escalating by factors of 10
/// up to [`JITTER_MAX_SCALE`]` * trace(k)/dim`; if every attempt fails the
/// returned [`Error::Singular`] carries the largest jitter tried.
pub fn solve_psd(k: &SymMatrix, ridge: f64, rhs: MatRef<'_, f64>) -> Result<Mat<f64>> {
    solve_psd_impl(k, ridge, rhs, true)
}

/// [`solve_psd`] without the jitter ladder: one factorization attempt of
/// `k + ridge * I`, failing fast on singularity. Used by estimator variants
/// whose instability on ill-conditioned systems is itself of interest.
pub fn solve_psd_strict(k: &SymMatrix, ridge: f64, rhs: MatRef<'_, f64>) -> Result<Mat<f64>> {
    solve_psd_impl(k, ridge, rhs, false)
}

fn solve_psd_impl(
    k: &SymMatrix,
    ridge: f64,
    rhs: MatRef<'_, f64>,
    escalate: bool,
) -> Result<Mat<f64>> {
    if !ridge.is_finite() || ridge < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ridge must be finite and >= 0, got {ridge}"
        )));
    }
    check_rhs(k, rhs)?;

    if let Ok(f) = Llt::new(shifted(k, ridge).as_ref(), Side::Lower) {
        return Ok(f.solve(rhs));
    }
    if !escalate {
        return Err(Error::Singular { jitter: 0.0 });
    }

    let scale = k.mean_diagonal();
    let mut jitter = JITTER_INITIAL_SCALE * scale;
    let max_jitter = JITTER_MAX_SCALE * scale;
    let mut last = 0.0;
    while jitter > 0.0 && jitter <= max_jitter * (1.0 + 1e-9) {
        last = jitter;
        if let Ok(f) = Llt::new(shifted(k, ridge + jitter).as_ref(), Side::Lower) {
            return Ok(f.solve(rhs));
        }
        jitter *= 10.0;
    }
    Err(Error::Singular { jitter: last })
}

/// Convenience wrapper around [`solve_psd`] for a single right-hand vector.
pub fn solve_psd_vec(k: &SymMatrix, ridge: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let col = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = solve_psd(k, ridge, col.as_ref())?;
    Ok((0..x.nrows()).map(|i| x[(i, 0)]).collect())
}

fn self_adjoint_eigen(g: &SymMatrix) -> Result<SelfAdjointEigen<f64>> {
    SelfAdjointEigen::new(g.as_ref(), Side::Lower).map_err(|_| Error::EigenFailed { dim: g.dim() })
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn eigenvalues(g: &SymMatrix) -> Result<Vec<f64>> {
    let eig = self_adjoint_eigen(g)?;
    let s = eig.S().column_vector();
    let mut vals: Vec<f64> = (0..g.dim()).map(|i| s[i]).collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Eigenvalues in `[-`[`EIG_CLIP_REL`]` * lambda_max, 0)` are clipped to zero
/// as roundoff; an eigenvalue below that tolerance is reported as
/// [`Error::NotPsd`].
pub fn sqrt_psd(g: &SymMatrix) -> Result<SymMatrix> {
    let n = g.dim();
    let eig = self_adjoint_eigen(g)?;
    let u = eig.U();
    let s = eig.S().column_vector();

    let lambda_max = (0..n).map(|i| s[i]).fold(0.0f64, f64::max);
    let tol = EIG_CLIP_REL * lambda_max;
    let mut roots = vec![0.0; n];
    for i in 0..n {
        let lam = s[i];
        if lam < -tol {
            return Err(Error::NotPsd {
                eigenvalue: lam,
                tolerance: tol,
            });
        }
        roots[i] = lam.max(0.0).sqrt();
    }

    // U * diag(roots) * U^T, assembled through the lower triangle so the
    // result is exactly symmetric.
    let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * roots[j]);
    let full = &scaled * u.transpose();
    SymMatrix::from_fn(n, |i, j| if i == j { full[(i, i)] } else { full[(i, j)] })
}

/// Frobenius norm.
pub fn frob(m: MatRef<'_, f64>) -> f64 {
    m.norm_l2()
}
