//! Dense linear-algebra contracts the rest of the crate builds on: truncated
//! SVD, symmetric and general eigendecomposition, pseudoinverse, and least
//! squares.
//!
//! SVD and the symmetric eigensolver are Jacobi kernels (see [`jacobi`]'s
//! module docs for why); the general eigensolver takes eigenvalues from the
//! real Schur form and recovers eigenvectors by shifted inverse iteration.
//! This module pins down the contracts callers rely on: descending singular
//! values, deterministic sign conventions, and explicit truncation rules.

mod jacobi;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default energy threshold for automatic rank selection.
pub const DEFAULT_ENERGY: f64 = 0.9999;

/// Relative cutoff below which singular values are treated as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-12;

/// How many columns a truncated factorization keeps.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankSpec {
    /// Exactly this many columns.
    Exact(usize),
    /// Smallest r with sum_{i<=r} sigma_i^2 >= tau * sum sigma_i^2.
    Energy(f64),
    /// Every singular value, r = min(rows, cols).
    Full,
}

impl Default for RankSpec {
    fn default() -> Self {
        RankSpec::Energy(DEFAULT_ENERGY)
    }
}

/// Truncated singular value decomposition M ~ U diag(sigma) V^T.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// n x r, column-orthonormal.
    pub u: Matrix,
    /// r singular values, descending, non-negative.
    pub sigma: Vector,
    /// m x r, column-orthonormal.
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// U diag(sigma) V^T at the retained rank.
    pub fn reconstruct(&self) -> Matrix {
        &self.u * Matrix::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

/// Eigendecomposition of a real symmetric matrix, C = W diag(values) W^T.
#[derive(Debug, Clone)]
pub struct SymmetricEig {
    /// Real eigenvalues, descending.
    pub values: Vector,
    /// Orthogonal eigenvector matrix, one column per eigenvalue.
    pub vectors: Matrix,
}

/// Eigendecomposition of a general real matrix.
///
/// Complex eigenvalues appear in conjugate pairs with conjugate eigenvectors;
/// every eigenvector has unit 2-norm and its largest-magnitude component is
/// real and positive.
#[derive(Debug, Clone)]
pub struct Eig {
    pub values: CVector,
    /// One unit-norm eigenvector per column.
    pub vectors: CMatrix,
}

fn check_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid_input(format!(
            "{what} contains non-finite entries"
        )))
    }
}

fn raw_svd(m: &Matrix) -> Result<(Matrix, Vector, Matrix)> {
    let (mut u, sigma, mut v) = jacobi::svd_real(m)?;
    // Sign convention for deterministic factors: per column, the
    // largest-magnitude entry of U is made positive (first index wins ties).
    for j in 0..sigma.len() {
        if dominant_entry(u.column(j).iter().copied()) < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok((u, sigma, v))
}

/// Complex economy SVD; U columns of zero singular values are zero.
pub fn complex_svd(m: &CMatrix) -> Result<(CMatrix, Vector, CMatrix)> {
    jacobi::svd_complex(m)
}

/// Value of the largest-magnitude entry (first index wins ties).
fn dominant_entry(iter: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0f64;
    let mut best_abs = -1.0f64;
    for x in iter {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = x;
        }
    }
    best
}

fn select_rank(sigma: &Vector, spec: RankSpec, max_rank: usize) -> Result<usize> {
    match spec {
        RankSpec::Full => Ok(max_rank),
        RankSpec::Exact(r) => {
            if r < 1 || r > max_rank {
                Err(Error::invalid_argument(format!(
                    "rank {r} out of range [1, {max_rank}]"
                )))
            } else {
                Ok(r)
            }
        }
        RankSpec::Energy(tau) => {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::invalid_argument(format!(
                    "energy threshold {tau} must lie in (0, 1]"
                )));
            }
            let total: f64 = sigma.iter().map(|s| s * s).sum();
            let mut cumulative = 0.0;
            for (i, s) in sigma.iter().enumerate() {
                cumulative += s * s;
                if cumulative >= tau * total {
                    return Ok(i + 1);
                }
            }
            Ok(max_rank)
        }
    }
}

/// Truncated SVD of a dense matrix.
///
/// The reconstruction U diag(sigma) V^T equals M to working precision when the
/// full rank is retained; `RankSpec::Energy` keeps the smallest rank reaching
/// the requested squared-singular-value fraction.
pub fn svd_truncated(m: &Matrix, spec: RankSpec) -> Result<SvdResult> {
    check_finite(m, "matrix")?;
    let (u, sigma, v) = raw_svd(m)?;
    let r = select_rank(&sigma, spec, sigma.len())?;
    Ok(SvdResult {
        u: u.columns(0, r).into_owned(),
        sigma: sigma.rows(0, r).into_owned(),
        v: v.columns(0, r).into_owned(),
    })
}

/// Eigendecomposition of a real symmetric matrix.
///
/// Eigenvalues are returned in descending order. Each eigenvector is
/// normalized so its largest-magnitude component is positive, which makes the
/// output deterministic up to degenerate eigenvalues.
pub fn eig_symmetric(c: &Matrix) -> Result<SymmetricEig> {
    check_finite(c, "matrix")?;
    if c.nrows() != c.ncols() {
        return Err(Error::invalid_argument(format!(
            "matrix is {}x{}, expected square",
            c.nrows(),
            c.ncols()
        )));
    }
    let scale = c.amax();
    let asym = (c - c.transpose()).amax();
    if scale > 0.0 && asym > 1e-12 * scale {
        return Err(Error::invalid_input(format!(
            "matrix is not symmetric: max |C - C^T| = {asym:e} exceeds 1e-12 relative"
        )));
    }
    let sym = (c + c.transpose()) * 0.5;
    let (raw_values, raw_vectors) = jacobi::eig_symmetric_jacobi(&sym)?;
    let n = raw_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw_values[b].total_cmp(&raw_values[a]));
    let mut values = Vector::zeros(n);
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = raw_values[src];
        let mut col = raw_vectors.column(src).into_owned();
        if dominant_entry(col.iter().copied()) < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymmetricEig { values, vectors })
}

/// Eigendecomposition of a general (small) real square matrix.
///
/// Eigenvalues come from the real Schur form; eigenvectors are recovered by
/// shifted inverse iteration on the complexified matrix, which keeps the
/// residual ||Av - lambda v|| at working precision even for clustered
/// spectra. Conjugate pairs share conjugate eigenvectors exactly.
pub fn eig_general(a: &Matrix) -> Result<Eig> {
    check_finite(a, "matrix")?;
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::invalid_argument(format!(
            "matrix is {}x{}, expected square",
            n,
            a.ncols()
        )));
    }
    let values_raw = a.clone().complex_eigenvalues();
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let scale = a.norm().max(f64::MIN_POSITIVE);

    let mut values = CVector::zeros(n);
    let mut vectors = CMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let lambda = values_raw[i];
        let conjugate_partner = i + 1 < n
            && lambda.im != 0.0
            && values_raw[i + 1] == lambda.conj();
        let v = inverse_iteration(&ac, lambda, scale);
        values[i] = lambda;
        vectors.set_column(i, &v);
        if conjugate_partner {
            values[i + 1] = lambda.conj();
            vectors.set_column(i + 1, &v.map(|z| z.conj()));
            i += 2;
        } else {
            i += 1;
        }
    }
    Ok(Eig { values, vectors })
}

fn inverse_iteration(ac: &CMatrix, lambda: Complex64, scale: f64) -> CVector {
    let n = ac.nrows();
    if n == 1 {
        return CVector::from_element(1, Complex64::new(1.0, 0.0));
    }
    // Shift slightly off the eigenvalue so the LU stays finite; the huge
    // solution growth of the nearly singular solve is what isolates the
    // eigenvector.
    let jitter = Complex64::new(1e-12 * scale, 1e-12 * scale);
    let shifted = ac - CMatrix::identity(n, n) * (lambda + jitter);
    let lu = shifted.lu();

    // Fixed deterministic start vector with all directions populated.
    let mut x = CVector::from_fn(n, |k, _| {
        Complex64::new(1.0 + (k as f64) * 0.5, 0.25 + (k as f64) * 0.125)
    });
    x /= Complex64::new(x.norm(), 0.0);

    let mut best = x.clone();
    let mut best_residual = f64::INFINITY;
    for _ in 0..4 {
        let Some(y) = lu.solve(&x) else { break };
        let norm = y.norm();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        x = y / Complex64::new(norm, 0.0);
        let residual = (ac * &x - &x * lambda).norm();
        if residual < best_residual {
            best_residual = residual;
            best = x.clone();
        }
        if residual <= 1e-14 * scale {
            break;
        }
    }
    normalize_phase(best)
}

/// Rotates a complex vector so its largest-magnitude component is real
/// positive, then scales to unit 2-norm.
fn normalize_phase(mut v: CVector) -> CVector {
    let mut idx = 0;
    let mut best = -1.0f64;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = k;
        }
    }
    let pivot = v[idx];
    if pivot.norm() > 0.0 {
        let phase = pivot / Complex64::new(pivot.norm(), 0.0);
        v /= phase;
    }
    let norm = v.norm();
    if norm > 0.0 {
        v /= Complex64::new(norm, 0.0);
    }
    v
}

/// Moore-Penrose pseudoinverse via SVD.
///
/// Singular values below `SINGULAR_CUTOFF * sigma_max` are treated as zero.
pub fn pseudoinverse(m: &Matrix) -> Result<Matrix> {
    check_finite(m, "matrix")?;
    let (u, sigma, v) = raw_svd(m)?;
    let cutoff = SINGULAR_CUTOFF * sigma.max();
    let inv = sigma.map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
    Ok(&v * Matrix::from_diagonal(&inv) * u.transpose())
}

/// Minimum-norm least-squares solution of A x = b.
pub fn lstsq(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::invalid_argument(format!(
            "A has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    check_finite(a, "matrix")?;
    let (u, sigma, v) = raw_svd(a)?;
    let cutoff = SINGULAR_CUTOFF * sigma.max();
    let mut coeffs = u.transpose() * b;
    for i in 0..sigma.len() {
        coeffs[i] = if sigma[i] > cutoff {
            coeffs[i] / sigma[i]
        } else {
            0.0
        };
    }
    Ok(&v * coeffs)
}

/// Minimum-norm least-squares solution of A x = b over the complex field.
pub fn complex_lstsq(a: &CMatrix, b: &CVector) -> Result<CVector> {
    if a.nrows() != b.len() {
        return Err(Error::invalid_argument(format!(
            "A has {} rows but b has {} entries",
            a.nrows(),
            b.len()
        )));
    }
    let (u, sigma, v) = jacobi::svd_complex(a)?;
    let cutoff = SINGULAR_CUTOFF * sigma.max();
    let mut coeffs = u.adjoint() * b;
    for i in 0..sigma.len() {
        coeffs[i] = if sigma[i] > cutoff {
            coeffs[i] / Complex64::new(sigma[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    Ok(&v * coeffs)
}
