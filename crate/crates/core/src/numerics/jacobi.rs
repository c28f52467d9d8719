//! Jacobi factorization kernels: one-sided Jacobi SVD (real and complex) and
//! the cyclic Jacobi eigensolver for symmetric matrices.
//!
//! One-sided Jacobi orthogonalizes matrix columns pairwise until every pair
//! satisfies |c_p . c_q| <= eps ||c_p|| ||c_q||, which keeps full relative
//! accuracy on rank-deficient input where QR-iteration SVDs can fail badly.

use nalgebra::DVector;

use super::{CMatrix, Complex64, Matrix, Vector};
use crate::error::{Error, Result};

const PAIR_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 60;

/// Stable 2x2 Jacobi rotation angle for the Gram block [[alpha, g], [g, beta]].
fn rotation(alpha: f64, beta: f64, g: f64) -> (f64, f64) {
    let tau = (beta - alpha) / (2.0 * g);
    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, c * t)
}

/// Economy SVD of a real matrix with rows >= cols.
///
/// Returns (U, sigma, V) with U n x m, sigma descending, V m x m; U columns
/// belonging to zero singular values are completed to an orthonormal set.
fn svd_tall_real(a: &Matrix) -> Result<(Matrix, Vector, Matrix)> {
    let m = a.ncols();
    let mut work = a.clone();
    let mut v = Matrix::identity(m, m);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let alpha = work.column(p).norm_squared();
                let beta = work.column(q).norm_squared();
                let g = work.column(p).dot(&work.column(q));
                if g.abs() <= PAIR_TOL * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                let (c, s) = rotation(alpha, beta, g);
                rotate_real(&mut work, p, q, c, s);
                rotate_real(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        // Quadratic convergence makes this unreachable in practice; check the
        // final state before giving up.
        let worst = worst_pair_real(&work);
        if worst > 1e-10 {
            return Err(Error::Numerical(format!(
                "one-sided Jacobi SVD did not converge (worst pair cosine {worst:e})"
            )));
        }
    }

    let mut sigma: Vec<(f64, usize)> = (0..m).map(|j| (work.column(j).norm(), j)).collect();
    sigma.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n = a.nrows();
    let mut u = Matrix::zeros(n, m);
    let mut v_sorted = Matrix::zeros(m, m);
    let mut values = Vector::zeros(m);
    for (dst, &(s, src)) in sigma.iter().enumerate() {
        values[dst] = s;
        v_sorted.set_column(dst, &v.column(src));
        if s > 0.0 {
            u.set_column(dst, &(work.column(src) / s));
        }
    }
    complete_orthonormal_real(&mut u, &values);
    Ok((u, values, v_sorted))
}

fn rotate_real(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = c * xp - s * xq;
        m[(i, q)] = s * xp + c * xq;
    }
}

fn worst_pair_real(work: &Matrix) -> f64 {
    let m = work.ncols();
    let mut worst = 0.0f64;
    for p in 0..m.saturating_sub(1) {
        for q in (p + 1)..m {
            let denom = work.column(p).norm() * work.column(q).norm();
            if denom > 0.0 {
                worst = worst.max(work.column(p).dot(&work.column(q)).abs() / denom);
            }
        }
    }
    worst
}

/// Replaces zero columns of `u` with unit vectors orthogonal to all others.
fn complete_orthonormal_real(u: &mut Matrix, sigma: &Vector) {
    let n = u.nrows();
    let r = u.ncols();
    let needs: Vec<usize> = (0..r).filter(|&j| sigma[j] == 0.0).collect();
    if needs.is_empty() {
        return;
    }
    let mut filled: Vec<DVector<f64>> = (0..r)
        .filter(|&j| sigma[j] > 0.0)
        .map(|j| u.column(j).into_owned())
        .collect();
    let mut targets = needs.into_iter();
    let mut current = targets.next();
    for k in 0..n {
        let Some(slot) = current else { break };
        let mut cand = DVector::zeros(n);
        cand[k] = 1.0;
        for f in &filled {
            let proj = f.dot(&cand);
            cand -= f * proj;
        }
        let norm = cand.norm();
        if norm > 0.5 {
            cand /= norm;
            u.set_column(slot, &cand);
            filled.push(cand);
            current = targets.next();
        }
    }
}

/// Economy SVD dispatching on shape; result U is rows x r, V is cols x r with
/// r = min(rows, cols), both column-orthonormal, sigma descending.
pub fn svd_real(a: &Matrix) -> Result<(Matrix, Vector, Matrix)> {
    if a.nrows() >= a.ncols() {
        svd_tall_real(a)
    } else {
        let (u, sigma, v) = svd_tall_real(&a.transpose())?;
        Ok((v, sigma, u))
    }
}

/// Complex economy SVD by one-sided Jacobi with unitary pair rotations.
///
/// U columns for zero singular values are left as zero columns; callers using
/// the zero block must complete it themselves.
pub fn svd_complex(a: &CMatrix) -> Result<(CMatrix, Vector, CMatrix)> {
    if a.nrows() >= a.ncols() {
        svd_tall_complex(a)
    } else {
        let (u, sigma, v) = svd_tall_complex(&a.adjoint())?;
        Ok((v, sigma, u))
    }
}

fn svd_tall_complex(a: &CMatrix) -> Result<(CMatrix, Vector, CMatrix)> {
    let m = a.ncols();
    let mut work = a.clone();
    let mut v = CMatrix::identity(m, m);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let alpha = work.column(p).norm_squared();
                let beta = work.column(q).norm_squared();
                let g = work.column(p).dotc(&work.column(q));
                if g.norm() <= PAIR_TOL * (alpha * beta).sqrt() || g.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                // Phase-align the pair so the real rotation formulas apply.
                let phase = g / Complex64::new(g.norm(), 0.0);
                let (c, s) = rotation(alpha, beta, g.norm());
                rotate_complex(&mut work, p, q, c, s, phase);
                rotate_complex(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        let worst = worst_pair_complex(&work);
        if worst > 1e-10 {
            return Err(Error::Numerical(format!(
                "one-sided Jacobi complex SVD did not converge (worst pair cosine {worst:e})"
            )));
        }
    }

    let mut sigma: Vec<(f64, usize)> = (0..m).map(|j| (work.column(j).norm(), j)).collect();
    sigma.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n = a.nrows();
    let mut u = CMatrix::zeros(n, m);
    let mut v_sorted = CMatrix::zeros(m, m);
    let mut values = Vector::zeros(m);
    for (dst, &(s, src)) in sigma.iter().enumerate() {
        values[dst] = s;
        v_sorted.set_column(dst, &v.column(src));
        if s > 0.0 {
            u.set_column(dst, &(work.column(src) / Complex64::new(s, 0.0)));
        }
    }
    Ok((u, values, v_sorted))
}

/// Applies the unitary pair rotation; `dotc(c_p, c_q)` has phase `phase`.
fn rotate_complex(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let cc = Complex64::new(c, 0.0);
    let sp = phase * s;
    for i in 0..m.nrows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = cc * xp - sp.conj() * xq;
        m[(i, q)] = sp * xp + cc * xq;
    }
}

fn worst_pair_complex(work: &CMatrix) -> f64 {
    let m = work.ncols();
    let mut worst = 0.0f64;
    for p in 0..m.saturating_sub(1) {
        for q in (p + 1)..m {
            let denom = work.column(p).norm() * work.column(q).norm();
            if denom > 0.0 {
                worst = worst.max(work.column(p).dotc(&work.column(q)).norm() / denom);
            }
        }
    }
    worst
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns unsorted (values, vectors) with A = V diag(values) V^T.
pub fn eig_symmetric_jacobi(a: &Matrix) -> Result<(Vector, Matrix)> {
    let n = a.nrows();
    let mut work = a.clone();
    let mut v = Matrix::identity(n, n);
    let scale = work.amax().max(f64::MIN_POSITIVE);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                off = off.max(work[(p, q)].abs());
            }
        }
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = work[(p, q)];
                if apq.abs() <= 1e-18 * scale {
                    continue;
                }
                let (c, s) = rotation(work[(p, p)], work[(q, q)], apq);
                // A <- G^T A G on rows/columns p and q.
                for k in 0..n {
                    let akp = work[(k, p)];
                    let akq = work[(k, q)];
                    work[(k, p)] = c * akp - s * akq;
                    work[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = work[(p, k)];
                    let aqk = work[(q, k)];
                    work[(p, k)] = c * apk - s * aqk;
                    work[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let mut off = 0.0f64;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                off = off.max(work[(p, q)].abs());
            }
        }
        if off > 1e-10 * scale {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge (off-diagonal {off:e})"
            )));
        }
    }
    Ok((work.diagonal(), v))
}
