//! Active subspace identification for a scalar quantity of interest.
//!
//! The active subspace of a function is the dominant eigenspace of the
//! uncentered covariance of its gradient, estimated here by Monte Carlo over
//! the uniform density on the normalized box [-1, 1]^m. The module covers the
//! whole workflow: gradient sampling (analytic or finite-difference),
//! covariance estimation, eigendecomposition and partitioning, projection and
//! lifting between full and active coordinates, and a low-dimensional
//! polynomial surrogate of the output.

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::numerics::{self, lstsq, Matrix, Vector};

/// Monte Carlo default: samples per parameter-space dimension.
pub const DEFAULT_SAMPLES_PER_DIM: usize = 1000;

/// Default finite-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// One gradient observation in normalized coordinates.
#[derive(Debug, Clone)]
pub struct GradientSample {
    /// Location in [-1, 1]^m.
    pub mu: Vector,
    /// Gradient of the quantity of interest at `mu`.
    pub grad: Vector,
}

impl GradientSample {
    pub fn new(mu: Vector, grad: Vector) -> Result<Self> {
        if mu.len() != grad.len() {
            return Err(Error::invalid_argument(format!(
                "mu has dimension {}, gradient has {}",
                mu.len(),
                grad.len()
            )));
        }
        if !mu.iter().chain(grad.iter()).all(|x| x.is_finite()) {
            return Err(Error::invalid_input("gradient sample has non-finite entries"));
        }
        if mu.iter().any(|&x| !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&x)) {
            return Err(Error::invalid_input(format!(
                "sample location {:?} outside [-1, 1]^m",
                mu.as_slice()
            )));
        }
        Ok(GradientSample { mu, grad })
    }
}

/// How the active dimension M is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimRule {
    /// Keep exactly this many directions.
    Fixed(usize),
    /// Split at the largest eigenvalue gap (ties -> smallest M).
    SpectralGap,
}

/// Eigendecomposition of the gradient covariance, partitioned into active and
/// inactive blocks.
#[derive(Debug, Clone)]
pub struct ActiveSubspace {
    /// Covariance eigenvalues, descending.
    pub eigenvalues: Vector,
    /// Orthogonal eigenvector matrix W, one column per eigenvalue.
    pub eigenvectors: Matrix,
    /// Number of active directions M.
    pub active_dim: usize,
}

impl ActiveSubspace {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// First M eigenvectors, spanning the active subspace.
    pub fn w1(&self) -> Matrix {
        self.eigenvectors.columns(0, self.active_dim).into_owned()
    }

    /// Remaining eigenvectors, spanning the inactive subspace.
    pub fn w2(&self) -> Matrix {
        self.eigenvectors
            .columns(self.active_dim, self.dim() - self.active_dim)
            .into_owned()
    }

    /// Active coordinates mu_M = W1^T mu.
    pub fn project(&self, mu: &Vector) -> Result<Vector> {
        if mu.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "parameter has dimension {}, subspace expects {}",
                mu.len(),
                self.dim()
            )));
        }
        Ok(self.w1().transpose() * mu)
    }

    /// Inactive coordinates eta = W2^T mu.
    pub fn project_inactive(&self, mu: &Vector) -> Result<Vector> {
        if mu.len() != self.dim() {
            return Err(Error::invalid_argument(format!(
                "parameter has dimension {}, subspace expects {}",
                mu.len(),
                self.dim()
            )));
        }
        Ok(self.w2().transpose() * mu)
    }

    /// Full-space point W1 mu_M + W2 eta, clipped to [-1, 1]^m.
    ///
    /// The flag reports whether clipping changed any component. A zero `eta`
    /// gives the minimum-norm representative of `mu_m`.
    pub fn lift(&self, mu_m: &Vector, eta: &Vector) -> Result<(Vector, bool)> {
        if mu_m.len() != self.active_dim || eta.len() != self.dim() - self.active_dim {
            return Err(Error::invalid_argument(format!(
                "lift expects ({}, {}) coordinates, got ({}, {})",
                self.active_dim,
                self.dim() - self.active_dim,
                mu_m.len(),
                eta.len()
            )));
        }
        let mut mu = self.w1() * mu_m + self.w2() * eta;
        let mut clipped = false;
        for x in mu.iter_mut() {
            if *x > 1.0 {
                *x = 1.0;
                clipped = true;
            } else if *x < -1.0 {
                *x = -1.0;
                clipped = true;
            }
        }
        Ok((mu, clipped))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let w_rows: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| self.eigenvectors.row(i).iter().copied().collect())
            .collect();
        serde_json::json!({
            "eigenvalues": self.eigenvalues.as_slice(),
            "W": w_rows,
            "M": self.active_dim,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            eigenvalues: Vec<f64>,
            #[serde(rename = "W")]
            w: Vec<Vec<f64>>,
            #[serde(rename = "M")]
            m: usize,
        }
        let raw: Raw = serde_json::from_value(value.clone())?;
        let dim = raw.eigenvalues.len();
        if raw.w.len() != dim || raw.w.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("W must be a square matrix matching eigenvalues".into()));
        }
        if raw.m == 0 || raw.m >= dim {
            return Err(Error::Config(format!("M = {} out of range", raw.m)));
        }
        let eigenvectors = Matrix::from_fn(dim, dim, |i, j| raw.w[i][j]);
        Ok(ActiveSubspace {
            eigenvalues: Vector::from_vec(raw.eigenvalues),
            eigenvectors,
            active_dim: raw.m,
        })
    }
}

/// Central finite-difference gradient, one-sided at the box boundary.
pub fn finite_diff_gradient<F>(f: F, mu: &Vector, h: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<f64>,
{
    let m = mu.len();
    let mut grad = Vector::zeros(m);
    for i in 0..m {
        let mut hi = mu.clone();
        let mut lo = mu.clone();
        let up_ok = mu[i] + h <= 1.0;
        let down_ok = mu[i] - h >= -1.0;
        match (up_ok, down_ok) {
            (true, true) => {
                hi[i] += h;
                lo[i] -= h;
                grad[i] = (f(&hi)? - f(&lo)?) / (2.0 * h);
            }
            (true, false) => {
                hi[i] += h;
                grad[i] = (f(&hi)? - f(mu)?) / h;
            }
            (false, true) => {
                lo[i] -= h;
                grad[i] = (f(mu)? - f(&lo)?) / h;
            }
            (false, false) => {
                return Err(Error::invalid_argument(format!(
                    "step {h} does not fit inside [-1, 1] at component {i}"
                )));
            }
        }
    }
    Ok(grad)
}

/// Monte Carlo estimate of the uncentered gradient covariance
/// C = (1/N) sum grad_i grad_i^T.
pub fn estimate_covariance(samples: &[GradientSample]) -> Result<Matrix> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid_argument("covariance needs at least one sample"));
    };
    let m = first.grad.len();
    let mut c = Matrix::zeros(m, m);
    for (k, s) in samples.iter().enumerate() {
        if s.grad.len() != m {
            return Err(Error::invalid_argument(format!(
                "sample {k} has dimension {}, expected {m}",
                s.grad.len()
            )));
        }
        // g g^T is exactly symmetric, so the sum stays symmetric bitwise.
        c.syger(1.0 / samples.len() as f64, &s.grad, &s.grad, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..m {
        for j in (i + 1)..m {
            c[(i, j)] = c[(j, i)];
        }
    }
    Ok(c)
}

/// Draws locations uniformly on [-1, 1]^m and evaluates the gradient there.
pub fn sample_gradients<G>(grad: G, dim: usize, count: usize, seed: u64) -> Result<Vec<GradientSample>>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    if dim == 0 || count == 0 {
        return Err(Error::invalid_argument("dimension and sample count must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let mu = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
        let g = grad(&mu)?;
        samples.push(GradientSample::new(mu, g)?);
    }
    Ok(samples)
}

/// Eigendecomposes the covariance and partitions it into active and inactive
/// blocks according to `rule`.
pub fn identify(c: &Matrix, rule: DimRule) -> Result<ActiveSubspace> {
    let eig = numerics::eig_symmetric(c)?;
    let m = eig.values.len();
    let scale = eig.values[0].abs().max(1.0);
    if eig.values[m - 1] < -1e-12 * scale {
        return Err(Error::invalid_input(format!(
            "covariance is not positive semidefinite: smallest eigenvalue {:e}",
            eig.values[m - 1]
        )));
    }
    let active_dim = match rule {
        DimRule::Fixed(dim) => {
            if dim == 0 || dim >= m {
                return Err(Error::invalid_argument(format!(
                    "active dimension {dim} must lie in [1, {}]",
                    m - 1
                )));
            }
            dim
        }
        DimRule::SpectralGap => {
            if m < 2 {
                return Err(Error::invalid_argument(
                    "spectral gap rule needs at least 2 dimensions",
                ));
            }
            let mut best_gap = f64::NEG_INFINITY;
            let mut best_m = 1;
            for i in 0..m - 1 {
                let gap = eig.values[i] - eig.values[i + 1];
                if gap > best_gap {
                    best_gap = gap;
                    best_m = i + 1;
                }
            }
            best_m
        }
    };
    Ok(ActiveSubspace {
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        active_dim,
    })
}

/// Polynomial surrogate g(mu_M) of the quantity of interest over the active
/// variable, for M of 1 or 2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RidgeSurrogate {
    pub active_dim: usize,
    pub degree: usize,
    /// Coefficients in the order produced by [`monomials`].
    pub coefficients: Vec<f64>,
}

/// Monomial basis values at a point, for M in {1, 2}.
///
/// Ordering: ascending total degree; within a degree, descending power of the
/// first coordinate (1, x, y, x^2, xy, y^2, ...).
pub fn monomials(mu_m: &Vector, degree: usize) -> Vec<f64> {
    match mu_m.len() {
        1 => (0..=degree).map(|d| mu_m[0].powi(d as i32)).collect(),
        2 => {
            let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
            for total in 0..=degree {
                for yk in 0..=total {
                    let xk = total - yk;
                    out.push(mu_m[0].powi(xk as i32) * mu_m[1].powi(yk as i32));
                }
            }
            out
        }
        other => panic!("monomials defined for 1 or 2 active variables, got {other}"),
    }
}

/// Least-squares polynomial fit of (mu_M, f) pairs.
pub fn fit_surrogate(pairs: &[(Vector, f64)], degree: usize) -> Result<RidgeSurrogate> {
    let Some((first, _)) = pairs.first() else {
        return Err(Error::invalid_argument("surrogate fit needs at least one pair"));
    };
    let active_dim = first.len();
    if !(1..=2).contains(&active_dim) {
        return Err(Error::invalid_argument(format!(
            "surrogate supports 1 or 2 active variables, got {active_dim}"
        )));
    }
    let basis_len = monomials(first, degree).len();
    if pairs.len() < basis_len {
        return Err(Error::invalid_argument(format!(
            "underdetermined fit: {} pairs for a basis of {basis_len}",
            pairs.len()
        )));
    }
    let mut design = Matrix::zeros(pairs.len(), basis_len);
    let mut rhs = Vector::zeros(pairs.len());
    for (row, (mu_m, f)) in pairs.iter().enumerate() {
        if mu_m.len() != active_dim {
            return Err(Error::invalid_argument("inconsistent active dimensions in pairs"));
        }
        let basis = monomials(mu_m, degree);
        for (col, b) in basis.into_iter().enumerate() {
            design[(row, col)] = b;
        }
        rhs[row] = *f;
    }
    let coefficients = lstsq(&design, &rhs)?;
    Ok(RidgeSurrogate {
        active_dim,
        degree,
        coefficients: coefficients.as_slice().to_vec(),
    })
}

impl RidgeSurrogate {
    pub fn evaluate(&self, mu_m: &Vector) -> f64 {
        monomials(mu_m, self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// Sufficient-summary-plot rows: active coordinates followed by the output.
pub fn summary_rows(subspace: &ActiveSubspace, data: &[(Vector, f64)]) -> Result<DMatrix<f64>> {
    if data.is_empty() {
        return Err(Error::invalid_argument("summary export needs data"));
    }
    let m_active = subspace.active_dim;
    let mut out = DMatrix::zeros(data.len(), m_active + 1);
    for (row, (mu, f)) in data.iter().enumerate() {
        let mu_m = subspace.project(mu)?;
        for j in 0..m_active {
            out[(row, j)] = mu_m[j];
        }
        out[(row, m_active)] = *f;
    }
    Ok(out)
}

/// Parses the gradient-sample CSV layout: m location columns followed by m
/// gradient columns per row.
pub fn samples_from_matrix(table: &DMatrix<f64>) -> Result<Vec<GradientSample>> {
    if table.ncols() % 2 != 0 {
        return Err(Error::parse(
            format!(
                "gradient sample table has {} columns, expected an even count",
                table.ncols()
            ),
            None,
        ));
    }
    let m = table.ncols() / 2;
    let mut samples = Vec::with_capacity(table.nrows());
    for i in 0..table.nrows() {
        let mu = Vector::from_fn(m, |j, _| table[(i, j)]);
        let grad = Vector::from_fn(m, |j, _| table[(i, m + j)]);
        samples.push(GradientSample::new(mu, grad)?);
    }
    Ok(samples)
}

/// Physical-coordinate gradient samples ingested into normalized coordinates;
/// the chain rule scales each gradient component by half the box width.
pub fn normalize_sample(
    box_domain: &BoxDomain,
    mu_physical: &Vector,
    grad_physical: &Vector,
) -> Result<GradientSample> {
    let mu = box_domain.normalize(mu_physical)?;
    let scale = box_domain.gradient_scale();
    let grad = grad_physical.component_mul(&scale);
    GradientSample::new(mu, grad)
}
