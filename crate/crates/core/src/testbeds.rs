//! Built-in desk-scale full-order models.
//!
//! These supply genuine PDE data for exercising the reduction machinery and
//! the optimizer without an external solver: a periodic advection-diffusion
//! integrator for time series, a Poisson source-placement problem for
//! parametric fields, and analytic ridge functions with exact gradients.


use serde::{Deserialize, Serialize};

use crate::dmd::SnapshotSeries;
use crate::error::{Error, Result};
use crate::numerics::Vector;

/// Advection CFL bound for the explicit upwind scheme.
pub const ADVECTION_CFL_LIMIT: f64 = 0.9;
/// Diffusion stability bound for the explicit central scheme.
pub const DIFFUSION_CFL_LIMIT: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    GaussianBump,
    TwoModeSine,
}

/// Periodic 1D advection-diffusion setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvectionDiffusionConfig {
    /// Number of grid points n.
    pub grid_points: usize,
    /// Periodic domain length.
    pub length: f64,
    /// Advection velocity c.
    pub velocity: f64,
    /// Diffusivity nu >= 0.
    pub diffusivity: f64,
    pub dt: f64,
    /// Number of time steps; the series holds steps + 1 snapshots.
    pub steps: usize,
    pub initial: InitialCondition,
    #[serde(default)]
    pub t0: f64,
}

impl AdvectionDiffusionConfig {
    pub fn dx(&self) -> f64 {
        self.length / self.grid_points as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 3 || self.length <= 0.0 || self.dt <= 0.0 || self.steps < 1 {
            return Err(Error::Config(
                "advection testbed needs grid_points >= 3, length > 0, dt > 0, steps >= 1".into(),
            ));
        }
        if self.diffusivity < 0.0 {
            return Err(Error::Config("diffusivity must be >= 0".into()));
        }
        let dx = self.dx();
        let advective = self.velocity.abs() * self.dt / dx;
        if advective > ADVECTION_CFL_LIMIT {
            return Err(Error::Config(format!(
                "advective CFL {advective:.3} exceeds {ADVECTION_CFL_LIMIT}"
            )));
        }
        let diffusive = self.diffusivity * self.dt / (dx * dx);
        if diffusive > DIFFUSION_CFL_LIMIT {
            return Err(Error::Config(format!(
                "diffusive CFL {diffusive:.3} exceeds {DIFFUSION_CFL_LIMIT}"
            )));
        }
        Ok(())
    }

    fn initial_state(&self) -> Vector {
        let n = self.grid_points;
        let l = self.length;
        Vector::from_fn(n, |i, _| {
            let x = i as f64 * self.dx();
            match self.initial {
                InitialCondition::GaussianBump => {
                    let d = x - 0.5 * l;
                    (-d * d / (2.0 * (0.1 * l).powi(2))).exp()
                }
                InitialCondition::TwoModeSine => {
                    let w = 2.0 * std::f64::consts::PI / l;
                    (w * x).sin() + 0.5 * (2.0 * w * x).sin()
                }
            }
        })
    }
}

/// Explicit upwind advection plus central diffusion on a periodic grid.
pub fn advection_diffusion_series(cfg: &AdvectionDiffusionConfig) -> Result<SnapshotSeries> {
    cfg.validate()?;
    Ok(run_advection(cfg))
}

/// Time stepping without the stability check; unit tests use this to run the
/// exact-transport case at CFL = 1.
fn run_advection(cfg: &AdvectionDiffusionConfig) -> SnapshotSeries {
    let n = cfg.grid_points;
    let dx = cfg.dx();
    let cr = cfg.velocity * cfg.dt / dx;
    let dr = cfg.diffusivity * cfg.dt / (dx * dx);

    let mut data = nalgebra::DMatrix::zeros(n, cfg.steps + 1);
    let mut u = cfg.initial_state();
    data.set_column(0, &u);
    let mut next = Vector::zeros(n);
    for step in 1..=cfg.steps {
        for i in 0..n {
            let left = u[(i + n - 1) % n];
            let right = u[(i + 1) % n];
            let here = u[i];
            // Convex upwind form: exact at a Courant number of one.
            let advected = if cfg.velocity >= 0.0 {
                (1.0 - cr) * here + cr * left
            } else {
                (1.0 + cr) * here - cr * right
            };
            next[i] = advected + dr * (right - 2.0 * here + left);
        }
        std::mem::swap(&mut u, &mut next);
        data.set_column(step, &u);
    }
    SnapshotSeries::new(data, cfg.t0, cfg.dt).expect("steps >= 1 gives >= 2 snapshots")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QoiKind {
    /// Solution value at the probe (bilinear between grid nodes).
    Probe,
    /// Trapezoidal integral of the solution over the unit square.
    Integral,
}

impl Default for QoiKind {
    fn default() -> Self {
        QoiKind::Probe
    }
}

/// Poisson source-placement problem on the unit square.
///
/// -laplace(u) = exp(-((x-a)^2 + (y-b)^2) / w^2) with homogeneous Dirichlet
/// boundary, discretized by 5-point finite differences on a g x g interior
/// grid and solved by conjugate gradients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonConfig {
    /// Interior grid resolution g (>= 16); the field has g^2 entries.
    pub grid: usize,
    /// Probe location in (0,1)^2.
    pub probe: (f64, f64),
    /// Source width used when the parameter vector carries only (a, b).
    #[serde(default = "default_source_width")]
    pub source_width: f64,
    #[serde(default)]
    pub qoi: QoiKind,
}

fn default_source_width() -> f64 {
    0.15
}

impl PoissonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 16 {
            return Err(Error::Config(format!(
                "poisson grid must be >= 16, got {}",
                self.grid
            )));
        }
        let (px, py) = self.probe;
        if !(0.0 < px && px < 1.0 && 0.0 < py && py < 1.0) {
            return Err(Error::Config(format!(
                "probe ({px}, {py}) must lie inside (0,1)^2"
            )));
        }
        if self.source_width <= 0.0 {
            return Err(Error::Config("source width must be positive".into()));
        }
        Ok(())
    }
}

/// 5-point Laplacian action v = A u on the interior grid (h^2-scaled).
fn apply_laplacian(u: &Vector, v: &mut Vector, g: usize) {
    let at = |u: &Vector, i: isize, j: isize| -> f64 {
        if i < 0 || j < 0 || i >= g as isize || j >= g as isize {
            0.0
        } else {
            u[(i as usize) * g + j as usize]
        }
    };
    for i in 0..g as isize {
        for j in 0..g as isize {
            v[(i as usize) * g + j as usize] = 4.0 * at(u, i, j)
                - at(u, i - 1, j)
                - at(u, i + 1, j)
                - at(u, i, j - 1)
                - at(u, i, j + 1);
        }
    }
}

/// Solves the Poisson problem at parameters `mu` = (a, b) or (a, b, w).
///
/// Returns the interior field (row-major over the grid) and the scalar
/// quantity of interest.
pub fn poisson_solve(cfg: &PoissonConfig, mu: &Vector) -> Result<(Vector, f64)> {
    cfg.validate()?;
    let (a, b, w) = match mu.len() {
        2 => (mu[0], mu[1], cfg.source_width),
        3 => (mu[0], mu[1], mu[2]),
        other => {
            return Err(Error::invalid_argument(format!(
                "poisson parameters must be (a, b) or (a, b, w), got dimension {other}"
            )))
        }
    };
    if !(0.0 < a && a < 1.0 && 0.0 < b && b < 1.0) {
        return Err(Error::invalid_argument(format!(
            "source center ({a}, {b}) must lie inside (0,1)^2"
        )));
    }
    if w <= 0.0 {
        return Err(Error::invalid_argument("source width must be positive"));
    }

    let g = cfg.grid;
    let h = 1.0 / (g as f64 + 1.0);
    // Right-hand side h^2 * f at the interior nodes.
    let mut rhs = Vector::zeros(g * g);
    for i in 0..g {
        for j in 0..g {
            let x = (i as f64 + 1.0) * h;
            let y = (j as f64 + 1.0) * h;
            let d2 = (x - a).powi(2) + (y - b).powi(2);
            rhs[i * g + j] = h * h * (-d2 / (w * w)).exp();
        }
    }

    let u = conjugate_gradient(&rhs, g)?;
    let qoi = poisson_qoi(cfg, &u)?;
    Ok((u, qoi))
}

/// Scalar quantity of interest of a (possibly predicted) Poisson field.
pub fn poisson_qoi(cfg: &PoissonConfig, field: &Vector) -> Result<f64> {
    let g = cfg.grid;
    if field.len() != g * g {
        return Err(Error::invalid_argument(format!(
            "field has {} entries, grid {g} needs {}",
            field.len(),
            g * g
        )));
    }
    Ok(match cfg.qoi {
        QoiKind::Probe => probe_value(field, g, cfg.probe),
        QoiKind::Integral => {
            let h = 1.0 / (g as f64 + 1.0);
            h * h * field.iter().sum::<f64>()
        }
    })
}

fn conjugate_gradient(rhs: &Vector, g: usize) -> Result<Vector> {
    let size = g * g;
    let max_iter = 10 * size;
    let tol = 1e-10 * rhs.norm();

    let mut u = Vector::zeros(size);
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = Vector::zeros(size);
    let mut rr = r.norm_squared();
    if rr.sqrt() <= tol {
        return Ok(u);
    }
    for _ in 0..max_iter {
        apply_laplacian(&p, &mut ap, g);
        let alpha = rr / p.dot(&ap);
        u.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= tol {
            return Ok(u);
        }
        let beta = rr_next / rr;
        rr = rr_next;
        p = &r + &p * beta;
    }
    Err(Error::Numerical(format!(
        "conjugate gradient did not reach residual {tol:e} within {max_iter} iterations"
    )))
}

/// Bilinear interpolation of the interior field at a point; the boundary ring
/// contributes zeros.
fn probe_value(u: &Vector, g: usize, probe: (f64, f64)) -> f64 {
    let h = 1.0 / (g as f64 + 1.0);
    // Full-grid coordinates including boundary: node (i, j) at (i h, j h).
    let value = |i: isize, j: isize| -> f64 {
        if i < 1 || j < 1 || i > g as isize || j > g as isize {
            0.0
        } else {
            u[(i as usize - 1) * g + (j as usize - 1)]
        }
    };
    let fx = probe.0 / h;
    let fy = probe.1 / h;
    let i0 = fx.floor() as isize;
    let j0 = fy.floor() as isize;
    let tx = fx - i0 as f64;
    let ty = fy - j0 as f64;
    (1.0 - tx) * (1.0 - ty) * value(i0, j0)
        + tx * (1.0 - ty) * value(i0 + 1, j0)
        + (1.0 - tx) * ty * value(i0, j0 + 1)
        + tx * ty * value(i0 + 1, j0 + 1)
}

/// Analytic ridge test functions over [-1, 1]^m with exact gradients.
#[derive(Debug, Clone)]
pub enum RidgeFunction {
    /// f(mu) = a . mu
    Linear(Vector),
    /// f(mu) = (a . mu)^2
    QuadraticRidge(Vector),
    /// f(mu) = exp(a . mu)
    ExpRidge(Vector),
}

impl RidgeFunction {
    pub fn from_id(id: &str, a: Vector) -> Result<Self> {
        match id {
            "linear" => Ok(RidgeFunction::Linear(a)),
            "quadratic_ridge" => Ok(RidgeFunction::QuadraticRidge(a)),
            "exp_ridge" => Ok(RidgeFunction::ExpRidge(a)),
            other => Err(Error::invalid_argument(format!(
                "unknown ridge function {other:?}; expected linear, quadratic_ridge or exp_ridge"
            ))),
        }
    }

    pub fn direction(&self) -> &Vector {
        match self {
            RidgeFunction::Linear(a)
            | RidgeFunction::QuadraticRidge(a)
            | RidgeFunction::ExpRidge(a) => a,
        }
    }

    pub fn evaluate(&self, mu: &Vector) -> f64 {
        match self {
            RidgeFunction::Linear(a) => a.dot(mu),
            RidgeFunction::QuadraticRidge(a) => a.dot(mu).powi(2),
            RidgeFunction::ExpRidge(a) => a.dot(mu).exp(),
        }
    }

    pub fn gradient(&self, mu: &Vector) -> Vector {
        match self {
            RidgeFunction::Linear(a) => a.clone(),
            RidgeFunction::QuadraticRidge(a) => a * (2.0 * a.dot(mu)),
            RidgeFunction::ExpRidge(a) => a * a.dot(mu).exp(),
        }
    }
}
