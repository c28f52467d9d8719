//! Dynamic mode decomposition of equispaced snapshot series.
//!
//! Fits the best linear operator carrying each snapshot to the next one,
//! without ever forming that operator at full dimension: the snapshots are
//! projected onto their leading left-singular subspace, the reduced operator
//! is eigendecomposed there, and the eigenpairs are lifted back. The fitted
//! model reconstructs the training window and forecasts beyond it with pure
//! exponential time dynamics per mode.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::numerics::{
    self, complex_lstsq, svd_truncated, CMatrix, CVector, Complex64, Matrix, RankSpec, Vector,
    SINGULAR_CUTOFF,
};

/// Time-equispaced state vectors; column k holds the state at t0 + k dt.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub data: Matrix,
    pub t0: f64,
    pub dt: f64,
}

impl SnapshotSeries {
    pub fn new(data: Matrix, t0: f64, dt: f64) -> Result<Self> {
        if data.ncols() < 2 {
            return Err(Error::invalid_argument(format!(
                "a snapshot series needs at least 2 columns, got {}",
                data.ncols()
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid_argument(format!("dt must be positive, got {dt}")));
        }
        Ok(SnapshotSeries { data, t0, dt })
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of snapshots m.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn snapshot(&self, k: usize) -> Vector {
        self.data.column(k).into_owned()
    }

    pub fn time_of(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Sub-series of `count` columns starting at `start`, every `stride`-th.
    pub fn strided(&self, start: usize, stride: usize, count: usize) -> Result<SnapshotSeries> {
        if stride == 0 {
            return Err(Error::invalid_argument("stride must be >= 1"));
        }
        let last = start + (count.saturating_sub(1)) * stride;
        if count < 2 || last >= self.len() {
            return Err(Error::invalid_argument(format!(
                "strided window [{start}, {last}] does not fit in {} snapshots",
                self.len()
            )));
        }
        let mut data = Matrix::zeros(self.state_dim(), count);
        for j in 0..count {
            data.set_column(j, &self.data.column(start + j * stride));
        }
        SnapshotSeries::new(data, self.time_of(start), stride as f64 * self.dt)
    }

    /// Writes `data.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        io::write_matrix_file(&dir.join("data.csv"), &self.data)?;
        let meta = serde_json::json!({
            "t0": self.t0,
            "dt": self.dt,
            "n": self.state_dim(),
            "m": self.len(),
        });
        fs::write(dir.join("meta.json"), format!("{:#}\n", meta))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<SnapshotSeries> {
        #[derive(Deserialize)]
        struct Meta {
            t0: f64,
            dt: f64,
            n: usize,
            m: usize,
        }
        let meta_path = dir.join("meta.json");
        let meta: Meta = serde_json::from_str(&fs::read_to_string(&meta_path).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", meta_path.display())))
        })?)?;
        let data = io::read_matrix_file(&dir.join("data.csv"))?;
        if data.nrows() != meta.n || data.ncols() != meta.m {
            return Err(Error::Config(format!(
                "meta.json declares {}x{} but data.csv is {}x{}",
                meta.n,
                meta.m,
                data.nrows(),
                data.ncols()
            )));
        }
        SnapshotSeries::new(data, meta.t0, meta.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Reduced eigenvectors lifted through the snapshot POD basis.
    Projected,
    /// Eigenvectors of the full best-fit operator (the default).
    Exact,
}

impl Default for ModeKind {
    fn default() -> Self {
        ModeKind::Exact
    }
}

/// Fitted decomposition: spatial modes with one complex frequency each.
#[derive(Debug, Clone)]
pub struct DmdModel {
    /// n x r complex mode matrix.
    pub modes: CMatrix,
    /// Discrete-time eigenvalues of the reduced operator.
    pub eigenvalues: CVector,
    /// Mode amplitudes fitted to the first snapshot.
    pub amplitudes: CVector,
    pub mode_kind: ModeKind,
    pub t0: f64,
    pub dt: f64,
}

/// One spectrum row: eigenvalue, continuous frequency, amplitude magnitude.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumPoint {
    pub eigenvalue: Complex64,
    pub omega: Complex64,
    pub amplitude: f64,
}

/// Fits a DMD model on a snapshot series.
///
/// Ranks beyond min(n, m-1) are rejected; zero singular values inside the
/// requested rank reduce it with a warning.
pub fn fit(series: &SnapshotSeries, rank: RankSpec, mode_kind: ModeKind) -> Result<DmdModel> {
    let n = series.state_dim();
    let m = series.len();
    let x = series.data.columns(0, m - 1).into_owned();
    let y = series.data.columns(1, m - 1).into_owned();

    if let RankSpec::Exact(r) = rank {
        let max_rank = n.min(m - 1);
        if r < 1 || r > max_rank {
            return Err(Error::invalid_argument(format!(
                "rank {r} out of range [1, {max_rank}] for {n} states and {m} snapshots"
            )));
        }
    }
    let svd = svd_truncated(&x, rank)?;
    let mut r = svd.rank();
    let cutoff = SINGULAR_CUTOFF * svd.sigma[0].max(f64::MIN_POSITIVE);
    let effective = svd.sigma.iter().take_while(|s| **s > cutoff).count().max(1);
    if effective < r {
        log::warn!(
            "requested rank {r} includes zero singular values; reducing to {effective}"
        );
        r = effective;
    }
    let u = svd.u.columns(0, r).into_owned();
    let v = svd.v.columns(0, r).into_owned();
    let sigma_inv = Matrix::from_diagonal(&svd.sigma.rows(0, r).map(|s| 1.0 / s));

    // Reduced operator u^T y v sigma^-1 and its eigendecomposition.
    let y_v_sinv = &y * &v * &sigma_inv;
    let atilde = u.transpose() * &y_v_sinv;
    let eig = numerics::eig_general(&atilde)?;

    let modes = match mode_kind {
        ModeKind::Projected => u.map(complex) * &eig.vectors,
        ModeKind::Exact => y_v_sinv.map(complex) * &eig.vectors,
    };
    let x1 = series.snapshot(0).map(complex);
    let amplitudes = complex_lstsq(&modes, &x1)?;

    Ok(DmdModel {
        modes,
        eigenvalues: eig.values,
        amplitudes,
        mode_kind,
        t0: series.t0,
        dt: series.dt,
    })
}

fn complex(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn power(lambda: Complex64, exp: usize) -> Complex64 {
    if exp == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        lambda.powi(exp as i32)
    }
}

impl DmdModel {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn state_dim(&self) -> usize {
        self.modes.nrows()
    }

    /// Continuous frequency of mode i, ln(lambda)/dt on the principal branch.
    ///
    /// Eigenvalues on the negative real axis land on the branch cut and get an
    /// imaginary part of pi/dt; a zero eigenvalue yields -inf real part.
    pub fn omega(&self, i: usize) -> Complex64 {
        let lambda = self.eigenvalues[i];
        if lambda == Complex64::new(0.0, 0.0) {
            Complex64::new(f64::NEG_INFINITY, 0.0)
        } else {
            lambda.ln() / self.dt
        }
    }

    fn combine(&self, factors: impl Fn(usize) -> Complex64) -> CVector {
        let weighted = CVector::from_fn(self.rank(), |i, _| factors(i) * self.amplitudes[i]);
        &self.modes * weighted
    }

    pub(crate) fn reconstruct_complex(&self, k: usize) -> Result<CVector> {
        if k < 1 {
            return Err(Error::invalid_argument("snapshot index k starts at 1"));
        }
        Ok(self.combine(|i| power(self.eigenvalues[i], k - 1)))
    }

    /// Training-window snapshot k (1-based), Re(Phi diag(lambda^(k-1)) b).
    pub fn reconstruct(&self, k: usize) -> Result<Vector> {
        Ok(self.reconstruct_complex(k)?.map(|z| z.re))
    }

    /// State at continuous time t >= t0, Re(Phi exp(omega (t - t0)) b).
    ///
    /// Zero eigenvalues contribute only at t = t0 and are dropped beyond it.
    pub fn forecast(&self, t: f64) -> Result<Vector> {
        if !(t >= self.t0) {
            return Err(Error::invalid_argument(format!(
                "forecast time {t} precedes t0 = {}",
                self.t0
            )));
        }
        let elapsed = t - self.t0;
        let dropped = std::cell::Cell::new(false);
        let out = self.combine(|i| {
            let lambda = self.eigenvalues[i];
            if lambda == Complex64::new(0.0, 0.0) {
                if elapsed == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    dropped.set(true);
                    Complex64::new(0.0, 0.0)
                }
            } else {
                ((lambda.ln() / self.dt) * elapsed).exp()
            }
        });
        if dropped.get() {
            log::warn!("zero-eigenvalue modes contribute nothing beyond t0; dropped");
        }
        Ok(out.map(|z| z.re))
    }

    /// Spectrum rows sorted by amplitude magnitude, largest first.
    pub fn spectrum(&self) -> Vec<SpectrumPoint> {
        let mut rows: Vec<SpectrumPoint> = (0..self.rank())
            .map(|i| SpectrumPoint {
                eigenvalue: self.eigenvalues[i],
                omega: self.omega(i),
                amplitude: self.amplitudes[i].norm(),
            })
            .collect();
        rows.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude));
        rows
    }

    /// Frobenius-norm relative reconstruction error over the training window.
    pub fn relative_error(&self, series: &SnapshotSeries) -> Result<f64> {
        if series.state_dim() != self.state_dim() {
            return Err(Error::invalid_argument(format!(
                "series has {} states, model has {}",
                series.state_dim(),
                self.state_dim()
            )));
        }
        let mut err = 0.0;
        for k in 1..=series.len() {
            let diff = self.reconstruct(k)? - series.snapshot(k - 1);
            err += diff.norm_squared();
        }
        Ok(err.sqrt() / series.data.norm())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |z: &Complex64| vec![z.re, z.im];
        let modes: Vec<Vec<Vec<f64>>> = (0..self.state_dim())
            .map(|i| (0..self.rank()).map(|j| pair(&self.modes[(i, j)])).collect())
            .collect();
        serde_json::json!({
            "rank": self.rank(),
            "mode_kind": match self.mode_kind {
                ModeKind::Projected => "projected",
                ModeKind::Exact => "exact",
            },
            "t0": self.t0,
            "dt": self.dt,
            "eigenvalues": self.eigenvalues.iter().map(pair).collect::<Vec<_>>(),
            "amplitudes": self.amplitudes.iter().map(pair).collect::<Vec<_>>(),
            "modes": modes,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<DmdModel> {
        #[derive(Deserialize)]
        struct Raw {
            mode_kind: ModeKind,
            t0: f64,
            dt: f64,
            eigenvalues: Vec<[f64; 2]>,
            amplitudes: Vec<[f64; 2]>,
            modes: Vec<Vec<[f64; 2]>>,
        }
        let raw: Raw = serde_json::from_value(value.clone())?;
        let r = raw.eigenvalues.len();
        let n = raw.modes.len();
        if raw.amplitudes.len() != r || n == 0 || raw.modes.iter().any(|row| row.len() != r) {
            return Err(Error::Config("inconsistent model dimensions".into()));
        }
        let c = |p: &[f64; 2]| Complex64::new(p[0], p[1]);
        Ok(DmdModel {
            modes: CMatrix::from_fn(n, r, |i, j| c(&raw.modes[i][j])),
            eigenvalues: CVector::from_iterator(r, raw.eigenvalues.iter().map(c)),
            amplitudes: CVector::from_iterator(r, raw.amplitudes.iter().map(c)),
            mode_kind: raw.mode_kind,
            t0: raw.t0,
            dt: raw.dt,
        })
    }
}
