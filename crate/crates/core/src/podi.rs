//! Proper orthogonal decomposition with interpolation.
//!
//! Offline, full-order solutions are collected as columns of a snapshot
//! matrix and compressed by SVD into a POD basis. Online, the modal
//! coefficients of the stored snapshots are interpolated at a new parameter
//! and expanded through the basis, approximating the solution there without
//! touching the solver again. The snapshot database persists on disk and is
//! shared with the offline/optimization pipeline.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::io;
use crate::numerics::{svd_truncated, Matrix, RankSpec, Vector};

/// Database sidecar metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub k: usize,
    pub p: usize,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(rename = "box")]
    pub box_domain: Option<BoxDomain>,
    pub created: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Timestamp for manifests: honors SOURCE_DATE_EPOCH for reproducible runs,
/// otherwise the current UTC time.
pub fn manifest_timestamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0)
        });
    format_utc(secs)
}

/// ISO-8601 UTC from unix seconds (civil-from-days algorithm).
fn format_utc(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

/// Parameter -> snapshot records, the offline product of the pipeline.
#[derive(Debug, Clone)]
pub struct SnapshotDatabase {
    /// k x p, row j holds the parameter vector of snapshot j.
    pub params: Matrix,
    /// n x k, column j holds snapshot j.
    pub snapshots: Matrix,
    /// Optional scalar output per snapshot.
    pub qoi: Option<Vector>,
    pub manifest: Manifest,
}

fn param_key(params: &Matrix, row: usize) -> Vec<u64> {
    (0..params.ncols())
        .map(|j| {
            let x = params[(row, j)];
            if x == 0.0 { 0.0f64 } else { x }.to_bits()
        })
        .collect()
}

impl SnapshotDatabase {
    pub fn new(
        params: Matrix,
        snapshots: Matrix,
        qoi: Option<Vector>,
        names: Vec<String>,
        box_domain: Option<BoxDomain>,
    ) -> Result<Self> {
        let manifest = Manifest {
            n: snapshots.nrows(),
            k: snapshots.ncols(),
            p: params.ncols(),
            names,
            box_domain,
            created: manifest_timestamp(),
            provenance: None,
        };
        let db = SnapshotDatabase {
            params,
            snapshots,
            qoi,
            manifest,
        };
        db.validate()?;
        Ok(db)
    }

    fn validate(&self) -> Result<()> {
        if self.params.nrows() != self.snapshots.ncols() {
            return Err(Error::invalid_input(format!(
                "snapshots has {} columns but params has {} rows",
                self.snapshots.ncols(),
                self.params.nrows()
            )));
        }
        if let Some(q) = &self.qoi {
            if q.len() != self.len() {
                return Err(Error::invalid_input(format!(
                    "qoi has {} entries for {} snapshots",
                    q.len(),
                    self.len()
                )));
            }
        }
        let mut seen = HashSet::new();
        for j in 0..self.params.nrows() {
            if !seen.insert(param_key(&self.params, j)) {
                return Err(Error::invalid_input(format!(
                    "duplicate parameter row {j}"
                )));
            }
        }
        Ok(())
    }

    /// Number of stored snapshots k.
    pub fn len(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.snapshots.nrows()
    }

    /// Parameter dimension p.
    pub fn param_dim(&self) -> usize {
        self.params.ncols()
    }

    pub fn parameter(&self, j: usize) -> Vector {
        self.params.row(j).transpose()
    }

    pub fn contains_parameter(&self, mu: &Vector) -> bool {
        let key: Vec<u64> = mu
            .iter()
            .map(|&x| if x == 0.0 { 0.0f64 } else { x }.to_bits())
            .collect();
        (0..self.params.nrows()).any(|j| param_key(&self.params, j) == key)
    }

    /// Writes manifest.json, params.csv, snapshots.csv and, when present,
    /// qoi.csv into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(dir.join("manifest.json"), manifest + "\n")?;
        io::write_matrix_file(&dir.join("params.csv"), &self.params)?;
        io::write_matrix_file(&dir.join("snapshots.csv"), &self.snapshots)?;
        if let Some(q) = &self.qoi {
            io::write_vector_file(&dir.join("qoi.csv"), q)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join("manifest.json");
        let manifest_text = fs::read_to_string(&manifest_path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", manifest_path.display()),
            ))
        })?;
        let manifest: Manifest = serde_json::from_str(&manifest_text)
            .map_err(|e| Error::Config(format!("{}: {e}", manifest_path.display())))?;
        let params = io::read_matrix_file(&dir.join("params.csv"))?;
        let snapshots = io::read_matrix_file(&dir.join("snapshots.csv"))?;
        let qoi_path = dir.join("qoi.csv");
        let qoi = if qoi_path.exists() {
            Some(io::read_vector_file(&qoi_path)?)
        } else {
            None
        };
        if snapshots.ncols() != params.nrows() {
            return Err(Error::Config(format!(
                "snapshots.csv has {} columns but params.csv has {} rows",
                snapshots.ncols(),
                params.nrows()
            )));
        }
        if manifest.n != snapshots.nrows()
            || manifest.k != snapshots.ncols()
            || manifest.p != params.ncols()
        {
            return Err(Error::Config(format!(
                "manifest.json declares n={}, k={}, p={} but files hold n={}, k={}, p={}",
                manifest.n,
                manifest.k,
                manifest.p,
                snapshots.nrows(),
                snapshots.ncols(),
                params.ncols()
            )));
        }
        let db = SnapshotDatabase {
            params,
            snapshots,
            qoi,
            manifest,
        };
        db.validate()?;
        Ok(db)
    }
}

/// Truncated POD basis of a snapshot matrix.
#[derive(Debug, Clone)]
pub struct PodBasis {
    /// n x r column-orthonormal mode matrix.
    pub modes: Matrix,
    /// Singular values, descending.
    pub sigma: Vector,
}

impl PodBasis {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// SVD of the snapshot matrix truncated per `rank`.
pub fn build_basis(db: &SnapshotDatabase, rank: RankSpec) -> Result<PodBasis> {
    let svd = svd_truncated(&db.snapshots, rank)?;
    Ok(PodBasis {
        modes: svd.u,
        sigma: svd.sigma,
    })
}

/// Modal coefficients of every stored snapshot: column j = U^T s_j.
pub fn modal_coefficients(db: &SnapshotDatabase, basis: &PodBasis) -> Result<Matrix> {
    if basis.modes.nrows() != db.state_dim() {
        return Err(Error::invalid_argument(format!(
            "basis has {} rows, database snapshots have {}",
            basis.modes.nrows(),
            db.state_dim()
        )));
    }
    Ok(basis.modes.transpose() * &db.snapshots)
}

/// Interpolation method for modal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolatorSpec {
    /// Coefficients of the closest stored parameter (ties -> lowest index).
    Nearest,
    /// Inverse distance weighting with the given positive power.
    Idw { power: f64 },
    /// Radial basis functions; thin-plate includes a linear polynomial tail
    /// so that linear coefficient fields are reproduced exactly.
    Rbf { kernel: RbfKernel, shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RbfKernel {
    Gaussian,
    ThinPlate,
}

impl InterpolatorSpec {
    fn validate(&self) -> Result<()> {
        match self {
            InterpolatorSpec::Nearest => Ok(()),
            InterpolatorSpec::Idw { power } if *power > 0.0 => Ok(()),
            InterpolatorSpec::Idw { power } => Err(Error::invalid_argument(format!(
                "IDW power must be positive, got {power}"
            ))),
            InterpolatorSpec::Rbf { shape, .. } if *shape > 0.0 => Ok(()),
            InterpolatorSpec::Rbf { shape, .. } => Err(Error::invalid_argument(format!(
                "RBF shape must be positive, got {shape}"
            ))),
        }
    }
}

/// Node-coincidence cutoff: below this distance a query is the node itself.
const NODE_EPS: f64 = 1e-14;

/// Diagonal regularization of the RBF kernel block.
const RBF_REGULARIZATION: f64 = 1e-12;

fn rbf_value(kernel: RbfKernel, shape: f64, r: f64) -> f64 {
    let x = shape * r;
    match kernel {
        RbfKernel::Gaussian => (-x * x).exp(),
        RbfKernel::ThinPlate => {
            if x == 0.0 {
                0.0
            } else {
                x * x * x.ln()
            }
        }
    }
}

/// Distance computations run in box-normalized coordinates when the domain is
/// known, so that unevenly scaled parameters weigh equally.
fn scaled_rows(params: &Matrix, box_domain: Option<&BoxDomain>) -> Matrix {
    match box_domain {
        Some(b) if b.dim() == params.ncols() => {
            let mut out = params.clone();
            for j in 0..params.ncols() {
                let (lo, w) = (b.lower[j], b.width(j));
                for i in 0..params.nrows() {
                    out[(i, j)] = 2.0 * (params[(i, j)] - lo) / w - 1.0;
                }
            }
            out
        }
        _ => params.clone(),
    }
}

fn scaled_query(mu: &Vector, box_domain: Option<&BoxDomain>) -> Vector {
    match box_domain {
        Some(b) if b.dim() == mu.len() => {
            Vector::from_fn(mu.len(), |i, _| 2.0 * (mu[i] - b.lower[i]) / b.width(i) - 1.0)
        }
        _ => mu.clone(),
    }
}

/// Interpolates the coefficient columns at a new parameter.
///
/// `coeffs` is r x k (one column per stored parameter), `params` is k x p.
pub fn interpolate_coefficients(
    coeffs: &Matrix,
    params: &Matrix,
    box_domain: Option<&BoxDomain>,
    mu_new: &Vector,
    spec: InterpolatorSpec,
) -> Result<Vector> {
    spec.validate()?;
    let k = params.nrows();
    if k == 0 {
        return Err(Error::invalid_argument("interpolation needs at least one node"));
    }
    if coeffs.ncols() != k {
        return Err(Error::invalid_argument(format!(
            "coefficient matrix has {} columns for {k} parameters",
            coeffs.ncols()
        )));
    }
    if mu_new.len() != params.ncols() {
        return Err(Error::invalid_argument(format!(
            "query has dimension {}, parameters have {}",
            mu_new.len(),
            params.ncols()
        )));
    }
    let nodes = scaled_rows(params, box_domain);
    let query = scaled_query(mu_new, box_domain);
    let distance = |j: usize| (nodes.row(j).transpose() - &query).norm();

    match spec {
        InterpolatorSpec::Nearest => {
            let mut best = 0usize;
            let mut best_d = distance(0);
            for j in 1..k {
                let d = distance(j);
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            Ok(coeffs.column(best).into_owned())
        }
        InterpolatorSpec::Idw { power } => {
            for j in 0..k {
                if distance(j) < NODE_EPS {
                    return Ok(coeffs.column(j).into_owned());
                }
            }
            let mut weights = Vector::zeros(k);
            for j in 0..k {
                weights[j] = distance(j).powf(-power);
            }
            let total: f64 = weights.iter().sum();
            Ok(coeffs * (weights / total))
        }
        InterpolatorSpec::Rbf { kernel, shape } => {
            let tail = match kernel {
                RbfKernel::ThinPlate => 1 + params.ncols(),
                RbfKernel::Gaussian => 0,
            };
            let size = k + tail;
            let mut system = Matrix::zeros(size, size);
            for i in 0..k {
                for j in 0..k {
                    let r = (nodes.row(i) - nodes.row(j)).norm();
                    system[(i, j)] = rbf_value(kernel, shape, r);
                }
                system[(i, i)] += RBF_REGULARIZATION;
            }
            if tail > 0 {
                for i in 0..k {
                    system[(i, k)] = 1.0;
                    system[(k, i)] = 1.0;
                    for j in 0..params.ncols() {
                        system[(i, k + 1 + j)] = nodes[(i, j)];
                        system[(k + 1 + j, i)] = nodes[(i, j)];
                    }
                }
            }
            let r_modes = coeffs.nrows();
            let mut rhs = Matrix::zeros(size, r_modes);
            for i in 0..k {
                for c in 0..r_modes {
                    rhs[(i, c)] = coeffs[(c, i)];
                }
            }
            let lu = system.lu();
            let solution = lu.solve(&rhs).ok_or_else(|| {
                Error::Numerical("RBF interpolation system is singular".into())
            })?;
            let mut out = Vector::zeros(r_modes);
            for c in 0..r_modes {
                let mut acc = 0.0;
                for j in 0..k {
                    acc += solution[(j, c)] * rbf_value(kernel, shape, distance(j));
                }
                if tail > 0 {
                    acc += solution[(k, c)];
                    for j in 0..params.ncols() {
                        acc += solution[(k + 1 + j, c)] * query[j];
                    }
                }
                out[c] = acc;
            }
            Ok(out)
        }
    }
}

/// Approximated solution field at a new parameter: U times the interpolated
/// modal coefficients.
pub fn predict(
    db: &SnapshotDatabase,
    basis: &PodBasis,
    mu_new: &Vector,
    spec: InterpolatorSpec,
) -> Result<Vector> {
    let coeffs = modal_coefficients(db, basis)?;
    let c = interpolate_coefficients(
        &coeffs,
        &db.params,
        db.manifest.box_domain.as_ref(),
        mu_new,
        spec,
    )?;
    Ok(&basis.modes * c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_db(n: usize, k: usize, p: usize, seed: u64) -> SnapshotDatabase {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = Matrix::from_fn(k, p, |_, _| rng.random_range(-1.0..1.0));
        let snapshots = Matrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = random_db(7, 3, 2, 1);
        db.qoi = Some(Vector::from_vec(vec![0.5, -1.5, 2.25]));
        db.save(dir.path()).unwrap();
        let back = SnapshotDatabase::load(dir.path()).unwrap();
        assert_eq!(back.params, db.params);
        assert_eq!(back.snapshots, db.snapshots);
        assert_eq!(back.qoi, db.qoi);
        assert_eq!(back.manifest.created, db.manifest.created);
    }

    #[test]
    fn load_detects_inconsistent_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let db = random_db(5, 4, 2, 2);
        db.save(dir.path()).unwrap();
        // Drop one row of params.csv.
        let trimmed = db.params.rows(0, 3).into_owned();
        io::write_matrix_file(&dir.path().join("params.csv"), &trimmed).unwrap();
        match SnapshotDatabase::load(dir.path()) {
            Err(Error::Config(msg)) => assert!(msg.contains("params"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_without_qoi_gives_none() {
        let dir = tempfile::tempdir().unwrap();
        let db = random_db(5, 4, 2, 3);
        db.save(dir.path()).unwrap();
        let back = SnapshotDatabase::load(dir.path()).unwrap();
        assert!(back.qoi.is_none());
    }

    #[test]
    fn duplicate_parameters_rejected() {
        let params = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let snapshots = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            SnapshotDatabase::new(params, snapshots, None, vec![], None),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn basis_of_identical_snapshots_is_rank_one() {
        let s = Vector::from_vec(vec![3.0, 4.0, 0.0]);
        let mut snapshots = Matrix::zeros(3, 4);
        for j in 0..4 {
            snapshots.set_column(j, &s);
        }
        let params = Matrix::from_fn(4, 1, |i, _| i as f64);
        let db = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis = build_basis(&db, RankSpec::default()).unwrap();
        assert_eq!(basis.rank(), 1);
        let mode = basis.modes.column(0);
        let expected = &s / s.norm();
        assert!((mode.into_owned() - expected).amax() <= 1e-12);
    }

    #[test]
    fn orthogonal_snapshots_keep_their_norms_as_sigma() {
        let mut snapshots = Matrix::zeros(4, 2);
        snapshots[(0, 0)] = 3.0;
        snapshots[(1, 1)] = 1.0;
        let params = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let db = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        assert_relative_eq!(basis.sigma[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(basis.sigma[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_rank_basis_reconstructs_snapshots() {
        let db = random_db(20, 6, 2, 5);
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        let coeffs = modal_coefficients(&db, &basis).unwrap();
        let recon = &basis.modes * &coeffs;
        assert!((recon - &db.snapshots).norm() <= 1e-10 * db.snapshots.norm());
        let ortho = basis.modes.transpose() * &basis.modes;
        assert!((ortho - Matrix::identity(basis.rank(), basis.rank())).norm() <= 1e-10);
    }

    #[test]
    fn coefficient_of_aligned_snapshot_is_its_norm() {
        let s = Vector::from_vec(vec![3.0, 4.0]);
        let snapshots = Matrix::from_column_slice(2, 1, s.as_slice());
        let params = Matrix::from_row_slice(1, 1, &[0.0]);
        let db = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        let coeffs = modal_coefficients(&db, &basis).unwrap();
        assert_relative_eq!(coeffs[(0, 0)].abs(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn snapshot_orthogonal_to_basis_has_zero_column() {
        let mut snapshots = Matrix::zeros(3, 1);
        snapshots[(0, 0)] = 2.0;
        let params = Matrix::from_row_slice(1, 1, &[0.0]);
        let db = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        // Project a vector orthogonal to the single mode.
        let other = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let c = basis.modes.transpose() * other;
        assert!(c.amax() <= 1e-14);
    }

    #[test]
    fn training_error_nonincreasing_in_rank() {
        let db = random_db(15, 6, 2, 7);
        let mut prev = f64::INFINITY;
        for r in 1..=6 {
            let basis = build_basis(&db, RankSpec::Exact(r)).unwrap();
            let coeffs = modal_coefficients(&db, &basis).unwrap();
            let err = (&basis.modes * &coeffs - &db.snapshots).norm();
            assert!(err <= prev + 1e-12);
            prev = err;
        }
    }

    fn all_specs() -> Vec<InterpolatorSpec> {
        vec![
            InterpolatorSpec::Nearest,
            InterpolatorSpec::Idw { power: 2.0 },
            InterpolatorSpec::Rbf {
                kernel: RbfKernel::Gaussian,
                shape: 1.0,
            },
            InterpolatorSpec::Rbf {
                kernel: RbfKernel::ThinPlate,
                shape: 1.0,
            },
        ]
    }

    #[test]
    fn every_method_is_interpolatory_at_nodes() {
        let db = random_db(12, 5, 2, 11);
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        for spec in all_specs() {
            for j in 0..db.len() {
                let mu = db.parameter(j);
                let pred = predict(&db, &basis, &mu, spec).unwrap();
                let truth = db.snapshots.column(j).into_owned();
                let err = (pred - &truth).norm() / truth.norm();
                assert!(err <= 1e-8, "{spec:?} node {j}: {err:e}");
            }
        }
    }

    #[test]
    fn idw_equidistant_pair_averages() {
        let params = Matrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let coeffs = Matrix::from_row_slice(2, 2, &[1.0, 3.0, -2.0, 6.0]);
        let mu = Vector::from_vec(vec![0.0]);
        for power in [0.5, 2.0, 5.0] {
            let got = interpolate_coefficients(
                &coeffs,
                &params,
                None,
                &mu,
                InterpolatorSpec::Idw { power },
            )
            .unwrap();
            assert_relative_eq!(got[0], 2.0, epsilon = 1e-12);
            assert_relative_eq!(got[1], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn nearest_breaks_ties_at_lowest_index() {
        let params = Matrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let coeffs = Matrix::from_row_slice(1, 2, &[10.0, 20.0]);
        let got = interpolate_coefficients(
            &coeffs,
            &params,
            None,
            &Vector::from_vec(vec![0.0]),
            InterpolatorSpec::Nearest,
        )
        .unwrap();
        assert_eq!(got[0], 10.0);
    }

    #[test]
    fn thin_plate_reproduces_linear_coefficients() {
        // Coefficients linear in a 1D parameter; the polynomial tail makes
        // the interpolant exact inside the hull.
        let params = Matrix::from_fn(5, 1, |i, _| i as f64 / 4.0);
        let coeffs = Matrix::from_fn(2, 5, |r, j| {
            let t = j as f64 / 4.0;
            if r == 0 {
                2.0 * t + 1.0
            } else {
                -0.5 * t + 0.25
            }
        });
        let mu = Vector::from_vec(vec![0.3]);
        let got = interpolate_coefficients(
            &coeffs,
            &params,
            None,
            &mu,
            InterpolatorSpec::Rbf {
                kernel: RbfKernel::ThinPlate,
                shape: 1.0,
            },
        )
        .unwrap();
        assert!((got[0] - (2.0 * 0.3 + 1.0)).abs() <= 1e-6);
        assert!((got[1] - (-0.5 * 0.3 + 0.25)).abs() <= 1e-6);
    }

    #[test]
    fn rank_one_database_predicts_multiples_of_mode() {
        let s = Vector::from_vec(vec![1.0, 2.0, 2.0]);
        let mut snapshots = Matrix::zeros(3, 3);
        for j in 0..3 {
            snapshots.set_column(j, &(&s * (j as f64 + 1.0)));
        }
        let params = Matrix::from_fn(3, 1, |i, _| i as f64);
        let db = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis = build_basis(&db, RankSpec::default()).unwrap();
        assert_eq!(basis.rank(), 1);
        let pred = predict(
            &db,
            &basis,
            &Vector::from_vec(vec![0.7]),
            InterpolatorSpec::Idw { power: 2.0 },
        )
        .unwrap();
        // Prediction is a scalar multiple of the single mode.
        let scale = pred[0] / s[0];
        assert!((pred - &s * scale).amax() <= 1e-10);
    }

    #[test]
    fn permutation_invariance_of_predict() {
        let db = random_db(10, 6, 2, 13);
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut params = Matrix::zeros(6, 2);
        let mut snapshots = Matrix::zeros(10, 6);
        for (dst, &src) in perm.iter().enumerate() {
            params.set_row(dst, &db.params.row(src));
            snapshots.set_column(dst, &db.snapshots.column(src));
        }
        let permuted = SnapshotDatabase::new(params, snapshots, None, vec![], None).unwrap();
        let basis_p = build_basis(&permuted, RankSpec::Full).unwrap();
        let mu = Vector::from_vec(vec![0.21, -0.4]);
        for spec in all_specs() {
            let a = predict(&db, &basis, &mu, spec).unwrap();
            let b = predict(&permuted, &basis_p, &mu, spec).unwrap();
            assert!((&a - &b).amax() <= 1e-12, "{spec:?}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let db = random_db(4, 3, 1, 17);
        let basis = build_basis(&db, RankSpec::Full).unwrap();
        let mu = Vector::from_vec(vec![0.0]);
        assert!(predict(&db, &basis, &mu, InterpolatorSpec::Idw { power: 0.0 }).is_err());
        assert!(predict(
            &db,
            &basis,
            &mu,
            InterpolatorSpec::Rbf {
                kernel: RbfKernel::Gaussian,
                shape: -1.0
            }
        )
        .is_err());
        let bad_mu = Vector::from_vec(vec![0.0, 1.0]);
        assert!(predict(&db, &basis, &bad_mu, InterpolatorSpec::Nearest).is_err());
    }

    #[test]
    fn timestamp_honors_source_date_epoch() {
        assert_eq!(format_utc(0), "1970-01-01T00:00:00Z");
        assert_eq!(format_utc(951_782_400), "2000-02-29T00:00:00Z");
    }
}
