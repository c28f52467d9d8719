//! Acceptance suite: one test per release criterion, each printing a PASS
//! line with the measured numbers (run with `-- --nocapture` to see them).
//!
//! Every tolerance is pinned here, next to the check it gates.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use morpipe::activesubspace::{estimate_covariance, identify, sample_gradients, DimRule};
use morpipe::dmd::{fit, ModeKind, SnapshotSeries};
use morpipe::domain::BoxDomain;
use morpipe::geometry::{
    bernstein, deform_mesh, ffd_map, read_stl, uv_sphere, write_stl, FfdLattice, StlFormat,
};
use morpipe::numerics::{
    eig_general, eig_symmetric, pseudoinverse, svd_truncated, Complex64, Matrix, RankSpec, Vector,
};
use morpipe::pipeline::{
    optimize, run_offline, BuiltinSolver, Direction, OptimizeSettings, SamplingMethod,
    SamplingPlan, SolverAdapter,
};
use morpipe::podi::{
    build_basis, interpolate_coefficients, modal_coefficients, predict, InterpolatorSpec,
    RbfKernel, SnapshotDatabase,
};
use morpipe::testbeds::{
    advection_diffusion_series, poisson_qoi, poisson_solve, AdvectionDiffusionConfig,
    InitialCondition, PoissonConfig, QoiKind,
};
use nalgebra::{Point3, Vector3};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_isometry(n: usize, r: usize, seed: u64) -> Matrix {
    random_matrix(n, r, seed).qr().q().columns(0, r).into_owned()
}

fn assert_runtime(criterion: &str, elapsed: Duration, limit: Duration) {
    assert!(
        elapsed <= limit,
        "{criterion}: runtime {elapsed:?} exceeds {limit:?}"
    );
}

// ── Criterion 1 ──────────────────────────────────────────────────────

#[test]
fn criterion_1_dmd_exact_recovery() {
    let start = Instant::now();
    // Rank-4 generator with eigenvalues 0.9, 0.7, 0.5 +/- 0.3i embedded in a
    // 100-dimensional state; 12 snapshots.
    let d = Matrix::from_row_slice(
        4,
        4,
        &[
            0.9, 0.0, 0.0, 0.0, //
            0.0, 0.7, 0.0, 0.0, //
            0.0, 0.0, 0.5, -0.3, //
            0.0, 0.0, 0.3, 0.5,
        ],
    );
    let e = random_isometry(100, 4, 2718);
    let a = &e * &d * e.transpose();
    let mut data = Matrix::zeros(100, 12);
    let mut x = &e * Vector::from_vec(vec![1.0, 1.0, 1.0, 1.0]);
    for k in 0..12 {
        data.set_column(k, &x);
        x = &a * &x;
    }
    let series = SnapshotSeries::new(data, 0.0, 1.0).unwrap();

    let mut expected = vec![
        Complex64::new(0.5, -0.3),
        Complex64::new(0.5, 0.3),
        Complex64::new(0.7, 0.0),
        Complex64::new(0.9, 0.0),
    ];
    expected.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));

    let mut worst_eig = 0.0f64;
    let mut worst_recon = 0.0f64;
    for kind in [ModeKind::Projected, ModeKind::Exact] {
        let model = fit(&series, RankSpec::Exact(4), kind).unwrap();
        let mut eigs: Vec<Complex64> = model.eigenvalues.iter().copied().collect();
        eigs.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
        for (got, want) in eigs.iter().zip(&expected) {
            worst_eig = worst_eig.max((got - want).norm());
        }
        worst_recon = worst_recon.max(model.relative_error(&series).unwrap());
    }
    assert!(worst_eig <= 1e-8, "eigenvalue error {worst_eig:e}");
    assert!(worst_recon <= 1e-8, "reconstruction error {worst_recon:e}");
    assert_runtime("criterion 1", start.elapsed(), Duration::from_secs(1));
    println!(
        "[criterion 1] PASS dmd exact recovery: eig err {worst_eig:.2e}, recon err {worst_recon:.2e}, {:?}",
        start.elapsed()
    );
}

// ── Criterion 2 ──────────────────────────────────────────────────────

#[test]
fn criterion_2_forecast_analog() {
    let start = Instant::now();
    // 30 snapshots equispaced over t in [1, 30], forecast at t = 50, checked
    // against the testbed's own continued run.
    let cfg = AdvectionDiffusionConfig {
        grid_points: 256,
        length: 2.0 * std::f64::consts::PI,
        velocity: 1.0,
        diffusivity: 0.005,
        dt: 0.0125,
        steps: 4000,
        initial: InitialCondition::TwoModeSine,
        t0: 0.0,
    };
    let full = advection_diffusion_series(&cfg).unwrap();
    let window = full.strided(80, 80, 30).unwrap(); // t = 1, 2, ..., 30
    let model = fit(&window, RankSpec::default(), ModeKind::Exact).unwrap();

    let t_target = window.t0 + 49.0 * window.dt; // column 4000 of the full run
    let forecast = model.forecast(t_target).unwrap();
    let truth = full.snapshot(4000);
    let err = (forecast - &truth).norm() / truth.norm();
    assert!(err <= 5e-2, "forecast relative error {err:e}");
    assert_runtime("criterion 2", start.elapsed(), Duration::from_secs(5));
    println!(
        "[criterion 2] PASS forecast analog: t=50 relative error {err:.2e}, rank {}, {:?}",
        model.rank(),
        start.elapsed()
    );
}

// ── Criterion 3 ──────────────────────────────────────────────────────

#[test]
fn criterion_3_active_subspace_analytic() {
    let start = Instant::now();
    let n_samples = 100_000;

    // Generic direction: eigenvector alignment and the rank-1 spectrum.
    let a = Vector::from_vec(vec![3.0, 1.0]);
    let grad = |mu: &Vector| Ok(&a * (2.0 * a.dot(mu)));
    let samples = sample_gradients(grad, 2, n_samples, 424_242).unwrap();
    let c = estimate_covariance(&samples).unwrap();
    let subspace = identify(&c, DimRule::SpectralGap).unwrap();
    let w1 = Vector::from_column_slice(subspace.w1().column(0).as_slice());
    let unit = &a / a.norm();
    let angle = w1.dot(&unit).abs().min(1.0).acos();
    let ratio = subspace.eigenvalues[1] / subspace.eigenvalues[0];
    assert!(angle <= 1e-3, "eigenvector angle {angle:e} rad");
    assert!(ratio <= 1e-10, "lambda2/lambda1 = {ratio:e}");

    // Axis-aligned direction: C_11 estimates the analytic integral 4/3.
    let e1 = Vector::from_vec(vec![1.0, 0.0]);
    let grad_e1 = |mu: &Vector| Ok(&e1 * (2.0 * e1.dot(mu)));
    let samples = sample_gradients(grad_e1, 2, n_samples, 31_415).unwrap();
    let c11 = estimate_covariance(&samples).unwrap()[(0, 0)];
    let c11_err = (c11 - 4.0 / 3.0).abs() / (4.0 / 3.0);
    assert!(c11_err <= 0.03, "C11 {c11} deviates {c11_err:.3} from 4/3");

    assert_runtime("criterion 3", start.elapsed(), Duration::from_secs(5));
    println!(
        "[criterion 3] PASS active subspace: angle {angle:.2e} rad, l2/l1 {ratio:.2e}, C11 rel {c11_err:.4}, {:?}",
        start.elapsed()
    );
}

// ── Criterion 4 ──────────────────────────────────────────────────────

#[test]
fn criterion_4_ffd_invariants() {
    let start = Instant::now();
    // 1002-vertex sphere carried through an STL round trip.
    let sphere = uv_sphere(Point3::origin(), 1.0, 25, 40);
    assert!(sphere.vertex_count() >= 1000);
    let sphere = read_stl(&write_stl(&sphere, StlFormat::Binary)).unwrap();

    // Partition of unity on an 11^3 grid of a (4, 3, 5) lattice.
    let dims = [4usize, 3, 5];
    let mut worst_pu = 0.0f64;
    for a in 0..11 {
        for b in 0..11 {
            for c in 0..11 {
                let (s, t, u) = (a as f64 / 10.0, b as f64 / 10.0, c as f64 / 10.0);
                let mut sum = 0.0;
                for l in 0..dims[0] {
                    for m in 0..dims[1] {
                        for n in 0..dims[2] {
                            sum += bernstein(l, dims[0] - 1, s).unwrap()
                                * bernstein(m, dims[1] - 1, t).unwrap()
                                * bernstein(n, dims[2] - 1, u).unwrap();
                        }
                    }
                }
                worst_pu = worst_pu.max((sum - 1.0).abs());
            }
        }
    }
    assert!(worst_pu <= 1e-12, "partition of unity defect {worst_pu:e}");

    // Zero displacements: bitwise identity on every sphere vertex.
    let lattice = FfdLattice::new(
        Point3::new(-1.5, -1.5, -1.5),
        Vector3::new(3.0, 3.0, 3.0),
        [3, 3, 3],
    )
    .unwrap();
    let identity = deform_mesh(&sphere, &lattice);
    assert_eq!(identity.vertices, sphere.vertices);

    // Uniform displacement of all control points translates interior points
    // by the physical image of the displacement.
    let mut translated = lattice.clone();
    let d = Vector3::new(0.125, -0.0625, 0.25);
    for l in 0..3 {
        for m in 0..3 {
            for n in 0..3 {
                translated.set_displacement(l, m, n, d).unwrap();
            }
        }
    }
    let shift = Vector3::new(d.x * 3.0, d.y * 3.0, d.z * 3.0);
    let mut worst_shift = 0.0f64;
    for v in &sphere.vertices {
        let moved = ffd_map(v, &translated);
        worst_shift = worst_shift.max((moved - (v + shift)).norm());
    }
    assert!(worst_shift <= 1e-12, "translation defect {worst_shift:e}");

    // Points outside the box never move.
    let mut bumped = lattice.clone();
    bumped
        .set_displacement(1, 1, 1, Vector3::new(0.2, 0.0, 0.0))
        .unwrap();
    let far_sphere = uv_sphere(Point3::new(10.0, 0.0, 0.0), 1.0, 10, 12);
    let far_deformed = deform_mesh(&far_sphere, &bumped);
    assert_eq!(far_deformed.vertices, far_sphere.vertices);

    assert_runtime("criterion 4", start.elapsed(), Duration::from_secs(1));
    println!(
        "[criterion 4] PASS ffd invariants: partition {worst_pu:.2e}, translation {worst_shift:.2e}, {:?}",
        start.elapsed()
    );
}

// ── Criterion 5 ──────────────────────────────────────────────────────

#[test]
fn criterion_5_stl_round_trip() {
    // Golden empty binary file: exactly 84 bytes.
    let empty = morpipe::geometry::TriMesh::new(vec![], vec![]).unwrap();
    let empty_bytes = write_stl(&empty, StlFormat::Binary);
    assert_eq!(empty_bytes.len(), 84);
    let empty_back = read_stl(&empty_bytes).unwrap();
    assert_eq!(empty_back.triangle_count(), 0);

    // Golden single-facet binary file built by hand.
    let mut golden = vec![0u8; 84];
    golden[80..84].copy_from_slice(&1u32.to_le_bytes());
    for v in [
        0.0f32, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0,
    ] {
        golden.extend_from_slice(&v.to_le_bytes());
    }
    golden.extend_from_slice(&0u16.to_le_bytes());
    let tri = read_stl(&golden).unwrap();
    assert_eq!((tri.vertex_count(), tri.triangle_count()), (3, 1));

    // Golden ASCII file.
    let ascii = b"solid g\n facet normal 0 0 1\n  outer loop\n   vertex 0 0 0\n   vertex 1 0 0\n   vertex 0 1 0\n  endloop\n endfacet\nendsolid g\n";
    let ascii_mesh = read_stl(ascii).unwrap();
    assert_eq!(ascii_mesh.triangle_count(), 1);

    // read . write idempotent at f32 precision for both formats, on all of
    // the golden meshes plus a sphere.
    let sphere = uv_sphere(Point3::new(0.1, -0.2, 0.3), 0.7, 12, 18);
    for mesh in [&empty, &tri, &ascii_mesh, &sphere] {
        for format in [StlFormat::Binary, StlFormat::Ascii] {
            let once = read_stl(&write_stl(mesh, format)).unwrap();
            let twice = read_stl(&write_stl(&once, format)).unwrap();
            assert_eq!(once, twice, "{format:?} second trip must be exact");
            for (a, b) in once.vertices.iter().zip(&mesh.vertices) {
                for i in 0..3 {
                    assert_eq!(a[i], b[i] as f32 as f64, "{format:?} f32 quantization");
                }
            }
        }
    }
    println!("[criterion 5] PASS stl round trip: binary + ascii idempotent at f32, empty file is 84 bytes");
}

// ── Criterion 6 ──────────────────────────────────────────────────────

fn poisson_cfg32() -> PoissonConfig {
    PoissonConfig {
        grid: 32,
        probe: (0.55, 0.45),
        source_width: 0.15,
        qoi: QoiKind::Probe,
    }
}

fn poisson_db(count: usize, seed: u64) -> SnapshotDatabase {
    let plan = SamplingPlan {
        box_domain: BoxDomain::new(vec![0.25, 0.25], vec![0.75, 0.75]).unwrap(),
        count,
        method: SamplingMethod::Lhs,
        seed,
    };
    let adapter = SolverAdapter::Builtin(BuiltinSolver::Poisson(poisson_cfg32()));
    run_offline(&plan, &adapter, 2).unwrap()
}

#[test]
fn criterion_6_podi_interpolatory_and_accurate() {
    let start = Instant::now();
    let db = poisson_db(20, 2024);
    let basis = build_basis(&db, RankSpec::Full).unwrap();

    let specs = [
        InterpolatorSpec::Nearest,
        InterpolatorSpec::Idw { power: 2.0 },
        InterpolatorSpec::Rbf {
            kernel: RbfKernel::ThinPlate,
            shape: 1.0,
        },
    ];
    let mut worst_node = 0.0f64;
    for spec in specs {
        for j in 0..db.len() {
            let mu = db.parameter(j);
            let pred = predict(&db, &basis, &mu, spec).unwrap();
            let truth = db.snapshots.column(j).into_owned();
            worst_node = worst_node.max((pred - &truth).norm() / truth.norm());
        }
    }
    assert!(worst_node <= 1e-8, "training-node error {worst_node:e}");

    let held_out = Vector::from_vec(vec![0.52, 0.48]);
    assert!(!db.contains_parameter(&held_out));
    let (truth, _) = poisson_solve(&poisson_cfg32(), &held_out).unwrap();
    let pred = predict(
        &db,
        &basis,
        &held_out,
        InterpolatorSpec::Rbf {
            kernel: RbfKernel::ThinPlate,
            shape: 1.0,
        },
    )
    .unwrap();
    let held_err = (pred - &truth).norm() / truth.norm();
    assert!(held_err <= 5e-2, "held-out field error {held_err:e}");

    assert_runtime("criterion 6", start.elapsed(), Duration::from_secs(30));
    println!(
        "[criterion 6] PASS podi: node error {worst_node:.2e}, held-out error {held_err:.2e}, {:?}",
        start.elapsed()
    );
}

// ── Criterion 7 ──────────────────────────────────────────────────────

#[test]
fn criterion_7_optimizer_matches_grid_search() {
    let start = Instant::now();
    let db = poisson_db(40, 777);
    let cfg = poisson_cfg32();
    let basis = build_basis(&db, RankSpec::Full).unwrap();
    let spec = InterpolatorSpec::Rbf {
        kernel: RbfKernel::ThinPlate,
        shape: 1.0,
    };
    let coeffs = modal_coefficients(&db, &basis).unwrap();
    let box_domain = db.manifest.box_domain.clone().unwrap();
    let surrogate = |mu: &Vector| -> morpipe::Result<f64> {
        let c = interpolate_coefficients(&coeffs, &db.params, Some(&box_domain), mu, spec)?;
        poisson_qoi(&cfg, &(&basis.modes * c))
    };

    let settings = OptimizeSettings {
        budget: 4000,
        restarts: 6,
        seed: 31,
        direction: Direction::Max,
    };
    let report = optimize(surrogate, &box_domain, &settings).unwrap();
    let report_again = optimize(surrogate, &box_domain, &settings).unwrap();
    assert_eq!(
        serde_json::to_string(&report).unwrap(),
        serde_json::to_string(&report_again).unwrap(),
        "report must be deterministic under a fixed seed"
    );

    let mut grid_best = (f64::NAN, f64::NAN, f64::NEG_INFINITY);
    for i in 0..41 {
        for j in 0..41 {
            let a = 0.25 + 0.5 * i as f64 / 40.0;
            let b = 0.25 + 0.5 * j as f64 / 40.0;
            let v = surrogate(&Vector::from_vec(vec![a, b])).unwrap();
            if v > grid_best.2 {
                grid_best = (a, b, v);
            }
        }
    }
    // One LHS stratum width: box width / sample count.
    let stratum = 0.5 / 40.0;
    let dx = (report.best_mu[0] - grid_best.0).abs();
    let dy = (report.best_mu[1] - grid_best.1).abs();
    assert!(
        dx <= stratum && dy <= stratum,
        "compass {:?} vs grid ({}, {}): offsets ({dx:.4}, {dy:.4}) exceed stratum {stratum}",
        report.best_mu,
        grid_best.0,
        grid_best.1
    );
    assert_runtime("criterion 7", start.elapsed(), Duration::from_secs(30));
    println!(
        "[criterion 7] PASS optimizer vs grid search: offsets ({dx:.4}, {dy:.4}) within stratum {stratum}, {:?}",
        start.elapsed()
    );
}

// ── Criterion 8 ──────────────────────────────────────────────────────

#[test]
fn criterion_8_numerics_suite() {
    // SVD reconstruction on a random 50 x 30 matrix.
    let m = random_matrix(50, 30, 7);
    let svd = svd_truncated(&m, RankSpec::Full).unwrap();
    let recon_err = (&m - svd.reconstruct()).norm() / m.norm();
    assert!(recon_err <= 1e-10, "svd reconstruction {recon_err:e}");

    // Symmetric eigendecomposition trace identity.
    let g = random_matrix(12, 12, 11);
    let c = &g * g.transpose();
    let eig = eig_symmetric(&c).unwrap();
    let trace_err = (eig.values.iter().sum::<f64>() - c.trace()).abs() / c.trace();
    assert!(trace_err <= 1e-10, "trace identity {trace_err:e}");

    // Four Penrose identities.
    let a = random_matrix(8, 5, 13);
    let p = pseudoinverse(&a).unwrap();
    let checks = [
        (&a * &p * &a - &a).norm() / a.norm(),
        (&p * &a * &p - &p).norm() / p.norm(),
        {
            let ap = &a * &p;
            (&ap - ap.transpose()).norm() / ap.norm()
        },
        {
            let pa = &p * &a;
            (&pa - pa.transpose()).norm() / pa.norm()
        },
    ];
    for (i, err) in checks.iter().enumerate() {
        assert!(*err <= 1e-8, "penrose identity {} error {err:e}", i + 1);
    }

    // General eigendecomposition residual on a random 5 x 5 matrix.
    let a5 = random_matrix(5, 5, 17);
    let eig5 = eig_general(&a5).unwrap();
    let ac = a5.map(|x| Complex64::new(x, 0.0));
    let mut worst = 0.0f64;
    for k in 0..5 {
        let v = eig5.vectors.column(k).into_owned();
        worst = worst.max((&ac * &v - &v * eig5.values[k]).norm() / a5.norm());
    }
    assert!(worst <= 1e-8, "eig residual {worst:e}");
    println!(
        "[criterion 8] PASS numerics: svd {recon_err:.2e}, trace {trace_err:.2e}, penrose max {:.2e}, eig residual {worst:.2e}",
        checks.iter().fold(0.0f64, |acc, e| acc.max(*e))
    );
}

// ── Criterion 9 ──────────────────────────────────────────────────────

fn run_cli(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_morpipe"))
        .args(args)
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn run_full_pipeline(config: &Path, dir: &Path) {
    let out = dir.join("out");
    let db = out.join("database");
    let offline = run_cli(
        &[
            "offline",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ],
        dir,
    );
    assert!(
        offline.status.success(),
        "offline: {}",
        String::from_utf8_lossy(&offline.stderr)
    );
    for stage in ["podi", "optimize"] {
        let res = run_cli(
            &[
                stage,
                "--config",
                config.to_str().unwrap(),
                "--set",
                &format!("database={}", db.to_str().unwrap()),
                "--out",
                out.to_str().unwrap(),
                "--quiet",
            ],
            dir,
        );
        assert!(
            res.status.success(),
            "{stage}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
}

#[test]
fn criterion_9_cli_end_to_end_deterministic() {
    let start = Instant::now();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/poisson.json");
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_full_pipeline(&config, dir_a.path());
    run_full_pipeline(&config, dir_b.path());

    // Schema-valid artifacts.
    let out_a = dir_a.path().join("out");
    let manifest: morpipe::podi::Manifest = serde_json::from_str(
        &fs::read_to_string(out_a.join("database/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!((manifest.n, manifest.k, manifest.p), (32 * 32, 20, 2));
    let _db = SnapshotDatabase::load(&out_a.join("database")).unwrap();
    let report: morpipe::pipeline::OptimizationReport =
        serde_json::from_str(&fs::read_to_string(out_a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.best_mu.len(), 2);
    assert!(report.converged);
    let prediction = morpipe::io::read_matrix_file(&out_a.join("prediction.csv")).unwrap();
    assert_eq!((prediction.nrows(), prediction.ncols()), (2, 32 * 32));
    let history = morpipe::io::read_matrix_file(&out_a.join("history.csv")).unwrap();
    assert_eq!(history.nrows(), report.history.len());

    // The optimum of the surrogate sits near the probe.
    assert!((report.best_mu[0] - 0.55).abs() <= 0.05);
    assert!((report.best_mu[1] - 0.45).abs() <= 0.05);

    // Byte determinism across the two runs.
    let files = [
        "database/manifest.json",
        "database/params.csv",
        "database/snapshots.csv",
        "database/qoi.csv",
        "prediction.csv",
        "report.json",
        "history.csv",
    ];
    for file in files {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(dir_b.path().join("out").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between runs");
    }
    assert_runtime("criterion 9", start.elapsed(), Duration::from_secs(60));
    println!(
        "[criterion 9] PASS cli end-to-end: {} artifacts byte-identical, best_mu {:?}, {:?}",
        files.len(),
        report.best_mu,
        start.elapsed()
    );
}
