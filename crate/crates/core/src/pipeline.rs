//! The offline/online optimization loop: sample the parameter box, run the
//! full-order solver (built-in testbed or external command) to build or
//! enrich the snapshot database, then optimize a cheap surrogate over it.
//!
//! The solver stays a black box. An external adapter gets a fresh working
//! directory per sample with a one-row `params.csv`, runs a user command with
//! the file path substituted in, and hands back `output.csv` (first row = the
//! flattened snapshot) plus an optional scalar in `qoi.txt`.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::{Error, Result};
use crate::io;
use crate::numerics::{Matrix, Vector};
use crate::podi::SnapshotDatabase;
use crate::testbeds::{poisson_solve, PoissonConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Uniform,
    Lhs,
}

/// Seeded design-of-experiments plan over a parameter box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPlan {
    #[serde(rename = "box")]
    pub box_domain: BoxDomain,
    pub count: usize,
    pub method: SamplingMethod,
    pub seed: u64,
}

/// Draws the sample matrix (count x dim).
///
/// Uniform sampling is i.i.d. per dimension. Latin hypercube partitions every
/// dimension into `count` equal strata and places one point uniformly inside
/// each, with stratum order given by an independent seeded permutation per
/// dimension.
pub fn sample(plan: &SamplingPlan) -> Result<Matrix> {
    if plan.count < 1 {
        return Err(Error::invalid_argument("sampling count must be >= 1"));
    }
    let dim = plan.box_domain.dim();
    let n = plan.count;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut out = Matrix::zeros(n, dim);
    match plan.method {
        SamplingMethod::Uniform => {
            for i in 0..n {
                for j in 0..dim {
                    let u: f64 = rng.random();
                    out[(i, j)] = plan.box_domain.lower[j] + u * plan.box_domain.width(j);
                }
            }
        }
        SamplingMethod::Lhs => {
            let mut strata: Vec<Vec<usize>> = Vec::with_capacity(dim);
            for _ in 0..dim {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                strata.push(perm);
            }
            for i in 0..n {
                for j in 0..dim {
                    let u: f64 = rng.random();
                    let cell = (strata[j][i] as f64 + u) / n as f64;
                    out[(i, j)] = plan.box_domain.lower[j] + cell * plan.box_domain.width(j);
                }
            }
        }
    }
    Ok(out)
}

/// Built-in full-order models usable without any external solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "testbed", rename_all = "snake_case")]
pub enum BuiltinSolver {
    Poisson(PoissonConfig),
}

/// Shell command template; `{params}` is replaced by the path of the
/// one-row parameter CSV written into a fresh per-sample directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalCommand {
    pub command: String,
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    300
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverAdapter {
    Builtin(BuiltinSolver),
    External(ExternalCommand),
}

impl SolverAdapter {
    pub fn validate(&self) -> Result<()> {
        match self {
            SolverAdapter::Builtin(_) => Ok(()),
            SolverAdapter::External(ext) => {
                if !ext.command.contains("{params}") {
                    return Err(Error::Config(
                        "external command template must contain the {params} placeholder".into(),
                    ));
                }
                if ext.timeout_secs == 0 {
                    return Err(Error::Config("external timeout must be >= 1 second".into()));
                }
                Ok(())
            }
        }
    }

    /// Short description recorded in the database provenance.
    fn describe(&self) -> String {
        match self {
            SolverAdapter::Builtin(BuiltinSolver::Poisson(cfg)) => {
                format!("builtin poisson g={}", cfg.grid)
            }
            SolverAdapter::External(ext) => format!("external: {}", ext.command),
        }
    }
}

/// Number of concurrent offline evaluations: MORPIPE_JOBS when set, otherwise
/// the number of available processors.
pub fn default_jobs() -> usize {
    std::env::var("MORPIPE_JOBS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&j| j >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

struct SampleOutput {
    field: Vector,
    qoi: Option<f64>,
}

fn evaluate_one(adapter: &SolverAdapter, mu: &Vector, scratch: &std::path::Path) -> Result<SampleOutput> {
    match adapter {
        SolverAdapter::Builtin(BuiltinSolver::Poisson(cfg)) => {
            let (field, qoi) = poisson_solve(cfg, mu)?;
            Ok(SampleOutput {
                field,
                qoi: Some(qoi),
            })
        }
        SolverAdapter::External(ext) => run_external(ext, mu, scratch),
    }
}

fn run_external(ext: &ExternalCommand, mu: &Vector, dir: &std::path::Path) -> Result<SampleOutput> {
    std::fs::create_dir_all(dir)?;
    let params_path = dir.join("params.csv");
    let row = Matrix::from_fn(1, mu.len(), |_, j| mu[j]);
    io::write_matrix_file(&params_path, &row)?;

    let command = ext.command.replace("{params}", &params_path.to_string_lossy());
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .map_err(|e| Error::Pipeline(format!("failed to spawn solver command: {e}")))?;

    let deadline = Instant::now() + Duration::from_secs(ext.timeout_secs);
    let status = loop {
        match child.try_wait()? {
            Some(status) => break status,
            None => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::Pipeline(format!(
                        "solver command timed out after {}s",
                        ext.timeout_secs
                    )));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    };
    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            use std::io::Read;
            let _ = pipe.read_to_string(&mut stderr);
        }
        let tail: String = stderr.lines().rev().take(3).collect::<Vec<_>>().join(" | ");
        return Err(Error::Pipeline(format!(
            "solver command exited with {status}{}",
            if tail.is_empty() {
                String::new()
            } else {
                format!(": {tail}")
            }
        )));
    }

    let output = io::read_matrix_file(&dir.join("output.csv"))?;
    let field = output.row(0).transpose();
    let qoi_path = dir.join("qoi.txt");
    let qoi = if qoi_path.exists() {
        let text = std::fs::read_to_string(&qoi_path)?;
        Some(text.trim().parse::<f64>().map_err(|_| {
            Error::parse(format!("qoi.txt does not hold a number: {:?}", text.trim()), None)
        })?)
    } else {
        None
    };
    Ok(SampleOutput { field, qoi })
}

/// One failed offline evaluation, recorded in the database provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationFailure {
    pub index: usize,
    pub params: Vec<f64>,
    pub error: String,
}

fn evaluate_batch(
    params: &Matrix,
    adapter: &SolverAdapter,
    jobs: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<(Vec<(usize, SampleOutput)>, Vec<EvaluationFailure>)> {
    adapter.validate()?;
    let scratch_base = match adapter {
        SolverAdapter::External(ext) => {
            let base = ext
                .workdir
                .clone()
                .unwrap_or_else(std::env::temp_dir);
            std::fs::create_dir_all(&base)?;
            Some(
                tempfile::Builder::new()
                    .prefix("morpipe-run-")
                    .tempdir_in(base)?,
            )
        }
        SolverAdapter::Builtin(_) => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Pipeline(format!("thread pool: {e}")))?;

    let total = params.nrows();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let indexed: Vec<(usize, Result<SampleOutput>)> = pool.install(|| {
        use rayon::prelude::*;
        (0..total)
            .into_par_iter()
            .map(|i| {
                let mu = params.row(i).transpose();
                let scratch = scratch_base
                    .as_ref()
                    .map(|d| d.path().join(format!("sample_{i:05}")))
                    .unwrap_or_default();
                let outcome = evaluate_one(adapter, &mu, &scratch);
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(k, total);
                (i, outcome)
            })
            .collect()
    });

    let mut successes = Vec::new();
    let mut failures = Vec::new();
    for (i, outcome) in indexed {
        match outcome {
            Ok(out) => successes.push((i, out)),
            Err(e) => failures.push(EvaluationFailure {
                index: i,
                params: params.row(i).iter().copied().collect(),
                error: e.to_string(),
            }),
        }
    }
    successes.sort_by_key(|(i, _)| *i);
    failures.sort_by_key(|f| f.index);
    Ok((successes, failures))
}

fn assemble_database(
    params: &Matrix,
    successes: Vec<(usize, SampleOutput)>,
    failures: Vec<EvaluationFailure>,
    plan: &SamplingPlan,
    adapter: &SolverAdapter,
) -> Result<SnapshotDatabase> {
    if successes.is_empty() {
        return Err(Error::Pipeline(format!(
            "all {} offline evaluations failed; first error: {}",
            params.nrows(),
            failures
                .first()
                .map(|f| f.error.clone())
                .unwrap_or_default()
        )));
    }
    let n = successes[0].1.field.len();
    let mut kept_params = Matrix::zeros(successes.len(), params.ncols());
    let mut snapshots = Matrix::zeros(n, successes.len());
    let mut qois = Vec::with_capacity(successes.len());
    for (col, (i, out)) in successes.iter().enumerate() {
        if out.field.len() != n {
            return Err(Error::Pipeline(format!(
                "sample {i} returned {} state entries, expected {n}",
                out.field.len()
            )));
        }
        kept_params.set_row(col, &params.row(*i));
        snapshots.set_column(col, &out.field);
        qois.push(out.qoi);
    }
    let qoi = if qois.iter().all(|q| q.is_some()) {
        Some(Vector::from_iterator(qois.len(), qois.iter().map(|q| q.unwrap())))
    } else {
        if qois.iter().any(|q| q.is_some()) {
            log::warn!("some samples lack a qoi; dropping the qoi column entirely");
        }
        None
    };

    if !failures.is_empty() {
        log::warn!("{} of {} evaluations failed", failures.len(), params.nrows());
    }
    let mut db = SnapshotDatabase::new(
        kept_params,
        snapshots,
        qoi,
        vec![],
        Some(plan.box_domain.clone()),
    )?;
    db.manifest.provenance = Some(serde_json::json!({
        "adapter": adapter.describe(),
        "sampling": {
            "method": plan.method,
            "count": plan.count,
            "seed": plan.seed,
        },
        "failures": failures,
    }));
    Ok(db)
}

/// Samples the plan and evaluates every point, collecting the results into a
/// snapshot database ordered by sample index.
pub fn run_offline(
    plan: &SamplingPlan,
    adapter: &SolverAdapter,
    jobs: usize,
) -> Result<SnapshotDatabase> {
    run_offline_with_progress(plan, adapter, jobs, &|_, _| {})
}

/// [`run_offline`] with a per-sample completion callback (done, total); the
/// callback may be invoked from worker threads in any order.
pub fn run_offline_with_progress(
    plan: &SamplingPlan,
    adapter: &SolverAdapter,
    jobs: usize,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<SnapshotDatabase> {
    let params = sample(plan)?;
    let (successes, failures) = evaluate_batch(&params, adapter, jobs, progress)?;
    assemble_database(&params, successes, failures, plan, adapter)
}

/// Evaluates new points and appends them to the database; stored columns are
/// copied unchanged, and duplicates of existing parameters are skipped.
pub fn enrich(
    db: &SnapshotDatabase,
    points: &Matrix,
    adapter: &SolverAdapter,
    jobs: usize,
) -> Result<SnapshotDatabase> {
    if points.nrows() > 0 && points.ncols() != db.param_dim() {
        return Err(Error::invalid_argument(format!(
            "enrichment points have dimension {}, database has {}",
            points.ncols(),
            db.param_dim()
        )));
    }
    let mut fresh_rows: Vec<usize> = Vec::new();
    for i in 0..points.nrows() {
        let mu = points.row(i).transpose();
        if db.contains_parameter(&mu) {
            log::warn!("enrichment point {i} duplicates an existing parameter; skipped");
        } else {
            fresh_rows.push(i);
        }
    }
    if fresh_rows.is_empty() {
        return Ok(db.clone());
    }
    let mut fresh = Matrix::zeros(fresh_rows.len(), db.param_dim());
    for (dst, &src) in fresh_rows.iter().enumerate() {
        fresh.set_row(dst, &points.row(src));
    }
    let (successes, failures) = evaluate_batch(&fresh, adapter, jobs, &|_, _| {})?;
    if successes.is_empty() {
        return Err(Error::Pipeline("all enrichment evaluations failed".into()));
    }

    let added = successes.len();
    let k = db.len();
    let mut params = Matrix::zeros(k + added, db.param_dim());
    let mut snapshots = Matrix::zeros(db.state_dim(), k + added);
    params.view_mut((0, 0), (k, db.param_dim())).copy_from(&db.params);
    snapshots
        .view_mut((0, 0), (db.state_dim(), k))
        .copy_from(&db.snapshots);
    let mut qois: Option<Vec<f64>> = db.qoi.as_ref().map(|q| q.iter().copied().collect());
    for (col, (i, out)) in successes.iter().enumerate() {
        if out.field.len() != db.state_dim() {
            return Err(Error::Pipeline(format!(
                "enrichment sample {i} returned {} state entries, expected {}",
                out.field.len(),
                db.state_dim()
            )));
        }
        params.set_row(k + col, &fresh.row(*i));
        snapshots.set_column(k + col, &out.field);
        match (&mut qois, out.qoi) {
            (Some(list), Some(q)) => list.push(q),
            (q @ Some(_), None) => {
                log::warn!("enrichment sample without qoi; dropping the qoi column");
                *q = None;
            }
            _ => {}
        }
    }

    let mut enriched = SnapshotDatabase::new(
        params,
        snapshots,
        qois.map(|v| Vector::from_vec(v)),
        db.manifest.names.clone(),
        db.manifest.box_domain.clone(),
    )?;
    enriched.manifest.provenance = Some(serde_json::json!({
        "enriched_from": db.manifest.provenance,
        "added": added,
        "failures": failures,
    }));
    Ok(enriched)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Min,
    Max,
}

impl Default for Direction {
    fn default() -> Self {
        Direction::Min
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeSettings {
    pub budget: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub seed: u64,
    #[serde(default)]
    pub direction: Direction,
}

fn default_restarts() -> usize {
    4
}

/// Initial compass step as a fraction of each box width.
const INITIAL_STEP: f64 = 0.25;
/// Relative step below which a start counts as converged.
const STEP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub mu: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub best_mu: Vec<f64>,
    pub best_value: f64,
    pub direction: Direction,
    pub history: Vec<HistoryEntry>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub converged: bool,
}

/// Multi-start compass search over the box.
///
/// From each seeded start the search polls +/- step along every coordinate,
/// moves to the best improving point, halves the step otherwise, and stops
/// when the relative step drops below 1e-6 or the evaluation budget runs out.
/// Candidate points are clipped to the box. Failed objective evaluations are
/// counted and treated as non-improving.
pub fn optimize<F>(
    objective: F,
    box_domain: &BoxDomain,
    settings: &OptimizeSettings,
) -> Result<OptimizationReport>
where
    F: Fn(&Vector) -> Result<f64>,
{
    if settings.budget < 1 {
        return Err(Error::invalid_argument("optimization budget must be >= 1"));
    }
    if settings.restarts < 1 {
        return Err(Error::invalid_argument("optimizer needs at least one start"));
    }
    let dim = box_domain.dim();
    let sign = match settings.direction {
        Direction::Min => 1.0,
        Direction::Max => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let starts: Vec<Vector> = (0..settings.restarts)
        .map(|_| {
            Vector::from_fn(dim, |j, _| {
                let u: f64 = rng.random();
                box_domain.lower[j] + u * box_domain.width(j)
            })
        })
        .collect();

    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut evaluations = 0usize;
    let mut failed = 0usize;
    let mut best: Option<(Vector, f64)> = None; // signed value
    let mut converged = false;
    let mut any_start_evaluated = false;

    // Evaluates and logs one point; returns the signed value if it succeeded.
    let eval = |mu: &Vector,
                    history: &mut Vec<HistoryEntry>,
                    evaluations: &mut usize,
                    failed: &mut usize|
     -> Option<f64> {
        *evaluations += 1;
        match objective(mu) {
            Ok(value) => {
                history.push(HistoryEntry {
                    iteration: *evaluations,
                    mu: mu.iter().copied().collect(),
                    value,
                });
                Some(sign * value)
            }
            Err(e) => {
                *failed += 1;
                log::warn!("objective evaluation failed at {:?}: {e}", mu.as_slice());
                None
            }
        }
    };

    'starts: for start in starts {
        if evaluations >= settings.budget {
            break;
        }
        let mut current = start;
        let Some(mut current_value) = eval(&current, &mut history, &mut evaluations, &mut failed)
        else {
            continue;
        };
        any_start_evaluated = true;
        if best.as_ref().map_or(true, |(_, v)| current_value < *v) {
            best = Some((current.clone(), current_value));
        }

        let mut step = INITIAL_STEP;
        while step >= STEP_TOLERANCE {
            if evaluations >= settings.budget {
                break 'starts;
            }
            let mut best_poll: Option<(Vector, f64)> = None;
            for j in 0..dim {
                for dir in [1.0, -1.0] {
                    if evaluations >= settings.budget {
                        break;
                    }
                    let mut cand = current.clone();
                    cand[j] += dir * step * box_domain.width(j);
                    let cand = box_domain.clip(&cand);
                    if let Some(v) = eval(&cand, &mut history, &mut evaluations, &mut failed) {
                        if v < current_value
                            && best_poll.as_ref().map_or(true, |(_, bv)| v < *bv)
                        {
                            best_poll = Some((cand, v));
                        }
                    }
                }
            }
            match best_poll {
                Some((point, value)) => {
                    current = point;
                    current_value = value;
                    if best.as_ref().map_or(true, |(_, v)| value < *v) {
                        best = Some((current.clone(), value));
                    }
                }
                None => step *= 0.5,
            }
        }
        if step < STEP_TOLERANCE {
            converged = true;
        }
    }

    if !any_start_evaluated {
        return Err(Error::Pipeline(
            "optimization failed: every start point evaluation failed".into(),
        ));
    }
    let (best_mu, best_signed) = best.expect("at least one evaluation succeeded");
    Ok(OptimizationReport {
        best_mu: best_mu.iter().copied().collect(),
        best_value: sign * best_signed,
        direction: settings.direction,
        history,
        evaluations,
        failed_evaluations: failed,
        converged,
    })
}
