//! Subcommand implementations: each reads a config, runs one pipeline stage,
//! and leaves plot-ready CSV / JSON artifacts in the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use morpipe::activesubspace::{
    self, estimate_covariance, fit_surrogate, identify, sample_gradients, summary_rows,
    GradientSample,
};
use morpipe::dmd;
use morpipe::error::{Error, Result};
use morpipe::geometry::{deform_mesh, detect_format, read_stl, write_stl, LatticeConfig};
use morpipe::io;
use morpipe::numerics::{Matrix, Vector};
use morpipe::pipeline::{
    default_jobs, optimize, run_offline_with_progress, BuiltinSolver, SolverAdapter,
};
use morpipe::podi::{
    build_basis, interpolate_coefficients, modal_coefficients, predict, SnapshotDatabase,
};
use morpipe::testbeds::{advection_diffusion_series, poisson_qoi, RidgeFunction};

use crate::config::{
    self, AsConfig, DmdConfig, GradientMethod, GradientSource, PipelineConfig, SeriesSource,
};

/// Flags shared by the batch subcommands.
pub struct JobContext {
    pub out: PathBuf,
    pub quiet: bool,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl JobContext {
    fn ensure_out(&self) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }

    fn jobs(&self) -> usize {
        self.jobs.unwrap_or_else(default_jobs)
    }

    fn progress(&self, phase: &str, done: usize, total: usize) {
        if !self.quiet {
            println!("{{\"phase\":\"{phase}\",\"done\":{done},\"total\":{total}}}");
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, format!("{:#}\n", value))?;
    Ok(())
}

pub fn cmd_deform(
    config: serde_json::Value,
    input: &Path,
    output: &Path,
    quiet: bool,
) -> Result<()> {
    let lattice = config::from_value::<LatticeConfig>(config)?.to_lattice()?;
    let bytes = fs::read(input)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", input.display()))))?;
    let format = detect_format(&bytes);
    let mesh = read_stl(&bytes)?;
    let deformed = deform_mesh(&mesh, &lattice);
    if let Some(dir) = output.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(output, write_stl(&deformed, format))?;
    if !quiet {
        println!("{{\"phase\":\"deform\",\"done\":1,\"total\":1}}");
    }
    Ok(())
}

pub fn cmd_dmd(config: serde_json::Value, ctx: &JobContext) -> Result<()> {
    let cfg: DmdConfig = config::from_value(config)?;
    ctx.ensure_out()?;
    let series = match &cfg.series {
        SeriesSource::Dir { dir } => dmd::SnapshotSeries::load(dir)?,
        SeriesSource::Testbed { advection } => advection_diffusion_series(advection)?,
    };
    let series = match &cfg.window {
        Some(w) => series.strided(w.start, w.stride, w.count)?,
        None => series,
    };
    ctx.progress("dmd", 0, 1);
    let model = dmd::fit(&series, cfg.rank, cfg.mode_kind)?;

    write_json(&ctx.out.join("model.json"), &model.to_json())?;

    let m = series.len();
    let mut recon = Matrix::zeros(series.state_dim(), m);
    for k in 1..=m {
        recon.set_column(k - 1, &model.reconstruct(k)?);
    }
    io::write_matrix_file(&ctx.out.join("reconstruction.csv"), &recon)?;

    if !cfg.forecast_times.is_empty() {
        let mut rows = Matrix::zeros(cfg.forecast_times.len(), series.state_dim() + 1);
        for (i, &t) in cfg.forecast_times.iter().enumerate() {
            let state = model.forecast(t)?;
            rows[(i, 0)] = t;
            for j in 0..state.len() {
                rows[(i, j + 1)] = state[j];
            }
        }
        io::write_matrix_file(&ctx.out.join("forecast.csv"), &rows)?;
    }

    let spectrum = model.spectrum();
    let mut spec_rows = Matrix::zeros(spectrum.len(), 5);
    for (i, row) in spectrum.iter().enumerate() {
        spec_rows[(i, 0)] = row.eigenvalue.re;
        spec_rows[(i, 1)] = row.eigenvalue.im;
        spec_rows[(i, 2)] = row.omega.re;
        spec_rows[(i, 3)] = row.omega.im;
        spec_rows[(i, 4)] = row.amplitude;
    }
    io::write_matrix_file(&ctx.out.join("spectrum.csv"), &spec_rows)?;
    ctx.progress("dmd", 1, 1);
    Ok(())
}

pub fn cmd_as(config: serde_json::Value, ctx: &JobContext) -> Result<()> {
    let cfg: AsConfig = config::from_value(config)?;
    ctx.ensure_out()?;
    ctx.progress("as", 0, 1);

    // Gather gradient samples, plus output values when the source carries
    // them (testbed always; CSV only with a trailing f column).
    let (samples, fvalues): (Vec<GradientSample>, Option<Vec<f64>>) = match &cfg.source {
        GradientSource::Csv { samples_csv } => {
            let table = io::read_matrix_file(samples_csv)?;
            if table.ncols() % 2 == 1 {
                let m = (table.ncols() - 1) / 2;
                let block = table.columns(0, 2 * m).into_owned();
                let samples = activesubspace::samples_from_matrix(&block)?;
                let f = (0..table.nrows()).map(|i| table[(i, 2 * m)]).collect();
                (samples, Some(f))
            } else {
                (activesubspace::samples_from_matrix(&table)?, None)
            }
        }
        GradientSource::Testbed { testbed } => {
            let direction = Vector::from_vec(testbed.direction.clone());
            let ridge = RidgeFunction::from_id(&testbed.ridge, direction)?;
            let m = testbed.direction.len();
            let count = testbed
                .samples
                .unwrap_or(activesubspace::DEFAULT_SAMPLES_PER_DIM * m);
            let seed = ctx.seed.unwrap_or(testbed.seed);
            let samples = match testbed.gradient {
                GradientMethod::Analytic => {
                    sample_gradients(|mu| Ok(ridge.gradient(mu)), m, count, seed)?
                }
                GradientMethod::FiniteDifference => sample_gradients(
                    |mu| {
                        activesubspace::finite_diff_gradient(
                            |x| Ok(ridge.evaluate(x)),
                            mu,
                            activesubspace::DEFAULT_FD_STEP,
                        )
                    },
                    m,
                    count,
                    seed,
                )?,
            };
            let f = samples.iter().map(|s| ridge.evaluate(&s.mu)).collect();
            (samples, Some(f))
        }
    };

    let covariance = estimate_covariance(&samples)?;
    let result = identify(&covariance, cfg.dim_rule)?;
    write_json(&ctx.out.join("as_result.json"), &result.to_json())?;

    if let Some(f) = &fvalues {
        let data: Vec<(Vector, f64)> = samples
            .iter()
            .zip(f)
            .map(|(s, &v)| (s.mu.clone(), v))
            .collect();
        let rows = summary_rows(&result, &data)?;
        io::write_matrix_file(&ctx.out.join("summary.csv"), &rows)?;

        if let Some(sur) = &cfg.surrogate {
            if result.active_dim <= 2 {
                let pairs: Vec<(Vector, f64)> = data
                    .iter()
                    .map(|(mu, v)| Ok((result.project(mu)?, *v)))
                    .collect::<Result<_>>()?;
                let surrogate = fit_surrogate(&pairs, sur.degree)?;
                fs::write(
                    ctx.out.join("surrogate.json"),
                    serde_json::to_string_pretty(&surrogate)? + "\n",
                )?;
            } else {
                log::warn!(
                    "surrogate fitting supports 1 or 2 active variables, found {}; skipped",
                    result.active_dim
                );
            }
        }
    } else {
        log::warn!(
            "gradient CSV has no output column; summary.csv and surrogate.json are skipped"
        );
    }
    ctx.progress("as", 1, 1);
    Ok(())
}

pub fn cmd_podi(config: serde_json::Value, ctx: &JobContext) -> Result<()> {
    let cfg: PipelineConfig = config::from_value(config)?;
    ctx.ensure_out()?;
    let db = SnapshotDatabase::load(cfg.require_database()?)?;
    let podi_cfg = cfg.require_podi()?;
    let queries = cfg
        .predict
        .as_ref()
        .ok_or_else(|| Error::Config("predict: section is required".into()))?;
    if queries.is_empty() {
        return Err(Error::Config("predict: needs at least one parameter".into()));
    }
    let basis = build_basis(&db, podi_cfg.rank)?;
    let mut rows = Matrix::zeros(queries.len(), db.state_dim());
    for (i, q) in queries.iter().enumerate() {
        ctx.progress("podi", i, queries.len());
        let mu = Vector::from_vec(q.clone());
        let field = predict(&db, &basis, &mu, podi_cfg.interpolator)?;
        for j in 0..field.len() {
            rows[(i, j)] = field[j];
        }
    }
    io::write_matrix_file(&ctx.out.join("prediction.csv"), &rows)?;
    ctx.progress("podi", queries.len(), queries.len());
    Ok(())
}

pub fn cmd_offline(config: serde_json::Value, ctx: &JobContext) -> Result<()> {
    let cfg: PipelineConfig = config::from_value(config)?;
    ctx.ensure_out()?;
    let mut plan = cfg.sampling_plan()?;
    if let Some(seed) = ctx.seed {
        plan.seed = seed;
    }
    let adapter = cfg.require_adapter()?;
    let total = plan.count;
    ctx.progress("offline", 0, total);
    let db = run_offline_with_progress(&plan, adapter, ctx.jobs(), &|done, total| {
        ctx.progress("offline", done, total);
    })?;
    db.save(&ctx.out.join("database"))?;
    Ok(())
}

pub fn cmd_optimize(config: serde_json::Value, ctx: &JobContext) -> Result<()> {
    let cfg: PipelineConfig = config::from_value(config)?;
    ctx.ensure_out()?;
    let db = SnapshotDatabase::load(cfg.require_database()?)?;
    let podi_cfg = cfg.require_podi()?;
    let mut settings = cfg.require_optimize()?.clone();
    if let Some(seed) = ctx.seed {
        settings.seed = seed;
    }
    let box_domain = match (&cfg.box_domain, &db.manifest.box_domain) {
        (Some(b), _) => b.clone(),
        (None, Some(b)) => b.clone(),
        (None, None) => {
            return Err(Error::Config(
                "box: required (not present in config or database manifest)".into(),
            ))
        }
    };

    let basis = build_basis(&db, podi_cfg.rank)?;
    let spec = podi_cfg.interpolator;

    // The objective is the PODI response surface of the quantity of interest:
    // a built-in Poisson adapter extracts the qoi from the predicted field;
    // otherwise the stored qoi column is interpolated directly.
    let objective: Box<dyn Fn(&Vector) -> Result<f64>> = match &cfg.adapter {
        Some(SolverAdapter::Builtin(BuiltinSolver::Poisson(pcfg))) => {
            let pcfg = pcfg.clone();
            // The modal coefficients do not depend on the query; computing
            // them once keeps the per-evaluation cost at the interpolation.
            let coeffs = modal_coefficients(&db, &basis)?;
            let params = db.params.clone();
            let box_for_interp = db.manifest.box_domain.clone();
            let modes = basis.modes.clone();
            Box::new(move |mu: &Vector| {
                let c = interpolate_coefficients(
                    &coeffs,
                    &params,
                    box_for_interp.as_ref(),
                    mu,
                    spec,
                )?;
                poisson_qoi(&pcfg, &(&modes * c))
            })
        }
        _ => {
            let Some(qoi) = db.qoi.clone() else {
                return Err(Error::Config(
                    "optimize: database has no qoi column and no builtin adapter is configured"
                        .into(),
                ));
            };
            let coeffs = Matrix::from_fn(1, qoi.len(), |_, j| qoi[j]);
            let params = db.params.clone();
            let box_for_interp = db.manifest.box_domain.clone();
            Box::new(move |mu: &Vector| {
                let v = interpolate_coefficients(
                    &coeffs,
                    &params,
                    box_for_interp.as_ref(),
                    mu,
                    spec,
                )?;
                Ok(v[0])
            })
        }
    };

    ctx.progress("optimize", 0, settings.budget);
    let report = optimize(|mu| objective(mu), &box_domain, &settings)?;
    ctx.progress("optimize", report.evaluations, settings.budget);

    fs::write(
        ctx.out.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    let dim = report.best_mu.len();
    let mut history = Matrix::zeros(report.history.len(), dim + 2);
    for (i, h) in report.history.iter().enumerate() {
        history[(i, 0)] = h.iteration as f64;
        for j in 0..dim {
            history[(i, 1 + j)] = h.mu[j];
        }
        history[(i, dim + 1)] = h.value;
    }
    io::write_matrix_file(&ctx.out.join("history.csv"), &history)?;
    Ok(())
}

pub fn cmd_validate(config: serde_json::Value, quiet: bool) -> Result<()> {
    let kind = config::validate_config(config)?;
    if !quiet {
        println!("ok ({})", match kind {
            config::ConfigKind::Lattice => "lattice",
            config::ConfigKind::Dmd => "dmd",
            config::ConfigKind::ActiveSubspace => "active subspace",
            config::ConfigKind::Pipeline => "pipeline",
        });
    }
    Ok(())
}
