//! Config file schemas, dotted-path overrides, and validation with
//! field-path diagnostics.

use std::path::{Path, PathBuf};

use morpipe::activesubspace::DimRule;
use morpipe::dmd::ModeKind;
use morpipe::domain::BoxDomain;
use morpipe::error::{Error, Result};
use morpipe::geometry::LatticeConfig;
use morpipe::numerics::RankSpec;
use morpipe::pipeline::{OptimizeSettings, SamplingMethod, SamplingPlan, SolverAdapter};
use morpipe::podi::InterpolatorSpec;
use morpipe::testbeds::AdvectionDiffusionConfig;
use serde::Deserialize;

/// Reads a JSON config and applies `--set key=value` dotted-path overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Config(format!("{}: {e}", path.display()))
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!(
            "{}: invalid JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    for item in overrides {
        apply_override(&mut value, item)?;
    }
    Ok(value)
}

/// `--set a.b.c=value`; the value is parsed as JSON when possible and kept as
/// a string otherwise. Intermediate objects are created on demand.
fn apply_override(root: &mut serde_json::Value, item: &str) -> Result<()> {
    let (key, raw) = item.split_once('=').ok_or_else(|| {
        Error::invalid_argument(format!("--set expects key=value, got {item:?}"))
    })?;
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (idx, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::invalid_argument(format!(
                "--set key {key:?} has an empty path segment"
            )));
        }
        if idx == parts.len() - 1 {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert((*part).to_string(), parsed);
                    return Ok(());
                }
                _ => {
                    return Err(Error::invalid_argument(format!(
                        "--set {key}: {} is not an object",
                        parts[..idx].join(".")
                    )))
                }
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry((*part).to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default())),
            _ => {
                return Err(Error::invalid_argument(format!(
                    "--set {key}: {} is not an object",
                    parts[..idx].join(".")
                )))
            }
        };
    }
    Ok(())
}

/// Deserializes with the offending field path in the error message.
pub fn from_value<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    let deserializer = value;
    serde_path_to_error::deserialize(deserializer).map_err(|e| {
        let path = e.path().to_string();
        let detail = e.into_inner();
        if path == "." {
            Error::Config(detail.to_string())
        } else {
            Error::Config(format!("{path}: {detail}"))
        }
    })
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    /// Directory holding data.csv + meta.json.
    Dir { dir: PathBuf },
    /// Built-in advection-diffusion run.
    Testbed { advection: AdvectionDiffusionConfig },
}

#[derive(Debug, Deserialize)]
pub struct WindowConfig {
    pub start: usize,
    pub stride: usize,
    pub count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmdConfig {
    pub series: SeriesSource,
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub rank: RankSpec,
    #[serde(default)]
    pub mode_kind: ModeKind,
    #[serde(default)]
    pub forecast_times: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum GradientSource {
    /// Matrix CSV with m location columns, m gradient columns, and optionally
    /// one trailing output column.
    Csv { samples_csv: PathBuf },
    /// Analytic ridge testbed sampled by Monte Carlo.
    Testbed { testbed: RidgeTestbedConfig },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeTestbedConfig {
    pub ridge: String,
    pub direction: Vec<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gradient: GradientMethod,
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsConfig {
    pub source: GradientSource,
    #[serde(default = "default_dim_rule")]
    pub dim_rule: DimRule,
    #[serde(default)]
    pub surrogate: Option<SurrogateConfig>,
}

fn default_dim_rule() -> DimRule {
    DimRule::SpectralGap
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    #[serde(default = "default_degree")]
    pub degree: usize,
}

fn default_degree() -> usize {
    2
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    pub method: SamplingMethod,
    #[serde(alias = "N", alias = "n")]
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodiConfig {
    #[serde(default)]
    pub rank: RankSpec,
    pub interpolator: InterpolatorSpec,
}

/// Shared schema for the offline, podi and optimize subcommands; each uses
/// the sections it needs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(rename = "box", default)]
    pub box_domain: Option<BoxDomain>,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
    #[serde(default)]
    pub adapter: Option<SolverAdapter>,
    /// Database directory consumed by podi/optimize.
    #[serde(default)]
    pub database: Option<PathBuf>,
    #[serde(default)]
    pub podi: Option<PodiConfig>,
    /// Query parameters for the podi subcommand, one row each.
    #[serde(default)]
    pub predict: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub optimize: Option<OptimizeSettings>,
}

impl PipelineConfig {
    pub fn sampling_plan(&self) -> Result<SamplingPlan> {
        let box_domain = self
            .box_domain
            .clone()
            .ok_or_else(|| Error::Config("box: section is required".into()))?;
        BoxDomain::new(box_domain.lower.clone(), box_domain.upper.clone())
            .map_err(|e| Error::Config(format!("box: {e}")))?;
        let sampling = self
            .sampling
            .as_ref()
            .ok_or_else(|| Error::Config("sampling: section is required".into()))?;
        if sampling.count < 1 {
            return Err(Error::Config("sampling.count: must be >= 1".into()));
        }
        Ok(SamplingPlan {
            box_domain,
            count: sampling.count,
            method: sampling.method,
            seed: sampling.seed,
        })
    }

    pub fn require_adapter(&self) -> Result<&SolverAdapter> {
        let adapter = self
            .adapter
            .as_ref()
            .ok_or_else(|| Error::Config("adapter: section is required".into()))?;
        adapter.validate().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("adapter: {msg}")),
            other => other,
        })?;
        Ok(adapter)
    }

    pub fn require_database(&self) -> Result<&PathBuf> {
        self.database
            .as_ref()
            .ok_or_else(|| Error::Config("database: path is required".into()))
    }

    pub fn require_podi(&self) -> Result<&PodiConfig> {
        self.podi
            .as_ref()
            .ok_or_else(|| Error::Config("podi: section is required".into()))
    }

    pub fn require_optimize(&self) -> Result<&OptimizeSettings> {
        let settings = self
            .optimize
            .as_ref()
            .ok_or_else(|| Error::Config("optimize: section is required".into()))?;
        if settings.budget < 1 {
            return Err(Error::Config("optimize.budget: must be >= 1".into()));
        }
        if settings.restarts < 1 {
            return Err(Error::Config("optimize.restarts: must be >= 1".into()));
        }
        Ok(settings)
    }
}

/// What kind of config a JSON document is, judged by its top-level fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigKind {
    Lattice,
    Dmd,
    ActiveSubspace,
    Pipeline,
}

pub fn classify(value: &serde_json::Value) -> ConfigKind {
    let has = |k: &str| value.get(k).is_some();
    if has("dims") && has("origin") {
        ConfigKind::Lattice
    } else if has("series") {
        ConfigKind::Dmd
    } else if has("source") {
        ConfigKind::ActiveSubspace
    } else {
        ConfigKind::Pipeline
    }
}

/// Full schema + semantic validation for any recognized config kind.
pub fn validate_config(value: serde_json::Value) -> Result<ConfigKind> {
    let kind = classify(&value);
    match kind {
        ConfigKind::Lattice => {
            let cfg: LatticeConfig = from_value(value)?;
            cfg.to_lattice().map_err(|e| Error::Config(e.to_string()))?;
        }
        ConfigKind::Dmd => {
            let cfg: DmdConfig = from_value(value)?;
            if let SeriesSource::Testbed { advection } = &cfg.series {
                advection
                    .validate()
                    .map_err(|e| Error::Config(format!("series.advection: {e}")))?;
            }
            if let Some(w) = &cfg.window {
                if w.stride == 0 || w.count < 2 {
                    return Err(Error::Config(
                        "window: stride must be >= 1 and count >= 2".into(),
                    ));
                }
            }
        }
        ConfigKind::ActiveSubspace => {
            let cfg: AsConfig = from_value(value)?;
            if let GradientSource::Testbed { testbed } = &cfg.source {
                morpipe::testbeds::RidgeFunction::from_id(
                    &testbed.ridge,
                    nalgebra::DVector::from_vec(testbed.direction.clone()),
                )
                .map_err(|e| Error::Config(format!("source.testbed.ridge: {e}")))?;
                if testbed.direction.is_empty() {
                    return Err(Error::Config(
                        "source.testbed.direction: must not be empty".into(),
                    ));
                }
            }
        }
        ConfigKind::Pipeline => {
            let cfg: PipelineConfig = from_value(value)?;
            if cfg.box_domain.is_none()
                && cfg.sampling.is_none()
                && cfg.adapter.is_none()
                && cfg.database.is_none()
                && cfg.podi.is_none()
                && cfg.optimize.is_none()
            {
                return Err(Error::Config(
                    "unrecognized config: no known sections present".into(),
                ));
            }
            if let Some(b) = &cfg.box_domain {
                BoxDomain::new(b.lower.clone(), b.upper.clone())
                    .map_err(|e| Error::Config(format!("box: {e}")))?;
            }
            if let Some(s) = &cfg.sampling {
                if s.count < 1 {
                    return Err(Error::Config("sampling.count: must be >= 1".into()));
                }
            }
            if let Some(adapter) = &cfg.adapter {
                adapter
                    .validate()
                    .map_err(|e| Error::Config(format!("adapter: {e}")))?;
                if let SolverAdapter::Builtin(morpipe::pipeline::BuiltinSolver::Poisson(p)) =
                    adapter
                {
                    p.validate()
                        .map_err(|e| Error::Config(format!("adapter.builtin: {e}")))?;
                }
            }
            if let Some(o) = &cfg.optimize {
                if o.budget < 1 {
                    return Err(Error::Config("optimize.budget: must be >= 1".into()));
                }
            }
        }
    }
    Ok(kind)
}
