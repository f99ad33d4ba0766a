//! TOML experiment configuration and its translation into core types.
//!
//! One file drives the whole pipeline; command-line flags override individual
//! fields. Sections `[structure]`, `[params]`, and `[calibration]` are
//! optional — absent sections skip the corresponding phase.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use spinflip_core::dynamics::{InitialState, Kernel, SimConfig};
use spinflip_core::model::{
    random_model, CouplingScheme, Family, GeneratorSpec, IsingModel, SignScheme,
};
use spinflip_core::params::ParamConfig;
use spinflip_core::structure::{CycleWindowConfig, StructureConfig};

/// Environment variable supplying the default output directory.
pub const OUT_DIR_ENV: &str = "SPINFLIP_OUT_DIR";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to $SPINFLIP_OUT_DIR, then "out".
    pub output_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub model: ModelSection,
    #[serde(default = "default_kernel")]
    pub kernel: Kernel,
    pub sim: SimSection,
    pub structure: Option<StructureSection>,
    pub params: Option<ParamsSection>,
    pub calibration: Option<CalibrationSection>,
}

fn default_kernel() -> Kernel {
    Kernel::Glauber
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if cfg.seeds.is_empty() {
            bail!("seed list is empty");
        }
        cfg.kernel.validate()?;
        Ok(cfg)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"))
        })
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            horizon: self.sim.horizon,
            seed,
            initial: self.sim.initial.clone(),
        }
    }
}

/// Either a fixed model file or a seeded generator. Exactly one of `file` and
/// `family` must be given.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub file: Option<PathBuf>,
    pub family: Option<String>,
    pub n: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub d: Option<usize>,
    pub edges: Option<usize>,
    pub n_dense: Option<usize>,
    pub matching_pairs: Option<usize>,
    /// Fixed coupling value; mutually exclusive with min/max.
    pub coupling: Option<f64>,
    pub coupling_min: Option<f64>,
    pub coupling_max: Option<f64>,
    /// "positive" | "negative" | "random"; default positive.
    pub sign: Option<String>,
    #[serde(default)]
    pub field_mag: f64,
}

/// Resolved model source: a fixed model or a per-seed generator.
pub enum ModelSource {
    Fixed(IsingModel),
    Generator(GeneratorSpec),
}

impl ModelSource {
    /// The model used for a given pipeline seed. Generated models draw from
    /// the seed itself so every seed sees a fresh instance of the ensemble.
    pub fn model_for(&self, seed: u64) -> Result<IsingModel> {
        match self {
            ModelSource::Fixed(m) => Ok(m.clone()),
            ModelSource::Generator(spec) => Ok(random_model(spec, seed)?),
        }
    }
}

impl ModelSection {
    pub fn resolve(&self, base: &Path) -> Result<ModelSource> {
        match (&self.file, &self.family) {
            (Some(file), None) => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base.join(file)
                };
                let text = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading model {}", path.display()))?;
                Ok(ModelSource::Fixed(IsingModel::from_json(&text)?))
            }
            (None, Some(_)) => Ok(ModelSource::Generator(self.generator_spec()?)),
            (Some(_), Some(_)) => bail!("model section has both `file` and `family`"),
            (None, None) => bail!("model section needs either `file` or `family`"),
        }
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        let family = match self.family.as_deref() {
            Some("path") => Family::Path {
                n: self.require("n", self.n)?,
            },
            Some("grid") => Family::Grid {
                rows: self.require("rows", self.rows)?,
                cols: self.require("cols", self.cols)?,
            },
            Some("matching") => Family::Matching {
                n: self.require("n", self.n)?,
            },
            Some("bounded-degree") => Family::BoundedDegree {
                n: self.require("n", self.n)?,
                d: self.require("d", self.d)?,
                edges: self.require("edges", self.edges)?,
            },
            Some("bounded-degree-plus-matching") => Family::BoundedDegreePlusMatching {
                n_dense: self.require("n_dense", self.n_dense)?,
                d: self.require("d", self.d)?,
                edges: self.require("edges", self.edges)?,
                matching_pairs: self.require("matching_pairs", self.matching_pairs)?,
            },
            Some(other) => bail!("unknown model family {other:?}"),
            None => bail!("model generator needs `family`"),
        };
        let coupling = self.coupling_scheme()?;
        Ok(GeneratorSpec {
            family,
            coupling,
            field_mag: self.field_mag,
        })
    }

    fn coupling_scheme(&self) -> Result<CouplingScheme> {
        let sign = match self.sign.as_deref() {
            None | Some("positive") => SignScheme::Positive,
            Some("negative") => SignScheme::Negative,
            Some("random") => SignScheme::Random,
            Some(other) => bail!("unknown sign scheme {other:?}"),
        };
        match (self.coupling, self.coupling_min, self.coupling_max) {
            (Some(v), None, None) => {
                if self.sign.is_none() {
                    Ok(CouplingScheme::fixed(v))
                } else {
                    Ok(CouplingScheme {
                        min_mag: v.abs(),
                        max_mag: v.abs(),
                        sign,
                    })
                }
            }
            (None, Some(lo), Some(hi)) => Ok(CouplingScheme {
                min_mag: lo,
                max_mag: hi,
                sign,
            }),
            (None, None, None) => bail!("model generator needs `coupling` or min/max range"),
            _ => bail!("give either `coupling` or both `coupling_min`/`coupling_max`"),
        }
    }

    fn require<T: Copy>(&self, name: &str, value: Option<T>) -> Result<T> {
        value.ok_or_else(|| {
            anyhow::anyhow!(
                "model family {:?} needs `{name}`",
                self.family.as_deref().unwrap_or("?")
            )
        })
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    #[serde(default = "default_initial")]
    pub initial: InitialState,
}

fn default_initial() -> InitialState {
    InitialState::AllPlus
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSection {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Required for learning; `calibrate` fills them in.
    pub tau_bulk: Option<f64>,
    pub tau_match: Option<f64>,
    pub t_bulk: f64,
    /// Defaults to t_bulk.
    pub t_match: Option<f64>,
    #[serde(default)]
    pub reuse_trace: bool,
    #[serde(default = "default_min_occupancy")]
    pub min_occupancy: f64,
}

fn default_eps() -> f64 {
    0.05
}

fn default_spacing() -> f64 {
    2.0
}

fn default_min_occupancy() -> f64 {
    0.01
}

impl StructureSection {
    pub fn to_core(&self) -> Result<StructureConfig> {
        let (Some(tau_bulk), Some(tau_match)) = (self.tau_bulk, self.tau_match) else {
            bail!("structure section needs tau_bulk and tau_match (run `calibrate` first)");
        };
        let cfg = StructureConfig {
            cycle: CycleWindowConfig {
                eps: self.eps,
                spacing: self.spacing,
            },
            tau_bulk,
            tau_match,
            t_bulk: self.t_bulk,
            t_match: self.t_match.unwrap_or(self.t_bulk),
            reuse_trace: self.reuse_trace,
            min_occupancy: self.min_occupancy,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    #[serde(default = "default_eps")]
    pub eps_rate: f64,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub t_param: f64,
    #[serde(default = "default_min_samples")]
    pub min_samples: u64,
    #[serde(default = "default_true")]
    pub pool_subcubes: bool,
    /// Feed the ground-truth dependency graph to the parameter learner
    /// instead of the structure phase's output.
    #[serde(default)]
    pub use_true_graph: bool,
}

fn default_min_samples() -> u64 {
    200
}

fn default_true() -> bool {
    true
}

impl ParamsSection {
    pub fn to_core(&self) -> Result<ParamConfig> {
        let cfg = ParamConfig {
            eps_rate: self.eps_rate,
            spacing: self.spacing,
            t_param: self.t_param,
            min_samples: self.min_samples,
            pool_subcubes: self.pool_subcubes,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Pilot runs for threshold calibration.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub horizon: f64,
    pub seeds: Vec<u64>,
}
