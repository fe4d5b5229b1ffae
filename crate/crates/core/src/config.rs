//! Scenario files: TOML with one table per stage.

use crate::error::{Error, Result};
use crate::exp_log_maps::{ChartedMetric, LipschitzSpec};
use crate::mollify_check::MollifierConfig;
use crate::ode::IntegratorSpec;
use crate::quadrature::QuadratureSpec;
use crate::radial_models::{
    charted_geometry, synthetic_geometry, warped_geometry, IsometryMatrix, RadialGeometry,
    SyntheticField, TableProfile, WarpedProfile,
};
use crate::sampler::SamplerSpec;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    WarpedRound,
    WarpedBump {
        beta: f64,
    },
    /// Sampled profile table with columns `t,f,fp,fpp`.
    WarpedTable {
        path: PathBuf,
        curvature_at_p: f64,
        curvature_at_q: f64,
    },
    SyntheticConstant {
        kappa: f64,
    },
    SyntheticAnisotropic {
        kappa: f64,
        eta: f64,
    },
    /// Perturbed sphere on the round (`beta = 0`) or bump profile.
    Charted {
        #[serde(default)]
        beta: f64,
        #[serde(default)]
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<Vec<f64>>,
    },
}

fn profile_for(beta: f64) -> WarpedProfile {
    if beta == 0.0 {
        WarpedProfile::Round
    } else {
        WarpedProfile::bump(beta)
    }
}

impl ModelSpec {
    /// Relative table paths resolve against `base_dir`.
    pub fn build(&self, n: usize, base_dir: &Path) -> Result<RadialGeometry> {
        match self {
            ModelSpec::WarpedRound => warped_geometry(n, WarpedProfile::Round),
            ModelSpec::WarpedBump { beta } => warped_geometry(n, WarpedProfile::bump(*beta)),
            ModelSpec::WarpedTable {
                path,
                curvature_at_p,
                curvature_at_q,
            } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let table = TableProfile::from_csv(&full, *curvature_at_p, *curvature_at_q)?;
                warped_geometry(n, WarpedProfile::Table(table))
            }
            ModelSpec::SyntheticConstant { kappa } => {
                synthetic_geometry(n, SyntheticField::Constant { kappa: *kappa })
            }
            ModelSpec::SyntheticAnisotropic { kappa, eta } => synthetic_geometry(
                n,
                SyntheticField::Anisotropic {
                    kappa: *kappa,
                    eta: *eta,
                },
            ),
            ModelSpec::Charted {
                beta,
                amplitude,
                axis,
            } => {
                let axis = axis.as_ref().map(|a| DVector::from_column_slice(a));
                let metric = ChartedMetric::new(n, profile_for(*beta), *amplitude, axis)?;
                Ok(charted_geometry(metric))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IsometrySpec {
    #[default]
    Identity,
    Matrix {
        rows: Vec<Vec<f64>>,
    },
    Random {
        seed: u64,
    },
}

impl IsometrySpec {
    pub fn build(&self, n: usize) -> Result<IsometryMatrix> {
        match self {
            IsometrySpec::Identity => Ok(IsometryMatrix::identity(n)),
            IsometrySpec::Random { seed } => Ok(IsometryMatrix::random(n, *seed)),
            IsometrySpec::Matrix { rows } => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch(format!(
                        "isometry must be {n}x{n}"
                    )));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                IsometryMatrix::new(DMatrix::from_row_slice(n, n, &flat))
            }
        }
    }
}

fn default_grid_nodes() -> usize {
    129
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// `t,lambda,phi_max,envelope_max`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<PathBuf>,
    /// `x1,x2,Fx1,Fx2` of the blended map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_dump: Option<PathBuf>,
    #[serde(default = "default_grid_nodes")]
    pub grid_nodes: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            report: None,
            curves: None,
            grid_dump: None,
            grid_nodes: default_grid_nodes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    /// Overrides the seeds of the sampler, Lipschitz and mollifier sections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub m1: ModelSpec,
    pub m2: ModelSpec,
    #[serde(default)]
    pub isometry: IsometrySpec,
    #[serde(default)]
    pub sampler: SamplerSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub lipschitz: LipschitzSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mollifier: Option<MollifierConfig>,
    #[serde(default)]
    pub output: OutputSpec,
    /// Directory used for relative paths; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: ScenarioConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Dimension checks and orthogonality of an explicit isometry.
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        self.isometry.build(self.n)?;
        self.quadrature.validate()?;
        if self.sampler.directions == 0 {
            return Err(Error::Config("sampler.directions must be positive".into()));
        }
        Ok(())
    }

    /// Copy the top-level seed into every seeded section.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.sampler.seed = seed;
            self.lipschitz.seed = seed;
            if let Some(m) = self.mollifier.as_mut() {
                m.seed = seed;
            }
        }
    }
}

/// One `--sweep key.path=start:stop:steps` request.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub path: Vec<String>,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "sweep must look like key.path=start:stop:steps, got {text:?}"
            ))
        };
        let (key, range) = text.split_once('=').ok_or_else(bad)?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 || key.is_empty() {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let steps: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if steps == 0 {
            return Err(bad());
        }
        Ok(SweepSpec {
            path: key.trim().split('.').map(String::from).collect(),
            start,
            stop,
            steps,
        })
    }

    pub fn key(&self) -> String {
        self.path.join(".")
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        (0..self.steps)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / (self.steps - 1) as f64)
            .collect()
    }

    /// Set the swept key in a copy of `base` and parse it.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut tree = toml::Value::try_from(base).map_err(|e| Error::Config(e.to_string()))?;
        let mut node = &mut tree;
        for (i, key) in self.path.iter().enumerate() {
            let table = node.as_table_mut().ok_or_else(|| {
                Error::Config(format!("sweep key {} is not a table path", self.key()))
            })?;
            if i + 1 == self.path.len() {
                table.insert(key.clone(), toml::Value::Float(value));
                break;
            }
            node = table
                .entry(key.clone())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        let mut cfg = ScenarioConfig::from_value(tree)?;
        cfg.base_dir = base.base_dir.clone();
        Ok(cfg)
    }
}
