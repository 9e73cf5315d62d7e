//! JSON problem configuration.
//!
//! ```json
//! {
//!   "m": 2,
//!   "p": 2.0,
//!   "mesh": {"type": "sphere", "radius": 1.0, "refinement": 3},
//!   "b": 1.0,
//!   "h": [3.0, 6.0],
//!   "tolerances": {"cond_max": 1e10}
//! }
//! ```
//!
//! `mesh.type` is `sphere` (radius), `cube` (side) or `file` (OFF path, relative to the
//! config). `b` is one number for every level or a list with one entry per level; each
//! entry of `b` and `h` is a constant or a per-panel array, and an `h` entry may name a
//! manufactured case whose data is generated for that level. With `"preset": "c"`, `m`
//! and every `h` default to that case.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::defaults::Tolerances;
use crate::error::{MeshError, SolveError, VerifyError};
use crate::geometry::{load_mesh, make_cube_mesh, make_sphere_mesh, BoundaryMesh};
use crate::operators::DensityVector;
use crate::robin::RobinProblem;
use crate::verify::find_case;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeshSpec {
    Sphere {
        #[serde(default = "one")]
        radius: f64,
        refinement: u32,
    },
    Cube {
        #[serde(default = "two")]
        side: f64,
        refinement: u32,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// Constant, per-panel array, or (data only) a manufactured case id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    Constant(f64),
    Array(Vec<f64>),
    Preset(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Uniform(f64),
    PerLevel(Vec<LevelSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "two")]
    pub p: f64,
    pub mesh: MeshSpec,
    #[serde(default = "uniform_one")]
    pub b: CoefficientSpec,
    #[serde(default)]
    pub h: Option<Vec<LevelSpec>>,
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn uniform_one() -> CoefficientSpec {
    CoefficientSpec::Uniform(1.0)
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads the file and resolves a relative mesh path against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        let mut cfg = Self::from_json(&text)?;
        if let MeshSpec::File { path: mesh_path } = &mut cfg.mesh {
            if mesh_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *mesh_path = dir.join(&*mesh_path);
                }
            }
        }
        Ok(cfg)
    }

    /// Replaces the refinement of a generated mesh.
    pub fn override_refinement(&mut self, r: u32) -> Result<(), ConfigError> {
        match &mut self.mesh {
            MeshSpec::Sphere { refinement, .. } | MeshSpec::Cube { refinement, .. } => {
                *refinement = r;
                Ok(())
            }
            MeshSpec::File { .. } => Err(ConfigError::Invalid("refinement override needs a generated mesh".into())),
        }
    }

    pub fn build_mesh(&self) -> Result<BoundaryMesh, ConfigError> {
        Ok(match &self.mesh {
            MeshSpec::Sphere { radius, refinement } => make_sphere_mesh(*radius, *refinement)?,
            MeshSpec::Cube { side, refinement } => make_cube_mesh(*side, *refinement)?,
            MeshSpec::File { path } => {
                let file = File::open(path).map_err(|e| ConfigError::Io { path: path.clone(), msg: e.to_string() })?;
                load_mesh(BufReader::new(file))?
            }
        })
    }

    /// Builds the problem. Coefficient signs are left to the solver's validation.
    pub fn build_problem(&self) -> Result<RobinProblem, ConfigError> {
        let preset = match &self.preset {
            Some(id) => Some(find_case(id).map_err(|e| ConfigError::Invalid(e.to_string()))?),
            None => None,
        };
        let m = match (self.m, &preset, &self.h) {
            (Some(m), _, _) => m,
            (None, Some(case), _) => case.m,
            (None, None, Some(h)) => h.len(),
            (None, None, None) => return Err(ConfigError::Invalid("give m, h or a preset".into())),
        };
        if m == 0 {
            return Err(ConfigError::Invalid("m must be at least 1".into()));
        }
        let mesh = self.build_mesh()?;
        let level = |spec: &LevelSpec, what: &str, j: usize| -> Result<DensityVector, ConfigError> {
            match spec {
                LevelSpec::Constant(v) => Ok(DensityVector::constant(&mesh, *v)),
                LevelSpec::Array(values) => DensityVector::new(&mesh, values.clone())
                    .map_err(|e| ConfigError::Invalid(format!("{what}[{j}]: {e}"))),
                LevelSpec::Preset(id) => Err(ConfigError::Invalid(format!("{what}[{j}]: unexpected string '{id}'"))),
            }
        };
        let b: Vec<DensityVector> = match &self.b {
            CoefficientSpec::Uniform(v) => vec![DensityVector::constant(&mesh, *v); m],
            CoefficientSpec::PerLevel(list) => {
                if list.len() != m {
                    return Err(ConfigError::Invalid(format!("b has {} entries, m = {m}", list.len())));
                }
                list.iter().enumerate().map(|(j, s)| level(s, "b", j)).collect::<Result<_, _>>()?
            }
        };
        let generated = |id: &str, j: usize| -> Result<DensityVector, ConfigError> {
            let case = find_case(id).map_err(|e: VerifyError| ConfigError::Invalid(e.to_string()))?;
            if j >= case.m.max(m) {
                return Err(ConfigError::Invalid(format!("h[{j}]: case {id} has order {}", case.m)));
            }
            let mut data = case.robin_data(&mesh, &b);
            Ok(data.swap_remove(j))
        };
        let h: Vec<DensityVector> = match (&self.h, &preset) {
            (Some(list), _) => {
                if list.len() != m {
                    return Err(ConfigError::Invalid(format!("h has {} entries, m = {m}", list.len())));
                }
                list.iter()
                    .enumerate()
                    .map(|(j, s)| match s {
                        LevelSpec::Preset(id) => generated(id, j),
                        other => level(other, "h", j),
                    })
                    .collect::<Result<_, _>>()?
            }
            (None, Some(case)) => (0..m).map(|j| generated(case.id, j)).collect::<Result<_, _>>()?,
            (None, None) => return Err(ConfigError::Invalid("missing h".into())),
        };
        RobinProblem::new(mesh, b, h, self.p).map_err(|e: SolveError| ConfigError::Invalid(e.to_string()))
    }
}
