//! Run configuration, read from a TOML file with `[domain]`, `[physics]`,
//! `[data]` (plus `[data.params]` and optional `[data.exact]`) and `[run]`
//! tables.
//!
//! ```toml
//! [domain]
//! type = "annulus"        # or "square_with_holes"
//! target_h = 0.2
//! levels = 5              # study levels
//!
//! [data]
//! preset = "annulus_g0"
//!
//! [data.params]
//! kappa = 0.6
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pdarcy_core::driver::{ProblemData, SplittingOptions};
use pdarcy_core::expr::CoefficientField;
use pdarcy_core::fem::{BoundaryData, Divergence, ExactSolution};
use pdarcy_core::mesh::Mesh;
use pdarcy_core::verify::{MeshFamily, Preset, ANNULUS_RADII, MANUFACTURED_SQUARE};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Annulus,
    SquareWithHoles,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(rename = "type")]
    pub kind: DomainKind,
    pub r_inner: Option<f64>,
    pub r_outer: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub target_h: f64,
    /// Mesh level used by `mesh-gen`, `check-data` and `solve`.
    #[serde(default)]
    pub level: u32,
    /// Number of levels in a study.
    #[serde(default = "default_levels")]
    pub levels: u32,
}

fn default_levels() -> u32 {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsConfig {
    pub gamma: f64,
    pub alpha0: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub q: String,
    pub p: String,
    pub u: [String; 2],
    pub grad_q: Option<[String; 2]>,
    pub grad_p: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub preset: Option<String>,
    pub f: Option<[String; 2]>,
    pub divf: Option<String>,
    pub g: Option<String>,
    /// `g = v · n` with the outward normal of each boundary edge.
    pub g_flux: Option<[String; 2]>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub exact: Option<ExactConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub tol: f64,
    pub tol_sign: f64,
    pub eps_pos: f64,
    pub override_sign_checks: bool,
    pub mesh_in: Option<PathBuf>,
    pub mesh_out: PathBuf,
    pub vtk_out: PathBuf,
    pub csv_out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = SplittingOptions::default();
        RunSection {
            tol: d.tol_q,
            tol_sign: d.tol_sign,
            eps_pos: d.eps_pos,
            override_sign_checks: false,
            mesh_in: None,
            mesh_out: "mesh.txt".into(),
            vtk_out: "solution.vtk".into(),
            csv_out: "study.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub physics: Option<PhysicsConfig>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub run: RunSection,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let d = &self.data;
        let explicit = d.f.is_some() || d.divf.is_some() || d.g.is_some() || d.g_flux.is_some() || d.exact.is_some();
        match &d.preset {
            Some(_) if explicit => {
                return Err(CliError::Config(
                    "[data] sets both `preset` and explicit fields; choose one".into(),
                ))
            }
            Some(name) => {
                Preset::by_name(name).map_err(|e| CliError::Config(e.to_string()))?;
            }
            None => {
                if d.f.is_none() {
                    return Err(CliError::Config("[data] needs `preset` or `f`".into()));
                }
                if self.physics.is_none() {
                    return Err(CliError::Config("explicit data needs a [physics] table".into()));
                }
            }
        }
        if d.g.is_some() && d.g_flux.is_some() {
            return Err(CliError::Config("[data] sets both `g` and `g_flux`".into()));
        }
        if !(self.domain.target_h > 0.0) {
            return Err(CliError::Config("domain.target_h must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn family(&self) -> MeshFamily {
        let d = &self.domain;
        match d.kind {
            DomainKind::Annulus => MeshFamily::Annulus {
                r_inner: d.r_inner.unwrap_or(ANNULUS_RADII.0),
                r_outer: d.r_outer.unwrap_or(ANNULUS_RADII.1),
                target_h: d.target_h,
            },
            DomainKind::SquareWithHoles => MeshFamily::SquareWithHoles {
                c: d.c.unwrap_or(MANUFACTURED_SQUARE.0),
                a: d.a.unwrap_or(MANUFACTURED_SQUARE.1),
                b: d.b.unwrap_or(MANUFACTURED_SQUARE.2),
                target_h: d.target_h,
            },
        }
    }

    /// Bounding-box diagonal of the domain.
    pub fn diameter(&self) -> f64 {
        match self.family() {
            MeshFamily::Annulus { r_outer, .. } => 2.0 * std::f64::consts::SQRT_2 * r_outer,
            MeshFamily::SquareWithHoles { c, .. } => 2.0 * std::f64::consts::SQRT_2 * c,
        }
    }

    /// The mesh for single runs: `run.mesh_in` if given, else the domain at
    /// `domain.level`.
    pub fn mesh(&self) -> Result<Mesh, CliError> {
        match &self.run.mesh_in {
            Some(p) => crate::output::read_mesh(&self.resolve(p)),
            None => self.family().mesh(self.domain.level).map_err(|e| CliError::Config(e.to_string())),
        }
    }

    fn bindings(&self) -> BTreeMap<String, f64> {
        let mut params = self.data.params.clone();
        if let Some(ph) = self.physics {
            params.insert("gamma".into(), ph.gamma);
            params.insert("alpha0".into(), ph.alpha0);
        }
        params
    }

    fn preset(&self) -> Option<Preset> {
        self.data.preset.as_deref().and_then(|n| Preset::by_name(n).ok())
    }

    pub fn problem_data(&self) -> Result<ProblemData, CliError> {
        let params = self.bindings();
        if let Some(p) = self.preset() {
            return p.data(&params).map_err(|e| CliError::Config(e.to_string()));
        }
        let d = &self.data;
        let ph = self.physics.expect("validated");
        let expr = |e: pdarcy_core::expr::ExprError| CliError::Config(format!("[data]: {e}"));
        let f_text = d.f.as_ref().expect("validated");
        let f = CoefficientField::parse_vector([&f_text[0], &f_text[1]], &params).map_err(expr)?;
        let divf = match &d.divf {
            Some(t) => Divergence::Analytic(CoefficientField::parse_scalar(t, &params).map_err(expr)?),
            None => Divergence::FiniteDifference {
                step: 1e-6 * self.diameter(),
            },
        };
        let g = match (&d.g, &d.g_flux) {
            (Some(t), _) => BoundaryData::Scalar(CoefficientField::parse_scalar(t, &params).map_err(expr)?),
            (None, Some(v)) => BoundaryData::NormalFlux(CoefficientField::parse_vector([&v[0], &v[1]], &params).map_err(expr)?),
            (None, None) => BoundaryData::zero(),
        };
        ProblemData::new(ph.gamma, ph.alpha0, f, divf, g).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn exact(&self) -> Result<ExactSolution, CliError> {
        let params = self.bindings();
        if let Some(p) = self.preset() {
            return p.exact(&params).map_err(|e| CliError::Config(e.to_string()));
        }
        let e = self
            .data
            .exact
            .as_ref()
            .ok_or_else(|| CliError::Config("convergence study needs [data.exact] or a preset with an exact solution".into()))?;
        let expr = |err: pdarcy_core::expr::ExprError| CliError::Config(format!("[data.exact]: {err}"));
        let vector = |v: &[String; 2]| CoefficientField::parse_vector([&v[0], &v[1]], &params).map_err(expr);
        Ok(ExactSolution {
            q: CoefficientField::parse_scalar(&e.q, &params).map_err(expr)?,
            p: CoefficientField::parse_scalar(&e.p, &params).map_err(expr)?,
            u: vector(&e.u)?,
            grad_q: e.grad_q.as_ref().map(vector).transpose()?,
            grad_p: e.grad_p.as_ref().map(vector).transpose()?,
        })
    }

    pub fn options(&self, override_sign_checks: bool) -> SplittingOptions {
        SplittingOptions {
            tol_sign: self.run.tol_sign,
            eps_pos: self.run.eps_pos,
            override_sign_checks: override_sign_checks || self.run.override_sign_checks,
            tol_q: self.run.tol,
            tol_darcy: self.run.tol,
            ..SplittingOptions::default()
        }
    }
}
