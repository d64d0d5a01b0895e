//! Built-in problem presets and refinement studies: positivity of `q_h`
//! across mesh levels and convergence against a manufactured solution.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::driver::{
    min_with_index, solve_q, solve_splitting, DriverError, ProblemData, ProblemSpec, SplittingOptions,
};
use crate::expr::{CoefficientField, ExprError};
use crate::fem::{error_norms, pressure_recovery_gap, BoundaryData, Divergence, ErrorNorms, ExactSolution, FemError};
use crate::mesh::{generate_annulus, generate_square_with_holes, refine_uniform, Mesh, MeshError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{0}` has no exact solution")]
    NoExactSolution(String),
    #[error("expression: {0}")]
    Expr(#[from] ExprError),
    #[error("mesh: {0}")]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error("error norms: {0}")]
    Fem(#[from] FemError),
    #[error("rate fit: {0}")]
    DegenerateFit(&'static str),
    #[error("a study needs at least {min} levels, got {got}")]
    TooFewLevels { min: usize, got: usize },
}

/// Outer-boundary data of a preset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetBoundary {
    Scalar(&'static str),
    NormalFlux([&'static str; 2]),
}

/// Expressions of a known exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactExprs {
    pub q: &'static str,
    pub p: &'static str,
    pub u: [&'static str; 2],
    pub grad_q: [&'static str; 2],
    pub grad_p: [&'static str; 2],
}

/// A named data set given by expression strings and default parameters.
/// `gamma` and `alpha0` are also visible to the expressions as parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub gamma: f64,
    pub alpha0: f64,
    pub f: [&'static str; 2],
    pub divf: &'static str,
    pub g: PresetBoundary,
    pub params: Vec<(&'static str, f64)>,
    pub exact: Option<ExactExprs>,
}

pub const PRESET_NAMES: [&str; 4] = ["zero", "annulus_g0", "annulus_gpos", "manufactured"];

/// Radii of the annulus used by the radial presets.
pub const ANNULUS_RADII: (f64, f64) = (1.0, 4.0);

/// `(c, a, b)` of the square domain used by the manufactured preset.
pub const MANUFACTURED_SQUARE: (f64, f64, f64) = (0.65, 0.1, 0.02);

const RADIAL_F: [&str; 2] = ["kappa*(r-5)^2/r*x/r", "kappa*(r-5)^2/r*y/r"];
const RADIAL_DIVF: &str = "2*kappa*(r-5)/r";

const MANUFACTURED_P: &str = "(x^2-a^2)*(y^2-a^2)";

impl Preset {
    pub fn by_name(name: &str) -> Result<Preset, VerifyError> {
        match name {
            "zero" => Ok(Preset::zero()),
            "annulus_g0" => Ok(Preset::annulus(0.6, 0.0)),
            "annulus_gpos" => Ok(Preset::annulus(1.0, 0.1)),
            "manufactured" => Ok(Preset::manufactured()),
            other => Err(VerifyError::UnknownPreset(other.to_string())),
        }
    }

    pub fn zero() -> Preset {
        Preset {
            name: "zero",
            gamma: 1.0,
            alpha0: 1.0,
            f: ["0", "0"],
            divf: "0",
            g: PresetBoundary::Scalar("0"),
            params: Vec::new(),
            exact: Some(ExactExprs {
                q: "1",
                p: "0",
                u: ["0", "0"],
                grad_q: ["0", "0"],
                grad_p: ["0", "0"],
            }),
        }
    }

    /// Radially outward forcing `κ (r−5)²/r · x/r` on the annulus with
    /// constant flux `g`; `γ = 2`, `α₀ = 1`.
    pub fn annulus(kappa: f64, g: f64) -> Preset {
        Preset {
            name: if g == 0.0 { "annulus_g0" } else { "annulus_gpos" },
            gamma: 2.0,
            alpha0: 1.0,
            f: RADIAL_F,
            divf: RADIAL_DIVF,
            g: PresetBoundary::Scalar("g"),
            params: [("kappa", kappa), ("g", g)].into(),
            exact: None,
        }
    }

    /// Exact pressure `(x²−a²)(y²−a²)` and velocity
    /// `(x/|x|² + y, y/|x|² − x)` on the square with holes; `γ = 2`,
    /// `α₀ = 4e²`, flux data `g = u·n`.
    pub fn manufactured() -> Preset {
        Preset {
            name: "manufactured",
            gamma: 2.0,
            alpha0: 4.0 * libm::exp(2.0),
            f: [
                "alpha0*exp(gamma*(x^2-a^2)*(y^2-a^2))*(x/(x^2+y^2)+y) + 2*x*(y^2-a^2)",
                "alpha0*exp(gamma*(x^2-a^2)*(y^2-a^2))*(y/(x^2+y^2)-x) + 2*y*(x^2-a^2)",
            ],
            divf: "gamma*alpha0*exp(gamma*(x^2-a^2)*(y^2-a^2))\
                   *(2*x*(y^2-a^2)*(x/(x^2+y^2)+y) + 2*y*(x^2-a^2)*(y/(x^2+y^2)-x))\
                   + 2*(x^2-a^2) + 2*(y^2-a^2)",
            g: PresetBoundary::NormalFlux(["x/(x^2+y^2)+y", "y/(x^2+y^2)-x"]),
            params: [("a", MANUFACTURED_SQUARE.1)].into(),
            exact: Some(ExactExprs {
                q: "exp(-gamma*(x^2-a^2)*(y^2-a^2))",
                p: MANUFACTURED_P,
                u: ["x/(x^2+y^2)+y", "y/(x^2+y^2)-x"],
                grad_q: [
                    "-gamma*exp(-gamma*(x^2-a^2)*(y^2-a^2))*2*x*(y^2-a^2)",
                    "-gamma*exp(-gamma*(x^2-a^2)*(y^2-a^2))*2*y*(x^2-a^2)",
                ],
                grad_p: ["2*x*(y^2-a^2)", "2*y*(x^2-a^2)"],
            }),
        }
    }

    /// Default parameters overlaid with `overrides`. The keys `gamma` and
    /// `alpha0` override the physical constants.
    pub fn bindings(&self, overrides: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
        let mut map: BTreeMap<String, f64> = self.params.iter().map(|&(k, v)| (k.to_string(), v)).collect();
        map.insert("gamma".into(), self.gamma);
        map.insert("alpha0".into(), self.alpha0);
        for (k, v) in overrides {
            map.insert(k.clone(), *v);
        }
        map
    }

    pub fn data(&self, overrides: &BTreeMap<String, f64>) -> Result<ProblemData, VerifyError> {
        let params = self.bindings(overrides);
        let f = CoefficientField::parse_vector(self.f, &params)?;
        let divf = Divergence::Analytic(CoefficientField::parse_scalar(self.divf, &params)?);
        let g = match self.g {
            PresetBoundary::Scalar(s) => BoundaryData::Scalar(CoefficientField::parse_scalar(s, &params)?),
            PresetBoundary::NormalFlux(v) => BoundaryData::NormalFlux(CoefficientField::parse_vector(v, &params)?),
        };
        Ok(ProblemData::new(params["gamma"], params["alpha0"], f, divf, g)?)
    }

    pub fn exact(&self, overrides: &BTreeMap<String, f64>) -> Result<ExactSolution, VerifyError> {
        let e = self.exact.ok_or_else(|| VerifyError::NoExactSolution(self.name.to_string()))?;
        let params = self.bindings(overrides);
        Ok(ExactSolution {
            q: CoefficientField::parse_scalar(e.q, &params)?,
            p: CoefficientField::parse_scalar(e.p, &params)?,
            u: CoefficientField::parse_vector(e.u, &params)?,
            grad_q: Some(CoefficientField::parse_vector(e.grad_q, &params)?),
            grad_p: Some(CoefficientField::parse_vector(e.grad_p, &params)?),
        })
    }
}

/// `min q = exp(−γ (c²−a²)²)` for the manufactured solution: `p` peaks at
/// the corners `(±c, ±c)` that remain after the notch is removed.
pub fn manufactured_min_q(gamma: f64, c: f64, a: f64) -> f64 {
    let pmax = (c * c - a * a) * (c * c - a * a);
    libm::exp(-gamma * pmax)
}

/// A sequence of meshes indexed by level, `h` roughly halving per level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshFamily {
    /// Regenerated at `target_h / 2^level` so that new boundary vertices
    /// land on the circles.
    Annulus { r_inner: f64, r_outer: f64, target_h: f64 },
    /// Generated once at `target_h` and refined uniformly `level` times.
    SquareWithHoles { c: f64, a: f64, b: f64, target_h: f64 },
}

impl MeshFamily {
    pub fn mesh(&self, level: u32) -> Result<Mesh, MeshError> {
        match *self {
            MeshFamily::Annulus {
                r_inner,
                r_outer,
                target_h,
            } => generate_annulus(r_inner, r_outer, target_h / libm::pow(2.0, level as f64)),
            MeshFamily::SquareWithHoles { c, a, b, target_h } => {
                crate::mesh::refine_times(&generate_square_with_holes(c, a, b, target_h)?, level)
            }
        }
    }

    /// Levels `0..levels`, reusing each square mesh for the next refinement.
    pub fn meshes(&self, levels: u32) -> Result<Vec<Mesh>, MeshError> {
        let mut out: Vec<Mesh> = Vec::with_capacity(levels as usize);
        for level in 0..levels {
            let next = match (self, out.last()) {
                (MeshFamily::SquareWithHoles { .. }, Some(prev)) => refine_uniform(prev)?,
                _ => self.mesh(level)?,
            };
            out.push(next);
        }
        Ok(out)
    }
}

/// One level of a study. `error` is set when the level failed; the study
/// carries on with the next level.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub level: u32,
    pub ndofs: usize,
    pub h: f64,
    pub min_q: Option<f64>,
    pub positive: Option<bool>,
    pub norms: Option<ErrorNorms>,
    pub recovery_gap: Option<f64>,
    pub error: Option<String>,
}

impl StudyRow {
    fn new(level: u32, mesh: &Mesh) -> Self {
        StudyRow {
            level,
            ndofs: mesh.num_vertices(),
            h: mesh.h(),
            min_q: None,
            positive: None,
            norms: None,
            recovery_gap: None,
            error: None,
        }
    }
}

/// Error columns reported by a convergence study.
pub const ERROR_COLUMNS: [&str; 5] = ["h1_q", "l2_u", "h1_p", "l2_q", "linf_q"];

fn column(n: &ErrorNorms, k: usize) -> f64 {
    [n.h1semi_q, n.l2_u, n.h1semi_p, n.l2_q, n.linf_q][k]
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    /// Fitted rate per entry of [`ERROR_COLUMNS`], when enough levels
    /// succeeded.
    pub rates: Option<[f64; 5]>,
    /// `(column, level)` pairs where an error grew instead of shrinking.
    pub non_monotone: Vec<(&'static str, u32)>,
}

impl StudyResult {
    /// Sorts rows by level and computes rates and monotonicity flags.
    pub fn from_rows(mut rows: Vec<StudyRow>) -> Self {
        rows.sort_by_key(|r| r.level);
        let ok: Vec<(&StudyRow, &ErrorNorms)> = rows.iter().filter_map(|r| r.norms.as_ref().map(|n| (r, n))).collect();
        let mut non_monotone = Vec::new();
        for w in ok.windows(2) {
            for (k, name) in ERROR_COLUMNS.iter().enumerate() {
                if column(w[1].1, k) > column(w[0].1, k) {
                    non_monotone.push((*name, w[1].0.level));
                }
            }
        }
        let rates = if ok.len() >= 2 {
            let hs: Vec<f64> = ok.iter().map(|(r, _)| r.h).collect();
            let mut out = [0.0; 5];
            let mut good = true;
            for (k, slot) in out.iter_mut().enumerate() {
                let errs: Vec<f64> = ok.iter().map(|(_, n)| column(n, k)).collect();
                match rate_fit(&hs, &errs) {
                    Ok(r) => *slot = r,
                    Err(_) => good = false,
                }
            }
            good.then_some(out)
        } else {
            None
        };
        StudyResult {
            rows,
            rates,
            non_monotone,
        }
    }

    pub fn finest(&self) -> Option<&StudyRow> {
        self.rows.last()
    }
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn rate_fit(hs: &[f64], errors: &[f64]) -> Result<f64, VerifyError> {
    if hs.len() != errors.len() || hs.len() < 2 {
        return Err(VerifyError::DegenerateFit("need two or more (h, error) pairs of equal length"));
    }
    if hs.iter().chain(errors).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(VerifyError::DegenerateFit("h and errors must be positive"));
    }
    let n = hs.len() as f64;
    let lx: Vec<f64> = hs.iter().map(|&h| libm::log(h)).collect();
    let ly: Vec<f64> = errors.iter().map(|&e| libm::log(e)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(VerifyError::DegenerateFit("all h are equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Solves for `q_h` on one mesh and records its minimum. A non-positive
/// minimum is recorded, not raised.
pub fn positivity_level(data: &ProblemData, mesh: Mesh, level: u32, opts: &SplittingOptions) -> StudyRow {
    let mut row = StudyRow::new(level, &mesh);
    let spec = ProblemSpec::new(data.clone(), mesh);
    match solve_q(&spec, opts) {
        Ok(qs) => {
            let (_, min) = min_with_index(&qs.q);
            row.min_q = Some(min);
            row.positive = Some(min > opts.eps_pos);
        }
        Err(e) => row.error = Some(format!("{e}")),
    }
    row
}

/// Full splitting on one mesh, measured against `exact`.
pub fn convergence_level(
    data: &ProblemData,
    exact: &ExactSolution,
    mesh: Mesh,
    level: u32,
    opts: &SplittingOptions,
) -> StudyRow {
    let mut row = StudyRow::new(level, &mesh);
    let spec = ProblemSpec::new(data.clone(), mesh);
    let run = || -> Result<(f64, ErrorNorms, f64), VerifyError> {
        let out = solve_splitting(&spec, opts)?;
        let norms = error_norms(&spec.mesh, &out.solution, exact)?;
        let gap = pressure_recovery_gap(&spec.mesh, &out.solution.q, &out.solution.p, data.gamma);
        Ok((out.min_q, norms, gap))
    };
    match run() {
        Ok((min_q, norms, gap)) => {
            row.min_q = Some(min_q);
            row.positive = Some(true);
            row.norms = Some(norms);
            row.recovery_gap = Some(gap);
        }
        Err(VerifyError::Driver(DriverError::NonPositiveQ { value, threshold, .. })) => {
            row.min_q = Some(value);
            row.positive = Some(false);
            row.error = Some(format!("q_h reaches {value:e}, not above {threshold:e}"));
        }
        Err(e) => row.error = Some(format!("{e}")),
    }
    row
}

fn check_levels(levels: u32, min: usize) -> Result<(), VerifyError> {
    if (levels as usize) < min {
        return Err(VerifyError::TooFewLevels {
            min,
            got: levels as usize,
        });
    }
    Ok(())
}

pub fn positivity_study(
    data: &ProblemData,
    family: &MeshFamily,
    levels: u32,
    opts: &SplittingOptions,
) -> Result<StudyResult, VerifyError> {
    check_levels(levels, 2)?;
    let rows = family
        .meshes(levels)?
        .into_iter()
        .enumerate()
        .map(|(k, m)| positivity_level(data, m, k as u32, opts))
        .collect();
    Ok(StudyResult::from_rows(rows))
}

pub fn convergence_study(
    data: &ProblemData,
    exact: &ExactSolution,
    family: &MeshFamily,
    levels: u32,
    opts: &SplittingOptions,
) -> Result<StudyResult, VerifyError> {
    check_levels(levels, 2)?;
    let rows = family
        .meshes(levels)?
        .into_iter()
        .enumerate()
        .map(|(k, m)| convergence_level(data, exact, m, k as u32, opts))
        .collect();
    Ok(StudyResult::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rate_fit_small_cases() {
        assert!((rate_fit(&[0.1, 0.05], &[0.1, 0.05]).unwrap() - 1.0).abs() < 1e-12);
        assert!((rate_fit(&[0.1, 0.05], &[0.01, 0.0025]).unwrap() - 2.0).abs() < 1e-12);
        assert!(rate_fit(&[0.1, 0.1], &[1.0, 2.0]).is_err());
        assert!(rate_fit(&[0.1], &[1.0]).is_err());
        assert!(rate_fit(&[0.1, 0.05], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn presets_resolve_by_name() {
        for name in PRESET_NAMES {
            assert_eq!(Preset::by_name(name).unwrap().name, name);
        }
        assert!(matches!(Preset::by_name("nope"), Err(VerifyError::UnknownPreset(_))));
    }

    #[test]
    fn radial_forcing_at_outer_circle() {
        let data = Preset::annulus(1.0, 0.1).data(&BTreeMap::new()).unwrap();
        let f = data.f.eval_vector([4.0, 0.0]).unwrap();
        assert!((f[0] - 0.25).abs() < 1e-15 && f[1] == 0.0);
    }

    #[test]
    fn manufactured_pressure_vanishes_on_hole() {
        let exact = Preset::manufactured().exact(&BTreeMap::new()).unwrap();
        for y in [-0.1, 0.0, 0.05, 0.1] {
            assert_eq!(exact.p.eval_scalar([0.1, y]).unwrap(), 0.0);
            assert_eq!(exact.q.eval_scalar([y, -0.1]).unwrap(), 1.0);
        }
    }

    #[test]
    fn overrides_replace_defaults() {
        let mut o = BTreeMap::new();
        o.insert("kappa".to_string(), 2.0);
        o.insert("gamma".to_string(), 3.0);
        let data = Preset::annulus(1.0, 0.0).data(&o).unwrap();
        assert_eq!(data.gamma, 3.0);
        assert!((data.f.eval_vector([4.0, 0.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn study_rows_sort_and_flag_growth() {
        let norms = |e: f64| ErrorNorms {
            l2_u: e,
            h1semi_p: e,
            h1semi_q: e,
            l2_q: e,
            linf_q: e,
        };
        let row = |level: u32, h: f64, e: f64| StudyRow {
            level,
            ndofs: 1,
            h,
            min_q: None,
            positive: None,
            norms: Some(norms(e)),
            recovery_gap: None,
            error: None,
        };
        let r = StudyResult::from_rows(vec![row(2, 0.025, 0.03), row(0, 0.1, 0.1), row(1, 0.05, 0.05)]);
        assert_eq!(r.rows.iter().map(|r| r.level).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(r.non_monotone.len(), 0);
        let r = StudyResult::from_rows(vec![row(0, 0.1, 0.1), row(1, 0.05, 0.2)]);
        assert_eq!(r.non_monotone.len(), 5);
        assert!((r.rates.unwrap()[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_preset_positivity_is_one() {
        let data = Preset::zero().data(&BTreeMap::new()).unwrap();
        let family = MeshFamily::Annulus {
            r_inner: 1.0,
            r_outer: 2.0,
            target_h: 0.4,
        };
        let r = positivity_study(&data, &family, 2, &SplittingOptions::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.min_q == Some(1.0)));
    }
}
