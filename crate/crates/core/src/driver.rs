//! The discrete splitting pipeline: data sign checks, the `q` solve, the
//! positivity guard, `α̃ = α₀ / q`, and the Darcy solve.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::expr::{CoefficientField, FieldKind};
use crate::fem::{
    assemble_convdiff, assemble_convdiff_rhs, assemble_darcy, assemble_darcy_rhs, BoundaryData, Divergence,
    FemError, FemSolution, P1Space,
};
use crate::linalg::{self, norm2, LinalgError, SolveStats, DEFAULT_TOL};
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{EDGE_GAUSS_3, TRI_DEGREE_4};
use crate::Point;

/// Pipeline stage, used to annotate errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    DataCheck,
    SolveQ,
    PositivityGuard,
    Darcy,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::DataCheck => "data check",
            Stage::SolveQ => "q solve",
            Stage::PositivityGuard => "positivity guard",
            Stage::Darcy => "Darcy solve",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("{stage}: {source}")]
    Assembly {
        stage: Stage,
        #[source]
        source: FemError,
    },
    #[error("{stage}: {source}")]
    Solver {
        stage: Stage,
        #[source]
        source: LinalgError,
    },
    #[error("data check: sign conditions violated ({0})")]
    DataConditions(DataReport),
    #[error("positivity guard: q_h = {value:e} at vertex {vertex} ({x}, {y}) is not above {threshold:e}", x = point[0], y = point[1])]
    NonPositiveQ {
        vertex: usize,
        point: Point,
        value: f64,
        threshold: f64,
    },
}

impl DriverError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            DriverError::InvalidProblem(_) => None,
            DriverError::Assembly { stage, .. } | DriverError::Solver { stage, .. } => Some(*stage),
            DriverError::DataConditions(_) => Some(Stage::DataCheck),
            DriverError::NonPositiveQ { .. } => Some(Stage::PositivityGuard),
        }
    }
}

fn assembly(stage: Stage) -> impl Fn(FemError) -> DriverError {
    move |source| DriverError::Assembly { stage, source }
}

fn solver(stage: Stage) -> impl Fn(LinalgError) -> DriverError {
    move |source| DriverError::Solver { stage, source }
}

/// Physical parameters and data fields, independent of the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub gamma: f64,
    pub alpha0: f64,
    pub f: CoefficientField,
    pub divf: Divergence,
    pub g: BoundaryData,
}

impl ProblemData {
    pub fn new(
        gamma: f64,
        alpha0: f64,
        f: CoefficientField,
        divf: Divergence,
        g: BoundaryData,
    ) -> Result<Self, DriverError> {
        let bad = |m: &str| Err(DriverError::InvalidProblem(m.into()));
        if !(gamma > 0.0 && gamma.is_finite()) {
            return bad("gamma must be a positive number");
        }
        if !(alpha0 > 0.0 && alpha0.is_finite()) {
            return bad("alpha0 must be a positive number");
        }
        if f.kind() != FieldKind::Vector2 {
            return bad("f must be a vector field");
        }
        match &divf {
            Divergence::Analytic(d) if d.kind() != FieldKind::Scalar => return bad("div f must be a scalar field"),
            Divergence::FiniteDifference { step } if !(*step > 0.0) => {
                return bad("finite-difference step must be positive")
            }
            _ => {}
        }
        match &g {
            BoundaryData::Scalar(s) if s.kind() != FieldKind::Scalar => return bad("g must be a scalar field"),
            BoundaryData::NormalFlux(v) if v.kind() != FieldKind::Vector2 => {
                return bad("normal-flux data must be a vector field")
            }
            _ => {}
        }
        Ok(ProblemData { gamma, alpha0, f, divf, g })
    }

    /// `f = 0`, `g = 0`.
    pub fn zero(gamma: f64, alpha0: f64) -> Result<Self, DriverError> {
        ProblemData::new(
            gamma,
            alpha0,
            CoefficientField::constant_vector([0.0, 0.0]),
            Divergence::Analytic(CoefficientField::constant(0.0)),
            BoundaryData::zero(),
        )
    }
}

/// Data together with the mesh it is solved on.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub data: ProblemData,
    pub mesh: Mesh,
}

impl ProblemSpec {
    pub fn new(data: ProblemData, mesh: Mesh) -> Self {
        ProblemSpec { data, mesh }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplittingOptions {
    /// Absolute slack in the sign checks.
    pub tol_sign: f64,
    /// `q_h` must exceed this at every vertex.
    pub eps_pos: f64,
    /// Run even if the sign checks fail.
    pub override_sign_checks: bool,
    pub tol_q: f64,
    pub tol_darcy: f64,
    pub maxit_q: usize,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions {
            tol_sign: 1e-12,
            eps_pos: 1e-12,
            override_sign_checks: false,
            tol_q: DEFAULT_TOL,
            tol_darcy: DEFAULT_TOL,
            maxit_q: 20_000,
        }
    }
}

/// Outcome of one sign condition: the smallest sampled value and where it
/// occurred.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignCheck {
    pub min: f64,
    pub worst_point: Point,
    pub passed: bool,
}

impl SignCheck {
    fn empty() -> Self {
        SignCheck {
            min: f64::INFINITY,
            worst_point: [f64::NAN, f64::NAN],
            passed: true,
        }
    }

    fn record(&mut self, value: f64, point: Point) {
        if value < self.min {
            self.min = value;
            self.worst_point = point;
        }
    }

    fn finish(&mut self, tol: f64) {
        self.passed = self.min >= -tol;
    }
}

/// Sign conditions `−div f ≥ 0` in the domain, `f·n ≥ 0` and `g ≥ 0` on the
/// outer boundary, sampled at the assembly quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataReport {
    pub neg_divf: SignCheck,
    pub f_dot_n: SignCheck,
    pub g: SignCheck,
    pub tol_sign: f64,
}

impl DataReport {
    pub fn passed(&self) -> bool {
        self.neg_divf.passed && self.f_dot_n.passed && self.g.passed
    }

    pub fn checks(&self) -> [(&'static str, &SignCheck); 3] {
        [("-div f", &self.neg_divf), ("f.n", &self.f_dot_n), ("g", &self.g)]
    }
}

impl fmt::Display for DataReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, c)) in self.checks().iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            let verdict = if c.passed { "ok" } else { "FAIL" };
            write!(
                f,
                "{name} {verdict}: min {:e} at ({}, {})",
                c.min, c.worst_point[0], c.worst_point[1]
            )?;
        }
        Ok(())
    }
}

pub fn check_data_conditions(spec: &ProblemSpec, tol_sign: f64) -> Result<DataReport, DriverError> {
    let err = assembly(Stage::DataCheck);
    let data = &spec.data;
    let mesh = &spec.mesh;
    let mut neg_divf = SignCheck::empty();
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        for (x, _, _) in TRI_DEGREE_4.map(&pts, mesh.triangle_area(t)) {
            neg_divf.record(0.0 - data.divf.eval(&data.f, x).map_err(&err)?, x);
        }
    }
    let mut f_dot_n = SignCheck::empty();
    let mut g = SignCheck::empty();
    for e in mesh.boundary().iter().filter(|e| e.tag == BoundaryTag::Gamma) {
        let n = mesh.outward_normal(e);
        let [a, b] = mesh.edge_points(e);
        for (x, _, _) in EDGE_GAUSS_3.map(a, b) {
            let fv = data
                .f
                .eval_vector(x)
                .map_err(|source| err(FemError::Evaluation { field: "f", point: x, source }))?;
            f_dot_n.record(fv[0] * n[0] + fv[1] * n[1], x);
            g.record(data.g.eval(x, n).map_err(&err)?, x);
        }
    }
    for c in [&mut neg_divf, &mut f_dot_n, &mut g] {
        c.finish(tol_sign);
    }
    Ok(DataReport {
        neg_divf,
        f_dot_n,
        g,
        tol_sign,
    })
}

/// Nodal `q_h` and how the solve went.
#[derive(Debug, Clone)]
pub struct QSolve {
    pub q: Vec<f64>,
    pub stats: SolveStats,
    /// Largest residual of the discrete `q` equation against any test
    /// function of `M_h`, relative to the load vector.
    pub galerkin_residual: f64,
}

/// Solves for `z = q − 1` in `M_h` and returns `q`, which is exactly 1 on
/// the walls.
pub fn solve_q(spec: &ProblemSpec, opts: &SplittingOptions) -> Result<QSolve, DriverError> {
    let data = &spec.data;
    let space = P1Space::new(&spec.mesh);
    let a = assemble_convdiff(&spec.mesh, &data.f, &data.divf, data.gamma).map_err(assembly(Stage::SolveQ))?;
    let rhs = assemble_convdiff_rhs(&spec.mesh, &data.f, &data.divf, &data.g, data.gamma, data.alpha0)
        .map_err(assembly(Stage::SolveQ))?;
    let a_free = space.restrict_matrix(&a);
    let b_free = space.restrict_vector(&rhs);
    let (z, stats) = linalg::solve_nonsym(&a_free, &b_free, opts.tol_q, opts.maxit_q).map_err(solver(Stage::SolveQ))?;
    let az = a_free.spmv(&z).map_err(solver(Stage::SolveQ))?;
    let worst = az.iter().zip(&b_free).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = norm2(&b_free);
    let galerkin_residual = if scale > 0.0 { worst / scale } else { worst };
    let q = space.extend(&z).into_iter().map(|zi| zi + 1.0).collect();
    Ok(QSolve {
        q,
        stats,
        galerkin_residual,
    })
}

/// Smallest nodal value of `q` and its vertex.
pub fn min_with_index(q: &[f64]) -> (usize, f64) {
    q.iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
}

/// Returns `min q` if it exceeds `eps_pos`.
pub fn positivity_guard(mesh: &Mesh, q: &[f64], eps_pos: f64) -> Result<f64, DriverError> {
    let (vertex, value) = min_with_index(q);
    if value > eps_pos {
        Ok(value)
    } else {
        Err(DriverError::NonPositiveQ {
            vertex,
            point: mesh.vertices()[vertex],
            value,
            threshold: eps_pos,
        })
    }
}

pub fn compute_alpha_tilde(q: &[f64], alpha0: f64) -> Vec<f64> {
    q.iter().map(|&qi| alpha0 / qi).collect()
}

/// Everything produced by a full splitting run.
#[derive(Debug, Clone)]
pub struct SplittingOutput {
    pub solution: FemSolution,
    pub report: DataReport,
    pub min_q: f64,
    pub q_stats: SolveStats,
    pub q_galerkin_residual: f64,
    pub darcy_stats: SolveStats,
    pub mass_residual: f64,
    pub momentum_residual: f64,
}

pub fn solve_splitting(spec: &ProblemSpec, opts: &SplittingOptions) -> Result<SplittingOutput, DriverError> {
    let report = check_data_conditions(spec, opts.tol_sign)?;
    if !report.passed() && !opts.override_sign_checks {
        return Err(DriverError::DataConditions(report));
    }
    let qs = solve_q(spec, opts)?;
    let min_q = positivity_guard(&spec.mesh, &qs.q, opts.eps_pos)?;
    let alpha = compute_alpha_tilde(&qs.q, spec.data.alpha0);

    let mesh = &spec.mesh;
    let space = P1Space::new(mesh);
    let darcy = assemble_darcy(mesh, &alpha).map_err(assembly(Stage::Darcy))?;
    let (rhs_f, rhs_g) = assemble_darcy_rhs(mesh, &spec.data.f, &spec.data.g).map_err(assembly(Stage::Darcy))?;
    let b_free = space.restrict_rows(&darcy.coupling);
    let g_free = space.restrict_vector(&rhs_g);
    let sol = linalg::schur_darcy_solve(&darcy.mass, &b_free, &rhs_f, &g_free, opts.tol_darcy)
        .map_err(solver(Stage::Darcy))?;
    let p = space.extend(&sol.p);
    let u = sol.u.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Ok(SplittingOutput {
        solution: FemSolution {
            q: qs.q,
            p,
            u,
            alpha,
        },
        report,
        min_q,
        q_stats: qs.stats,
        q_galerkin_residual: qs.galerkin_residual,
        darcy_stats: sol.stats,
        mass_residual: sol.mass_residual,
        momentum_residual: sol.momentum_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_annulus;
    use alloc::vec;

    fn zero_spec() -> ProblemSpec {
        ProblemSpec::new(ProblemData::zero(2.0, 1.0).unwrap(), generate_annulus(1.0, 2.0, 0.3).unwrap())
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(ProblemData::zero(0.0, 1.0), Err(DriverError::InvalidProblem(_))));
        assert!(matches!(ProblemData::zero(1.0, -1.0), Err(DriverError::InvalidProblem(_))));
        let scalar = CoefficientField::constant(1.0);
        let r = ProblemData::new(
            1.0,
            1.0,
            scalar.clone(),
            Divergence::Analytic(scalar),
            BoundaryData::zero(),
        );
        assert!(matches!(r, Err(DriverError::InvalidProblem(_))));
    }

    #[test]
    fn zero_data_gives_trivial_solution() {
        let out = solve_splitting(&zero_spec(), &SplittingOptions::default()).unwrap();
        assert!(out.solution.q.iter().all(|&q| q == 1.0));
        assert!(out.solution.p.iter().all(|&p| p == 0.0));
        assert!(out.solution.u.iter().all(|u| u[0] == 0.0 && u[1] == 0.0));
        assert_eq!(out.min_q, 1.0);
    }

    #[test]
    fn guard_reports_minimizing_vertex() {
        let spec = zero_spec();
        let mut q = vec![1.0; spec.mesh.num_vertices()];
        assert_eq!(positivity_guard(&spec.mesh, &q, 1e-12).unwrap(), 1.0);
        q[3] = -0.2;
        match positivity_guard(&spec.mesh, &q, 1e-12) {
            Err(DriverError::NonPositiveQ { vertex, value, .. }) => {
                assert_eq!(vertex, 3);
                assert_eq!(value, -0.2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_tilde_is_pointwise_quotient() {
        assert_eq!(compute_alpha_tilde(&[1.0, 1.0], 1.0), vec![1.0, 1.0]);
        assert_eq!(compute_alpha_tilde(&[2.0, 2.0], 4.0), vec![2.0, 2.0]);
    }

    #[test]
    fn failed_sign_check_aborts_unless_overridden() {
        let mut spec = zero_spec();
        spec.data.g = BoundaryData::Scalar(CoefficientField::constant(-0.1));
        let opts = SplittingOptions::default();
        match solve_splitting(&spec, &opts) {
            Err(DriverError::DataConditions(r)) => {
                assert!(!r.g.passed && r.neg_divf.passed && r.f_dot_n.passed);
                assert_eq!(r.g.min, -0.1);
            }
            other => panic!("{other:?}"),
        }
        let opts = SplittingOptions {
            override_sign_checks: true,
            ..opts
        };
        let out = solve_splitting(&spec, &opts).unwrap();
        assert!(!out.report.passed());
    }
}
