//! Continuous piecewise-linear scalars (`W_h`, and `M_h` with zero trace on
//! the inner walls), piecewise-constant vectors (`X_h`), and assembly of
//! the convection–diffusion form and of the mixed Darcy system.
//!
//! All assembled objects are indexed by mesh vertex (P1) or by
//! `2 * triangle + component` (P0 vectors). Restriction to the free DOFs of
//! `M_h` goes through [`P1Space`].

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::expr::{divergence_fd, CoefficientField, ExprError};
use crate::linalg::CsrMatrix;
use crate::mesh::{BoundaryTag, Mesh};
use crate::quadrature::{TriangleRule, EDGE_GAUSS_3, TRI_DEGREE_4, TRI_DEGREE_6};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("evaluating {field} at ({}, {}): {source}", point[0], point[1])]
    Evaluation {
        field: &'static str,
        point: Point,
        #[source]
        source: ExprError,
    },
    #[error("alpha must be positive at every vertex, found {value:e} at vertex {vertex}")]
    NonPositiveAlpha { vertex: usize, value: f64 },
    #[error("nodal vector has length {got}, mesh has {expected} vertices")]
    LengthMismatch { expected: usize, got: usize },
}

fn at<T>(field: &'static str, point: Point, r: Result<T, ExprError>) -> Result<T, FemError> {
    r.map_err(|source| FemError::Evaluation { field, point, source })
}

/// How `div f` is obtained at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Divergence {
    Analytic(CoefficientField),
    /// Central differences of `f` with the given step.
    FiniteDifference { step: f64 },
}

impl Divergence {
    pub fn eval(&self, f: &CoefficientField, point: Point) -> Result<f64, FemError> {
        match self {
            Divergence::Analytic(d) => at("div f", point, d.eval_scalar(point)),
            Divergence::FiniteDifference { step } => at("div f", point, divergence_fd(f, point, *step)),
        }
    }
}

/// Normal-flux data `g` on the outer boundary.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryData {
    Scalar(CoefficientField),
    /// `g = v · n` for a vector field `v`, using the outward normal of the
    /// (polygonal) mesh edge.
    NormalFlux(CoefficientField),
}

impl BoundaryData {
    pub fn zero() -> Self {
        BoundaryData::Scalar(CoefficientField::constant(0.0))
    }

    pub fn eval(&self, point: Point, normal: [f64; 2]) -> Result<f64, FemError> {
        match self {
            BoundaryData::Scalar(g) => at("g", point, g.eval_scalar(point)),
            BoundaryData::NormalFlux(v) => {
                let v = at("g", point, v.eval_vector(point))?;
                Ok(v[0] * normal[0] + v[1] * normal[1])
            }
        }
    }
}

/// Gradients of the three barycentric coordinates and the area.
pub fn p1_gradients(p: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let g = [
        [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
        [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
        [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
    ];
    (g, 0.5 * det)
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// P1 space on a mesh; the Dirichlet set is every vertex on an inner wall.
#[derive(Debug, Clone)]
pub struct P1Space<'m> {
    mesh: &'m Mesh,
    dirichlet: Vec<bool>,
    free: Vec<usize>,
}

impl<'m> P1Space<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        let dirichlet = mesh.tagged_vertex_mask(BoundaryTag::GammaW);
        let free = (0..mesh.num_vertices()).filter(|&i| !dirichlet[i]).collect();
        P1Space { mesh, dirichlet, free }
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn is_dirichlet(&self, vertex: usize) -> bool {
        self.dirichlet[vertex]
    }

    pub fn dirichlet_mask(&self) -> &[bool] {
        &self.dirichlet
    }

    /// Vertices carrying a DOF of `M_h`, in increasing order.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn restrict_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        a.restrict(&self.free, &self.free)
    }

    pub fn restrict_rows(&self, a: &CsrMatrix) -> CsrMatrix {
        let cols: Vec<usize> = (0..a.ncols()).collect();
        a.restrict(&self.free, &cols)
    }

    pub fn restrict_vector(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    /// Extends an `M_h` coefficient vector by zero on the walls.
    pub fn extend(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ndofs()];
        for (&i, &v) in self.free.iter().zip(free_values) {
            out[i] = v;
        }
        out
    }
}

/// Piecewise-constant vectors: DOF `2 t + c` is component `c` on triangle `t`.
#[derive(Debug, Clone, Copy)]
pub struct P0VecSpace<'m> {
    mesh: &'m Mesh,
}

impl<'m> P0VecSpace<'m> {
    pub fn new(mesh: &'m Mesh) -> Self {
        P0VecSpace { mesh }
    }

    pub fn ndofs(&self) -> usize {
        2 * self.mesh.num_triangles()
    }

    /// Elementwise gradient of a P1 function, which lies in this space.
    pub fn gradient_of(&self, nodal: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ndofs());
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let (g, _) = p1_gradients(&self.mesh.triangle_points(t));
            let mut v = [0.0; 2];
            for k in 0..3 {
                v[0] += nodal[tri[k]] * g[k][0];
                v[1] += nodal[tri[k]] * g[k][1];
            }
            out.extend_from_slice(&v);
        }
        out
    }
}

/// Discrete triple produced by the splitting scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    /// `q_h` at vertices; exactly 1 on the walls.
    pub q: Vec<f64>,
    /// `p_h` at vertices; exactly 0 on the walls.
    pub p: Vec<f64>,
    /// `u_h` per triangle.
    pub u: Vec<[f64; 2]>,
    /// `α₀ / q_h` at vertices.
    pub alpha: Vec<f64>,
}

/// P1 stiffness matrix `∫ ∇φ_j · ∇φ_i`.
pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (g, area) = p1_gradients(&mesh.triangle_points(t));
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], area * dot2(g[i], g[j])));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), triplets)
}

/// P1 mass matrix `∫ φ_j φ_i` (exact).
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for i in 0..3 {
            for j in 0..3 {
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                triplets.push((tri[i], tri[j], m));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), triplets)
}

/// Matrix of the convection–diffusion form over all P1 basis functions:
///
/// `A[i][j] = ∫ ∇φ_j·∇φ_i − γ (f·∇φ_j) φ_i − γ (div f) φ_j φ_i + γ ∫_Γ (f·n) φ_j φ_i`.
///
/// Volume terms use the degree-4 rule, the boundary term three-point Gauss
/// on the outer boundary only.
pub fn assemble_convdiff(
    mesh: &Mesh,
    f: &CoefficientField,
    divf: &Divergence,
    gamma: f64,
) -> Result<CsrMatrix, FemError> {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles() + 4 * mesh.boundary().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let (g, area) = p1_gradients(&pts);
        let mut local = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                local[i][j] = area * dot2(g[i], g[j]);
            }
        }
        for (x, lam, w) in TRI_DEGREE_4.map(&pts, area) {
            let fv = at("f", x, f.eval_vector(x))?;
            let dv = divf.eval(f, x)?;
            for j in 0..3 {
                let conv = dot2(fv, g[j]);
                for i in 0..3 {
                    local[i][j] -= gamma * w * lam[i] * (conv + dv * lam[j]);
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    for e in mesh.boundary().iter().filter(|e| e.tag == BoundaryTag::Gamma) {
        let n = mesh.outward_normal(e);
        let [a, b] = mesh.edge_points(e);
        let mut local = [[0.0; 2]; 2];
        for (x, phi, w) in EDGE_GAUSS_3.map(a, b) {
            let fn_ = dot2(at("f", x, f.eval_vector(x))?, n);
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] += gamma * w * fn_ * phi[i] * phi[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                triplets.push((e.vertices[i], e.vertices[j], local[i][j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), triplets))
}

/// Load vector for `z = q − 1`: `γ ∫ (div f) φ_i + γ ∫_Γ (α₀ g − f·n) φ_i`.
pub fn assemble_convdiff_rhs(
    mesh: &Mesh,
    f: &CoefficientField,
    divf: &Divergence,
    g: &BoundaryData,
    gamma: f64,
    alpha0: f64,
) -> Result<Vec<f64>, FemError> {
    let mut rhs = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        for (x, lam, w) in TRI_DEGREE_4.map(&pts, area) {
            let dv = divf.eval(f, x)?;
            for i in 0..3 {
                rhs[tri[i]] += gamma * w * dv * lam[i];
            }
        }
    }
    for e in mesh.boundary().iter().filter(|e| e.tag == BoundaryTag::Gamma) {
        let n = mesh.outward_normal(e);
        let [a, b] = mesh.edge_points(e);
        for (x, phi, w) in EDGE_GAUSS_3.map(a, b) {
            let fn_ = dot2(at("f", x, f.eval_vector(x))?, n);
            let gv = g.eval(x, n)?;
            for i in 0..2 {
                rhs[e.vertices[i]] += gamma * w * (alpha0 * gv - fn_) * phi[i];
            }
        }
    }
    Ok(rhs)
}

/// Diagonal velocity mass matrix and the coupling matrix of the mixed
/// Darcy system.
#[derive(Debug, Clone)]
pub struct DarcyMatrices {
    /// `∫_T α̃_h`, repeated for both components of each triangle.
    pub mass: Vec<f64>,
    /// `B[i][2t + c] = ∫_T ∂_c φ_i`, one row per mesh vertex.
    pub coupling: CsrMatrix,
}

impl DarcyMatrices {
    pub fn mass_matrix(&self) -> CsrMatrix {
        let n = self.mass.len();
        CsrMatrix::from_triplets(n, n, self.mass.iter().enumerate().map(|(i, &m)| (i, i, m)).collect())
    }
}

/// Assembles the Darcy blocks for a nodal drag coefficient. `α̃_h` is the P1
/// interpolant of `alpha_nodal`, integrated exactly on each triangle.
pub fn assemble_darcy(mesh: &Mesh, alpha_nodal: &[f64]) -> Result<DarcyMatrices, FemError> {
    if alpha_nodal.len() != mesh.num_vertices() {
        return Err(FemError::LengthMismatch {
            expected: mesh.num_vertices(),
            got: alpha_nodal.len(),
        });
    }
    if let Some((vertex, &value)) = alpha_nodal.iter().enumerate().find(|(_, &a)| !(a > 0.0 && a.is_finite())) {
        return Err(FemError::NonPositiveAlpha { vertex, value });
    }
    let nt = mesh.num_triangles();
    let mut mass = Vec::with_capacity(2 * nt);
    let mut triplets = Vec::with_capacity(6 * nt);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let (g, area) = p1_gradients(&mesh.triangle_points(t));
        let w = area * (alpha_nodal[tri[0]] + alpha_nodal[tri[1]] + alpha_nodal[tri[2]]) / 3.0;
        mass.push(w);
        mass.push(w);
        for k in 0..3 {
            triplets.push((tri[k], 2 * t, area * g[k][0]));
            triplets.push((tri[k], 2 * t + 1, area * g[k][1]));
        }
    }
    Ok(DarcyMatrices {
        mass,
        coupling: CsrMatrix::from_triplets(mesh.num_vertices(), 2 * nt, triplets),
    })
}

/// Right-hand sides of the Darcy system: `F[2t + c] = ∫_T f_c` and
/// `G[i] = ∫_Γ g φ_i`, both indexed over all DOFs.
pub fn assemble_darcy_rhs(
    mesh: &Mesh,
    f: &CoefficientField,
    g: &BoundaryData,
) -> Result<(Vec<f64>, Vec<f64>), FemError> {
    let mut rhs_f = vec![0.0; 2 * mesh.num_triangles()];
    for t in 0..mesh.num_triangles() {
        let pts = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        for (x, _, w) in TRI_DEGREE_4.map(&pts, area) {
            let fv = at("f", x, f.eval_vector(x))?;
            rhs_f[2 * t] += w * fv[0];
            rhs_f[2 * t + 1] += w * fv[1];
        }
    }
    let mut rhs_g = vec![0.0; mesh.num_vertices()];
    for e in mesh.boundary().iter().filter(|e| e.tag == BoundaryTag::Gamma) {
        let n = mesh.outward_normal(e);
        let [a, b] = mesh.edge_points(e);
        for (x, phi, w) in EDGE_GAUSS_3.map(a, b) {
            let gv = g.eval(x, n)?;
            rhs_g[e.vertices[0]] += w * gv * phi[0];
            rhs_g[e.vertices[1]] += w * gv * phi[1];
        }
    }
    Ok((rhs_f, rhs_g))
}

/// Exact fields for error measurement. Missing gradients are approximated by
/// central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub q: CoefficientField,
    pub p: CoefficientField,
    pub u: CoefficientField,
    pub grad_q: Option<CoefficientField>,
    pub grad_p: Option<CoefficientField>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    /// `‖U − u_h‖_{L²}`
    pub l2_u: f64,
    /// `‖∇(P − p_h)‖_{L²}`
    pub h1semi_p: f64,
    /// `‖∇(q − q_h)‖_{L²}`
    pub h1semi_q: f64,
    /// `‖q − q_h‖_{L²}`
    pub l2_q: f64,
    /// `max |q − q_h|` over vertices and quadrature points.
    pub linf_q: f64,
}

fn gradient(
    field: &CoefficientField,
    grad: Option<&CoefficientField>,
    name: &'static str,
    x: Point,
    step: f64,
) -> Result<[f64; 2], FemError> {
    if let Some(g) = grad {
        return at(name, x, g.eval_vector(x));
    }
    let e = |p: Point| at(name, p, field.eval_scalar(p));
    Ok([
        (e([x[0] + step, x[1]])? - e([x[0] - step, x[1]])?) / (2.0 * step),
        (e([x[0], x[1] + step])? - e([x[0], x[1] - step])?) / (2.0 * step),
    ])
}

fn sq(a: f64, b: f64) -> f64 {
    a * a + b * b
}

fn interpolate(nodal: &[f64], tri: &[usize; 3], lam: &[f64; 3]) -> f64 {
    nodal[tri[0]] * lam[0] + nodal[tri[1]] * lam[1] + nodal[tri[2]] * lam[2]
}

fn grad_p1(nodal: &[f64], tri: &[usize; 3], g: &[[f64; 2]; 3]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for k in 0..3 {
        out[0] += nodal[tri[k]] * g[k][0];
        out[1] += nodal[tri[k]] * g[k][1];
    }
    out
}

/// Error norms of a discrete solution against exact fields, with the
/// degree-6 rule.
pub fn error_norms(mesh: &Mesh, solution: &FemSolution, exact: &ExactSolution) -> Result<ErrorNorms, FemError> {
    let rule: &TriangleRule = &TRI_DEGREE_6;
    let step = 1e-6 * mesh.diameter();
    let mut e = ErrorNorms::default();
    let (mut u2, mut gp2, mut gq2, mut q2) = (0.0, 0.0, 0.0, 0.0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let (g, area) = p1_gradients(&pts);
        let gqh = grad_p1(&solution.q, tri, &g);
        let gph = grad_p1(&solution.p, tri, &g);
        let uh = solution.u[t];
        for (x, lam, w) in rule.map(&pts, area) {
            let ue = at("exact u", x, exact.u.eval_vector(x))?;
            let gpe = gradient(&exact.p, exact.grad_p.as_ref(), "exact p", x, step)?;
            let gqe = gradient(&exact.q, exact.grad_q.as_ref(), "exact q", x, step)?;
            let qe = at("exact q", x, exact.q.eval_scalar(x))?;
            let dq = qe - interpolate(&solution.q, tri, &lam);
            u2 += w * sq(ue[0] - uh[0], ue[1] - uh[1]);
            gp2 += w * sq(gpe[0] - gph[0], gpe[1] - gph[1]);
            gq2 += w * sq(gqe[0] - gqh[0], gqe[1] - gqh[1]);
            q2 += w * dq * dq;
            e.linf_q = e.linf_q.max(dq.abs());
        }
    }
    for (i, &x) in mesh.vertices().iter().enumerate() {
        let qe = at("exact q", x, exact.q.eval_scalar(x))?;
        e.linf_q = e.linf_q.max((qe - solution.q[i]).abs());
    }
    e.l2_u = libm::sqrt(u2);
    e.h1semi_p = libm::sqrt(gp2);
    e.h1semi_q = libm::sqrt(gq2);
    e.l2_q = libm::sqrt(q2);
    Ok(e)
}

/// `‖p_h + ln(q_h) / γ‖_{L²}`, the distance between the Darcy pressure and the
/// pressure recovered from `q_h`. Requires `q_h > 0` at every vertex.
pub fn pressure_recovery_gap(mesh: &Mesh, q: &[f64], p: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts = mesh.triangle_points(t);
        let area = mesh.triangle_area(t);
        for (_, lam, w) in TRI_DEGREE_6.map(&pts, area) {
            let d = interpolate(p, tri, &lam) + libm::log(interpolate(q, tri, &lam)) / gamma;
            acc += w * d * d;
        }
    }
    libm::sqrt(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_triangle() -> Mesh {
        Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn reference_stiffness_matches_symbolic_values() {
        let m = reference_triangle();
        let k = assemble_stiffness(&m).to_dense();
        let expected = [1.0, -0.5, -0.5, -0.5, 0.5, 0.0, -0.5, 0.0, 0.5];
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_coupling_entry() {
        let m = reference_triangle();
        let d = assemble_darcy(&m, &[1.0; 3]).unwrap();
        // vertex (1, 0) against the x-component: ∫_T ∂λ₁/∂x = 1 · 1/2
        assert!((d.coupling.get(1, 0) - 0.5).abs() < 1e-15);
        assert!(d.coupling.get(1, 1).abs() < 1e-15);
        assert!((d.mass[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn darcy_rejects_nonpositive_alpha() {
        let m = reference_triangle();
        assert_eq!(
            assemble_darcy(&m, &[1.0, -0.1, 1.0]).unwrap_err(),
            FemError::NonPositiveAlpha { vertex: 1, value: -0.1 }
        );
        assert!(matches!(assemble_darcy(&m, &[1.0]), Err(FemError::LengthMismatch { .. })));
    }

    #[test]
    fn evaluation_errors_name_the_point() {
        let m = reference_triangle();
        let f = CoefficientField::parse_vector(["1/(x-x)", "0"], &Default::default()).unwrap();
        let err = assemble_convdiff(&m, &f, &Divergence::Analytic(CoefficientField::constant(0.0)), 1.0).unwrap_err();
        assert!(matches!(err, FemError::Evaluation { field: "f", .. }));
    }

    #[test]
    fn zero_forcing_reduces_to_stiffness() {
        let m = crate::mesh::generate_annulus(1.0, 2.0, 0.4).unwrap();
        let a = assemble_convdiff(
            &m,
            &CoefficientField::constant_vector([0.0, 0.0]),
            &Divergence::Analytic(CoefficientField::constant(0.0)),
            2.0,
        )
        .unwrap();
        let k = assemble_stiffness(&m);
        for (x, y) in a.to_dense().iter().zip(k.to_dense()) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
