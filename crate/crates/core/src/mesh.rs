//! Conforming triangulations of annulus-type domains.
//!
//! Boundary edges are stored oriented so that the domain lies on their left,
//! which makes the outward normal of edge `a → b` equal to `(dy, −dx) / len`.
//! Every closed boundary loop carries one tag: the loop with the largest
//! bounding box is the outer boundary [`BoundaryTag::Gamma`], every other
//! loop is an inner wall [`BoundaryTag::GammaW`].

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt::Write as _;
use thiserror::Error;

use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    /// Outer boundary, where the normal flux is prescribed.
    Gamma,
    /// Inner walls, where the pressure vanishes.
    GammaW,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Gamma => "Gamma",
            BoundaryTag::GammaW => "GammaW",
        }
    }
}

impl core::str::FromStr for BoundaryTag {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Gamma" => Ok(BoundaryTag::Gamma),
            "GammaW" => Ok(BoundaryTag::GammaW),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    /// Oriented with the domain on the left.
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("target_h = {target_h} is too coarse to resolve an annulus of width {width}")]
    TooCoarse { target_h: f64, width: f64 },
    #[error("triangle {triangle} references vertex {index}, but the mesh has {count} vertices")]
    IndexOutOfRange { triangle: usize, index: usize, count: usize },
    #[error("triangle {triangle} has non-positive signed area {area:e}")]
    NonPositiveArea { triangle: usize, area: f64 },
    #[error("edge ({}, {}) is shared by {count} triangles", edge[0], edge[1])]
    NonConforming { edge: [usize; 2], count: usize },
    #[error("boundary edge list does not match the triangulation: {0}")]
    BoundaryMismatch(String),
    #[error("boundary is not a union of closed loops at vertex {vertex}")]
    OpenLoop { vertex: usize },
    #[error("boundary loop through vertex {vertex} has inconsistent or wrong tags")]
    LoopTag { vertex: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown boundary tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
}

/// Shape statistics of a triangulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Largest triangle diameter.
    pub h_max: f64,
    /// Smallest triangle diameter.
    pub h_min: f64,
    pub min_inradius: f64,
    /// Largest per-triangle ratio diameter / inradius.
    pub max_shape_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    h: f64,
}

impl Mesh {
    /// Assembles a mesh from raw parts, checking indices and orientation.
    /// Use [`Mesh::validate`] for the full set of invariants.
    pub fn new(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self, MeshError> {
        let count = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange { triangle: t, index, count });
            }
            let area = signed_area(&[vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { triangle: t, area });
            }
        }
        for e in &boundary {
            if e.vertices.iter().any(|&i| i >= count) {
                return Err(MeshError::BoundaryMismatch(format!(
                    "boundary edge {:?} out of range",
                    e.vertices
                )));
            }
        }
        let h = triangles
            .iter()
            .map(|t| diameter(&[vertices[t[0]], vertices[t[1]], vertices[t[2]]]))
            .fold(0.0, f64::max);
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            h,
        })
    }

    /// Builds a mesh from a triangulation, extracting and tagging its
    /// boundary loops.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut mesh = Mesh::new(vertices, triangles, Vec::new())?;
        let edges = EdgeTable::new(&mesh.triangles);
        edges.check_conforming()?;
        let oriented: Vec<[usize; 2]> = edges.boundary_edges(&mesh.triangles);
        mesh.boundary = tag_loops(&mesh.vertices, &oriented)?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Maximum triangle diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.triangle_points(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_points(&self, e: &BoundaryEdge) -> [Point; 2] {
        [self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]]
    }

    /// Unit outward normal of a boundary edge.
    pub fn outward_normal(&self, e: &BoundaryEdge) -> [f64; 2] {
        let [a, b] = self.edge_points(e);
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = libm::hypot(dx, dy);
        [dy / len, -dx / len]
    }

    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| {
                let [a, b] = self.edge_points(e);
                libm::hypot(b[0] - a[0], b[1] - a[1])
            })
            .sum()
    }

    /// Vertices touched by an edge with the given tag, as a mask.
    pub fn tagged_vertex_mask(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for e in self.boundary.iter().filter(|e| e.tag == tag) {
            mask[e.vertices[0]] = true;
            mask[e.vertices[1]] = true;
        }
        mask
    }

    /// Diagonal of the bounding box.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = bbox(self.vertices.iter().copied());
        libm::hypot(hi[0] - lo[0], hi[1] - lo[1])
    }

    pub fn quality(&self) -> MeshQuality {
        let mut q = MeshQuality {
            h_max: 0.0,
            h_min: f64::INFINITY,
            min_inradius: f64::INFINITY,
            max_shape_ratio: 0.0,
        };
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            let d = diameter(&p);
            let perimeter = (0..3)
                .map(|k| {
                    let (a, b) = (p[k], p[(k + 1) % 3]);
                    libm::hypot(b[0] - a[0], b[1] - a[1])
                })
                .sum::<f64>();
            let inradius = 2.0 * signed_area(&p) / perimeter;
            q.h_max = q.h_max.max(d);
            q.h_min = q.h_min.min(d);
            q.min_inradius = q.min_inradius.min(inradius);
            q.max_shape_ratio = q.max_shape_ratio.max(d / inradius);
        }
        q
    }

    /// Checks every structural invariant: positive orientation, conformity,
    /// boundary list equal to the set of single-use edges (with matching
    /// orientation), closed loops, and one tag per loop following the
    /// bounding-box rule.
    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange { triangle: t, index, count });
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(MeshError::NonPositiveArea { triangle: t, area });
            }
        }
        let edges = EdgeTable::new(&self.triangles);
        edges.check_conforming()?;
        let mut expected = edges.boundary_edges(&self.triangles);
        let mut actual: Vec<[usize; 2]> = self.boundary.iter().map(|e| e.vertices).collect();
        expected.sort_unstable();
        actual.sort_unstable();
        if expected != actual {
            return Err(MeshError::BoundaryMismatch(format!(
                "{} single-use edges, {} boundary records",
                expected.len(),
                actual.len()
            )));
        }
        let retagged = tag_loops(&self.vertices, &actual)?;
        let mut want: Vec<([usize; 2], BoundaryTag)> = retagged.iter().map(|e| (e.vertices, e.tag)).collect();
        let mut have: Vec<([usize; 2], BoundaryTag)> = self.boundary.iter().map(|e| (e.vertices, e.tag)).collect();
        want.sort_unstable();
        have.sort_unstable();
        if let Some((w, _)) = want.iter().zip(&have).find(|(w, h)| w != h) {
            return Err(MeshError::LoopTag { vertex: w.0[0] });
        }
        Ok(())
    }

    /// Number of closed boundary loops.
    pub fn boundary_loops(&self) -> Result<Vec<Vec<usize>>, MeshError> {
        let edges: Vec<[usize; 2]> = self.boundary.iter().map(|e| e.vertices).collect();
        Ok(chain_loops(&edges)?.into_iter().map(|l| l.into_iter().map(|i| edges[i][0]).collect()).collect())
    }
}

pub(crate) fn signed_area(p: &[Point; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

fn diameter(p: &[Point; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            libm::hypot(b[0] - a[0], b[1] - a[1])
        })
        .fold(0.0, f64::max)
}

fn bbox(points: impl Iterator<Item = Point>) -> (Point, Point) {
    points.fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| {
            (
                [lo[0].min(p[0]), lo[1].min(p[1])],
                [hi[0].max(p[0]), hi[1].max(p[1])],
            )
        },
    )
}

/// Unique undirected edges of a triangulation. Local edge `k` of a triangle
/// is the one opposite its vertex `k`.
struct EdgeTable {
    /// `(min, max)` vertex pairs, sorted.
    keys: Vec<[usize; 2]>,
    /// Triangles using each edge.
    users: Vec<Vec<usize>>,
    /// Global edge id of each local edge.
    tri_edges: Vec<[usize; 3]>,
}

impl EdgeTable {
    fn new(triangles: &[[usize; 3]]) -> Self {
        let mut recs: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                recs.push(([a.min(b), a.max(b)], t, k));
            }
        }
        recs.sort_unstable();
        let mut keys: Vec<[usize; 2]> = Vec::new();
        let mut users: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = vec![[0usize; 3]; triangles.len()];
        for (key, t, k) in recs {
            if keys.last() != Some(&key) {
                keys.push(key);
                users.push(Vec::with_capacity(2));
            }
            let id = keys.len() - 1;
            users[id].push(t);
            tri_edges[t][k] = id;
        }
        EdgeTable { keys, users, tri_edges }
    }

    fn check_conforming(&self) -> Result<(), MeshError> {
        match self.users.iter().position(|u| u.len() > 2) {
            Some(i) => Err(MeshError::NonConforming {
                edge: self.keys[i],
                count: self.users[i].len(),
            }),
            None => Ok(()),
        }
    }

    /// Single-use edges oriented with the owning triangle (domain on the left).
    fn boundary_edges(&self, triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
        let mut out = Vec::new();
        for (t, ids) in self.tri_edges.iter().enumerate() {
            for (k, &id) in ids.iter().enumerate() {
                if self.users[id].len() == 1 {
                    let tri = triangles[t];
                    out.push([tri[(k + 1) % 3], tri[(k + 2) % 3]]);
                }
            }
        }
        out
    }
}

/// Groups oriented edges into closed loops (lists of edge indices).
fn chain_loops(edges: &[[usize; 2]]) -> Result<Vec<Vec<usize>>, MeshError> {
    let mut outgoing: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        if outgoing.insert(e[0], i).is_some() {
            return Err(MeshError::OpenLoop { vertex: e[0] });
        }
    }
    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut cur = start;
        loop {
            used[cur] = true;
            lp.push(cur);
            let next_vertex = edges[cur][1];
            if next_vertex == edges[start][0] {
                break;
            }
            match outgoing.get(&next_vertex) {
                Some(&nxt) if !used[nxt] => cur = nxt,
                _ => return Err(MeshError::OpenLoop { vertex: next_vertex }),
            }
        }
        loops.push(lp);
    }
    Ok(loops)
}

fn tag_loops(vertices: &[Point], edges: &[[usize; 2]]) -> Result<Vec<BoundaryEdge>, MeshError> {
    let loops = chain_loops(edges)?;
    let extent = |lp: &Vec<usize>| {
        let (lo, hi) = bbox(lp.iter().map(|&i| vertices[edges[i][0]]));
        (hi[0] - lo[0]) * (hi[1] - lo[1])
    };
    let outer = loops
        .iter()
        .enumerate()
        .max_by(|a, b| extent(a.1).total_cmp(&extent(b.1)))
        .map(|(i, _)| i);
    let mut out = Vec::with_capacity(edges.len());
    for (l, lp) in loops.iter().enumerate() {
        let tag = if Some(l) == outer {
            BoundaryTag::Gamma
        } else {
            BoundaryTag::GammaW
        };
        out.extend(lp.iter().map(|&i| BoundaryEdge {
            vertices: edges[i],
            tag,
        }));
    }
    Ok(out)
}

/// Splits every triangle into four similar children through its edge
/// midpoints. Boundary edges split in two and keep their tag.
pub fn refine_uniform(mesh: &Mesh) -> Result<Mesh, MeshError> {
    let edges = EdgeTable::new(&mesh.triangles);
    edges.check_conforming()?;
    let n = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(edges.keys.iter().map(|&[a, b]| {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }));
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let [ma, mb, mc] = edges.tri_edges[t].map(|id| n + id);
        triangles.push([a, mc, mb]);
        triangles.push([mc, b, ma]);
        triangles.push([mb, ma, c]);
        triangles.push([ma, mb, mc]);
    }
    let mut boundary = Vec::with_capacity(2 * mesh.boundary.len());
    for e in &mesh.boundary {
        let [a, b] = e.vertices;
        let key = [a.min(b), a.max(b)];
        let id = edges
            .keys
            .binary_search(&key)
            .map_err(|_| MeshError::BoundaryMismatch(format!("boundary edge {:?} is not a mesh edge", e.vertices)))?;
        let m = n + id;
        boundary.push(BoundaryEdge { vertices: [a, m], tag: e.tag });
        boundary.push(BoundaryEdge { vertices: [m, b], tag: e.tag });
    }
    Mesh::new(vertices, triangles, boundary)
}

/// Applies [`refine_uniform`] `levels` times.
pub fn refine_times(mesh: &Mesh, levels: u32) -> Result<Mesh, MeshError> {
    let mut m = mesh.clone();
    for _ in 0..levels {
        m = refine_uniform(&m)?;
    }
    Ok(m)
}

/// Upper bound on `max triangle diameter / target_h` for
/// [`generate_annulus`]: radial and circumferential spacings are both at most
/// `target_h`, so the longest triangle side is at most a ring-to-ring
/// diagonal.
pub const ANNULUS_DIAMETER_FACTOR: f64 = 2.0;

/// Triangulates the annulus `r_inner < |x| < r_outer` with concentric rings of
/// vertices. Both circles are replaced by inscribed polygons whose chords
/// are at most `target_h` long.
pub fn generate_annulus(r_inner: f64, r_outer: f64, target_h: f64) -> Result<Mesh, MeshError> {
    if !(r_inner > 0.0 && r_outer > r_inner && r_outer.is_finite()) {
        return Err(MeshError::InvalidParameters(format!(
            "need 0 < r_inner < r_outer, got r_inner = {r_inner}, r_outer = {r_outer}"
        )));
    }
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(MeshError::InvalidParameters(format!("target_h must be positive, got {target_h}")));
    }
    let width = r_outer - r_inner;
    if target_h > width {
        return Err(MeshError::TooCoarse { target_h, width });
    }
    let layers = libm::ceil(width / target_h) as usize;
    let mut vertices: Vec<Point> = Vec::new();
    let mut rings: Vec<(usize, usize)> = Vec::with_capacity(layers + 1);
    for k in 0..=layers {
        let r = r_inner + width * k as f64 / layers as f64;
        let count = (libm::ceil(2.0 * PI * r / target_h) as usize).max(6);
        // stagger alternate rings by half a step
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        rings.push((vertices.len(), count));
        for i in 0..count {
            let theta = 2.0 * PI * (i as f64 + shift) / count as f64;
            vertices.push([r * libm::cos(theta), r * libm::sin(theta)]);
        }
    }
    let mut triangles = Vec::new();
    for k in 0..layers {
        let (a0, na) = rings[k];
        let (b0, nb) = rings[k + 1];
        let sa = if k % 2 == 1 { 0.5 } else { 0.0 };
        let sb = if (k + 1) % 2 == 1 { 0.5 } else { 0.0 };
        let angle_a = |i: usize| (i as f64 + sa) / na as f64;
        let angle_b = |j: usize| (j as f64 + sb) / nb as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let advance_a = j == nb || (i < na && angle_a(i + 1) <= angle_b(j + 1));
            let tri = if advance_a {
                let t = [a0 + i % na, b0 + j % nb, a0 + (i + 1) % na];
                i += 1;
                t
            } else {
                let t = [a0 + i % na, b0 + j % nb, b0 + (j + 1) % nb];
                j += 1;
                t
            };
            let p = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            triangles.push(if signed_area(&p) > 0.0 { tri } else { [tri[0], tri[2], tri[1]] });
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

fn subdivide(breaks: &[f64], target_h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let m = (libm::ceil((w[1] - w[0]) / target_h) as usize).max(1);
        for k in 1..=m {
            out.push(if k == m { w[1] } else { w[0] + (w[1] - w[0]) * k as f64 / m as f64 });
        }
    }
    out
}

/// Triangulates `(−c, c)² \ ([−a, a]² ∪ [c−b, c]²)` exactly, on a tensor grid
/// aligned with every corner of the domain. Each grid cell is split along
/// alternating diagonals.
pub fn generate_square_with_holes(c: f64, a: f64, b: f64, target_h: f64) -> Result<Mesh, MeshError> {
    if !(b > 0.0 && a > 0.0 && a < c && a + b < c && c.is_finite()) {
        return Err(MeshError::InvalidParameters(format!(
            "need 0 < b, 0 < a < c, a + b < c; got c = {c}, a = {a}, b = {b}"
        )));
    }
    if !(target_h > 0.0 && target_h.is_finite()) {
        return Err(MeshError::InvalidParameters(format!("target_h must be positive, got {target_h}")));
    }
    let grid = subdivide(&[-c, -a, a, c - b, c], target_h);
    let n = grid.len();
    let removed = |i: usize, j: usize| {
        let cx = 0.5 * (grid[i] + grid[i + 1]);
        let cy = 0.5 * (grid[j] + grid[j + 1]);
        (cx.abs() < a && cy.abs() < a) || (cx > c - b && cy > c - b)
    };
    let mut index = vec![usize::MAX; n * n];
    let mut vertices: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    let mut node = |i: usize, j: usize, vertices: &mut Vec<Point>| {
        let slot = &mut index[j * n + i];
        if *slot == usize::MAX {
            *slot = vertices.len();
            vertices.push([grid[i], grid[j]]);
        }
        *slot
    };
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            if removed(i, j) {
                continue;
            }
            let v00 = node(i, j, &mut vertices);
            let v10 = node(i + 1, j, &mut vertices);
            let v11 = node(i + 1, j + 1, &mut vertices);
            let v01 = node(i, j + 1, &mut vertices);
            if (i + j) % 2 == 0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Plain-text serialization: `VERTICES n`, `TRIANGLES m` and `BOUNDARY k`
/// sections with one whitespace-separated record per line. Coordinates use
/// the shortest representation that round-trips exactly.
pub fn format_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "VERTICES {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
    }
    let _ = writeln!(s, "TRIANGLES {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "BOUNDARY {}", mesh.boundary.len());
    for e in &mesh.boundary {
        let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.as_str());
    }
    s
}

/// Parses [`format_mesh`] output and validates the result. Blank lines and
/// lines starting with `#` are ignored.
pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let last_line = text.lines().count();

    let header = |name: &str, lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<usize, MeshError> {
        let (line, l) = lines.next().ok_or(MeshError::Parse {
            line: last_line + 1,
            message: format!("unexpected end of file, expected `{name} <count>`"),
        })?;
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Err(MeshError::Parse {
                line,
                message: format!("expected section `{name}`"),
            });
        }
        let count = it
            .next()
            .and_then(|c| c.parse::<usize>().ok())
            .ok_or_else(|| MeshError::Parse {
                line,
                message: format!("`{name}` needs a record count"),
            })?;
        Ok(count)
    };

    fn fields<'a>(
        lines: &mut dyn Iterator<Item = (usize, &'a str)>,
        expected: usize,
        section: &str,
        last_line: usize,
    ) -> Result<(usize, Vec<&'a str>), MeshError> {
        let (line, l) = lines.next().ok_or(MeshError::Parse {
            line: last_line + 1,
            message: format!("unexpected end of file inside {section}"),
        })?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != expected {
            return Err(MeshError::Parse {
                line,
                message: format!("{section} record needs {expected} fields, found {}", f.len()),
            });
        }
        Ok((line, f))
    }

    fn num<T: core::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T, MeshError> {
        s.parse().map_err(|_| MeshError::Parse {
            line,
            message: format!("invalid {what} `{s}`"),
        })
    }

    let nv = header("VERTICES", &mut lines)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = fields(&mut lines, 2, "VERTICES", last_line)?;
        vertices.push([num::<f64>(f[0], line, "coordinate")?, num::<f64>(f[1], line, "coordinate")?]);
    }
    let nt = header("TRIANGLES", &mut lines)?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, f) = fields(&mut lines, 3, "TRIANGLES", last_line)?;
        triangles.push([
            num::<usize>(f[0], line, "vertex index")?,
            num::<usize>(f[1], line, "vertex index")?,
            num::<usize>(f[2], line, "vertex index")?,
        ]);
    }
    let nb = header("BOUNDARY", &mut lines)?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, f) = fields(&mut lines, 3, "BOUNDARY", last_line)?;
        let tag = f[2].parse::<BoundaryTag>().map_err(|_| MeshError::UnknownTag {
            line,
            tag: f[2].to_string(),
        })?;
        boundary.push(BoundaryEdge {
            vertices: [num::<usize>(f[0], line, "vertex index")?, num::<usize>(f[1], line, "vertex index")?],
            tag,
        });
    }
    if let Some((line, _)) = lines.next() {
        return Err(MeshError::Parse {
            line,
            message: "trailing content after BOUNDARY section".into(),
        });
    }
    let mesh = Mesh::new(vertices, triangles, boundary)?;
    mesh.validate()?;
    Ok(mesh)
}
