//! File writers: mesh text files, legacy VTK and study CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use pdarcy_core::fem::FemSolution;
use pdarcy_core::mesh::{format_mesh, parse_mesh, Mesh};
use pdarcy_core::verify::{StudyResult, ERROR_COLUMNS};

use crate::CliError;

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), CliError> {
    write_file(path, &format_mesh(mesh))
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mesh(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Legacy VTK 2.0 ASCII unstructured grid with point scalars `q`, `p`,
/// `alpha`, `p_from_q` (the pressure `−ln(q)/γ` recovered from `q`) and
/// the cell vector `u`.
pub fn vtk_string(mesh: &Mesh, sol: &FemSolution, gamma: f64) -> String {
    let mut s = String::new();
    let nv = mesh.num_vertices();
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "# vtk DataFile Version 2.0\npdarcy solution\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?} 0", v[0], v[1]);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}");
    let recovered: Vec<f64> = sol.q.iter().map(|q| -q.ln() / gamma).collect();
    for (name, values) in [
        ("q", &sol.q),
        ("p", &sol.p),
        ("alpha", &sol.alpha),
        ("p_from_q", &recovered),
    ] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{v:?}");
        }
    }
    let _ = writeln!(s, "CELL_DATA {nt}\nVECTORS u double");
    for u in &sol.u {
        let _ = writeln!(s, "{:?} {:?} 0", u[0], u[1]);
    }
    s
}

pub fn write_vtk(mesh: &Mesh, sol: &FemSolution, gamma: f64, path: &Path) -> Result<(), CliError> {
    write_file(path, &vtk_string(mesh, sol, gamma))
}

fn sci(v: f64) -> String {
    format!("{v:.8e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

fn status(row: &pdarcy_core::verify::StudyRow) -> String {
    match (&row.error, row.positive) {
        (Some(e), _) => format!("\"{}\"", e.replace('"', "'")),
        (None, Some(false)) => "nonpositive".into(),
        (None, _) => "ok".into(),
    }
}

/// `level,ndofs,h,min_q,status`.
pub fn positivity_csv(result: &StudyResult) -> String {
    let mut s = String::from("level,ndofs,h,min_q,status\n");
    for r in &result.rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.level, r.ndofs, sci(r.h), opt(r.min_q), status(r));
    }
    s
}

/// One row per level with every error column and the recovery gap, then a
/// `rate` footer row holding the fitted slopes.
pub fn convergence_csv(result: &StudyResult) -> String {
    let mut s = String::from("level,ndofs,h,min_q");
    for c in ERROR_COLUMNS {
        s.push(',');
        s.push_str(c);
    }
    s.push_str(",recovery_gap,status\n");
    for r in &result.rows {
        let _ = write!(s, "{},{},{},{}", r.level, r.ndofs, sci(r.h), opt(r.min_q));
        let cols = r.norms.map(|n| [n.h1semi_q, n.l2_u, n.h1semi_p, n.l2_q, n.linf_q]);
        for k in 0..ERROR_COLUMNS.len() {
            let _ = write!(s, ",{}", opt(cols.map(|c| c[k])));
        }
        let _ = writeln!(s, ",{},{}", opt(r.recovery_gap), status(r));
    }
    s.push_str("rate,,,");
    for k in 0..ERROR_COLUMNS.len() {
        let _ = write!(s, ",{}", opt(result.rates.map(|r| r[k])));
    }
    s.push_str(",,\n");
    s
}

pub fn write_csv(text: &str, path: &Path) -> Result<(), CliError> {
    write_file(path, text)
}
