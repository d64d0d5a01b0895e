use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use pdarcy_core::driver::{check_data_conditions, solve_splitting, DataReport, ProblemSpec};
use pdarcy_core::mesh::Mesh;
use pdarcy_core::verify::{convergence_level, positivity_level, StudyResult, StudyRow};

use crate::config::RunConfig;
use crate::output;
use crate::CliError;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    pub override_sign_checks: bool,
    /// Study levels run concurrently on this many threads.
    pub workers: usize,
    /// Replaces the output path from the config.
    pub out: Option<PathBuf>,
}

impl CommandOptions {
    fn output(&self, cfg: &RunConfig, default: &std::path::Path) -> PathBuf {
        match &self.out {
            Some(p) => p.clone(),
            None => cfg.resolve(default),
        }
    }
}

fn print_report(report: &DataReport, out: &mut dyn Write) {
    for (name, c) in report.checks() {
        let _ = writeln!(
            out,
            "{:<7} {}  min {:.8e} at ({:.8e}, {:.8e})",
            name,
            if c.passed { "ok  " } else { "FAIL" },
            c.min,
            c.worst_point[0],
            c.worst_point[1]
        );
    }
}

pub fn mesh_gen(cfg: &RunConfig, opts: &CommandOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let mesh = cfg.mesh()?;
    let path = opts.output(cfg, &cfg.run.mesh_out);
    output::write_mesh(&mesh, &path)?;
    let q = mesh.quality();
    let _ = writeln!(
        out,
        "wrote {}: {} vertices, {} triangles, h = {:.8e}, max shape ratio {:.3}",
        path.display(),
        mesh.num_vertices(),
        mesh.num_triangles(),
        mesh.h(),
        q.max_shape_ratio
    );
    Ok(())
}

pub fn check_data(cfg: &RunConfig, _opts: &CommandOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = ProblemSpec::new(cfg.problem_data()?, cfg.mesh()?);
    let report = check_data_conditions(&spec, cfg.run.tol_sign)?;
    print_report(&report, out);
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::DataConditions(report))
    }
}

pub fn solve(cfg: &RunConfig, opts: &CommandOptions, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = ProblemSpec::new(cfg.problem_data()?, cfg.mesh()?);
    let res = solve_splitting(&spec, &cfg.options(opts.override_sign_checks))?;
    if !res.report.passed() {
        let _ = writeln!(out, "warning: sign conditions violated, continuing on override");
        print_report(&res.report, out);
    }
    let path = opts.output(cfg, &cfg.run.vtk_out);
    output::write_vtk(&spec.mesh, &res.solution, spec.data.gamma, &path)?;
    let sol = &res.solution;
    let max_q = sol.q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u_l2 = spec
        .mesh
        .triangles()
        .iter()
        .enumerate()
        .map(|(t, _)| spec.mesh.triangle_area(t) * (sol.u[t][0].powi(2) + sol.u[t][1].powi(2)))
        .sum::<f64>()
        .sqrt();
    let _ = writeln!(out, "vertices            {}", spec.mesh.num_vertices());
    let _ = writeln!(out, "min_q               {:.8e}", res.min_q);
    let _ = writeln!(out, "max_q               {:.8e}", max_q);
    let _ = writeln!(out, "max_abs_p           {:.8e}", sol.p.iter().fold(0.0f64, |m, p| m.max(p.abs())));
    let _ = writeln!(out, "velocity_l2         {:.8e}", u_l2);
    let _ = writeln!(
        out,
        "q_solve             {} iterations, relative residual {:.3e}",
        res.q_stats.iterations, res.q_stats.relative_residual
    );
    let _ = writeln!(
        out,
        "darcy_solve         {} iterations, relative residual {:.3e}",
        res.darcy_stats.iterations, res.darcy_stats.relative_residual
    );
    let _ = writeln!(out, "mass_residual       {:.3e}", res.mass_residual);
    let _ = writeln!(out, "momentum_residual   {:.3e}", res.momentum_residual);
    let _ = writeln!(out, "q_galerkin_residual {:.3e}", res.q_galerkin_residual);
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(())
}

/// Runs `level_fn` on every mesh, spreading levels over `workers` threads.
/// Rows come back ordered by level whatever the schedule.
fn run_levels<F>(meshes: Vec<Mesh>, workers: usize, level_fn: F) -> StudyResult
where
    F: Fn(Mesh, u32) -> StudyRow + Sync,
{
    let workers = workers.clamp(1, meshes.len().max(1));
    let jobs: Vec<Mutex<Option<Mesh>>> = meshes.into_iter().map(|m| Mutex::new(Some(m))).collect();
    let next = AtomicUsize::new(0);
    let rows = Mutex::new(Vec::with_capacity(jobs.len()));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(k) else { break };
                let mesh = job.lock().expect("job lock").take().expect("each level runs once");
                let row = level_fn(mesh, k as u32);
                rows.lock().expect("row lock").push(row);
            });
        }
    });
    StudyResult::from_rows(rows.into_inner().expect("row lock"))
}

fn print_rows(result: &StudyResult, out: &mut dyn Write) {
    for r in &result.rows {
        let min_q = r.min_q.map(|m| format!("{m:.8e}")).unwrap_or_else(|| "-".into());
        let _ = write!(out, "level {:>2}  ndofs {:>8}  h {:.4e}  min_q {}", r.level, r.ndofs, r.h, min_q);
        if let Some(e) = &r.error {
            let _ = write!(out, "  [{e}]");
        }
        let _ = writeln!(out);
    }
}

pub fn study_positivity(cfg: &RunConfig, opts: &CommandOptions, out: &mut dyn Write) -> Result<StudyResult, CliError> {
    let data = cfg.problem_data()?;
    let sopts = cfg.options(opts.override_sign_checks);
    let meshes = cfg
        .family()
        .meshes(cfg.domain.levels)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let result = run_levels(meshes, opts.workers, |m, k| positivity_level(&data, m, k, &sopts));
    let path = opts.output(cfg, &cfg.run.csv_out);
    output::write_csv(&output::positivity_csv(&result), &path)?;
    print_rows(&result, out);
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(result)
}

pub fn study_convergence(cfg: &RunConfig, opts: &CommandOptions, out: &mut dyn Write) -> Result<StudyResult, CliError> {
    let data = cfg.problem_data()?;
    let exact = cfg.exact()?;
    let sopts = cfg.options(opts.override_sign_checks);
    let meshes = cfg
        .family()
        .meshes(cfg.domain.levels)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let result = run_levels(meshes, opts.workers, |m, k| convergence_level(&data, &exact, m, k, &sopts));
    let path = opts.output(cfg, &cfg.run.csv_out);
    output::write_csv(&output::convergence_csv(&result), &path)?;
    print_rows(&result, out);
    if let Some(rates) = result.rates {
        let _ = writeln!(
            out,
            "rates: h1_q {:.3}  l2_u {:.3}  h1_p {:.3}  l2_q {:.3}  linf_q {:.3}",
            rates[0], rates[1], rates[2], rates[3], rates[4]
        );
    }
    for (col, level) in &result.non_monotone {
        let _ = writeln!(out, "note: {col} grew at level {level}");
    }
    let _ = writeln!(out, "wrote {}", path.display());
    Ok(result)
}
