//! Compressed sparse row storage and the linear solvers used by the splitting
//! pipeline: Jacobi-preconditioned CG for SPD systems, restarted GMRES with an
//! ILU(0) preconditioner for the nonsymmetric convection–diffusion system, a
//! dense LU fallback, and the Schur-complement reduction of the P0/P1 Darcy
//! saddle-point system.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

/// Default relative tolerance for all iterative solves.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Systems at or below this size fall back to dense LU when GMRES stalls.
pub const DENSE_FALLBACK_LIMIT: usize = 2000;

const GMRES_RESTART: usize = 80;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: expected length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("matrix is not square ({nrows}x{ncols})")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        method: SolveMethod,
        iterations: usize,
        residual: f64,
    },
    #[error("zero pivot in row {row}")]
    SingularPivot { row: usize },
    #[error("non-positive diagonal entry {value:e} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },
    #[error("matrix failed the symmetry probe (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ConjugateGradient,
    Gmres,
    DenseLu,
}

impl core::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            SolveMethod::ConjugateGradient => "CG",
            SolveMethod::Gmres => "GMRES",
            SolveMethod::DenseLu => "dense LU",
        })
    }
}

/// What a solver did. `relative_residual` is recomputed from the returned
/// solution, not taken from the iteration's running estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Sparse matrix in compressed sparse row form.
///
/// Column indices are strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of range for {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Row-major dense input; exact zeros are dropped.
    pub fn from_dense(nrows: usize, ncols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        let triplets = (0..nrows)
            .flat_map(|i| (0..ncols).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = data[i * ncols + j];
                (v != 0.0).then_some((i, j, v))
            })
            .collect();
        Self::from_triplets(nrows, ncols, triplets)
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    /// Entry `(i, j)`, zero if not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(x, self.ncols)?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y = Aᵀ x`.
    pub fn spmv_transpose(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(x, self.nrows)?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let slot = next[j];
                col_idx[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// The submatrix formed by the listed rows and columns, renumbered in
    /// list order.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for &r in rows {
            entries.clear();
            let (c, v) = self.row(r);
            entries.extend(
                c.iter()
                    .zip(v)
                    .filter(|(&j, _)| col_map[j] != usize::MAX)
                    .map(|(&j, &x)| (col_map[j], x)),
            );
            entries.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &entries {
                col_idx.push(j);
                values.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[i * self.ncols + j] = v;
            }
        }
        out
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry magnitude.
    pub fn max_relative_asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    fn check_square(&self) -> Result<(), LinalgError> {
        if self.nrows != self.ncols {
            return Err(LinalgError::NotSquare {
                nrows: self.nrows,
                ncols: self.ncols,
            });
        }
        Ok(())
    }
}

fn check_len(x: &[f64], expected: usize) -> Result<(), LinalgError> {
    if x.len() != expected {
        return Err(LinalgError::ShapeMismatch {
            expected,
            got: x.len(),
        });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `‖b − A x‖ / ‖b‖`, or the absolute residual when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<f64, LinalgError> {
    let ax = a.spmv(x)?;
    check_len(b, ax.len())?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let bn = norm2(b);
    Ok(if bn > 0.0 { norm2(&r) / bn } else { norm2(&r) })
}

/// Cheap xorshift stream for the debug symmetry probe.
#[cfg(debug_assertions)]
fn probe_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

#[cfg(debug_assertions)]
fn symmetry_probe(a: &CsrMatrix) -> Result<(), LinalgError> {
    for seed in 1..=3u64 {
        let x = probe_vector(a.nrows, seed);
        let y = probe_vector(a.nrows, seed + 100);
        let ax = a.spmv(&x)?;
        let ay = a.spmv(&y)?;
        let lhs = dot(&y, &ax);
        let rhs = dot(&x, &ay);
        let scale = norm2(&x) * norm2(&ay) + norm2(&y) * norm2(&ax);
        let asym = (lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE);
        if asym > 1e-10 {
            return Err(LinalgError::NotSymmetric { asymmetry: asym });
        }
    }
    Ok(())
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// `a`. Stops when `‖b − A x‖ ≤ tol ‖b‖`.
pub fn solve_spd_cg(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    a.check_square()?;
    check_len(b, a.nrows)?;
    #[cfg(debug_assertions)]
    symmetry_probe(a)?;
    let n = a.nrows;
    let inv_diag = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(index, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(LinalgError::NonPositiveDiagonal { index, value: d })
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;

    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    let done = |x: Vec<f64>, iterations: usize| -> Result<(Vec<f64>, SolveStats), LinalgError> {
        let relative_residual = relative_residual(a, &x, b)?;
        Ok((
            x,
            SolveStats {
                method: SolveMethod::ConjugateGradient,
                iterations,
                relative_residual,
            },
        ))
    };
    if bnorm == 0.0 {
        return done(x, 0);
    }

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        a.spmv_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(LinalgError::NotConverged {
                method: SolveMethod::ConjugateGradient,
                iterations: it,
                residual: norm2(&r) / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= tol * bnorm {
            // The recurrence drifts from the true residual; confirm before returning.
            let true_res = relative_residual(a, &x, b)?;
            if true_res <= tol {
                return done(x, it);
            }
            let ax = a.spmv(&x)?;
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NotConverged {
        method: SolveMethod::ConjugateGradient,
        iterations: maxit,
        residual: relative_residual(a, &x, b)?,
    })
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinalgError> {
        a.check_square()?;
        let n = a.nrows;
        let mut lu = a.clone();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, _) = lu.row(i);
            match cols.binary_search(&i) {
                Ok(k) => diag_pos.push(lu.row_ptr[i] + k),
                Err(_) => return Err(LinalgError::SingularPivot { row: i }),
            }
        }
        // position of column j within the current row, or usize::MAX
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for k in start..end {
                marker[lu.col_idx[k]] = k;
            }
            for kk in start..end {
                let k = lu.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.values[diag_pos[k]];
                if pivot == 0.0 {
                    return Err(LinalgError::SingularPivot { row: k });
                }
                let lik = lu.values[kk] / pivot;
                lu.values[kk] = lik;
                for kj in diag_pos[k] + 1..lu.row_ptr[k + 1] {
                    let slot = marker[lu.col_idx[kj]];
                    if slot != usize::MAX {
                        lu.values[slot] -= lik * lu.values[kj];
                    }
                }
            }
            for k in start..end {
                marker[lu.col_idx[k]] = usize::MAX;
            }
            if lu.values[diag_pos[i]] == 0.0 {
                return Err(LinalgError::SingularPivot { row: i });
            }
        }
        Ok(Ilu0 { lu, diag_pos })
    }

    /// Overwrites `x` with `(LU)⁻¹ x`.
    pub fn apply(&self, x: &mut [f64]) {
        let n = self.diag_pos.len();
        for i in 0..n {
            let start = self.lu.row_ptr[i];
            let mut s = x[i];
            for k in start..self.diag_pos[i] {
                s -= self.lu.values[k] * x[self.lu.col_idx[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let d = self.diag_pos[i];
            let mut s = x[i];
            for k in d + 1..self.lu.row_ptr[i + 1] {
                s -= self.lu.values[k] * x[self.lu.col_idx[k]];
            }
            x[i] = s / self.lu.values[d];
        }
    }
}

/// Restarted GMRES with right preconditioning, so the monitored residual is
/// the unpreconditioned one.
pub fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    precond: Option<&Ilu0>,
    restart: usize,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    a.check_square()?;
    check_len(b, a.nrows)?;
    let n = a.nrows;
    let m = restart.clamp(1, n.max(1));
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                method: SolveMethod::Gmres,
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let apply_m = |v: &mut [f64]| {
        if let Some(p) = precond {
            p.apply(v);
        }
    };

    let mut total = 0usize;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    // Hessenberg columns, each of length m + 1
    let mut h = vec![vec![0.0; m + 1]; m];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        let ax = a.spmv(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= tol * bnorm {
            return Ok((
                x,
                SolveStats {
                    method: SolveMethod::Gmres,
                    iterations: total,
                    relative_residual: beta / bnorm,
                },
            ));
        }
        if total >= maxit {
            return Err(LinalgError::NotConverged {
                method: SolveMethod::Gmres,
                iterations: total,
                residual: beta / bnorm,
            });
        }
        basis.clear();
        basis.push(r.into_iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        while k < m && total < maxit {
            z.copy_from_slice(&basis[k]);
            apply_m(&mut z);
            a.spmv_into(&z, &mut w);
            // modified Gram–Schmidt, two passes for stability
            for col in h[k].iter_mut() {
                *col = 0.0;
            }
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(&w, v);
                    h[k][i] += hij;
                    for (wj, vj) in w.iter_mut().zip(v) {
                        *wj -= hij * vj;
                    }
                }
            }
            let wn = norm2(&w);
            h[k][k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * h[k][i] + sn[i] * h[k][i + 1];
                h[k][i + 1] = -sn[i] * h[k][i] + cs[i] * h[k][i + 1];
                h[k][i] = t;
            }
            let denom = libm::hypot(h[k][k], h[k][k + 1]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k][k + 1] / denom;
            h[k][k] = denom;
            h[k][k + 1] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k += 1;
            let breakdown = wn <= 1e-300;
            if !breakdown {
                basis.push(w.iter().map(|v| v / wn).collect());
            }
            if g[k].abs() <= tol * bnorm * 0.5 || breakdown {
                break;
            }
        }
        // back substitution for the k x k triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        z.iter_mut().for_each(|v| *v = 0.0);
        for (yi, v) in y.iter().zip(&basis) {
            for (zj, vj) in z.iter_mut().zip(v) {
                *zj += yi * vj;
            }
        }
        apply_m(&mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if k == 0 {
            return Err(LinalgError::NotConverged {
                method: SolveMethod::Gmres,
                iterations: total,
                residual: relative_residual(a, &x, b)?,
            });
        }
    }
}

/// Dense LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n x n` matrix `data`.
    pub fn factor(n: usize, data: &[f64]) -> Result<Self, LinalgError> {
        check_len(data, n * n)?;
        let mut lu = data.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= scale * 1e-15 || pmax == 0.0 {
                return Err(LinalgError::SingularPivot { row: k });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / pivot;
                lu[i * n + k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= l * lu[k * n + j];
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        check_len(b, self.n)?;
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Direct solve through [`DenseLu`].
pub fn solve_dense_lu(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    a.check_square()?;
    let x = DenseLu::factor(a.nrows, &a.to_dense())?.solve(b)?;
    let relative_residual = relative_residual(a, &x, b)?;
    Ok((
        x,
        SolveStats {
            method: SolveMethod::DenseLu,
            iterations: 1,
            relative_residual,
        },
    ))
}

/// Solves a general square system with ILU(0)-preconditioned GMRES.
///
/// Systems with at most [`DENSE_FALLBACK_LIMIT`] unknowns are handed to
/// dense LU if GMRES fails to reach `tol`.
pub fn solve_nonsym(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveStats), LinalgError> {
    a.check_square()?;
    check_len(b, a.nrows)?;
    let ilu = Ilu0::new(a).ok();
    match gmres(a, b, ilu.as_ref(), GMRES_RESTART, tol, maxit) {
        Ok(out) => Ok(out),
        Err(LinalgError::NotConverged { .. }) if a.nrows <= DENSE_FALLBACK_LIMIT => {
            let out = solve_dense_lu(a, b)?;
            if out.1.relative_residual > tol {
                return Err(LinalgError::NotConverged {
                    method: SolveMethod::DenseLu,
                    iterations: 1,
                    residual: out.1.relative_residual,
                });
            }
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

/// `B diag(m)⁻¹ Bᵀ`, the pressure Schur complement of the saddle system
/// `[[diag(m), Bᵀ], [B, 0]]`.
pub fn schur_complement(m_diag: &[f64], b: &CsrMatrix) -> Result<CsrMatrix, LinalgError> {
    check_len(m_diag, b.ncols)?;
    if let Some((index, &value)) = m_diag.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(LinalgError::NonPositiveDiagonal { index, value });
    }
    let bt = b.transpose();
    let mut triplets = Vec::new();
    for c in 0..bt.nrows {
        let (rows, vals) = bt.row(c);
        let inv = 1.0 / m_diag[c];
        for (&i, &bi) in rows.iter().zip(vals) {
            for (&j, &bj) in rows.iter().zip(vals) {
                triplets.push((i, j, bi * bj * inv));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(b.nrows, b.nrows, triplets))
}

/// Solution of the reduced Darcy saddle-point system.
#[derive(Debug, Clone)]
pub struct DarcySolve {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub stats: SolveStats,
    /// `‖B u − G‖ / (‖G‖ + ‖B M⁻¹ F‖)`; the denominator stays meaningful when `G = 0`.
    pub mass_residual: f64,
    /// `‖M u + Bᵀ p − F‖ / ‖F‖` (absolute when `F = 0`).
    pub momentum_residual: f64,
}

/// Solves `M u + Bᵀ p = F`, `B u = G` for diagonal `M` by eliminating the
/// velocity and running CG on the Schur complement `B M⁻¹ Bᵀ`.
pub fn schur_darcy_solve(
    m_diag: &[f64],
    b: &CsrMatrix,
    f: &[f64],
    g: &[f64],
    tol: f64,
) -> Result<DarcySolve, LinalgError> {
    check_len(f, b.ncols)?;
    check_len(g, b.nrows)?;
    let s = schur_complement(m_diag, b)?;
    let minv_f: Vec<f64> = f.iter().zip(m_diag).map(|(fi, mi)| fi / mi).collect();
    let bmf = b.spmv(&minv_f)?;
    let rhs: Vec<f64> = bmf.iter().zip(g).map(|(a, gi)| a - gi).collect();
    let maxit = 20 * b.nrows + 100;
    let (p, stats) = solve_spd_cg(&s, &rhs, tol, maxit)?;
    let btp = b.spmv_transpose(&p)?;
    let u: Vec<f64> = f
        .iter()
        .zip(&btp)
        .zip(m_diag)
        .map(|((fi, bp), mi)| (fi - bp) / mi)
        .collect();

    let bu = b.spmv(&u)?;
    let mass: Vec<f64> = bu.iter().zip(g).map(|(a, gi)| a - gi).collect();
    let mass_scale = norm2(g) + norm2(&bmf);
    let mass_residual = if mass_scale > 0.0 {
        norm2(&mass) / mass_scale
    } else {
        norm2(&mass)
    };
    let mom: Vec<f64> = (0..f.len()).map(|i| m_diag[i] * u[i] + btp[i] - f[i]).collect();
    let fnorm = norm2(f);
    let momentum_residual = if fnorm > 0.0 { norm2(&mom) / fnorm } else { norm2(&mom) };
    Ok(DarcySolve {
        u,
        p,
        stats,
        mass_residual,
        momentum_residual,
    })
}
