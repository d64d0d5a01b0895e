use nalgebra::{DMatrix, DVector};
use pdarcy_core::linalg::{
    gmres, norm2, relative_residual, schur_complement, schur_darcy_solve, solve_dense_lu, solve_nonsym, solve_spd_cg,
    CsrMatrix, DenseLu, Ilu0, LinalgError, SolveMethod,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let m = DMatrix::from_row_slice(n, n, &a.to_dense());
    m.lu().solve(&DVector::from_column_slice(b)).unwrap().as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sparse, nonsymmetric and strictly diagonally dominant.
fn dominant(n: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..n {
        let mut off = 0.0;
        for _ in 0..5 {
            let j = rng.gen_range(0..n);
            if j != i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                off += v.abs();
                t.push((i, j, v));
            }
        }
        t.push((i, i, off + rng.gen_range(0.5..2.0)));
    }
    CsrMatrix::from_triplets(n, n, t)
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn nonsymmetric_solvers_match_dense_lu() {
    for seed in 0..5 {
        let a = dominant(50, seed);
        let b = random_vec(50, 100 + seed);
        let expected = oracle(&a, &b);
        let (x, stats) = solve_nonsym(&a, &b, 1e-12, 500).unwrap();
        assert_eq!(stats.method, SolveMethod::Gmres);
        assert!(max_diff(&x, &expected) < 1e-8);
        let (x, _) = gmres(&a, &b, None, 50, 1e-12, 500).unwrap();
        assert!(max_diff(&x, &expected) < 1e-8);
        let ilu = Ilu0::new(&a).unwrap();
        let (x, stats) = gmres(&a, &b, Some(&ilu), 10, 1e-12, 500).unwrap();
        assert!(max_diff(&x, &expected) < 1e-8);
        assert!((relative_residual(&a, &x, &b).unwrap() - stats.relative_residual).abs() < 1e-12);
        let (x, stats) = solve_dense_lu(&a, &b).unwrap();
        assert_eq!(stats.method, SolveMethod::DenseLu);
        assert!(max_diff(&x, &expected) < 1e-12);
    }
}

#[test]
fn upper_triangular_system_is_solved_exactly() {
    let n = 12;
    let mut dense = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            dense[i * n + j] = if i == j { 2.0 + i as f64 } else { 1.0 / (1 + j - i) as f64 };
        }
    }
    let a = CsrMatrix::from_dense(n, n, &dense);
    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let b = a.spmv(&x_true).unwrap();
    let x = DenseLu::factor(n, &dense).unwrap().solve(&b).unwrap();
    assert!(max_diff(&x, &x_true) < 1e-12);
    let ilu = Ilu0::new(&a).unwrap();
    let mut y = b.clone();
    ilu.apply(&mut y);
    assert!(max_diff(&y, &x_true) < 1e-12, "ILU(0) of a triangular matrix is exact");
}

#[test]
fn singular_matrices_are_reported() {
    let a = CsrMatrix::from_dense(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 1.0, 1.0]);
    assert!(matches!(solve_dense_lu(&a, &[1.0, 2.0, 3.0]), Err(LinalgError::SingularPivot { .. })));
    let r = solve_nonsym(&a, &[1.0, 0.0, 0.0], 1e-12, 50);
    assert!(r.is_err());
}

#[test]
fn cg_matches_dense_lu_on_spd_systems() {
    let n = 40;
    let b_mat = dominant(n, 9);
    let dense_b = DMatrix::from_row_slice(n, n, &b_mat.to_dense());
    let spd = &dense_b * dense_b.transpose() + DMatrix::identity(n, n);
    let a = CsrMatrix::from_dense(n, n, spd.as_slice());
    let rhs = random_vec(n, 10);
    let (x, stats) = solve_spd_cg(&a, &rhs, 1e-13, 1000).unwrap();
    assert_eq!(stats.method, SolveMethod::ConjugateGradient);
    assert!(max_diff(&x, &oracle(&a, &rhs)) < 1e-9);
}

#[cfg(debug_assertions)]
#[test]
fn cg_rejects_asymmetric_input() {
    let a = dominant(20, 2);
    let r = solve_spd_cg(&a, &random_vec(20, 3), 1e-10, 100);
    assert!(matches!(r, Err(LinalgError::NotSymmetric { .. })));
}

fn coupling(rows: usize, cols: usize, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for i in 0..rows {
        t.push((i, i, 1.0 + rng.gen::<f64>()));
        for _ in 0..3 {
            t.push((i, rng.gen_range(0..cols), rng.gen_range(-1.0..1.0)));
        }
    }
    CsrMatrix::from_triplets(rows, cols, t)
}

#[test]
fn schur_complement_is_symmetric_positive_definite() {
    let b = coupling(15, 40, 4);
    let m: Vec<f64> = random_vec(40, 5).iter().map(|v| 1.5 + v).collect();
    let s = schur_complement(&m, &b).unwrap();
    assert_eq!(s.max_relative_asymmetry(), 0.0);
    let dense = DMatrix::from_row_slice(15, 15, &s.to_dense());
    let db = DMatrix::from_row_slice(15, 40, &b.to_dense());
    let dm = DMatrix::from_diagonal(&DVector::from_iterator(40, m.iter().map(|v| 1.0 / v)));
    assert!((&dense - &db * dm * db.transpose()).abs().max() < 1e-13);
    assert!(dense.cholesky().is_some());
    let mut bad = m.clone();
    bad[7] = 0.0;
    assert!(matches!(
        schur_complement(&bad, &b),
        Err(LinalgError::NonPositiveDiagonal { index: 7, .. })
    ));
}

#[test]
fn saddle_solve_satisfies_both_equations() {
    let b = coupling(15, 40, 6);
    let m: Vec<f64> = random_vec(40, 7).iter().map(|v| 2.0 + v).collect();
    let f = random_vec(40, 8);
    let g = random_vec(15, 9);
    let sol = schur_darcy_solve(&m, &b, &f, &g, 1e-13).unwrap();
    let bu = b.spmv(&sol.u).unwrap();
    let btp = b.spmv_transpose(&sol.p).unwrap();
    let momentum: Vec<f64> = (0..40).map(|k| m[k] * sol.u[k] + btp[k] - f[k]).collect();
    let mass: Vec<f64> = bu.iter().zip(&g).map(|(x, y)| x - y).collect();
    assert!(norm2(&momentum) < 1e-12 * norm2(&f));
    assert!(norm2(&mass) < 1e-10 * norm2(&g));
    assert!(sol.mass_residual < 1e-10);
    assert!((sol.momentum_residual - norm2(&momentum) / norm2(&f)).abs() < 1e-14);
}

fn triplets() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        (
            Just(r),
            Just(c),
            prop::collection::vec((0..r, 0..c, -10.0f64..10.0), 0..40),
        )
    })
}

proptest! {
    #[test]
    fn csr_agrees_with_dense_arithmetic((r, c, t) in triplets(), seed in 0u64..1000) {
        let a = CsrMatrix::from_triplets(r, c, t.clone());
        let mut dense = vec![0.0; r * c];
        for &(i, j, v) in &t {
            dense[i * c + j] += v;
        }
        let back = a.to_dense();
        for (x, y) in back.iter().zip(&dense) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let x = random_vec(c, seed);
        let y = a.spmv(&x).unwrap();
        for i in 0..r {
            let e: f64 = (0..c).map(|j| dense[i * c + j] * x[j]).sum();
            prop_assert!((y[i] - e).abs() < 1e-10);
        }
        let w = random_vec(r, seed + 1);
        let via_t = a.transpose().spmv(&w).unwrap();
        let direct = a.spmv_transpose(&w).unwrap();
        prop_assert!(max_diff(&via_t, &direct) < 1e-10);
        prop_assert_eq!(a.transpose().transpose(), a.clone());
        prop_assert!(a.spmv(&vec![0.0; c + 1]).is_err());
    }

    #[test]
    fn restriction_keeps_selected_entries(n in 2usize..10, seed in 0u64..1000) {
        let a = dominant(n, seed);
        let keep: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
        let s = a.restrict(&keep, &keep);
        for (ri, &i) in keep.iter().enumerate() {
            for (rj, &j) in keep.iter().enumerate() {
                prop_assert_eq!(s.get(ri, rj), a.get(i, j));
            }
        }
    }
}
