//! Finite element solver for porous-media flow whose drag coefficient grows
//! exponentially with pressure, `α(p) = α₀ exp(γ p)`.
//!
//! The nonlinear Darcy system is never iterated. Instead the substitution
//! `q = exp(-γ p)` turns it into a linear convection–diffusion problem for
//! `q`, after which `α̃ = α₀ / q` feeds a linear Darcy solve:
//!
//! 1. [`driver::solve_q`] assembles and solves the Robin/Dirichlet
//!    convection–diffusion problem for `q_h` (P1, `q_h = 1` on the inner walls),
//! 2. [`driver::positivity_guard`] refuses to continue if `min q_h` is not
//!    strictly positive,
//! 3. [`driver::compute_alpha_tilde`] and [`fem::assemble_darcy`] build the
//!    weighted P0/P1 mixed system, which [`linalg::schur_darcy_solve`]
//!    reduces to an SPD pressure problem.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the companion `pdarcy` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod driver;
pub mod expr;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod verify;

/// A point in the plane.
pub type Point = [f64; 2];

pub use driver::{DataReport, ProblemData, ProblemSpec, SplittingOptions};
pub use expr::{CoefficientField, Expr};
pub use fem::FemSolution;
pub use linalg::CsrMatrix;
pub use mesh::{BoundaryTag, Mesh};
