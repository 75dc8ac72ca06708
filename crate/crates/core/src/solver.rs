//! Conjugate-gradient solver and the Schur-complement solve for one
//! semi-implicit time step.
//!
//! Each step couples positions and curvature through the symmetric block
//! system (per coordinate)
//!
//! ```text
//!   A u + lambda_b S w = b        with  M w = S u,
//! ```
//!
//! which is reduced to the symmetric positive definite Schur complement
//! `(A + lambda_b S M^-1 S) u = b` and solved with preconditioned CG. The
//! inner action of `M^-1` is either a nested CG solve on the consistent mass
//! matrix or a diagonal solve with the lumped mass, chosen by [`MassMode`].

use std::cell::{Cell, RefCell};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::assembly::SparseMatrix;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{stage} did not converge within {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("operator is not positive definite: direction curvature {curvature:.3e} at iteration {iteration}")]
    IndefiniteOperator { iteration: usize, curvature: f64 },
    #[error("preconditioner diagonal entry {row} is not positive")]
    ZeroDiagonal { row: usize },
}

/// Abstract symmetric operator for the CG solver.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y);
    }
}

#[derive(Debug)]
pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(diag: Vec<f64>) -> Result<Self, SolverError> {
        let mut inv_diag = diag;
        for (row, d) in inv_diag.iter_mut().enumerate() {
            if !(*d > 0.0) {
                return Err(SolverError::ZeroDiagonal { row });
            }
            *d = 1.0 / *d;
        }
        Ok(Self { inv_diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = r[i] * self.inv_diag[i];
        }
    }
}

/// Jacobi preconditioner from a matrix diagonal.
pub fn jacobi_precond(mat: &SparseMatrix) -> Result<JacobiPreconditioner, SolverError> {
    JacobiPreconditioner::new(mat.diagonal())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Converges when the recurrence residual satisfies
/// `||r|| <= rel_tol * ||b||` *and* the explicitly recomputed residual
/// `b - A x` confirms it; a failed confirmation restarts the recurrence from
/// the true residual. Returns the solution and the iteration count.
pub fn cg_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&JacobiPreconditioner>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize), SolverError> {
    cg_solve_observed(op, b, precond, rel_tol, max_iter, |_| {})
}

fn cg_solve_observed(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: Option<&JacobiPreconditioner>,
    rel_tol: f64,
    max_iter: usize,
    mut observe: impl FnMut(&[f64]),
) -> Result<(Vec<f64>, usize), SolverError> {
    let n = op.dim();
    assert_eq!(b.len(), n);
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let threshold = rel_tol * b_norm;

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let apply_precond = |r: &[f64], z: &mut Vec<f64>| match precond {
        Some(p) => p.apply(r, z),
        None => z.copy_from_slice(r),
    };
    apply_precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut last_residual = b_norm;

    for it in 1..=max_iter {
        op.apply(&p, &mut scratch);
        let p_ap = dot(&p, &scratch);
        if !(p_ap > 0.0) {
            return Err(SolverError::IndefiniteOperator {
                iteration: it,
                curvature: p_ap,
            });
        }
        let alpha = rz / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * scratch[i];
        }
        observe(&x);
        last_residual = norm(&r);
        if last_residual <= threshold {
            // Confirm against the exactly recomputed residual; the recurrence
            // can drift after many iterations.
            op.apply(&x, &mut scratch);
            for i in 0..n {
                r[i] = b[i] - scratch[i];
            }
            last_residual = norm(&r);
            if last_residual <= threshold {
                return Ok((x, it));
            }
            apply_precond(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        apply_precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NoConvergence {
        stage: "cg",
        iterations: max_iter,
        residual: last_residual / b_norm,
    })
}

/// How the curvature equation's mass matrix is inverted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    /// Nested CG solve with the consistent mass matrix.
    Consistent,
    /// Diagonal solve with the row-sum lumped mass.
    Lumped,
}

#[derive(Debug, Error)]
#[error("unknown solver mode '{0}' (expected consistent or lumped)")]
pub struct BadMassMode(pub String);

impl fmt::Display for MassMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MassMode::Consistent => "consistent",
            MassMode::Lumped => "lumped",
        })
    }
}

impl FromStr for MassMode {
    type Err = BadMassMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "consistent" => Ok(MassMode::Consistent),
            "lumped" => Ok(MassMode::Lumped),
            other => Err(BadMassMode(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub mass_mode: MassMode,
    /// Relative tolerance of the outer Schur-complement CG.
    pub outer_rel_tol: f64,
    /// Relative tolerance of nested mass solves (consistent mode).
    pub inner_rel_tol: f64,
    /// Iteration budget per unknown for every CG invocation.
    pub max_iter_per_dof: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mass_mode: MassMode::Consistent,
            outer_rel_tol: 1e-10,
            inner_rel_tol: 1e-12,
            max_iter_per_dof: 10,
        }
    }
}

/// Assembled matrices and right-hand sides of one time step.
///
/// In `Lumped` mode the curvature equation `M w = S u` uses the lumped
/// diagonal in place of `mass`, both inside the solve and in the residuals.
pub struct StepSystem {
    pub a: SparseMatrix,
    pub stiffness: SparseMatrix,
    pub mass: SparseMatrix,
    pub lumped_mass: Vec<f64>,
    pub lambda_b: f64,
    pub rhs: [Vec<f64>; 3],
}

pub struct SchurSolution {
    pub u: [Vec<f64>; 3],
    pub w: [Vec<f64>; 3],
    /// Max over coordinates of ||A u + lambda_b S w - b|| / ||b||.
    pub residual_u: f64,
    /// Max over coordinates of ||M w - S u|| / ||S u||.
    pub residual_w: f64,
    pub outer_iterations: [usize; 3],
}

/// The operator `x -> A x + lambda_b S M^-1 S x`, with nested-solve failures
/// parked until the outer iteration finishes.
struct SchurOperator<'a> {
    sys: &'a StepSystem,
    opts: &'a SolverOptions,
    mass_precond: Option<JacobiPreconditioner>,
    inv_lumped: Vec<f64>,
    inner_error: RefCell<Option<SolverError>>,
    inner_iterations: Cell<usize>,
}

impl<'a> SchurOperator<'a> {
    fn new(sys: &'a StepSystem, opts: &'a SolverOptions) -> Result<Self, SolverError> {
        let mass_precond = match opts.mass_mode {
            MassMode::Consistent => Some(jacobi_precond(&sys.mass)?),
            MassMode::Lumped => None,
        };
        let mut inv_lumped = sys.lumped_mass.clone();
        for (row, d) in inv_lumped.iter_mut().enumerate() {
            if !(*d > 0.0) {
                return Err(SolverError::ZeroDiagonal { row });
            }
            *d = 1.0 / *d;
        }
        Ok(Self {
            sys,
            opts,
            mass_precond,
            inv_lumped,
            inner_error: RefCell::new(None),
            inner_iterations: Cell::new(0),
        })
    }

    /// out = M^-1 x under the configured mass mode.
    fn mass_solve(&self, x: &[f64], out: &mut [f64]) {
        match self.opts.mass_mode {
            MassMode::Lumped => {
                for i in 0..x.len() {
                    out[i] = x[i] * self.inv_lumped[i];
                }
            }
            MassMode::Consistent => {
                let max_iter = iteration_budget(self.opts, self.sys.mass.n());
                match cg_solve(
                    &self.sys.mass,
                    x,
                    self.mass_precond.as_ref(),
                    self.opts.inner_rel_tol,
                    max_iter,
                ) {
                    Ok((sol, iters)) => {
                        self.inner_iterations
                            .set(self.inner_iterations.get() + iters);
                        out.copy_from_slice(&sol);
                    }
                    Err(err) => {
                        let mut slot = self.inner_error.borrow_mut();
                        if slot.is_none() {
                            *slot = Some(relabel(err, "inner mass solve"));
                        }
                        out.fill(0.0);
                    }
                }
            }
        }
    }

    fn take_inner_error(&self) -> Option<SolverError> {
        self.inner_error.borrow_mut().take()
    }
}

impl LinearOperator for SchurOperator<'_> {
    fn dim(&self) -> usize {
        self.sys.mass.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        let mut su = vec![0.0; n];
        self.sys.stiffness.matvec(x, &mut su);
        let mut minv_su = vec![0.0; n];
        self.mass_solve(&su, &mut minv_su);
        self.sys.a.matvec(x, y);
        let mut s_minv_su = vec![0.0; n];
        self.sys.stiffness.matvec(&minv_su, &mut s_minv_su);
        for i in 0..n {
            y[i] += self.sys.lambda_b * s_minv_su[i];
        }
    }
}

fn relabel(err: SolverError, stage: &'static str) -> SolverError {
    match err {
        SolverError::NoConvergence {
            iterations,
            residual,
            ..
        } => SolverError::NoConvergence {
            stage,
            iterations,
            residual,
        },
        other => other,
    }
}

fn iteration_budget(opts: &SolverOptions, n: usize) -> usize {
    opts.max_iter_per_dof.saturating_mul(n).max(100)
}

fn norm_or_one(x: &[f64]) -> f64 {
    let v = norm(x);
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

/// Solve one step's block system for all three coordinates.
///
/// The outer CG runs on the Schur complement with a Jacobi preconditioner
/// built from `diag(A) + lambda_b diag(S D_L^-1 S)`, where `D_L` is the
/// lumped mass; the curvature is recovered as `w = M^-1 S u`. Residuals of
/// both block equations are reported so callers can gate on them.
pub fn schur_step_solve(
    sys: &StepSystem,
    opts: &SolverOptions,
) -> Result<SchurSolution, SolverError> {
    let n = sys.mass.n();
    for rhs in &sys.rhs {
        assert_eq!(rhs.len(), n);
    }
    let op = SchurOperator::new(sys, opts)?;

    let mut outer_diag = sys.a.diagonal();
    let gram = sys.stiffness.scaled_gram_diagonal(&sys.lumped_mass);
    for i in 0..n {
        outer_diag[i] += sys.lambda_b * gram[i];
    }
    let precond = JacobiPreconditioner::new(outer_diag)?;
    let max_iter = iteration_budget(opts, n);

    let mut u: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut w: [Vec<f64>; 3] = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut outer_iterations = [0usize; 3];
    let mut residual_u = 0.0f64;
    let mut residual_w = 0.0f64;

    for c in 0..3 {
        let outcome = cg_solve(&op, &sys.rhs[c], Some(&precond), opts.outer_rel_tol, max_iter);
        // A nested failure poisons the outer iteration; report the root cause.
        if let Some(err) = op.take_inner_error() {
            return Err(err);
        }
        let (sol, iters) = outcome.map_err(|e| relabel(e, "interface solve"))?;
        outer_iterations[c] = iters;

        let su = sys.stiffness.apply(&sol);
        let mut w_c = vec![0.0; n];
        op.mass_solve(&su, &mut w_c);
        if let Some(err) = op.take_inner_error() {
            return Err(err);
        }

        // Residual of A u + lambda_b S w = b.
        let mut block_u = sys.a.apply(&sol);
        let sw = sys.stiffness.apply(&w_c);
        for i in 0..n {
            block_u[i] += sys.lambda_b * sw[i] - sys.rhs[c][i];
        }
        residual_u = residual_u.max(norm(&block_u) / norm_or_one(&sys.rhs[c]));

        // Residual of M w = S u under the active mass mode.
        let mut block_w = match opts.mass_mode {
            MassMode::Consistent => sys.mass.apply(&w_c),
            MassMode::Lumped => w_c
                .iter()
                .zip(&sys.lumped_mass)
                .map(|(w, d)| w * d)
                .collect(),
        };
        for i in 0..n {
            block_w[i] -= su[i];
        }
        residual_w = residual_w.max(norm(&block_w) / norm_or_one(&su));

        u[c] = sol;
        w[c] = w_c;
    }

    Ok(SchurSolution {
        u,
        w,
        residual_u,
        residual_w,
        outer_iterations,
    })
}
