//! Verification harnesses: an independent dense solver for the step system,
//! exact-identity checks, and mesh-convergence studies.
//!
//! The dense oracle factors the full 2N x 2N block matrix
//! `[[A, lambda_b S], [S, -M]]` with partially pivoted Gaussian elimination,
//! sharing no code with the iterative Schur-complement path, so the two can
//! cross-check each other. The manufactured convergence study integrates the
//! closed-form decaying sphere `u = exp(-t) y`, `w = 2 exp(-t) y` (unit
//! bending modulus, reaction 3u) and reports errors in the mass norm.

use thiserror::Error;

use crate::assembly::{
    assemble_tension_rhs, mass_norm, mass_norm_sq, volume, VectorField,
};
use crate::forces::{ModelMode, ParamSet, SHARP_TENSION_GUARD};
use crate::geometry::{cube_sphere, GeometryError};
use crate::mesh::SurfaceMesh;
use crate::sim::{SimError, SimState, TimeStepper};
use crate::solver::{MassMode, SolverOptions, StepSystem};
use crate::vec3;

/// Dense-solve size cap: the oracle is O((2N)^3) and meant for small meshes.
pub const DENSE_ORACLE_MAX_VERTICES: usize = 500;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("dense system is numerically singular at elimination column {column} (pivot {pivot:.3e})")]
    SingularSystem { column: usize, pivot: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy)]
pub struct EocRow {
    /// Refinement passes applied to the base mesh.
    pub level: usize,
    pub h_max: f64,
    /// Primary and secondary error measures (study-specific).
    pub errors: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct EocReport {
    pub rows: Vec<EocRow>,
}

impl EocReport {
    /// Estimated orders between consecutive rows, normalized by the actual
    /// mesh-size ratio: `ln(e_l / e_{l+1}) / ln(h_l / h_{l+1})`. One pair per
    /// gap; `orders()[k]` sits between rows k and k+1.
    pub fn orders(&self) -> Vec<[f64; 2]> {
        self.rows
            .windows(2)
            .map(|pair| {
                let dh = (pair[0].h_max / pair[1].h_max).ln();
                [
                    (pair[0].errors[0] / pair[1].errors[0]).ln() / dh,
                    (pair[0].errors[1] / pair[1].errors[1]).ln() / dh,
                ]
            })
            .collect()
    }
}

mod dense {
    use super::VerifyError;

    /// Solve `mat x = rhs` in place with partially pivoted elimination.
    pub fn lu_solve(mat: &mut [Vec<f64>], rhs: &mut [f64]) -> Result<(), VerifyError> {
        let n = mat.len();
        let max_abs = mat
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))
                .unwrap();
            let pivot = mat[pivot_row][col];
            if pivot.abs() <= 1e-12 * max_abs {
                return Err(VerifyError::SingularSystem { column: col, pivot });
            }
            if pivot_row != col {
                mat.swap(col, pivot_row);
                rhs.swap(col, pivot_row);
            }
            for row in col + 1..n {
                let factor = mat[row][col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    mat[row][k] -= factor * mat[col][k];
                }
                rhs[row] -= factor * rhs[col];
            }
        }
        for col in (0..n).rev() {
            rhs[col] /= mat[col][col];
            let x = rhs[col];
            for row in 0..col {
                rhs[row] -= mat[row][col] * x;
            }
        }
        Ok(())
    }
}

/// Positions and curvatures from the dense oracle, per coordinate.
#[derive(Debug)]
pub struct OracleSolution {
    pub u: [Vec<f64>; 3],
    pub w: [Vec<f64>; 3],
}

/// Solve the full block system of one step by dense elimination.
///
/// In `Lumped` mode the mass block is the lumped diagonal, matching what the
/// iterative path inverts.
pub fn dense_oracle_solve(
    sys: &StepSystem,
    mass_mode: MassMode,
) -> Result<OracleSolution, VerifyError> {
    let n = sys.mass.n();
    assert!(
        n <= DENSE_ORACLE_MAX_VERTICES,
        "dense oracle limited to {DENSE_ORACLE_MAX_VERTICES} vertices, got {n}"
    );
    let a = sys.a.to_dense();
    let s = sys.stiffness.to_dense();
    let m = sys.mass.to_dense();

    let mut u: [Vec<f64>; 3] = Default::default();
    let mut w: [Vec<f64>; 3] = Default::default();
    for c in 0..3 {
        let mut block = vec![vec![0.0; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                block[i][j] = a[i][j];
                block[i][n + j] = sys.lambda_b * s[i][j];
                block[n + i][j] = s[i][j];
            }
            match mass_mode {
                MassMode::Consistent => {
                    for j in 0..n {
                        block[n + i][n + j] = -m[i][j];
                    }
                }
                MassMode::Lumped => block[n + i][n + i] = -sys.lumped_mass[i],
            }
        }
        let mut rhs = vec![0.0; 2 * n];
        rhs[..n].copy_from_slice(&sys.rhs[c]);
        dense::lu_solve(&mut block, &mut rhs)?;
        w[c] = rhs.split_off(n);
        u[c] = rhs;
    }
    Ok(OracleSolution { u, w })
}

/// Assemble the next step of `state` and solve it with the dense oracle.
pub fn dense_oracle_step(
    stepper: &TimeStepper,
    state: &SimState,
) -> Result<OracleSolution, VerifyError> {
    let sys = stepper.build_step_system(state)?;
    dense_oracle_solve(&sys, stepper.solver_options().mass_mode)
}

/// One named exact-identity check.
#[derive(Debug, Clone, Copy)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub error: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn pass(&self) -> bool {
        self.error <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(IdentityCheck::pass)
    }
}

/// Exact discrete identities every assembled mesh must satisfy:
///
/// 1. the mass-matrix entries sum to the surface area;
/// 2. the stiffness matrix annihilates constants;
/// 3. the Dirichlet energy of the identity map is twice the area;
/// 4. the tension load of the resting surface at full tension cancels the
///    stabilizing stiffness action, so the net tension force vanishes.
pub fn identity_suite(mesh: &SurfaceMesh) -> IdentityReport {
    let mass = crate::assembly::assemble_mass(mesh);
    let stiffness = crate::assembly::assemble_stiffness(mesh);
    let area = mesh.total_area();
    let n = mesh.n_vertices();

    let mass_sum_err = (mass.values_sum() - area).abs() / area;

    let ones = vec![1.0; n];
    let s_ones = stiffness.apply(&ones);
    let kernel_err = s_ones.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let id: VectorField = mesh.vertices().to_vec();
    let s_id = stiffness.apply_field(&id);
    let energy: f64 = id.iter().zip(&s_id).map(|(a, b)| vec3::dot(*a, *b)).sum();
    let energy_err = (energy - 2.0 * area).abs() / (2.0 * area);

    let tension = assemble_tension_rhs(mesh, &id, |g2| {
        2.0f64.sqrt() / g2.sqrt().max(SHARP_TENSION_GUARD)
    });
    let rest_err = s_id
        .iter()
        .zip(&tension)
        .map(|(a, b)| vec3::norm(vec3::sub(*a, *b)))
        .fold(0.0f64, f64::max);

    IdentityReport {
        checks: vec![
            IdentityCheck {
                name: "mass entries sum to surface area",
                error: mass_sum_err,
                tolerance: 1e-12,
            },
            IdentityCheck {
                name: "stiffness annihilates constants",
                error: kernel_err,
                tolerance: 1e-10,
            },
            IdentityCheck {
                name: "identity Dirichlet energy is twice the area",
                error: energy_err,
                tolerance: 1e-12,
            },
            IdentityCheck {
                name: "net tension vanishes on the resting surface",
                error: rest_err,
                tolerance: 1e-10,
            },
        ],
    }
}

/// Time-integration accuracy study on refined cube spheres.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceConfig {
    pub t_end: f64,
    /// Step-size rule tau = tau_factor * h^2, rounded so the steps tile
    /// [0, t_end] exactly.
    pub tau_factor: f64,
    pub mass_mode: MassMode,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            t_end: 0.1,
            tau_factor: 0.1,
            mass_mode: MassMode::Consistent,
        }
    }
}

/// Integrate the manufactured decaying-sphere solution on each refinement
/// level; `errors[0]` is the worst-over-time mass-norm position error and
/// `errors[1]` the discrete L2-in-time curvature error.
pub fn manufactured_convergence(
    levels: &[usize],
    cfg: &ConvergenceConfig,
) -> Result<EocReport, VerifyError> {
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let mesh = cube_sphere(level)?;
        let h = mesh.h_max();
        let n_steps = (cfg.t_end / (cfg.tau_factor * h * h)).ceil().max(1.0);
        let tau = cfg.t_end / n_steps;
        let params = ParamSet {
            lambda_b: 1.0,
            tau,
            t_end: cfg.t_end,
            ..ParamSet::table1()
        };
        let opts = SolverOptions {
            mass_mode: cfg.mass_mode,
            ..SolverOptions::default()
        };
        let stepper = TimeStepper::new(mesh, ModelMode::Manufactured, params, opts)?;
        let reference: VectorField = stepper.mesh().vertices().to_vec();

        let diff_to = |field: &VectorField, factor: f64| -> VectorField {
            field
                .iter()
                .zip(&reference)
                .map(|(v, y)| vec3::sub(*v, vec3::scale(*y, factor)))
                .collect()
        };

        let mass = crate::assembly::assemble_mass(stepper.mesh());
        let mut state = stepper.initial_state()?;
        let mut err_u = 0.0f64;
        let mut err_w_sq = 0.0f64;
        loop {
            let decay = (-state.time).exp();
            err_u = err_u.max(mass_norm(&mass, &diff_to(&state.positions, decay)));
            err_w_sq += tau * mass_norm_sq(&mass, &diff_to(&state.curvature, 2.0 * decay));
            if state.step >= stepper.n_steps() {
                break;
            }
            let (next, _) = stepper.step(&state)?;
            state = next;
        }
        rows.push(EocRow {
            level,
            h_max: h,
            errors: [err_u, err_w_sq.sqrt()],
        });
    }
    Ok(EocReport { rows })
}

/// Area and volume errors of refined cube spheres against the smooth sphere;
/// `errors[0]` is the area defect, `errors[1]` the volume defect.
pub fn geometric_convergence(levels: &[usize]) -> Result<EocReport, VerifyError> {
    let exact_area = 4.0 * std::f64::consts::PI;
    let exact_volume = exact_area / 3.0;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let mesh = cube_sphere(level)?;
        let id: VectorField = mesh.vertices().to_vec();
        rows.push(EocRow {
            level,
            h_max: mesh.h_max(),
            errors: [
                (mesh.total_area() - exact_area).abs(),
                (volume(&mesh, &id) - exact_volume).abs(),
            ],
        });
    }
    Ok(EocReport { rows })
}
