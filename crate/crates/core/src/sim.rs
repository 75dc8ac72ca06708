//! Semi-implicit time stepping for the membrane force balance.
//!
//! All integrals live on the fixed reference surface, so mass and stiffness
//! matrices are assembled once. Each step solves, per coordinate,
//!
//! ```text
//!   ((1/tau) M + S + M_lambda) U' + lambda_b S W' = (1/tau) M U
//!         + tension_rhs(U) + M_lambda target(U) + pressure(U),
//!   M W' = S U',
//! ```
//!
//! where `M_lambda` is the mass matrix weighted by the distance-dependent
//! linker stiffness and `target` the point each linker pulls toward. The
//! stabilizing `S U'` on the left and the explicit tension load on the right
//! cancel exactly for a resting surface at full tension, so equilibria are
//! preserved. Manufactured mode drops all physics in favor of the linear
//! reaction `3 u`, keeping only `(1/tau) M` implicit.

use thiserror::Error;

use crate::assembly::{
    assemble_mass, assemble_stiffness, assemble_tension_rhs, assemble_weighted_mass, lump, volume,
    AssemblyError, SparseMatrix, VectorField,
};
use crate::forces::{ForceModel, ModelError, ModelMode, ParamError, ParamSet};
use crate::geometry::{build_cortex, CortexField};
use crate::mesh::{MeshError, SurfaceMesh};
use crate::solver::{
    cg_solve, jacobi_precond, schur_step_solve, MassMode, SolverError, SolverOptions, StepSystem,
};

/// Largest acceptable relative residual of either block equation per step.
pub const RESIDUAL_GATE: f64 = 1e-8;

pub type HookResult = Result<(), Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("step {step}: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolverError,
    },
    #[error("step {step}: block residual {residual:.3e} exceeds the {gate:.1e} gate")]
    Residual { step: usize, residual: f64, gate: f64 },
    #[error("output hook failed at step {step}: {source}")]
    Hook {
        step: usize,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// Complete simulation state after `step` time steps.
#[derive(Debug, Clone)]
pub struct SimState {
    pub step: usize,
    pub time: f64,
    pub positions: VectorField,
    /// Curvature vector field W = M^-1 S U.
    pub curvature: VectorField,
    /// Whether each vertex is within linker reach of its cortex anchor.
    pub linker_intact: Vec<bool>,
}

impl SimState {
    pub fn broken_linkers(&self) -> usize {
        self.linker_intact.iter().filter(|&&ok| !ok).count()
    }
}

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub residual_u: f64,
    pub residual_w: f64,
    pub outer_iterations: [usize; 3],
    pub broken_linkers: usize,
    pub volume: f64,
}

/// Borrowed view of one output frame.
pub struct Snapshot<'a> {
    pub step: usize,
    pub time: f64,
    pub mesh: &'a SurfaceMesh,
    pub positions: &'a VectorField,
    pub curvature: &'a VectorField,
    pub linker_intact: &'a [bool],
    pub cortex_distance: Vec<f64>,
}

#[derive(Debug)]
pub struct TimeStepper {
    mesh: SurfaceMesh,
    model: ForceModel,
    params: ParamSet,
    cortex: CortexField,
    mass: SparseMatrix,
    stiffness: SparseMatrix,
    lumped: Vec<f64>,
    solver: SolverOptions,
}

impl TimeStepper {
    pub fn new(
        mesh: SurfaceMesh,
        mode: ModelMode,
        params: ParamSet,
        solver: SolverOptions,
    ) -> Result<Self, SimError> {
        params.validate()?;
        let model = ForceModel::new(mode, &params)?;
        let cortex = build_cortex(&mesh, params.l0)?;
        let mass = assemble_mass(&mesh);
        let stiffness = assemble_stiffness(&mesh);
        let lumped = lump(&mass);
        Ok(Self {
            mesh,
            model,
            params,
            cortex,
            mass,
            stiffness,
            lumped,
            solver,
        })
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn cortex(&self) -> &CortexField {
        &self.cortex
    }

    pub fn solver_options(&self) -> &SolverOptions {
        &self.solver
    }

    pub fn n_steps(&self) -> usize {
        ((self.params.t_end / self.params.tau - 1e-9).ceil() as usize).max(1)
    }

    /// Solve M x = b per coordinate under the configured mass mode.
    fn mass_solve_field(&self, b: &VectorField, step: usize) -> Result<VectorField, SimError> {
        let n = self.mesh.n_vertices();
        let mut out = vec![[0.0; 3]; n];
        match self.solver.mass_mode {
            MassMode::Lumped => {
                for i in 0..n {
                    for c in 0..3 {
                        out[i][c] = b[i][c] / self.lumped[i];
                    }
                }
            }
            MassMode::Consistent => {
                let precond =
                    jacobi_precond(&self.mass).map_err(|source| SimError::Solver { step, source })?;
                let max_iter = (self.solver.max_iter_per_dof.saturating_mul(n)).max(100);
                for c in 0..3 {
                    let rhs: Vec<f64> = b.iter().map(|v| v[c]).collect();
                    let (x, _) = cg_solve(
                        &self.mass,
                        &rhs,
                        Some(&precond),
                        self.solver.inner_rel_tol,
                        max_iter,
                    )
                    .map_err(|source| SimError::Solver { step, source })?;
                    for i in 0..n {
                        out[i][c] = x[i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// State at t = 0: reference positions, discrete curvature W = M^-1 S U,
    /// and the linker attachment pattern.
    pub fn initial_state(&self) -> Result<SimState, SimError> {
        let positions: VectorField = self.mesh.vertices().to_vec();
        let su = self.stiffness.apply_field(&positions);
        let curvature = self.mass_solve_field(&su, 0)?;
        let linker_intact = self
            .cortex
            .distances(&positions)
            .iter()
            .map(|&d| d <= self.params.u_break)
            .collect();
        Ok(SimState {
            step: 0,
            time: 0.0,
            positions,
            curvature,
            linker_intact,
        })
    }

    /// Assemble the block system advancing `state` by one step.
    pub fn build_step_system(&self, state: &SimState) -> Result<StepSystem, SimError> {
        let n = self.mesh.n_vertices();
        let tau = self.params.tau;
        let (a, loads) = match self.model.mode() {
            ModelMode::Manufactured => {
                let a = SparseMatrix::linear_combination(&[(1.0 / tau, &self.mass)]);
                let scaled: VectorField = state
                    .positions
                    .iter()
                    .map(|p| crate::vec3::scale(*p, 1.0 / tau + 3.0))
                    .collect();
                (a, self.mass.apply_field(&scaled))
            }
            _ => {
                let dists = self.cortex.distances(&state.positions);
                let coeff: Vec<f64> = dists
                    .iter()
                    .map(|&d| self.model.lambda_coupling(d))
                    .collect();
                let m_lambda = assemble_weighted_mass(&self.mesh, &coeff)?;
                let a = SparseMatrix::linear_combination(&[
                    (1.0 / tau, &self.mass),
                    (1.0, &self.stiffness),
                    (1.0, &m_lambda),
                ]);
                let targets: VectorField = state
                    .positions
                    .iter()
                    .zip(&self.cortex.positions)
                    .map(|(&u, &c)| self.model.coupling_target(u, c))
                    .collect();
                let spring = m_lambda.apply_field(&targets);
                let model = self.model;
                let tension =
                    assemble_tension_rhs(&self.mesh, &state.positions, |g2| model.tension_scale(g2));
                let pressure = self.model.pressure_load(&self.mesh, &state.positions);
                let mu = self.mass.apply_field(&state.positions);
                let mut loads = vec![[0.0; 3]; n];
                for i in 0..n {
                    for c in 0..3 {
                        loads[i][c] =
                            mu[i][c] / tau + tension[i][c] + spring[i][c] + pressure[i][c];
                    }
                }
                (a, loads)
            }
        };
        let rhs = std::array::from_fn(|c| loads.iter().map(|v| v[c]).collect());
        Ok(StepSystem {
            a,
            stiffness: self.stiffness.clone(),
            mass: self.mass.clone(),
            lumped_mass: self.lumped.clone(),
            lambda_b: self.params.lambda_b,
            rhs,
        })
    }

    /// Advance one time step.
    pub fn step(&self, state: &SimState) -> Result<(SimState, StepReport), SimError> {
        let step = state.step + 1;
        let sys = self.build_step_system(state)?;
        let sol = schur_step_solve(&sys, &self.solver)
            .map_err(|source| SimError::Solver { step, source })?;
        let worst = sol.residual_u.max(sol.residual_w);
        if !(worst <= RESIDUAL_GATE) {
            return Err(SimError::Residual {
                step,
                residual: worst,
                gate: RESIDUAL_GATE,
            });
        }
        let n = self.mesh.n_vertices();
        let positions: VectorField = (0..n)
            .map(|i| [sol.u[0][i], sol.u[1][i], sol.u[2][i]])
            .collect();
        let curvature: VectorField = (0..n)
            .map(|i| [sol.w[0][i], sol.w[1][i], sol.w[2][i]])
            .collect();
        let linker_intact: Vec<bool> = self
            .cortex
            .distances(&positions)
            .iter()
            .map(|&d| d <= self.params.u_break)
            .collect();
        let broken_linkers = linker_intact.iter().filter(|&&ok| !ok).count();
        let report = StepReport {
            step,
            time: step as f64 * self.params.tau,
            residual_u: sol.residual_u,
            residual_w: sol.residual_w,
            outer_iterations: sol.outer_iterations,
            broken_linkers,
            volume: volume(&self.mesh, &positions),
        };
        let next = SimState {
            step,
            time: report.time,
            positions,
            curvature,
            linker_intact,
        };
        Ok((next, report))
    }

    pub fn snapshot<'a>(&'a self, state: &'a SimState) -> Snapshot<'a> {
        Snapshot {
            step: state.step,
            time: state.time,
            mesh: &self.mesh,
            positions: &state.positions,
            curvature: &state.curvature,
            linker_intact: &state.linker_intact,
            cortex_distance: self.cortex.distances(&state.positions),
        }
    }

    /// Run from t = 0 to t_end, invoking `hook` on the initial state, every
    /// `output_every`-th step (0 disables intermediate frames), and the final
    /// state. On a failed step the last good state is flushed to the hook
    /// before the error propagates.
    pub fn run(
        &self,
        output_every: usize,
        mut hook: impl FnMut(&Snapshot<'_>) -> HookResult,
    ) -> Result<(SimState, Vec<StepReport>), SimError> {
        let n_steps = self.n_steps();
        let mut state = self.initial_state()?;
        hook(&self.snapshot(&state)).map_err(|source| SimError::Hook { step: 0, source })?;
        let mut reports = Vec::with_capacity(n_steps);
        while state.step < n_steps {
            match self.step(&state) {
                Ok((next, report)) => {
                    state = next;
                    reports.push(report);
                    let due = (output_every > 0 && state.step % output_every == 0)
                        || state.step == n_steps;
                    if due {
                        hook(&self.snapshot(&state)).map_err(|source| SimError::Hook {
                            step: state.step,
                            source,
                        })?;
                    }
                }
                Err(err) => {
                    // Salvage the last completed frame for post-mortems.
                    let _ = hook(&self.snapshot(&state));
                    return Err(err);
                }
            }
        }
        Ok((state, reports))
    }
}
