//! Surface finite element engine for membrane–cortex mechanics.
//!
//! The crate discretizes a force balance on a closed triangulated surface with
//! piecewise linear (P1) elements and advances it with a semi-implicit scheme:
//! the fourth-order bending term is split into two second-order equations via
//! an auxiliary curvature field, and each time step solves the resulting
//! saddle-point system by conjugate gradients on its Schur complement.
//!
//! Modules:
//! - [`mesh`]: indexed triangle surfaces, cached element geometry, conforming
//!   longest-edge bisection refinement.
//! - [`geometry`]: built-in scenario surfaces (cube-based sphere, discocyte)
//!   and the cortex offset field.
//! - [`assembly`]: sparse P1 mass / stiffness / weighted-mass matrices and
//!   load vectors.
//! - [`forces`]: membrane–cortex linker, tension, and pressure force models
//!   (sharp and regularized variants).
//! - [`solver`]: preconditioned conjugate gradients and the per-step
//!   Schur-complement solve.
//! - [`sim`]: time stepping and simulation state.
//! - [`verify`]: dense reference solver, algebraic identity checks, and
//!   convergence-order measurements.

pub mod assembly;
pub mod forces;
pub mod geometry;
pub mod mesh;
pub mod sim;
pub mod solver;
pub mod vec3;
pub mod verify;

pub use assembly::{ScalarField, SparseMatrix, VectorField};
pub use forces::{ForceModel, ModelMode, ParamSet};
pub use geometry::CortexField;
pub use mesh::{MeshStats, SurfaceMesh};
pub use sim::{SimState, Snapshot, StepReport, TimeStepper};
pub use solver::{MassMode, SolverOptions, StepSystem};
