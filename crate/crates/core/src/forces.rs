//! Membrane force models: cortex linkers, surface tension scaling, and
//! volume-coupled pressure.
//!
//! The linker stiffness depends on the membrane–cortex distance `d`:
//! attached linkers (d <= u_break) pull with strength `lambda_l`, and below
//! the repulsion distance `u_repel` an additional contact factor `k_repel`
//! pushes back; beyond `u_break` the linker is broken and exerts nothing. The
//! `Sharp` mode uses Heaviside switches (H(0) = 1), the `Regularized` mode
//! replaces them with logistic ramps of width `epsilon`. The `Manufactured`
//! mode swaps all physics for the linear reaction k(a) = -3 a with zero
//! tension and pressure, which admits the closed-form decaying-sphere
//! solution used by the convergence harness.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::assembly::{volume, VectorField};
use crate::mesh::SurfaceMesh;
use crate::vec3::{self, Vec3};

/// Guard for direction quotients in sharp mode.
pub const SHARP_DIRECTION_GUARD: f64 = 1e-12;
/// Guard for the tension gradient norm in sharp mode.
pub const SHARP_TENSION_GUARD: f64 = 1e-12;
/// Guard for the enclosed volume in the sharp pressure quotient.
pub const SHARP_VOLUME_GUARD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("parameter {name} must be nonnegative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("distance thresholds must satisfy 0 < u_R ({u_repel}) < l0 ({l0}) < u_B ({u_break})")]
    ThresholdOrder { u_repel: f64, l0: f64, u_break: f64 },
    #[error("time step tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error("end time {t_end} must be at least one step tau = {tau}")]
    EndBeforeFirstStep { t_end: f64, tau: f64 },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown model mode '{0}' (expected sharp, regularized, or manufactured)")]
    BadMode(String),
    #[error("regularized mode requires epsilon > 0, got {0}")]
    MissingEpsilon(f64),
}

/// Dimensionless model parameters (lengths in micrometers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet {
    /// Rest-state tension factor; 1 means the initial surface is at rest.
    pub x0: f64,
    /// Bending modulus.
    pub lambda_b: f64,
    /// Linker spring strength.
    pub lambda_l: f64,
    /// Linker rest length.
    pub l0: f64,
    /// Distance beyond which linkers break.
    pub u_break: f64,
    /// Contact repulsion multiplier active below `u_repel`.
    pub k_repel: f64,
    /// Repulsion onset distance.
    pub u_repel: f64,
    /// Pressure strength (divided by the current enclosed volume).
    pub lambda_p: f64,
    /// Regularization width for the logistic/smoothed variants.
    pub epsilon: f64,
    /// Time step.
    pub tau: f64,
    /// Final time.
    pub t_end: f64,
}

impl ParamSet {
    /// Baseline discocyte scenario.
    pub fn table1() -> Self {
        Self {
            x0: 0.95,
            lambda_b: 0.005,
            lambda_l: 18.0,
            l0: 0.04,
            u_break: 0.056,
            k_repel: 500.0,
            u_repel: 0.0075,
            lambda_p: 22.5,
            epsilon: 0.0,
            tau: 0.0025,
            t_end: 2.0,
        }
    }

    /// Parameters fitted to microscopy-derived cell geometry.
    pub fn table2() -> Self {
        Self {
            x0: 0.95,
            lambda_b: 0.125,
            lambda_l: 0.72,
            l0: 0.2,
            u_break: 0.28,
            k_repel: 500.0,
            u_repel: 0.15,
            lambda_p: 150.0,
            epsilon: 0.0,
            tau: 0.02,
            t_end: 20.0,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let named = [
            ("x0", self.x0),
            ("lambda_b", self.lambda_b),
            ("lambda_l", self.lambda_l),
            ("l0", self.l0),
            ("u_B", self.u_break),
            ("k_L", self.k_repel),
            ("u_R", self.u_repel),
            ("lambda_p", self.lambda_p),
            ("epsilon", self.epsilon),
        ];
        for (name, value) in named {
            if !(value >= 0.0) {
                return Err(ParamError::Negative { name, value });
            }
        }
        if !(0.0 < self.u_repel && self.u_repel < self.l0 && self.l0 < self.u_break) {
            return Err(ParamError::ThresholdOrder {
                u_repel: self.u_repel,
                l0: self.l0,
                u_break: self.u_break,
            });
        }
        if !(self.tau > 0.0) {
            return Err(ParamError::NonPositiveTau(self.tau));
        }
        if !(self.t_end >= self.tau) {
            return Err(ParamError::EndBeforeFirstStep {
                t_end: self.t_end,
                tau: self.tau,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelMode {
    Sharp,
    Regularized,
    Manufactured,
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelMode::Sharp => "sharp",
            ModelMode::Regularized => "regularized",
            ModelMode::Manufactured => "manufactured",
        };
        f.write_str(name)
    }
}

impl FromStr for ModelMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sharp" => Ok(ModelMode::Sharp),
            "regularized" => Ok(ModelMode::Regularized),
            "manufactured" => Ok(ModelMode::Manufactured),
            other => Err(ModelError::BadMode(other.to_string())),
        }
    }
}

/// Heaviside step with H(0) = 1.
#[inline]
pub fn heaviside(r: f64) -> f64 {
    if r >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Logistic step approaching H(-z) as epsilon -> 0: 1 / (1 + exp(2 z / eps)).
#[inline]
fn logistic_step(z: f64, epsilon: f64) -> f64 {
    1.0 / (1.0 + (2.0 * z / epsilon).exp())
}

/// Force model bound to one mode and parameter set.
#[derive(Debug, Clone, Copy)]
pub struct ForceModel {
    mode: ModelMode,
    params: ParamSet,
}

impl ForceModel {
    pub fn new(mode: ModelMode, params: &ParamSet) -> Result<Self, ModelError> {
        if mode == ModelMode::Regularized && !(params.epsilon > 0.0) {
            return Err(ModelError::MissingEpsilon(params.epsilon));
        }
        Ok(Self { mode, params: *params })
    }

    pub fn mode(&self) -> ModelMode {
        self.mode
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Distance-dependent linker stiffness.
    ///
    /// Sharp: lambda_l (1 + k_repel H(u_repel - d)) H(u_break - d).
    /// Regularized: the Heaviside factors become logistic ramps of width epsilon.
    /// Manufactured: unused by the scheme; reported as 0.
    pub fn lambda_coupling(&self, dist: f64) -> f64 {
        let p = &self.params;
        match self.mode {
            ModelMode::Sharp => {
                p.lambda_l
                    * (1.0 + p.k_repel * heaviside(p.u_repel - dist))
                    * heaviside(p.u_break - dist)
            }
            ModelMode::Regularized => {
                p.lambda_l
                    * (1.0 + p.k_repel * logistic_step(dist - p.u_repel, p.epsilon))
                    * logistic_step(dist - p.u_break, p.epsilon)
            }
            ModelMode::Manufactured => 0.0,
        }
    }

    /// Point the linker spring pulls toward: the cortex anchor offset by the
    /// rest length along the current separation direction.
    pub fn coupling_target(&self, u: Vec3, cortex: Vec3) -> Vec3 {
        let p = &self.params;
        let d = vec3::sub(u, cortex);
        let len = vec3::norm(d);
        let dir = match self.mode {
            ModelMode::Regularized => vec3::scale(d, 1.0 / (len + p.epsilon)),
            _ => vec3::scale(d, 1.0 / len.max(SHARP_DIRECTION_GUARD)),
        };
        vec3::add(cortex, vec3::scale(dir, p.l0))
    }

    /// Nodal linker force as it appears on the right-hand side of the motion
    /// law: the spring pulls the membrane toward the coupling target with the
    /// distance-dependent stiffness. Manufactured mode substitutes the linear
    /// reaction 3 u, which balances the decaying-sphere solution exactly.
    pub fn coupling_force(&self, u: Vec3, cortex: Vec3) -> Vec3 {
        if self.mode == ModelMode::Manufactured {
            return vec3::scale(u, 3.0);
        }
        let lambda = self.lambda_coupling(vec3::dist(u, cortex));
        let target = self.coupling_target(u, cortex);
        vec3::scale(vec3::sub(u, target), -lambda)
    }

    /// Multiplier applied to the explicit tension load for a triangle whose
    /// configuration gradient has squared Frobenius norm `frob_sq`:
    /// sqrt(2) x0 / |G|, with the mode's guard in the denominator.
    pub fn tension_scale(&self, frob_sq: f64) -> f64 {
        let p = &self.params;
        match self.mode {
            ModelMode::Sharp => 2.0f64.sqrt() * p.x0 / frob_sq.sqrt().max(SHARP_TENSION_GUARD),
            ModelMode::Regularized => 2.0f64.sqrt() * p.x0 / (frob_sq + p.epsilon).sqrt(),
            ModelMode::Manufactured => 0.0,
        }
    }

    /// P1 load vector of the volume-coupled pressure: each triangle pushes
    /// its three vertices along its reference normal with weight
    /// (lambda_p / V(u_prev)) * area / 3.
    pub fn pressure_load(&self, mesh: &SurfaceMesh, u_prev: &VectorField) -> VectorField {
        let n = mesh.n_vertices();
        let p = &self.params;
        if self.mode == ModelMode::Manufactured || p.lambda_p == 0.0 {
            return vec![[0.0; 3]; n];
        }
        let vol = volume(mesh, u_prev);
        let strength = match self.mode {
            ModelMode::Regularized => p.lambda_p / (vol + p.epsilon),
            _ => p.lambda_p / vol.max(SHARP_VOLUME_GUARD),
        };
        let mut load = vec![[0.0; 3]; n];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let geo = mesh.triangle_geometry(t);
            let f = vec3::scale(geo.normal, strength * geo.area / 3.0);
            for &v in tri {
                load[v] = vec3::add(load[v], f);
            }
        }
        load
    }
}
