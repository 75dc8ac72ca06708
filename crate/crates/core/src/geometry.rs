//! Built-in scenario surfaces and the cortex offset field.
//!
//! The reference sphere is a cube whose eight corners are pushed onto the
//! unit sphere, each square face cut along a diagonal, refined by bisection
//! with midpoints projected back onto the sphere. The red-blood-cell-like
//! discocyte is obtained from that sphere by an explicit deformation map.

use thiserror::Error;

use crate::mesh::{MeshError, SurfaceMesh};
use crate::vec3::{self, Vec3};

/// Tolerance for the unit-sphere domain check of [`discocyte_map`].
pub const SPHERE_DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point with |y| = {norm} is not on the unit sphere (tolerance {SPHERE_DOMAIN_TOL:e})")]
    DomainError { norm: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Radial projection onto the unit sphere.
pub fn unit_sphere_projector(p: Vec3) -> Vec3 {
    vec3::scale(p, 1.0 / vec3::norm(p))
}

/// Triangulated unit sphere: cube corners projected onto the sphere, each
/// face cut diagonally into two triangles (12 in total), then `n_passes`
/// rounds of longest-edge bisection with sphere projection. Each pass doubles
/// the triangle count on this configuration.
pub fn cube_sphere(n_passes: usize) -> Result<SurfaceMesh, MeshError> {
    let s = 1.0 / 3.0f64.sqrt();
    let vertices: Vec<Vec3> = vec![
        [-s, -s, -s],
        [s, -s, -s],
        [s, s, -s],
        [-s, s, -s],
        [-s, -s, s],
        [s, -s, s],
        [s, s, s],
        [-s, s, s],
    ];
    // Outward-wound faces; the four side faces are cut along rotationally
    // matched diagonals so the base mesh maps onto itself under the symmetry
    // group generated by 180-degree rotation about z and the diagonal flips.
    let triangles = vec![
        [0, 3, 2], // bottom, z = -s
        [0, 2, 1],
        [4, 5, 6], // top, z = +s
        [4, 6, 7],
        [0, 1, 5], // front, y = -s
        [0, 5, 4],
        [2, 3, 7], // back, y = +s
        [2, 7, 6],
        [0, 4, 3], // left, x = -s
        [4, 7, 3],
        [1, 2, 6], // right, x = +s
        [1, 6, 5],
    ];
    SurfaceMesh::build(vertices, triangles)?.refine_bisect(n_passes, unit_sphere_projector)
}

/// Rotationally symmetric half-thickness profile of the discocyte: a cosine
/// dimple out to r = 2, a quarter-circle rim out to r = 4. Continuous at the
/// seam (both branches give 2).
fn discocyte_profile(r: f64) -> f64 {
    if r <= 2.0 {
        (3.0 - (std::f64::consts::PI * r / 2.0).cos()) / 2.0
    } else {
        let d = r - 2.0;
        (4.0 - d * d).max(0.0).sqrt()
    }
}

/// Maps a unit-sphere point to the discocyte surface: the equatorial plane is
/// stretched by 4 and the height is replaced by the signed profile of the
/// stretched radius. Points must satisfy |y| = 1 up to [`SPHERE_DOMAIN_TOL`].
pub fn discocyte_map(y: Vec3) -> Result<Vec3, GeometryError> {
    let norm = vec3::norm(y);
    if (norm - 1.0).abs() > SPHERE_DOMAIN_TOL {
        return Err(GeometryError::DomainError { norm });
    }
    let x = 4.0 * y[0];
    let yy = 4.0 * y[1];
    let r = (x * x + yy * yy).sqrt();
    let sign = if y[2] > 0.0 {
        1.0
    } else if y[2] < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok([x, yy, sign * discocyte_profile(r)])
}

/// Discocyte mesh: [`cube_sphere`] refined `n_passes` times, vertices mapped
/// through [`discocyte_map`]. The result spans 8 length units across the
/// equator and encloses a volume of about 150 cubic units.
pub fn make_discocyte(n_passes: usize) -> Result<SurfaceMesh, GeometryError> {
    let sphere = cube_sphere(n_passes)?;
    let vertices = sphere
        .vertices()
        .iter()
        .map(|&v| discocyte_map(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SurfaceMesh::build(vertices, sphere.triangles().to_vec())?)
}

/// Nodal cortex positions: each membrane vertex offset inward along its
/// averaged vertex normal by the linker rest length `l0`.
#[derive(Debug, Clone)]
pub struct CortexField {
    pub positions: Vec<Vec3>,
}

impl CortexField {
    /// Per-vertex distance |u - u_c| between a membrane configuration and the cortex.
    pub fn distances(&self, u: &[Vec3]) -> Vec<f64> {
        self.positions
            .iter()
            .zip(u)
            .map(|(&c, &p)| vec3::dist(p, c))
            .collect()
    }
}

/// Builds the cortex at inward offset `l0` from the mesh vertices.
pub fn build_cortex(mesh: &SurfaceMesh, l0: f64) -> Result<CortexField, MeshError> {
    let normals = mesh.vertex_normals()?;
    let positions = mesh
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(&v, &n)| vec3::sub(v, vec3::scale(n, l0)))
        .collect();
    Ok(CortexField { positions })
}
