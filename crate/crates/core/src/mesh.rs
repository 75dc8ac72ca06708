//! Indexed triangle surface meshes.
//!
//! A [`SurfaceMesh`] stores vertex coordinates, index triples, and cached
//! per-triangle geometry (unit normal, area, and the constant surface
//! gradients of the three P1 hat functions). Construction validates that the
//! triangulation is an oriented manifold: every undirected edge is used by at
//! most two triangles and interior edges are traversed once in each
//! direction. Closed meshes are re-wound to outward orientation if the signed
//! enclosed volume comes out negative.
//!
//! Refinement is recursive longest-edge bisection with conformity closure:
//! splitting a triangle forces its longest-edge neighbor to split as well, so
//! a pass never leaves hanging nodes. New edge midpoints are mapped through a
//! caller-supplied projector (e.g. back onto the unit sphere).

use std::collections::HashMap;

use thiserror::Error;

use crate::vec3::{self, Vec3};

/// Triangles with area at or below this threshold are rejected as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Averaged vertex normals shorter than this are reported as [`MeshError::ZeroNormal`].
pub const MIN_VERTEX_NORMAL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    InvalidIndex {
        triangle: usize,
        vertex: usize,
        n_vertices: usize,
    },
    #[error("triangle {triangle} is degenerate (area {area:.3e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("edge ({a}, {b}) is shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("edge ({a}, {b}) is traversed twice in the same direction; windings are inconsistent")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("projector produced a non-finite midpoint for edge ({a}, {b})")]
    ProjectorFailure { a: usize, b: usize },
    #[error("vertex {vertex} has a vanishing averaged normal")]
    ZeroNormal { vertex: usize },
}

/// Basic size and quality measures of a mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    /// Longest edge in the mesh.
    pub h_max: f64,
    /// Sum of all triangle areas.
    pub total_area: f64,
}

/// Cached geometry of one triangle: unit normal, area, and the surface
/// gradients of the three P1 basis functions (constant on the triangle,
/// tangent to its plane).
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub normal: Vec3,
    pub area: f64,
    pub gradients: [Vec3; 3],
}

#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    geometry: Vec<TriangleGeometry>,
    n_edges: usize,
    n_boundary_edges: usize,
    h_max: f64,
    total_area: f64,
}

fn triangle_geometry(v0: Vec3, v1: Vec3, v2: Vec3) -> Option<TriangleGeometry> {
    let e1 = vec3::sub(v1, v0);
    let e2 = vec3::sub(v2, v0);
    let n = vec3::cross(e1, e2);
    let len = vec3::norm(n);
    let area = 0.5 * len;
    if !(area > MIN_TRIANGLE_AREA) {
        return None;
    }
    let normal = vec3::scale(n, 1.0 / len);
    // Gradient of the hat function at vertex i is perpendicular to the
    // opposite edge, tangent to the triangle: g_i = normal x e_opp / (2 area).
    let inv = 1.0 / (2.0 * area);
    let gradients = [
        vec3::scale(vec3::cross(normal, vec3::sub(v2, v1)), inv),
        vec3::scale(vec3::cross(normal, vec3::sub(v0, v2)), inv),
        vec3::scale(vec3::cross(normal, vec3::sub(v1, v0)), inv),
    ];
    Some(TriangleGeometry {
        normal,
        area,
        gradients,
    })
}

/// Per-triangle contribution to the signed enclosed volume (divergence
/// theorem applied to the position field): (area / 3) * normal . centroid.
fn signed_volume(vertices: &[Vec3], triangles: &[[usize; 3]], geometry: &[TriangleGeometry]) -> f64 {
    let mut vol = 0.0;
    for (tri, geo) in triangles.iter().zip(geometry) {
        let centroid = vec3::scale(
            vec3::add(vec3::add(vertices[tri[0]], vertices[tri[1]]), vertices[tri[2]]),
            1.0 / 3.0,
        );
        vol += geo.area / 3.0 * vec3::dot(geo.normal, centroid);
    }
    vol
}

impl SurfaceMesh {
    /// Validates the triangulation and caches per-triangle geometry.
    ///
    /// Rejects out-of-range indices, degenerate triangles, edges shared by
    /// more than two triangles, and interior edges traversed twice in the
    /// same direction. If the mesh is closed and its signed volume is
    /// negative, all windings are flipped so normals point outward.
    pub fn build(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n_vertices = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n_vertices {
                    return Err(MeshError::InvalidIndex {
                        triangle: t,
                        vertex: v,
                        n_vertices,
                    });
                }
            }
        }

        // Directed edge bookkeeping: an undirected edge may appear at most
        // twice, and the two traversals must run in opposite directions.
        let mut edge_use: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for tri in &triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                let entry = edge_use.entry(key).or_insert((0, 0));
                if a < b {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
        let mut n_boundary_edges = 0;
        for (&(a, b), &(fwd, rev)) in &edge_use {
            let count = fwd + rev;
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { a, b, count });
            }
            if fwd > 1 || rev > 1 {
                return Err(MeshError::InconsistentOrientation { a, b });
            }
            if count == 1 {
                n_boundary_edges += 1;
            }
        }
        let n_edges = edge_use.len();

        let mut triangles = triangles;
        let mut geometry = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            match triangle_geometry(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) {
                Some(geo) => geometry.push(geo),
                None => {
                    let e1 = vec3::sub(vertices[tri[1]], vertices[tri[0]]);
                    let e2 = vec3::sub(vertices[tri[2]], vertices[tri[0]]);
                    let area = 0.5 * vec3::norm(vec3::cross(e1, e2));
                    return Err(MeshError::DegenerateTriangle { triangle: t, area });
                }
            }
        }

        // Closed surfaces must enclose positive volume; flip if wound inward.
        if n_boundary_edges == 0 && signed_volume(&vertices, &triangles, &geometry) < 0.0 {
            for tri in &mut triangles {
                tri.swap(1, 2);
            }
            for (tri, geo) in triangles.iter().zip(&mut geometry) {
                *geo = triangle_geometry(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]])
                    .expect("flipped triangle keeps its area");
            }
        }

        let mut h_max: f64 = 0.0;
        let mut total_area = 0.0;
        for (tri, geo) in triangles.iter().zip(&geometry) {
            for k in 0..3 {
                let len = vec3::dist(vertices[tri[k]], vertices[tri[(k + 1) % 3]]);
                h_max = h_max.max(len);
            }
            total_area += geo.area;
        }

        Ok(Self {
            vertices,
            triangles,
            geometry,
            n_edges,
            n_boundary_edges,
            h_max,
            total_area,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Cached normal, area, and P1 gradients of triangle `t`.
    pub fn triangle_geometry(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    pub fn stats(&self) -> MeshStats {
        MeshStats {
            n_vertices: self.n_vertices(),
            n_triangles: self.n_triangles(),
            h_max: self.h_max,
            total_area: self.total_area,
        }
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn is_closed(&self) -> bool {
        self.n_boundary_edges == 0
    }

    /// V - E + F (2 for sphere topology).
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.n_edges as i64 + self.triangles.len() as i64
    }

    /// Area-weighted average of incident triangle normals, normalized.
    pub fn vertex_normals(&self) -> Result<Vec<Vec3>, MeshError> {
        let mut normals = vec![[0.0; 3]; self.vertices.len()];
        for (tri, geo) in self.triangles.iter().zip(&self.geometry) {
            let weighted = vec3::scale(geo.normal, geo.area);
            for &v in tri {
                normals[v] = vec3::add(normals[v], weighted);
            }
        }
        for (v, n) in normals.iter_mut().enumerate() {
            let len = vec3::norm(*n);
            if len < MIN_VERTEX_NORMAL {
                return Err(MeshError::ZeroNormal { vertex: v });
            }
            *n = vec3::scale(*n, 1.0 / len);
        }
        Ok(normals)
    }

    /// `n_passes` sweeps of conforming longest-edge bisection.
    ///
    /// Each pass marks every triangle and bisects it through its longest edge
    /// (ties broken toward the lexicographically smallest sorted vertex
    /// pair). Conformity closure follows the longest-edge propagation path:
    /// an edge is only split when it is the longest edge of both adjacent
    /// triangles (or on the boundary), so the result is conforming. New
    /// midpoints are passed through `projector` before insertion.
    pub fn refine_bisect(
        &self,
        n_passes: usize,
        projector: impl Fn(Vec3) -> Vec3,
    ) -> Result<SurfaceMesh, MeshError> {
        let mut work = RefineWork::new(self);
        for _ in 0..n_passes {
            work.pass(&projector)?;
        }
        let triangles = work.alive_triangles();
        SurfaceMesh::build(work.vertices, triangles)
    }
}

/// Mutable triangle soup used during bisection refinement.
struct RefineWork {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    alive: Vec<bool>,
    /// Sorted vertex pair -> alive triangles using that edge.
    edge_tris: HashMap<(usize, usize), Vec<usize>>,
}

fn sorted_pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl RefineWork {
    fn new(mesh: &SurfaceMesh) -> Self {
        let mut work = Self {
            vertices: mesh.vertices.clone(),
            triangles: Vec::with_capacity(mesh.triangles.len() * 2),
            alive: Vec::with_capacity(mesh.triangles.len() * 2),
            edge_tris: HashMap::new(),
        };
        for tri in &mesh.triangles {
            work.insert_triangle(*tri);
        }
        work
    }

    fn insert_triangle(&mut self, tri: [usize; 3]) -> usize {
        let id = self.triangles.len();
        self.triangles.push(tri);
        self.alive.push(true);
        for k in 0..3 {
            let key = sorted_pair(tri[k], tri[(k + 1) % 3]);
            self.edge_tris.entry(key).or_default().push(id);
        }
        id
    }

    fn remove_triangle(&mut self, id: usize) {
        self.alive[id] = false;
        let tri = self.triangles[id];
        for k in 0..3 {
            let key = sorted_pair(tri[k], tri[(k + 1) % 3]);
            if let Some(list) = self.edge_tris.get_mut(&key) {
                list.retain(|&t| t != id);
                if list.is_empty() {
                    self.edge_tris.remove(&key);
                }
            }
        }
    }

    /// Longest edge of triangle `id`, returned as the directed pair in the
    /// triangle's winding. Equal lengths resolve to the smallest sorted index
    /// pair, which makes the choice a strict total order on edges.
    fn longest_edge(&self, id: usize) -> (usize, usize) {
        let tri = self.triangles[id];
        let mut best = (tri[0], tri[1]);
        let mut best_len = vec3::dist(self.vertices[tri[0]], self.vertices[tri[1]]);
        for k in 1..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let len = vec3::dist(self.vertices[a], self.vertices[b]);
            if len > best_len || (len == best_len && sorted_pair(a, b) < sorted_pair(best.0, best.1))
            {
                best = (a, b);
                best_len = len;
            }
        }
        best
    }

    fn neighbor_across(&self, id: usize, edge: (usize, usize)) -> Option<usize> {
        self.edge_tris
            .get(&sorted_pair(edge.0, edge.1))?
            .iter()
            .copied()
            .find(|&t| t != id)
    }

    fn split_vertex(
        &mut self,
        a: usize,
        b: usize,
        projector: &impl Fn(Vec3) -> Vec3,
    ) -> Result<usize, MeshError> {
        let mid = projector(vec3::midpoint(self.vertices[a], self.vertices[b]));
        if !vec3::is_finite(mid) {
            return Err(MeshError::ProjectorFailure { a, b });
        }
        self.vertices.push(mid);
        Ok(self.vertices.len() - 1)
    }

    /// Rotates `tri` so that the directed edge (a, b) comes first.
    fn aligned(&self, id: usize, a: usize, b: usize) -> [usize; 3] {
        let tri = self.triangles[id];
        for k in 0..3 {
            if tri[k] == a && tri[(k + 1) % 3] == b {
                return [tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]];
            }
        }
        unreachable!("triangle {id} does not contain directed edge ({a}, {b})");
    }

    /// Bisects `id` (and the neighbor sharing its longest edge, if any)
    /// through the directed edge (a, b) at the already-created midpoint `m`.
    fn bisect_through(&mut self, id: usize, a: usize, b: usize, m: usize) {
        let [a, b, c] = self.aligned(id, a, b);
        self.remove_triangle(id);
        self.insert_triangle([a, m, c]);
        self.insert_triangle([m, b, c]);
    }

    /// Refines triangle `start` via its longest-edge propagation path:
    /// repeatedly find the terminal triangle (whose longest edge is either on
    /// the boundary or also the longest edge of its neighbor), bisect there,
    /// and continue until `start` itself has been bisected.
    fn lepp_refine(&mut self, start: usize, projector: &impl Fn(Vec3) -> Vec3) -> Result<(), MeshError> {
        while self.alive[start] {
            let mut path = vec![start];
            loop {
                let t = *path.last().unwrap();
                let (a, b) = self.longest_edge(t);
                match self.neighbor_across(t, (a, b)) {
                    None => {
                        let m = self.split_vertex(a, b, projector)?;
                        self.bisect_through(t, a, b, m);
                        break;
                    }
                    Some(n) => {
                        let ne = self.longest_edge(n);
                        if sorted_pair(ne.0, ne.1) == sorted_pair(a, b) {
                            let m = self.split_vertex(a, b, projector)?;
                            self.bisect_through(t, a, b, m);
                            // The neighbor traverses the shared edge in the
                            // opposite direction.
                            self.bisect_through(n, b, a, m);
                            break;
                        }
                        debug_assert!(
                            !path.contains(&n),
                            "longest-edge propagation revisited triangle {n}"
                        );
                        path.push(n);
                    }
                }
            }
        }
        Ok(())
    }

    /// One global pass: every triangle alive at the start of the pass is
    /// bisected through its longest edge (possibly as a closure side effect).
    fn pass(&mut self, projector: &impl Fn(Vec3) -> Vec3) -> Result<(), MeshError> {
        let marked: Vec<usize> = (0..self.triangles.len()).filter(|&t| self.alive[t]).collect();
        for t in marked {
            if self.alive[t] {
                self.lepp_refine(t, projector)?;
            }
        }
        Ok(())
    }

    fn alive_triangles(&self) -> Vec<[usize; 3]> {
        self.triangles
            .iter()
            .zip(&self.alive)
            .filter_map(|(tri, &alive)| alive.then_some(*tri))
            .collect()
    }
}


#[cfg(test)]
pub(crate) use tests::octahedron;
