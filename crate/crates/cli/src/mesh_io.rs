//! Reading and writing triangle surfaces as OFF or Wavefront OBJ files.
//!
//! Coordinates are printed with 17 significant digits, so a write/read
//! round trip reproduces every vertex bit-for-bit.

use blebsim_core::mesh::{MeshError, SurfaceMesh};
use blebsim_core::vec3::Vec3;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshFileError {
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: face with {count} vertices; only triangles are supported")]
    UnsupportedFace {
        path: String,
        line: usize,
        count: usize,
    },
    #[error("unsupported mesh extension in `{0}` (expected .off or .obj)")]
    UnknownExtension(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn parse_error(path: &Path, line: usize, reason: impl Into<String>) -> MeshFileError {
    MeshFileError::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> MeshFileError {
    MeshFileError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Load a triangle surface, inferring the format from the file extension.
pub fn read_mesh(path: &Path) -> Result<SurfaceMesh, MeshFileError> {
    let extension = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    match extension.as_deref() {
        Some("off") => read_off(path),
        Some("obj") => read_obj(path),
        _ => Err(MeshFileError::UnknownExtension(
            path.display().to_string(),
        )),
    }
}

/// Meaningful lines of a text file: comment-stripped, non-empty, with their
/// 1-based line numbers.
fn meaningful_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(index, raw)| {
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let content = content.trim();
        if content.is_empty() {
            None
        } else {
            Some((index + 1, content))
        }
    })
}

fn parse_coordinate(path: &Path, line: usize, token: &str) -> Result<f64, MeshFileError> {
    token
        .parse::<f64>()
        .map_err(|_| parse_error(path, line, format!("bad coordinate `{token}`")))
}

pub fn read_off(path: &Path) -> Result<SurfaceMesh, MeshFileError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut lines = meaningful_lines(&text);

    let (line, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file"))?;
    if header != "OFF" {
        return Err(parse_error(path, line, "expected `OFF` header"));
    }

    let (line, counts) = lines
        .next()
        .ok_or_else(|| parse_error(path, line, "missing counts line"))?;
    let mut tokens = counts.split_whitespace();
    let mut next_count = |what: &str| -> Result<usize, MeshFileError> {
        tokens
            .next()
            .ok_or_else(|| parse_error(path, line, format!("missing {what} count")))?
            .parse::<usize>()
            .map_err(|_| parse_error(path, line, format!("bad {what} count")))
    };
    let n_vertices = next_count("vertex")?;
    let n_faces = next_count("face")?;
    let _n_edges = next_count("edge")?;

    let mut vertices: Vec<Vec3> = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let (line, content) = lines
            .next()
            .ok_or_else(|| parse_error(path, line, "unexpected end of vertex list"))?;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(parse_error(path, line, "expected `x y z`"));
        }
        vertices.push([
            parse_coordinate(path, line, tokens[0])?,
            parse_coordinate(path, line, tokens[1])?,
            parse_coordinate(path, line, tokens[2])?,
        ]);
    }

    let mut triangles: Vec<[usize; 3]> = Vec::with_capacity(n_faces);
    let mut last_line = line;
    for _ in 0..n_faces {
        let (line, content) = lines
            .next()
            .ok_or_else(|| parse_error(path, last_line, "unexpected end of face list"))?;
        last_line = line;
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let arity: usize = tokens
            .first()
            .ok_or_else(|| parse_error(path, line, "empty face line"))?
            .parse()
            .map_err(|_| parse_error(path, line, "bad face vertex count"))?;
        if arity != 3 {
            return Err(MeshFileError::UnsupportedFace {
                path: path.display().to_string(),
                line,
                count: arity,
            });
        }
        if tokens.len() != 4 {
            return Err(parse_error(path, line, "expected `3 i j k`"));
        }
        let mut face = [0usize; 3];
        for (slot, token) in face.iter_mut().zip(&tokens[1..]) {
            let index: usize = token
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad vertex index `{token}`")))?;
            if index >= n_vertices {
                return Err(parse_error(
                    path,
                    line,
                    format!("vertex index {index} out of range (have {n_vertices})"),
                ));
            }
            *slot = index;
        }
        triangles.push(face);
    }

    if let Some((line, _)) = lines.next() {
        return Err(parse_error(path, line, "unexpected trailing content"));
    }
    Ok(SurfaceMesh::build(vertices, triangles)?)
}

pub fn read_obj(path: &Path) -> Result<SurfaceMesh, MeshFileError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<(usize, [usize; 3])> = Vec::new();

    for (line, content) in meaningful_lines(&text) {
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens[0] {
            "v" => {
                if tokens.len() != 4 {
                    return Err(parse_error(path, line, "expected `v x y z`"));
                }
                vertices.push([
                    parse_coordinate(path, line, tokens[1])?,
                    parse_coordinate(path, line, tokens[2])?,
                    parse_coordinate(path, line, tokens[3])?,
                ]);
            }
            "f" => {
                let corners = tokens.len() - 1;
                if corners != 3 {
                    return Err(MeshFileError::UnsupportedFace {
                        path: path.display().to_string(),
                        line,
                        count: corners,
                    });
                }
                let mut face = [0usize; 3];
                for (slot, token) in face.iter_mut().zip(&tokens[1..]) {
                    // `f 1/5/2 ...` forms carry texture/normal slots; only
                    // the leading vertex index matters here.
                    let head = token.split('/').next().unwrap_or(token);
                    let index: usize = head.parse().map_err(|_| {
                        parse_error(path, line, format!("bad vertex index `{token}`"))
                    })?;
                    if index == 0 {
                        return Err(parse_error(path, line, "OBJ indices are one-based"));
                    }
                    *slot = index - 1;
                }
                triangles.push((line, face));
            }
            // Normals, texture coordinates, groups, and material statements
            // carry nothing the solver needs.
            "vn" | "vt" | "vp" | "o" | "g" | "s" | "usemtl" | "mtllib" => {}
            other => {
                return Err(parse_error(path, line, format!("unsupported statement `{other}`")));
            }
        }
    }

    let mut faces = Vec::with_capacity(triangles.len());
    for (line, face) in triangles {
        for index in face {
            if index >= vertices.len() {
                return Err(parse_error(
                    path,
                    line,
                    format!(
                        "vertex index {} out of range (have {})",
                        index + 1,
                        vertices.len()
                    ),
                ));
            }
        }
        faces.push(face);
    }
    Ok(SurfaceMesh::build(vertices, faces)?)
}

pub fn write_off(path: &Path, mesh: &SurfaceMesh) -> Result<(), MeshFileError> {
    let mut text = String::new();
    let _ = writeln!(text, "OFF");
    let _ = writeln!(
        text,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.n_edges()
    );
    for v in mesh.vertices() {
        let _ = writeln!(text, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(text, "3 {} {} {}", t[0], t[1], t[2]);
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn write_obj(path: &Path, mesh: &SurfaceMesh) -> Result<(), MeshFileError> {
    let mut text = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(text, "v {:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(text, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use blebsim_core::geometry::make_discocyte;
    use tempfile::tempdir;

    const MINIMAL_OFF: &str = "\
OFF
# a comment between header and counts
6 8 12
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
3 0 2 4
3 2 1 4
3 1 3 4
3 3 0 4
3 2 0 5
3 1 2 5
3 3 1 5
3 0 3 5
";

    fn write_temp(name: &str, text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempdir().unwrap();
        let path = dir.path().join(name);
        fs::write(&path, text).unwrap();
        (dir, path)
    }

    #[test]
    fn minimal_off_octahedron_loads() {
        let (_dir, path) = write_temp("oct.off", MINIMAL_OFF);
        let mesh = read_mesh(&path).unwrap();
        assert_eq!(mesh.n_vertices(), 6);
        assert_eq!(mesh.n_triangles(), 8);
        assert!(mesh.is_closed());
    }

    #[test]
    fn obj_quad_face_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let (_dir, path) = write_temp("quad.obj", text);
        let err = read_mesh(&path).unwrap_err();
        match err {
            MeshFileError::UnsupportedFace { line, count, .. } => {
                assert_eq!(line, 5);
                assert_eq!(count, 4);
            }
            other => panic!("expected UnsupportedFace, got {other}"),
        }
    }

    #[test]
    fn off_round_trip_is_exact() {
        let mesh = make_discocyte(2).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("disc.off");
        write_off(&path, &mesh).unwrap();
        let reread = read_mesh(&path).unwrap();
        assert_eq!(reread.vertices(), mesh.vertices());
        assert_eq!(reread.triangles(), mesh.triangles());
    }

    #[test]
    fn obj_round_trip_is_exact() {
        let mesh = make_discocyte(2).unwrap();
        let dir = tempdir().unwrap();
        let path = dir.path().join("disc.obj");
        write_obj(&path, &mesh).unwrap();
        let reread = read_mesh(&path).unwrap();
        assert_eq!(reread.vertices(), mesh.vertices());
        assert_eq!(reread.triangles(), mesh.triangles());
    }

    #[test]
    fn obj_slash_forms_take_the_vertex_index() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\n\
                    f 1/1 2/2 3/3\nf 1//1 3//3 4//4\nf 1 4 2\nf 2 4 3\n";
        let (_dir, path) = write_temp("slash.obj", text);
        let mesh = read_mesh(&path).unwrap();
        assert_eq!(mesh.n_triangles(), 4);
    }

    #[test]
    fn out_of_range_index_reports_the_line() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        let (_dir, path) = write_temp("bad.off", text);
        let err = read_mesh(&path).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("bad.off:6"), "{message}");
        assert!(message.contains("out of range"), "{message}");
    }

    #[test]
    fn truncated_off_is_reported() {
        let text = "OFF\n6 8 12\n0 0 0\n";
        let (_dir, path) = write_temp("short.off", text);
        let err = read_mesh(&path).unwrap_err();
        assert!(err.to_string().contains("unexpected end"), "{err}");
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let (_dir, path) = write_temp("mesh.stl", "solid nope\n");
        let err = read_mesh(&path).unwrap_err();
        assert!(matches!(err, MeshFileError::UnknownExtension(_)), "{err}");
    }

    #[test]
    fn non_manifold_input_propagates_mesh_validation() {
        // Two triangles sharing an edge with a third hanging off the same
        // edge: three faces on one edge.
        let text = "OFF\n5 3 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n1 1 1\n3 0 1 2\n3 0 1 3\n3 0 1 4\n";
        let (_dir, path) = write_temp("pinch.off", text);
        let err = read_mesh(&path).unwrap_err();
        assert!(matches!(err, MeshFileError::Mesh(_)), "{err}");
    }
}
