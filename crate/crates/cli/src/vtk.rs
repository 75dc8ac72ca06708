//! Legacy ASCII VTK polydata writer for simulation snapshots.
//!
//! One file per snapshot: deformed positions as the point set, triangles as
//! polygons, and per-vertex fields `curvature` (vector), `dist_to_cortex`,
//! and `linker_intact`. Output is a pure function of the snapshot — floats
//! are printed with 17 significant digits and nothing is appended — so
//! identical runs produce byte-identical files.

use blebsim_core::sim::Snapshot;
use std::fmt::Write as _;
use std::path::Path;

/// Render a snapshot as the complete text of a legacy VTK polydata file.
pub fn render_vtk(snapshot: &Snapshot<'_>) -> String {
    let n = snapshot.positions.len();
    let triangles = snapshot.mesh.triangles();
    let mut text = String::new();

    let _ = writeln!(text, "# vtk DataFile Version 3.0");
    let _ = writeln!(
        text,
        "blebbing surface, step {}, t = {}",
        snapshot.step, snapshot.time
    );
    let _ = writeln!(text, "ASCII");
    let _ = writeln!(text, "DATASET POLYDATA");

    let _ = writeln!(text, "POINTS {n} double");
    for p in snapshot.positions {
        let _ = writeln!(text, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }

    let _ = writeln!(text, "POLYGONS {} {}", triangles.len(), 4 * triangles.len());
    for t in triangles {
        let _ = writeln!(text, "3 {} {} {}", t[0], t[1], t[2]);
    }

    let _ = writeln!(text, "POINT_DATA {n}");
    let _ = writeln!(text, "VECTORS curvature double");
    for w in snapshot.curvature {
        let _ = writeln!(text, "{:.16e} {:.16e} {:.16e}", w[0], w[1], w[2]);
    }
    let _ = writeln!(text, "SCALARS dist_to_cortex double");
    let _ = writeln!(text, "LOOKUP_TABLE default");
    for d in &snapshot.cortex_distance {
        let _ = writeln!(text, "{d:.16e}");
    }
    let _ = writeln!(text, "SCALARS linker_intact int");
    let _ = writeln!(text, "LOOKUP_TABLE default");
    for intact in snapshot.linker_intact {
        let _ = writeln!(text, "{}", i32::from(*intact));
    }
    text
}

/// Write a snapshot to `path` in legacy ASCII VTK polydata format.
pub fn write_vtk(path: &Path, snapshot: &Snapshot<'_>) -> std::io::Result<()> {
    std::fs::write(path, render_vtk(snapshot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use blebsim_core::forces::{ModelMode, ParamSet};
    use blebsim_core::geometry::cube_sphere;
    use blebsim_core::sim::TimeStepper;
    use blebsim_core::solver::SolverOptions;

    fn sphere_snapshot_text() -> (String, TimeStepper) {
        let mesh = cube_sphere(1).unwrap();
        let stepper = TimeStepper::new(
            mesh,
            ModelMode::Sharp,
            ParamSet::table1(),
            SolverOptions::default(),
        )
        .unwrap();
        let state = stepper.initial_state().unwrap();
        let text = render_vtk(&stepper.snapshot(&state));
        (text, stepper)
    }

    #[test]
    fn header_and_sections_come_in_vtk_order() {
        let (text, stepper) = sphere_snapshot_text();
        let n = stepper.mesh().n_vertices();
        let f = stepper.mesh().n_triangles();
        let expected = [
            String::from("# vtk DataFile Version 3.0"),
            String::from("ASCII"),
            String::from("DATASET POLYDATA"),
            format!("POINTS {n} double"),
            format!("POLYGONS {f} {}", 4 * f),
            format!("POINT_DATA {n}"),
            String::from("VECTORS curvature double"),
            String::from("SCALARS dist_to_cortex double"),
            String::from("SCALARS linker_intact int"),
        ];
        let mut cursor = 0;
        for marker in &expected {
            let found = text[cursor..]
                .find(marker.as_str())
                .unwrap_or_else(|| panic!("missing `{marker}` after byte {cursor}"));
            cursor += found + marker.len();
        }
    }

    #[test]
    fn initial_points_block_equals_the_reference_vertices() {
        let (text, stepper) = sphere_snapshot_text();
        let lines: Vec<&str> = text.lines().collect();
        let points_at = lines
            .iter()
            .position(|l| l.starts_with("POINTS"))
            .unwrap();
        for (offset, v) in stepper.mesh().vertices().iter().enumerate() {
            let expected = format!("{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
            assert_eq!(lines[points_at + 1 + offset], expected);
        }
    }

    #[test]
    fn initial_cortex_distance_is_the_rest_length_everywhere() {
        let (text, stepper) = sphere_snapshot_text();
        let l0 = stepper.params().l0;
        let lines: Vec<&str> = text.lines().collect();
        let scalars_at = lines
            .iter()
            .position(|l| *l == "SCALARS dist_to_cortex double")
            .unwrap();
        assert_eq!(lines[scalars_at + 1], "LOOKUP_TABLE default");
        for offset in 0..stepper.mesh().n_vertices() {
            let value: f64 = lines[scalars_at + 2 + offset].parse().unwrap();
            assert!(
                (value - l0).abs() <= 1e-12 * l0,
                "vertex {offset}: {value} vs {l0}"
            );
        }
    }

    #[test]
    fn all_linkers_start_intact() {
        let (text, stepper) = sphere_snapshot_text();
        let lines: Vec<&str> = text.lines().collect();
        let scalars_at = lines
            .iter()
            .position(|l| *l == "SCALARS linker_intact int")
            .unwrap();
        for offset in 0..stepper.mesh().n_vertices() {
            assert_eq!(lines[scalars_at + 2 + offset], "1");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let (first, _) = sphere_snapshot_text();
        let (second, _) = sphere_snapshot_text();
        assert_eq!(first, second);
    }
}
