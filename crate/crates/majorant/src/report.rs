//! Report emission helpers: legacy-ASCII VTK for per-cell scalars and the
//! fixed-width scientific number format used by every CSV the driver writes.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::TetMesh;
use crate::Real;

/// Formats like C's `%.6e`: six fractional digits, `e` plus signed two-digit
/// exponent (`1.234560e+02`). Non-finite values print as `inf`/`-inf`/`nan`.
pub fn format_e6<S: Real + std::fmt::LowerExp>(x: S) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > S::zero() {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let raw = format!("{x:.6e}");
    let (mantissa, exp) = raw.split_once('e').expect("exponent present");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}

/// Writes tetrahedral cell data as a legacy ASCII VTK unstructured grid.
pub fn vtk_cell_scalars_to_string<S: Real>(
    mesh: &TetMesh<S>,
    field_name: &str,
    values: &[S],
) -> String {
    assert_eq!(values.len(), mesh.tets.len(), "one value per tet");
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str("tetrahedral cell data\n");
    out.push_str("ASCII\n");
    out.push_str("DATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
    }
    let _ = writeln!(out, "CELLS {} {}", mesh.tets.len(), 5 * mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.tets.len());
    for _ in &mesh.tets {
        out.push_str("10\n");
    }
    let _ = writeln!(out, "CELL_DATA {}", mesh.tets.len());
    let _ = writeln!(out, "SCALARS {field_name} double 1");
    out.push_str("LOOKUP_TABLE default\n");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn write_vtk_cell_scalars<S: Real>(
    mesh: &TetMesh<S>,
    field_name: &str,
    values: &[S],
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    std::fs::write(path, vtk_cell_scalars_to_string(mesh, field_name, values))
}
