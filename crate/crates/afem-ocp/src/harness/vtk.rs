//! Legacy ASCII VTK export of triangle meshes with nodal and per-cell
//! scalar fields.

use std::io::Write;
use std::path::Path;

use crate::mesh::Mesh;

/// Write an unstructured-grid VTK file (triangles, cell type 5) with the
/// given POINT_DATA and CELL_DATA scalar fields.
pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    point_data: &[(&str, &[f64])],
    cell_data: &[(&str, &[f64])],
) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);

    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "afem-ocp mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;

    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for v in &mesh.vertices {
        writeln!(w, "{:.17e} {:.17e} 0", v.x, v.y)?;
    }

    let m = mesh.n_elements();
    writeln!(w, "CELLS {} {}", m, 4 * m)?;
    for e in &mesh.elements {
        writeln!(w, "3 {} {} {}", e.v[0], e.v[1], e.v[2])?;
    }
    writeln!(w, "CELL_TYPES {m}")?;
    for _ in 0..m {
        writeln!(w, "5")?;
    }

    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, values) in point_data {
            assert_eq!(values.len(), mesh.n_vertices(), "point field '{name}' length");
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }

    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {m}")?;
        for (name, values) in cell_data {
            assert_eq!(values.len(), m, "cell field '{name}' length");
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(w, "{v:.17e}")?;
            }
        }
    }

    w.flush()
}
