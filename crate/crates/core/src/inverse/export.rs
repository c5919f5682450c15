//! Reconstruction exports: per-element CSV and legacy VTK unstructured grid.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// `element_id,delta_sigma` rows, ids 1-based.
pub fn write_reconstruction_csv(delta_sigma: &[f64]) -> String {
    let mut out = String::from("element_id,delta_sigma\n");
    for (i, v) in delta_sigma.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, v);
    }
    out
}

pub fn save_reconstruction_csv(delta_sigma: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_reconstruction_csv(delta_sigma)).map_err(|e| Error::io(path, e))
}

/// ASCII legacy VTK file with the region tags and each named cell field.
pub fn write_vtk(mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<String> {
    let ne = mesh.n_elements();
    for (name, values) in fields {
        if values.len() != ne {
            return Err(Error::invalid(format!(
                "field {name} has {} values for {ne} elements",
                values.len()
            )));
        }
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::invalid(format!("invalid VTK field name {name:?}")));
        }
    }
    let per = mesh.dimension() + 1;
    let cell_type = if mesh.dimension() == 3 { 10 } else { 5 };

    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\neitshape reconstruction\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(out, "CELLS {ne} {}", ne * (per + 1));
    for k in 0..ne {
        out.push_str(&per.to_string());
        for n in mesh.element(k) {
            let _ = write!(out, " {n}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "CELL_TYPES {ne}");
    for _ in 0..ne {
        let _ = writeln!(out, "{cell_type}");
    }
    let _ = writeln!(out, "CELL_DATA {ne}");
    out.push_str("SCALARS region int 1\nLOOKUP_TABLE default\n");
    for t in mesh.region_tags() {
        let _ = writeln!(out, "{t}");
    }
    for (name, values) in fields {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in *values {
            let _ = writeln!(out, "{v}");
        }
    }
    Ok(out)
}

pub fn save_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_vtk(mesh, fields)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    #[test]
    fn csv_has_one_row_per_element() {
        let s = write_reconstruction_csv(&[0.0, -1.5, 2e-9]);
        assert_eq!(s, "element_id,delta_sigma\n1,0\n2,-1.5\n3,0.000000002\n");
    }

    #[test]
    fn vtk_counts_match_mesh() {
        let m = generate_box_mesh(&[2.0, 1.0, 1.0], 1.0).unwrap();
        let ds: Vec<f64> = (0..m.n_elements()).map(|k| k as f64).collect();
        let s = write_vtk(&m, &[("delta_sigma", &ds)]).unwrap();
        assert!(s.contains(&format!("POINTS {} double", m.n_nodes())));
        assert!(s.contains(&format!("CELLS {} {}", m.n_elements(), m.n_elements() * 5)));
        assert!(s.contains("SCALARS delta_sigma double 1"));
        assert_eq!(s.lines().filter(|l| *l == "10").count(), m.n_elements() + 1);
        assert!(write_vtk(&m, &[("bad name", &ds)]).is_err());
        assert!(write_vtk(&m, &[("short", &ds[1..])]).is_err());
    }
}
