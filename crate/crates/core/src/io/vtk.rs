//! VTK legacy ASCII (unstructured grid, linear tetrahedra) and small CSV
//! helpers.
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` through a decimal parse.

use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::Mesh;
use crate::vec3::V3;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    CellVectors(Vec<V3>),
    CellScalars(Vec<f64>),
    PointVectors(Vec<V3>),
    PointScalars(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VtkField {
    pub name: String,
    pub data: FieldData,
}

impl VtkField {
    pub fn new(name: &str, data: FieldData) -> Self {
        VtkField { name: name.to_string(), data }
    }

    fn on_cells(&self) -> bool {
        matches!(self.data, FieldData::CellVectors(_) | FieldData::CellScalars(_))
    }

    fn len(&self) -> usize {
        match &self.data {
            FieldData::CellVectors(v) | FieldData::PointVectors(v) => v.len(),
            FieldData::CellScalars(v) | FieldData::PointScalars(v) => v.len(),
        }
    }
}

/// `{:.16e}`: one leading digit plus sixteen.
pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn block(out: &mut String, f: &VtkField) {
    let name: String = f.name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    match &f.data {
        FieldData::CellVectors(v) | FieldData::PointVectors(v) => {
            let _ = writeln!(out, "VECTORS {name} double");
            for p in v {
                let _ = writeln!(out, "{} {} {}", real(p[0]), real(p[1]), real(p[2]));
            }
        }
        FieldData::CellScalars(v) | FieldData::PointScalars(v) => {
            let _ = writeln!(out, "SCALARS {name} double 1");
            out.push_str("LOOKUP_TABLE default\n");
            for x in v {
                let _ = writeln!(out, "{}", real(*x));
            }
        }
    }
}

pub fn vtk_string(mesh: &Mesh, fields: &[VtkField], title: &str) -> Result<String> {
    let (nv, nt) = (mesh.vertices.len(), mesh.tets.len());
    for f in fields {
        let want = if f.on_cells() { nt } else { nv };
        if f.len() != want {
            return Err(Error::Dimension(format!("field '{}' has {} values, expected {want}", f.name, f.len())));
        }
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    // the title line must be a single line
    let _ = writeln!(out, "{}", title.lines().next().unwrap_or("curlforge"));
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for p in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", real(p[0]), real(p[1]), real(p[2]));
    }
    let _ = writeln!(out, "CELLS {nt} {}", 5 * nt);
    for t in &mesh.tets {
        let _ = writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("10\n");
    }
    let (cells, points): (Vec<&VtkField>, Vec<&VtkField>) = fields.iter().partition(|f| f.on_cells());
    if !cells.is_empty() {
        let _ = writeln!(out, "CELL_DATA {nt}");
        cells.iter().for_each(|f| block(&mut out, f));
    }
    if !points.is_empty() {
        let _ = writeln!(out, "POINT_DATA {nv}");
        points.iter().for_each(|f| block(&mut out, f));
    }
    Ok(out)
}

pub fn export_vtk(mesh: &Mesh, fields: &[VtkField], path: &Path) -> Result<()> {
    let s = vtk_string(mesh, fields, "curlforge")?;
    write_file(path, &s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Write rows under a header through the `csv` writer.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
