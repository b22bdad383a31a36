//! Plain-text mesh format:
//!
//! ```text
//! CURLFORGE-MESH 1
//! VERTICES n
//! x y z
//! TETS n
//! a b c d
//! BOUNDARY n
//! a b c label
//! CUTS n
//! CUT faces
//! a b c orient
//! END
//! ```
//!
//! Coordinates use the shortest round-trip decimal form, so a write/read
//! cycle is bit-exact.

use std::fmt::Write as _;

use super::{BoundaryFace, CutSurface, Mesh};
use crate::{Error, Result};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    s.push_str("CURLFORGE-MESH 1\n");
    let _ = writeln!(s, "VERTICES {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "TETS {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(s, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "BOUNDARY {}", mesh.boundary_faces.len());
    for f in &mesh.boundary_faces {
        let _ = writeln!(s, "{} {} {} {}", f.verts[0], f.verts[1], f.verts[2], f.label);
    }
    let _ = writeln!(s, "CUTS {}", mesh.cut_surfaces.len());
    for c in &mesh.cut_surfaces {
        let _ = writeln!(s, "CUT {}", c.faces.len());
        for (f, o) in c.faces.iter().zip(&c.orient) {
            let _ = writeln!(s, "{} {} {} {}", f[0], f[1], f[2], o);
        }
    }
    s.push_str("END\n");
    s
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.it.by_ref() {
            let l = l.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            return Ok((i + 1, l.split_whitespace().collect()));
        }
        Err(Error::Format("unexpected end of mesh file".into()))
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let (ln, w) = self.next()?;
        if w.len() != 2 || w[0] != key {
            return Err(Error::Format(format!("line {ln}: expected '{key} <count>'")));
        }
        w[1].parse().map_err(|_| Error::Format(format!("line {ln}: bad count")))
    }
}

fn parse<T: std::str::FromStr>(ln: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("line {ln}: cannot parse '{s}'")))
}

fn row<T: std::str::FromStr + Copy + Default, const N: usize>(lines: &mut Lines) -> Result<[T; N]> {
    let (ln, w) = lines.next()?;
    if w.len() != N {
        return Err(Error::Format(format!("line {ln}: expected {N} fields")));
    }
    let mut out = [T::default(); N];
    for (o, s) in out.iter_mut().zip(&w) {
        *o = parse(ln, s)?;
    }
    Ok(out)
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines { it: text.lines().enumerate() };
    let (ln, w) = lines.next()?;
    if w != ["CURLFORGE-MESH", "1"] {
        return Err(Error::Format(format!("line {ln}: missing 'CURLFORGE-MESH 1' header")));
    }
    let nv = lines.header("VERTICES")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push(row::<f64, 3>(&mut lines)?);
    }
    let nt = lines.header("TETS")?;
    let mut tets = Vec::with_capacity(nt);
    for _ in 0..nt {
        tets.push(row::<usize, 4>(&mut lines)?);
    }
    let nb = lines.header("BOUNDARY")?;
    let mut boundary_faces = Vec::with_capacity(nb);
    for _ in 0..nb {
        let r = row::<usize, 4>(&mut lines)?;
        boundary_faces.push(BoundaryFace { verts: [r[0], r[1], r[2]], label: r[3] });
    }
    let nc = lines.header("CUTS")?;
    let mut cut_surfaces = Vec::with_capacity(nc);
    for _ in 0..nc {
        let nf = lines.header("CUT")?;
        let mut faces = Vec::with_capacity(nf);
        let mut orient = Vec::with_capacity(nf);
        for _ in 0..nf {
            let r = row::<i64, 4>(&mut lines)?;
            if r[..3].iter().any(|&v| v < 0) || !(r[3] == 1 || r[3] == -1) {
                return Err(Error::Format("cut face row must be 'a b c +-1'".into()));
            }
            faces.push([r[0] as usize, r[1] as usize, r[2] as usize]);
            orient.push(r[3] as i8);
        }
        cut_surfaces.push(CutSurface { faces, orient });
    }
    let (ln, w) = lines.next()?;
    if w != ["END"] {
        return Err(Error::Format(format!("line {ln}: expected END")));
    }
    let mesh = Mesh { vertices, tets, boundary_faces, cut_surfaces };
    mesh.validate()?;
    Ok(mesh)
}
