//! Tetrahedral meshes with labelled boundary components and cutting surfaces.

mod build;
mod io;
mod quality;

use std::collections::{HashMap, VecDeque};

use crate::vec3::{cross, dot, sub, V3};
use crate::{Error, Result};

pub use build::{build_canonical_mesh, GeometryKind, GeometryParams};
pub use io::{read_mesh, write_mesh};
pub use quality::{mesh_quality_report, QualityReport};

/// A boundary triangle. Vertex order gives the outward normal by the right-hand rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFace {
    pub verts: [usize; 3],
    /// Component label in `1..=m+1`; the last label is the outer boundary.
    pub label: usize,
}

/// An interior cutting surface. `orient[k] = +1` when the right-hand normal
/// of `faces[k]` points in the positive crossing direction.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSurface {
    pub faces: Vec<[usize; 3]>,
    pub orient: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<V3>,
    pub tets: Vec<[usize; 4]>,
    pub boundary_faces: Vec<BoundaryFace>,
    pub cut_surfaces: Vec<CutSurface>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyInfo {
    /// Number of inner boundary components.
    pub m: usize,
    /// Number of cutting surfaces.
    pub n: usize,
    /// Genus of each boundary component, indexed by label - 1.
    pub genus: Vec<usize>,
}

impl Mesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Characteristic size: the maximum edge length.
    pub fn h(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in &self.tets {
            for a in 0..4 {
                for b in a + 1..4 {
                    h = h.max(crate::vec3::dist(self.vertices[t[a]], self.vertices[t[b]]));
                }
            }
        }
        h
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tets[t];
        let p = &self.vertices;
        dot(sub(p[b], p[a]), cross(sub(p[c], p[a]), sub(p[d], p[a]))) / 6.0
    }

    /// Largest boundary label, i.e. `m + 1`.
    pub fn num_boundary_components(&self) -> usize {
        self.boundary_faces.iter().map(|f| f.label).max().unwrap_or(0)
    }

    /// Structural checks: positive volumes, boundary faces on exactly one tet,
    /// cut faces interior with one tet on each side.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (i, t) in self.tets.iter().enumerate() {
            if t.iter().any(|&v| v >= nv) {
                return Err(Error::Format(format!("tet {i} references a missing vertex")));
            }
            if self.signed_volume(i) <= 0.0 {
                return Err(Error::Quality(format!("tet {i} has non-positive volume")));
            }
        }
        let faces = face_tets(&self.tets);
        for (k, f) in self.boundary_faces.iter().enumerate() {
            match faces.get(&sorted3(f.verts)) {
                Some(ts) if ts.len() == 1 => {}
                _ => return Err(Error::Format(format!("boundary face {k} is not on exactly one tet"))),
            }
        }
        let nb = faces.values().filter(|ts| ts.len() == 1).count();
        if nb != self.boundary_faces.len() {
            return Err(Error::Format(format!(
                "{} exterior faces but {} labelled boundary faces",
                nb,
                self.boundary_faces.len()
            )));
        }
        for (i, cut) in self.cut_surfaces.iter().enumerate() {
            if cut.faces.len() != cut.orient.len() {
                return Err(Error::Format(format!("cut {i}: orientation list length mismatch")));
            }
            for f in &cut.faces {
                let ts = faces.get(&sorted3(*f)).ok_or_else(|| {
                    Error::Topology(format!("cut {i}: face {f:?} is not a mesh face"))
                })?;
                if ts.len() != 2 {
                    return Err(Error::Topology(format!("cut {i}: face {f:?} is not interior")));
                }
                let n = self.face_normal(*f);
                let p0 = self.vertices[f[0]];
                let s: Vec<f64> = ts
                    .iter()
                    .map(|&t| {
                        let opp = self.tets[t].iter().copied().find(|v| !f.contains(v)).unwrap();
                        dot(n, sub(self.vertices[opp], p0))
                    })
                    .collect();
                if s[0] * s[1] >= 0.0 {
                    return Err(Error::Topology(format!("cut {i}: face {f:?} does not separate")));
                }
            }
        }
        Ok(())
    }

    /// Right-hand-rule normal scaled by twice the triangle area.
    pub fn face_normal(&self, f: [usize; 3]) -> V3 {
        let p = &self.vertices;
        cross(sub(p[f[1]], p[f[0]]), sub(p[f[2]], p[f[0]]))
    }

    /// Euler characteristic `V - E + F - T` of the simplicial complex.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        let mut faces = std::collections::HashSet::new();
        for t in &self.tets {
            for a in 0..4 {
                for b in a + 1..4 {
                    edges.insert(sorted2([t[a], t[b]]));
                }
                let f: Vec<usize> = (0..4).filter(|&k| k != a).map(|k| t[k]).collect();
                faces.insert(sorted3([f[0], f[1], f[2]]));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + faces.len() as i64 - self.tets.len() as i64
    }
}

pub(crate) fn sorted2(e: [usize; 2]) -> [usize; 2] {
    if e[0] < e[1] {
        e
    } else {
        [e[1], e[0]]
    }
}

pub(crate) fn sorted3(mut f: [usize; 3]) -> [usize; 3] {
    f.sort_unstable();
    f
}

/// Map from sorted face triple to the tets containing it.
pub(crate) fn face_tets(tets: &[[usize; 4]]) -> HashMap<[usize; 3], Vec<usize>> {
    let mut map: HashMap<[usize; 3], Vec<usize>> = HashMap::with_capacity(tets.len() * 3);
    for (ti, t) in tets.iter().enumerate() {
        for skip in 0..4 {
            let f: Vec<usize> = (0..4).filter(|&k| k != skip).map(|k| t[k]).collect();
            map.entry(sorted3([f[0], f[1], f[2]])).or_default().push(ti);
        }
    }
    map
}

/// Connected components of a triangle set under edge adjacency.
pub(crate) fn surface_components(faces: &[[usize; 3]]) -> Vec<usize> {
    let mut by_edge: HashMap<[usize; 2], Vec<usize>> = HashMap::new();
    for (k, f) in faces.iter().enumerate() {
        for a in 0..3 {
            by_edge.entry(sorted2([f[a], f[(a + 1) % 3]])).or_default().push(k);
        }
    }
    let mut comp = vec![usize::MAX; faces.len()];
    let mut next = 0;
    for start in 0..faces.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            let f = faces[k];
            for a in 0..3 {
                for &nb in &by_edge[&sorted2([f[a], f[(a + 1) % 3]])] {
                    if comp[nb] == usize::MAX {
                        comp[nb] = next;
                        queue.push_back(nb);
                    }
                }
            }
        }
        next += 1;
    }
    comp
}

/// Count boundary labels and cut surfaces, verifying label contiguity and
/// that each label is one connected face set.
pub fn topology_of(mesh: &Mesh) -> Result<TopologyInfo> {
    let nlab = mesh.num_boundary_components();
    if nlab == 0 {
        return Err(Error::Format("mesh has no boundary faces".into()));
    }
    let mut genus = Vec::with_capacity(nlab);
    for label in 1..=nlab {
        let faces: Vec<[usize; 3]> = mesh
            .boundary_faces
            .iter()
            .filter(|f| f.label == label)
            .map(|f| f.verts)
            .collect();
        if faces.is_empty() {
            return Err(Error::Format(format!("boundary labels are not contiguous: {label} unused")));
        }
        let comp = surface_components(&faces);
        if comp.iter().any(|&c| c != 0) {
            return Err(Error::Format(format!("boundary label {label} is not connected")));
        }
        let mut verts = std::collections::HashSet::new();
        let mut edges = std::collections::HashSet::new();
        for f in &faces {
            for a in 0..3 {
                verts.insert(f[a]);
                edges.insert(sorted2([f[a], f[(a + 1) % 3]]));
            }
        }
        let chi = verts.len() as i64 - edges.len() as i64 + faces.len() as i64;
        genus.push(((2 - chi) / 2).max(0) as usize);
    }
    if mesh.boundary_faces.iter().any(|f| f.label == 0 || f.label > nlab) {
        return Err(Error::Format("boundary label outside 1..=m+1".into()));
    }
    Ok(TopologyInfo {
        m: nlab - 1,
        n: mesh.cut_surfaces.len(),
        genus,
    })
}
