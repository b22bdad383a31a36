
use serde::{Deserialize, Serialize};

use super::{face_tets, surface_components, BoundaryFace, CutSurface, Mesh};
use crate::vec3::{dot, norm, scale, sub, V3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    Box,
    SphericalShell,
    SolidTorus,
}

impl std::str::FromStr for GeometryKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Self::Box),
            "spherical_shell" | "shell" => Ok(Self::SphericalShell),
            "solid_torus" | "torus" => Ok(Self::SolidTorus),
            _ => Err(Error::Config(format!("unknown geometry kind '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryParams {
    /// Box edge lengths; the box is `[0,lx] x [0,ly] x [0,lz]`.
    pub extents: V3,
    /// Shell radii `a < b`.
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// Torus radii `r < R`.
    pub major_radius: f64,
    pub minor_radius: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            extents: [1.0, 1.0, 1.0],
            inner_radius: 0.5,
            outer_radius: 1.0,
            major_radius: 1.0,
            minor_radius: 0.4,
        }
    }
}

/// Build one of the three canonical domains from a structured hex grid split
/// into six Kuhn tetrahedra per cell.
///
/// * box: `resolution^3` cells.
/// * spherical shell: a `3r x 3r x 3r` grid on `[-1,1]^3` with the middle
///   `r^3` block removed, mapped radially onto `a <= |x| <= b`.
/// * solid torus: an `r x r` disk grid swept through `4r` toroidal segments and
///   welded at angle zero; the weld is the cutting surface.
pub fn build_canonical_mesh(kind: GeometryKind, resolution: usize, p: &GeometryParams) -> Result<Mesh> {
    match kind {
        GeometryKind::Box => {
            if resolution < 2 {
                return Err(Error::Parameter("resolution must be at least 2".into()));
            }
            if p.extents.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::Parameter("box extents must be positive".into()));
            }
            Ok(box_mesh(resolution, p.extents))
        }
        GeometryKind::SphericalShell => {
            if resolution < 2 {
                return Err(Error::Parameter("resolution must be at least 2".into()));
            }
            let (a, b) = (p.inner_radius, p.outer_radius);
            if !(a > 0.0) || !(b > a) {
                return Err(Error::Parameter(format!("shell radii need 0 < a < b, got a={a}, b={b}")));
            }
            Ok(shell_mesh(resolution, a, b))
        }
        GeometryKind::SolidTorus => {
            let (rr, r) = (p.major_radius, p.minor_radius);
            if !(r > 0.0) || !(rr > r) {
                return Err(Error::Parameter(format!("torus radii need 0 < r < R, got r={r}, R={rr}")));
            }
            if resolution < 2 {
                return Err(Error::Topology(
                    "resolution too small to host a mesh-conforming cutting surface".into(),
                ));
            }
            Ok(torus_mesh(resolution, rr, r))
        }
    }
}

/// The six Kuhn simplices of a cell, as paths from corner 000 to corner 111.
const KUHN: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

struct Grid<'a> {
    n: [usize; 3],
    /// Global vertex id of grid node (i,j,k); `k` wraps when periodic.
    node: &'a dyn Fn(usize, usize, usize) -> usize,
    active: &'a dyn Fn(usize, usize, usize) -> bool,
}

fn grid_tets(g: &Grid, pts: &[V3]) -> Vec<[usize; 4]> {
    let mut tets = Vec::new();
    for k in 0..g.n[2] {
        for j in 0..g.n[1] {
            for i in 0..g.n[0] {
                if !(g.active)(i, j, k) {
                    continue;
                }
                for perm in KUHN {
                    let mut c = [i, j, k];
                    let mut t = [(g.node)(c[0], c[1], c[2]); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        t[s + 1] = (g.node)(c[0], c[1], c[2]);
                    }
                    let vol = dot(
                        sub(pts[t[1]], pts[t[0]]),
                        crate::vec3::cross(sub(pts[t[2]], pts[t[0]]), sub(pts[t[3]], pts[t[0]])),
                    );
                    if vol < 0.0 {
                        t.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
    }
    tets
}

/// Drop unreferenced vertices and renumber.
fn compact(pts: Vec<V3>, tets: &mut [[usize; 4]]) -> Vec<V3> {
    let mut map = vec![usize::MAX; pts.len()];
    let mut out = Vec::new();
    for t in tets.iter_mut() {
        for v in t.iter_mut() {
            if map[*v] == usize::MAX {
                map[*v] = out.len();
                out.push(pts[*v]);
            }
            *v = map[*v];
        }
    }
    out
}

/// Exterior faces, oriented outward and labelled by connected component.
/// The component reaching furthest from the centroid is the outer boundary.
fn label_boundary(pts: &[V3], tets: &[[usize; 4]]) -> Vec<BoundaryFace> {
    let ft = face_tets(tets);
    let mut faces: Vec<[usize; 3]> = Vec::new();
    let mut keys: Vec<&[usize; 3]> = ft.iter().filter(|(_, ts)| ts.len() == 1).map(|(k, _)| k).collect();
    keys.sort_unstable();
    for key in keys {
        let t = tets[ft[key][0]];
        let opp = t.iter().copied().find(|v| !key.contains(v)).unwrap();
        let mut f = *key;
        let n = crate::vec3::cross(sub(pts[f[1]], pts[f[0]]), sub(pts[f[2]], pts[f[0]]));
        if dot(n, sub(pts[opp], pts[f[0]])) > 0.0 {
            f.swap(1, 2);
        }
        faces.push(f);
    }
    let comp = surface_components(&faces);
    let ncomp = comp.iter().max().map_or(0, |c| c + 1);
    let mut centroid = [0.0; 3];
    for p in pts {
        centroid = crate::vec3::add(centroid, scale(1.0 / pts.len() as f64, *p));
    }
    let mut reach = vec![0.0f64; ncomp];
    for (f, &c) in faces.iter().zip(&comp) {
        for &v in f {
            reach[c] = reach[c].max(norm(sub(pts[v], centroid)));
        }
    }
    let outer = (0..ncomp)
        .max_by(|&a, &b| reach[a].partial_cmp(&reach[b]).unwrap())
        .unwrap_or(0);
    let mut label = vec![0; ncomp];
    let mut next = 1;
    for c in 0..ncomp {
        if c != outer {
            label[c] = next;
            next += 1;
        }
    }
    label[outer] = ncomp;
    faces
        .into_iter()
        .zip(comp)
        .map(|(verts, c)| BoundaryFace { verts, label: label[c] })
        .collect()
}

fn box_mesh(n: usize, ext: V3) -> Mesh {
    let np = n + 1;
    let mut pts = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let f = |q: usize, l: f64| l * q as f64 / n as f64;
                pts.push([f(i, ext[0]), f(j, ext[1]), f(k, ext[2])]);
            }
        }
    }
    let node = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let active = |_: usize, _: usize, _: usize| true;
    let tets = grid_tets(&Grid { n: [n, n, n], node: &node, active: &active }, &pts);
    let boundary_faces = label_boundary(&pts, &tets);
    Mesh { vertices: pts, tets, boundary_faces, cut_surfaces: Vec::new() }
}

fn shell_mesh(n: usize, a: f64, b: f64) -> Mesh {
    let s = 3 * n;
    let np = s + 1;
    let mut pts = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let g = |q: usize| -1.0 + 2.0 * q as f64 / s as f64;
                let p = [g(i), g(j), g(k)];
                let inf = p.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if inf < 1.0 / 3.0 - 1e-12 {
                    pts.push([0.0; 3]);
                    continue;
                }
                let r = a + (inf - 1.0 / 3.0) * 1.5 * (b - a);
                pts.push(scale(r / norm(p), p));
            }
        }
    }
    let node = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let inner = |q: usize| q >= n && q < 2 * n;
    let active = |i: usize, j: usize, k: usize| !(inner(i) && inner(j) && inner(k));
    let mut tets = grid_tets(&Grid { n: [s, s, s], node: &node, active: &active }, &pts);
    let pts = compact(pts, &mut tets);
    let boundary_faces = label_boundary(&pts, &tets);
    Mesh { vertices: pts, tets, boundary_faces, cut_surfaces: Vec::new() }
}

/// Elliptical square-to-disk map.
fn disk(s: f64, t: f64) -> [f64; 2] {
    [s * (1.0 - 0.5 * t * t).sqrt(), t * (1.0 - 0.5 * s * s).sqrt()]
}

fn torus_mesh(n: usize, rr: f64, r: f64) -> Mesh {
    let nk = 4 * n;
    let np = n + 1;
    let mut pts = Vec::with_capacity(np * np * nk);
    for k in 0..nk {
        let th = 2.0 * std::f64::consts::PI * k as f64 / nk as f64;
        for j in 0..np {
            for i in 0..np {
                let g = |q: usize| -1.0 + 2.0 * q as f64 / n as f64;
                let d = disk(g(i), g(j));
                let rho = rr + r * d[0];
                pts.push([rho * th.cos(), rho * th.sin(), r * d[1]]);
            }
        }
    }
    let node = |i: usize, j: usize, k: usize| i + np * (j + np * (k % nk));
    let active = |_: usize, _: usize, _: usize| true;
    let tets = grid_tets(&Grid { n: [n, n, nk], node: &node, active: &active }, &pts);
    let boundary_faces = label_boundary(&pts, &tets);

    // The weld at angle zero: interior faces whose vertices all sit in layer k = 0.
    let on_weld = |v: usize| v < np * np;
    let ft = face_tets(&tets);
    let mut keys: Vec<[usize; 3]> = ft
        .iter()
        .filter(|(f, ts)| ts.len() == 2 && f.iter().all(|&v| on_weld(v)))
        .map(|(f, _)| *f)
        .collect();
    keys.sort_unstable();
    let mut orient = Vec::with_capacity(keys.len());
    for f in &keys {
        // At angle zero the positive toroidal direction is +y.
        let nrm = crate::vec3::cross(sub(pts[f[1]], pts[f[0]]), sub(pts[f[2]], pts[f[0]]));
        orient.push(if nrm[1] > 0.0 { 1 } else { -1 });
    }
    let cut = CutSurface { faces: keys, orient };
    Mesh { vertices: pts, tets, boundary_faces, cut_surfaces: vec![cut] }
}
