use serde::Serialize;

use super::Mesh;
use crate::vec3::{add, cross, dot, norm, scale, sub};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct QualityReport {
    /// Dihedral angles in radians.
    pub min_dihedral: f64,
    pub max_dihedral: f64,
    /// Maximum edge length.
    pub h: f64,
    /// Normalised radius ratio `3 r_in / r_circ` (1 for a regular tet).
    pub min_radius_ratio: f64,
    pub mean_radius_ratio: f64,
}

pub fn mesh_quality_report(mesh: &Mesh) -> Result<QualityReport> {
    let mut min_d = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    let mut min_rr = f64::INFINITY;
    let mut sum_rr = 0.0;
    for (ti, t) in mesh.tets.iter().enumerate() {
        let p = t.map(|v| mesh.vertices[v]);
        let vol = mesh.signed_volume(ti);
        if !(vol > 0.0) {
            return Err(Error::Quality(format!("tet {ti} is degenerate or inverted")));
        }
        // Inward face normals (parallel to barycentric gradients).
        let mut g = [[0.0; 3]; 4];
        let mut area_sum = 0.0;
        for k in 0..4 {
            let f: Vec<usize> = (0..4).filter(|&q| q != k).collect();
            let mut n = cross(sub(p[f[1]], p[f[0]]), sub(p[f[2]], p[f[0]]));
            if dot(n, sub(p[k], p[f[0]])) < 0.0 {
                n = scale(-1.0, n);
            }
            area_sum += 0.5 * norm(n);
            g[k] = scale(1.0 / norm(n), n);
        }
        for k in 0..4 {
            for l in k + 1..4 {
                let ang = (-dot(g[k], g[l])).clamp(-1.0, 1.0).acos();
                min_d = min_d.min(ang);
                max_d = max_d.max(ang);
            }
        }
        let r_in = 3.0 * vol / area_sum;
        let (a, b, c) = (sub(p[1], p[0]), sub(p[2], p[0]), sub(p[3], p[0]));
        let num = add(
            add(scale(dot(a, a), cross(b, c)), scale(dot(b, b), cross(c, a))),
            scale(dot(c, c), cross(a, b)),
        );
        let r_circ = norm(num) / (2.0 * dot(a, cross(b, c))).abs();
        let rr = 3.0 * r_in / r_circ;
        if !(rr > 0.0) {
            return Err(Error::Quality(format!("tet {ti} has zero radius ratio")));
        }
        min_rr = min_rr.min(rr);
        sum_rr += rr;
    }
    Ok(QualityReport {
        min_dihedral: min_d,
        max_dihedral: max_d,
        h: mesh.h(),
        min_radius_ratio: min_rr,
        mean_radius_ratio: sum_rr / mesh.tets.len().max(1) as f64,
    })
}
