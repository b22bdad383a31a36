//! Integration of edge data along spanning trees of boundary graphs.

use std::collections::VecDeque;

use serde::Serialize;

use crate::decomp::Context;
use crate::vec3::dot;
use crate::{Error, Result};

/// Potential on the nodes of a graph with `phi[to] - phi[from] = g` along a
/// breadth-first spanning forest, plus the misfit on the other edges.
pub(crate) struct GraphIntegral {
    pub phi: Vec<f64>,
    /// `(edge, g - (phi[to] - phi[from]))` for every non-tree edge.
    pub cycles: Vec<(usize, f64)>,
    pub components: usize,
}

/// `edges[k] = (from, to)`; nodes with `active[n] == false` are skipped.
pub(crate) fn integrate_graph(active: &[bool], edges: &[(usize, usize)], g: &[f64]) -> GraphIntegral {
    let nn = active.len();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![vec![]; nn];
    for (k, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut phi = vec![0.0; nn];
    let mut seen = vec![false; nn];
    let mut tree = vec![false; edges.len()];
    let mut components = 0;
    for root in 0..nn {
        if !active[root] || seen[root] {
            continue;
        }
        components += 1;
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, k) in &adj[v] {
                if seen[w] {
                    continue;
                }
                seen[w] = true;
                tree[k] = true;
                let (a, _) = edges[k];
                phi[w] = if a == v { phi[v] + g[k] } else { phi[v] - g[k] };
                queue.push_back(w);
            }
        }
    }
    let cycles = edges
        .iter()
        .enumerate()
        .filter(|&(k, _)| !tree[k])
        .map(|(k, &(a, b))| (k, g[k] - (phi[b] - phi[a])))
        .collect();
    GraphIntegral { phi, cycles, components }
}

/// Dual boundary graph: nodes are boundary faces, one edge per boundary edge
/// joining its two boundary faces, oriented so that
/// `int grad_NC phi . curl w_e = phi[to] - phi[from]` for Crouzeix-Raviart
/// `phi` and boundary edge `e`.
pub(crate) struct DualGraph {
    pub edge_ids: Vec<usize>,
    pub links: Vec<(usize, usize)>,
    pub active: Vec<bool>,
}

pub(crate) fn dual_boundary_graph(ctx: &Context) -> Result<DualGraph> {
    let s = &ctx.s;
    let mut ends: Vec<Vec<(usize, f64)>> = vec![vec![]; s.ne()];
    for f in s.boundary_faces() {
        let t = s.face_tets[f][0];
        let k = s.tet_faces[t].iter().position(|&x| x == f).unwrap();
        let gz = ctx.cr.grads[t][k];
        for j in 0..6 {
            let e = s.tet_edges[t][j];
            if !s.bnd_edge[e] {
                continue;
            }
            let v = s.vol[t] * dot(gz, s.curl_local(t, j));
            if v.abs() > 0.5 {
                ends[e].push((f, v));
            }
        }
    }
    let mut edge_ids = vec![];
    let mut links = vec![];
    for (e, list) in ends.iter().enumerate() {
        if !s.bnd_edge[e] {
            continue;
        }
        match list.as_slice() {
            [(f1, v1), (f2, v2)] if (v1 + v2).abs() < 1e-8 => {
                edge_ids.push(e);
                links.push(if *v1 > 0.0 { (*f2, *f1) } else { (*f1, *f2) });
            }
            _ => return Err(Error::Topology(format!("boundary edge {e} does not join two boundary faces"))),
        }
    }
    let active = (0..s.nf()).map(|f| s.is_boundary_face(f)).collect();
    Ok(DualGraph { edge_ids, links, active })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryPotential {
    /// Values at the vertices; interior vertices carry 0.
    pub phi: Vec<f64>,
    /// Largest fundamental-cycle misfit, relative to the data.
    pub closure: f64,
    pub components: usize,
}

/// Integrate tangential edge circulations `w_e = int_e w . t` on the boundary
/// edges into a vertex potential with `phi(b) - phi(a) = w_e`, one constant per
/// boundary component fixed to 0 at its first vertex.
///
/// Fails with an obstruction if the data are not a tangential gradient:
/// first the triangle circulations (`nu . curl w != 0`) are checked, then the
/// remaining independent cycles, which carry the pairing with `H1`.
pub fn integrate_tangential_gradient(ctx: &Context, w: &[f64], tol: f64) -> Result<BoundaryPotential> {
    let s = &ctx.s;
    if w.len() != s.ne() {
        return Err(Error::Dimension(format!("{} edge values for {} edges", w.len(), s.ne())));
    }
    let ids: Vec<usize> = (0..s.ne()).filter(|&e| s.bnd_edge[e]).collect();
    let links: Vec<(usize, usize)> = ids.iter().map(|&e| (s.edges[e][0], s.edges[e][1])).collect();
    let g: Vec<f64> = ids.iter().map(|&e| w[e]).collect();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    // triangle circulations
    let emap: std::collections::HashMap<[usize; 2], usize> = s.edges.iter().enumerate().map(|(e, &ab)| (ab, e)).collect();
    let mut worst_face = 0.0f64;
    for f in s.boundary_faces() {
        let [a, b, c] = s.faces[f];
        let mut circ = 0.0;
        for (p, q) in [(a, b), (b, c), (c, a)] {
            let (lo, hi, sg) = if p < q { (p, q, 1.0) } else { (q, p, -1.0) };
            circ += sg * w[emap[&[lo, hi]]];
        }
        worst_face = worst_face.max(circ.abs());
    }
    if worst_face > tol * scale {
        return Err(Error::Obstruction(format!(
            "local class: triangle circulation {worst_face:.3e} (nu . curl w does not vanish)"
        )));
    }
    let gi = integrate_graph(&s.bnd_vertex, &links, &g);
    let worst = gi.cycles.iter().fold(0.0f64, |m, c| m.max(c.1.abs()));
    if worst > tol * scale * (1.0 + gi.cycles.len() as f64).sqrt() {
        let bad = gi.cycles.iter().filter(|c| c.1.abs() > tol * scale).count();
        return Err(Error::Obstruction(format!(
            "global class: {bad} fundamental boundary cycles with nonzero circulation, largest {worst:.6e} (pairing with H1 does not vanish)"
        )));
    }
    let mut phi = gi.phi;
    for (v, p) in phi.iter_mut().enumerate() {
        if !s.bnd_vertex[v] {
            *p = 0.0;
        }
    }
    Ok(BoundaryPotential { phi, closure: worst / scale, components: gi.components })
}
