//! Discrete harmonic fields.
//!
//! `H1` fields are curl-free, divergence-free and tangent to the boundary;
//! `H2` fields are curl-free, divergence-free and normal to it. Both come in
//! two forms: edge fields (gradients of P1 potentials) and their piecewise
//! constant "face" representatives, which are the exact harmonic parts of the
//! discrete decompositions in [`crate::decomp`].

use crate::fem::{center, solve_with_dirichlet, FemSpaces};
use crate::mesh::{sorted3, CutSurface};
use crate::vec3::{axpy, dot, scale, sub, V3};
use crate::{Error, Result};

const TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    /// Edge coefficients of `e_i`, L2-orthonormal.
    pub h1_edge: Vec<Vec<f64>>,
    /// Edge coefficients of `y^k`, L2-orthonormal.
    pub h2_edge: Vec<Vec<f64>>,
    /// Piecewise constant representatives used by the decompositions.
    pub h1: Vec<Vec<V3>>,
    pub h2: Vec<Vec<V3>>,
    /// `max |(b_i, b_j) - delta_ij|` over both bases.
    pub gram_residual: f64,
    /// `max |(e_i, y^k)|`.
    pub cross_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicKind {
    H1,
    H2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport {
    pub curl: f64,
    pub div: f64,
    pub trace: f64,
    pub tol_curl: f64,
    pub tol_div: f64,
    pub tol_trace: f64,
    pub pass: bool,
}

impl HarmonicBasis {
    pub fn n(&self) -> usize {
        self.h1.len()
    }
    pub fn m(&self) -> usize {
        self.h2.len()
    }

    /// Coefficients of the L2 projection of `u` onto the `H1` representatives.
    pub fn h1_coeffs(&self, s: &FemSpaces, u: &[V3]) -> Vec<f64> {
        self.h1.iter().map(|e| s.p0_inner(u, e)).collect()
    }

    pub fn h2_coeffs(&self, s: &FemSpaces, u: &[V3]) -> Vec<f64> {
        self.h2.iter().map(|y| s.p0_inner(u, y)).collect()
    }

    pub fn h1_field(&self, c: &[f64]) -> Vec<V3> {
        combine(&self.h1, c, self.h1.first().map_or(0, Vec::len))
    }

    pub fn h2_field(&self, c: &[f64]) -> Vec<V3> {
        combine(&self.h2, c, self.h2.first().map_or(0, Vec::len))
    }
}

/// `sum c_i f_i` for piecewise constant fields.
pub fn combine(fields: &[Vec<V3>], c: &[f64], nt: usize) -> Vec<V3> {
    let mut out = vec![[0.0; 3]; nt];
    for (f, &ci) in fields.iter().zip(c) {
        for (o, v) in out.iter_mut().zip(f) {
            *o = axpy(ci, *v, *o);
        }
    }
    out
}

/// Harmonic potentials `eta_j` with `eta_j = 1` on `Gamma_j` and 0 on the other
/// components, for the inner components `j = 1..=m`.
pub fn harmonic_potentials(s: &FemSpaces) -> Result<Vec<Vec<f64>>> {
    let m = s.mesh.num_boundary_components().saturating_sub(1);
    let p1 = s.p1();
    let k = p1.stiffness(None);
    let zero = vec![0.0; s.nv()];
    (1..=m)
        .map(|j| {
            let g: Vec<f64> = s.vertex_label.iter().map(|&l| if l == j { 1.0 } else { 0.0 }).collect();
            solve_with_dirichlet(&k, &zero, &s.bnd_vertex, &g, &p1.weights, TOL)
        })
        .collect()
}

/// Basis of `H2` as edge fields `grad eta_j`, orthonormalized.
pub fn compute_dirichlet_fields(s: &FemSpaces) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<Vec<f64>> = harmonic_potentials(s)?.iter().map(|eta| s.grad_of(eta)).collect();
    orthonormalize_edges(s, raw)
}

/// Gradient of the cut potential of one surface: per-tet gradient and edge
/// coefficients. The potential jumps by one across the surface.
pub fn cut_potential(s: &FemSpaces, cut: &CutSurface) -> Result<(Vec<V3>, Vec<f64>)> {
    let nt = s.nt();
    let fidx = s.face_index();
    let p = &s.mesh.vertices;
    let mut sigma = vec![false; s.nf()];
    let mut on_cut = vec![false; s.nv()];
    // side[t] = -1 / +1 for tets adjacent to the surface
    let mut side = vec![0i8; nt];
    for (f, &o) in cut.faces.iter().zip(&cut.orient) {
        let id = *fidx
            .get(&sorted3(*f))
            .ok_or_else(|| Error::Topology(format!("cut face {f:?} is not a mesh face")))?;
        sigma[id] = true;
        for &v in f {
            on_cut[v] = true;
        }
        let d = scale(o as f64, s.mesh.face_normal(*f));
        for &t in &s.face_tets[id] {
            if t == crate::fem::NONE {
                return Err(Error::Topology("cut face on the boundary".into()));
            }
            let opp = s.mesh.tets[t].iter().copied().find(|v| !f.contains(v)).unwrap();
            let sd = if dot(sub(p[opp], p[f[0]]), d) > 0.0 { 1 } else { -1 };
            if side[t] != 0 && side[t] != sd {
                return Err(Error::Topology(format!("tetrahedron {t} lies on both sides of the cut")));
            }
            side[t] = sd;
        }
    }
    let vt = s.vertex_tets();
    // dup[t][k]: local vertex k of tet t uses the duplicated copy
    let mut dup = vec![[false; 4]; nt];
    for v in (0..s.nv()).filter(|&v| on_cut[v]) {
        let star = &vt[v];
        let mut comp = vec![usize::MAX; star.len()];
        let mut ncomp = 0;
        for start in 0..star.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = ncomp;
            let mut stack = vec![start];
            while let Some(a) = stack.pop() {
                let ta = star[a];
                for &f in &s.tet_faces[ta] {
                    if sigma[f] || !s.faces[f].contains(&v) {
                        continue;
                    }
                    for &tb in &s.face_tets[f] {
                        if let Some(b) = star.iter().position(|&x| x == tb) {
                            if comp[b] == usize::MAX {
                                comp[b] = ncomp;
                                stack.push(b);
                            }
                        }
                    }
                }
            }
            ncomp += 1;
        }
        if ncomp != 2 {
            return Err(Error::Topology(format!(
                "cut does not split the star of vertex {v} into two parts ({ncomp} found)"
            )));
        }
        let mut minus = None;
        for (a, &t) in star.iter().enumerate() {
            if side[t] != 0 {
                let want = side[t] < 0;
                match minus {
                    None => minus = Some(if want { comp[a] } else { 1 - comp[a] }),
                    Some(c) if (comp[a] == c) != want => {
                        return Err(Error::Topology(format!("inconsistent cut orientation at vertex {v}")));
                    }
                    _ => {}
                }
            }
        }
        let minus = minus.ok_or_else(|| Error::Topology(format!("cut vertex {v} has no adjacent cut face")))?;
        for (a, &t) in star.iter().enumerate() {
            if comp[a] == minus {
                let k = s.mesh.tets[t].iter().position(|&x| x == v).unwrap();
                dup[t][k] = true;
            }
        }
    }
    // L psi = -P^T L_cut d
    let mut rhs = vec![0.0; s.nv()];
    for t in 0..nt {
        let g = &s.grad[t];
        let tet = s.mesh.tets[t];
        for k in 0..4 {
            for l in 0..4 {
                if dup[t][l] {
                    rhs[tet[k]] -= s.vol[t] * dot(g[k], g[l]);
                }
            }
        }
    }
    center(&mut rhs);
    let p1 = s.p1();
    let psi = solve_with_dirichlet(&p1.stiffness(None), &rhs, &vec![false; s.nv()], &[], &p1.weights, TOL)?;
    let mut grads = Vec::with_capacity(nt);
    let mut edge = vec![0.0; s.ne()];
    for t in 0..nt {
        let tet = s.mesh.tets[t];
        let val: [f64; 4] = [0, 1, 2, 3].map(|k| psi[tet[k]] + if dup[t][k] { 1.0 } else { 0.0 });
        let mut g = [0.0; 3];
        for k in 0..4 {
            g = axpy(val[k], s.grad[t][k], g);
        }
        grads.push(g);
        for (k, &(a, b)) in crate::fem::LOCAL_EDGES.iter().enumerate() {
            edge[s.tet_edges[t][k]] = s.tet_edge_sign[t][k] * (val[b] - val[a]);
        }
    }
    Ok((grads, edge))
}

/// Basis of `H1` as edge fields built from cut potentials, orthonormalized.
pub fn compute_neumann_fields(s: &FemSpaces) -> Result<Vec<Vec<f64>>> {
    let raw = s
        .mesh
        .cut_surfaces
        .iter()
        .map(|c| cut_potential(s, c).map(|(_, e)| e))
        .collect::<Result<Vec<_>>>()?;
    orthonormalize_edges(s, raw)
}

/// Modified Gram-Schmidt in the edge mass inner product.
pub fn orthonormalize_edges(s: &FemSpaces, mut v: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let me = s.edge_mass(crate::fem::Coeff::One);
    for i in 0..v.len() {
        for j in 0..i {
            let c = crate::vec3::vdot(&me.matvec(&v[i]), &v[j]);
            let vj = v[j].clone();
            crate::vec3::vaxpy(-c, &vj, &mut v[i]);
        }
        let n = crate::vec3::vdot(&me.matvec(&v[i]), &v[i]).sqrt();
        if !(n > 1e-12) {
            return Err(Error::solver("harmonic basis is rank deficient", vec![n]));
        }
        v[i].iter_mut().for_each(|x| *x /= n);
    }
    Ok(v)
}

/// Modified Gram-Schmidt for piecewise constant fields.
pub fn orthonormalize_p0(s: &FemSpaces, mut v: Vec<Vec<V3>>) -> Result<Vec<Vec<V3>>> {
    for i in 0..v.len() {
        for j in 0..i {
            let c = s.p0_inner(&v[i], &v[j]);
            let vj = v[j].clone();
            for (a, b) in v[i].iter_mut().zip(&vj) {
                *a = axpy(-c, *b, *a);
            }
        }
        let n = s.p0_norm(&v[i]);
        if !(n > 1e-12) {
            return Err(Error::solver("harmonic basis is rank deficient", vec![n]));
        }
        v[i].iter_mut().for_each(|a| *a = scale(1.0 / n, *a));
    }
    Ok(v)
}

/// Remove the nonconforming gradient part: `u - grad_NC chi` with `chi` in CR
/// (Neumann) or CR with zero boundary values (`dirichlet`).
pub fn remove_cr_gradient(s: &FemSpaces, u: &[V3], dirichlet: bool) -> Result<Vec<V3>> {
    let cr = s.cr();
    let q = crate::fem::QField::from_p0(u);
    let mut b = s.grad_load(&cr, &q);
    if !dirichlet {
        center(&mut b);
    }
    let fixed = if dirichlet { cr.boundary.clone() } else { vec![false; cr.ndof] };
    let chi = solve_with_dirichlet(&cr.stiffness(None), &b, &fixed, &vec![0.0; cr.ndof], &cr.weights, TOL)?;
    let g = s.scalar_grad_tet(&cr, &chi);
    Ok(u.iter().zip(&g).map(|(a, b)| sub(*a, *b)).collect())
}

pub fn compute_harmonic_basis(s: &FemSpaces) -> Result<HarmonicBasis> {
    let cuts = s
        .mesh
        .cut_surfaces
        .iter()
        .map(|c| cut_potential(s, c))
        .collect::<Result<Vec<_>>>()?;
    let h1_edge = orthonormalize_edges(s, cuts.iter().map(|c| c.1.clone()).collect())?;
    let h1 = orthonormalize_p0(
        s,
        cuts.iter().map(|c| remove_cr_gradient(s, &c.0, false)).collect::<Result<_>>()?,
    )?;
    let etas = harmonic_potentials(s)?;
    let h2_edge = orthonormalize_edges(s, etas.iter().map(|e| s.grad_of(e)).collect())?;
    let p1 = s.p1();
    let h2 = orthonormalize_p0(
        s,
        etas.iter()
            .map(|e| remove_cr_gradient(s, &s.scalar_grad_tet(&p1, e), true))
            .collect::<Result<_>>()?,
    )?;
    let me = s.edge_mass(crate::fem::Coeff::One);
    let mut gram: f64 = 0.0;
    for set in [&h1_edge, &h2_edge] {
        for (i, a) in set.iter().enumerate() {
            let ma = me.matvec(a);
            for (j, b) in set.iter().enumerate() {
                let d = if i == j { 1.0 } else { 0.0 };
                gram = gram.max((crate::vec3::vdot(&ma, b) - d).abs());
            }
        }
    }
    for set in [&h1, &h2] {
        for (i, a) in set.iter().enumerate() {
            for (j, b) in set.iter().enumerate() {
                let d = if i == j { 1.0 } else { 0.0 };
                gram = gram.max((s.p0_inner(a, b) - d).abs());
            }
        }
    }
    let mut cross: f64 = 0.0;
    for e in &h1_edge {
        let me_e = me.matvec(e);
        for y in &h2_edge {
            cross = cross.max(crate::vec3::vdot(&me_e, y).abs());
        }
    }
    for e in &h1 {
        for y in &h2 {
            cross = cross.max(s.p0_inner(e, y).abs());
        }
    }
    Ok(HarmonicBasis { h1_edge, h2_edge, h1, h2, gram_residual: gram, cross_residual: cross })
}

/// Residuals of the defining properties of an edge field.
///
/// The curl tolerance is `1e-10`, the weak divergence tolerance `1e-8 |u|`
/// and the boundary trace tolerance `10 h |u|`.
pub fn verify_harmonic(s: &FemSpaces, u: &[f64], kind: HarmonicKind) -> Result<HarmonicReport> {
    let norm = crate::vec3::vdot(&s.edge_mass(crate::fem::Coeff::One).matvec(u), u).max(0.0).sqrt();
    let curl = s.p0_norm(&s.curl_tet(u));
    let q = s.edge_to_q(u);
    let p1 = s.p1();
    let mut r = s.grad_load(&p1, &q);
    let div = match kind {
        HarmonicKind::H2 => s.div_residual(&q)?,
        HarmonicKind::H1 => {
            center(&mut r);
            let x = solve_with_dirichlet(&p1.stiffness(None), &r, &vec![false; s.nv()], &[], &p1.weights, TOL)?;
            crate::vec3::vdot(&x, &r).max(0.0).sqrt()
        }
    };
    let trace = match kind {
        HarmonicKind::H1 => {
            let mut acc = 0.0;
            for f in s.boundary_faces() {
                let t = s.face_tets[f][0];
                let opp = s.tet_faces[t].iter().position(|&x| x == f).unwrap();
                let mut l = [1.0 / 3.0; 4];
                l[opp] = 0.0;
                let un = dot(s.edge_eval(u, t, &l), s.face_normal[f]);
                acc += s.face_area[f] * un * un;
            }
            acc.sqrt()
        }
        HarmonicKind::H2 => {
            let ub: Vec<f64> = u.iter().zip(&s.bnd_edge).map(|(x, &b)| if b { *x } else { 0.0 }).collect();
            crate::vec3::vdot(&s.edge_mass(crate::fem::Coeff::One).matvec(&ub), &ub).max(0.0).sqrt()
        }
    };
    let tol_curl = 1e-10;
    let tol_div = 1e-8 * norm;
    let tol_trace = 10.0 * s.mesh.h() * norm;
    let pass = curl <= tol_curl && div <= tol_div && trace <= tol_trace;
    Ok(HarmonicReport { curl, div, trace, tol_curl, tol_div, tol_trace, pass })
}

/// Largest discrete `H^1 / L^2` norm ratio over the fields; gradients are
/// taken of the volume-weighted nodal average.
pub fn estimate_embedding_constant(s: &FemSpaces, fields: &[Vec<V3>]) -> Result<f64> {
    if fields.is_empty() {
        return Err(Error::Undefined("embedding constant of an empty basis".into()));
    }
    let p1 = s.p1();
    let mut best: f64 = 0.0;
    for u in fields {
        let mut nodal = vec![[0.0; 3]; s.nv()];
        for (t, tet) in s.mesh.tets.iter().enumerate() {
            for &v in tet {
                nodal[v] = axpy(s.vol[t], u[t], nodal[v]);
            }
        }
        for (n, w) in nodal.iter_mut().zip(&p1.weights) {
            *n = scale(0.25 / w, *n);
        }
        let mut h1 = 0.0;
        for (t, tet) in s.mesh.tets.iter().enumerate() {
            for c in 0..3 {
                let mut g = [0.0; 3];
                for k in 0..4 {
                    g = axpy(nodal[tet[k]][c], s.grad[t][k], g);
                }
                h1 += s.vol[t] * dot(g, g);
            }
        }
        let l2 = s.p0_inner(u, u);
        if !(l2 > 0.0) {
            return Err(Error::Undefined("zero field in embedding estimate".into()));
        }
        best = best.max(((l2 + h1) / l2).sqrt());
    }
    Ok(best)
}
