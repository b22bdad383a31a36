//! Discrete spaces on a tetrahedral mesh: P1 nodal, lowest-order Nedelec
//! edge elements, Crouzeix-Raviart, and piecewise data at quadrature points.

use std::collections::HashMap;

use crate::mesh::{sorted3, Mesh};
use crate::vec3::{add, cross, dot, norm, scale, sub, V3};
use crate::{Error, Result};

use super::sparse::{Csr, Triplets};

pub type Mat3 = [[f64; 3]; 3];

/// Local edges of a tetrahedron as pairs of local vertex indices.
pub const LOCAL_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Barycentric weights of the symmetric 4-point rule (degree 2).
pub const QA: f64 = 0.5854101966249685;
pub const QB: f64 = 0.1381966011250105;

pub const NONE: usize = usize::MAX;

/// Vector data sampled at the four quadrature points of every tetrahedron.
/// Index `4 * t + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct QField {
    pub values: Vec<V3>,
}

impl QField {
    pub fn zeros(ntets: usize) -> Self {
        QField { values: vec![[0.0; 3]; 4 * ntets] }
    }

    /// Piecewise constant data, one vector per tetrahedron.
    pub fn from_p0(per_tet: &[V3]) -> Self {
        let mut values = Vec::with_capacity(4 * per_tet.len());
        for v in per_tet {
            values.extend_from_slice(&[*v; 4]);
        }
        QField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn add(&self, o: &QField) -> QField {
        QField { values: self.values.iter().zip(&o.values).map(|(a, b)| add(*a, *b)).collect() }
    }

    pub fn sub(&self, o: &QField) -> QField {
        QField { values: self.values.iter().zip(&o.values).map(|(a, b)| sub(*a, *b)).collect() }
    }

    pub fn scale(&self, s: f64) -> QField {
        QField { values: self.values.iter().map(|a| scale(s, *a)).collect() }
    }

    /// `self += s * o`
    pub fn axpy(&mut self, s: f64, o: &QField) {
        for (a, b) in self.values.iter_mut().zip(&o.values) {
            *a = crate::vec3::axpy(s, *b, *a);
        }
    }

    /// Per-tetrahedron average.
    pub fn tet_mean(&self, t: usize) -> V3 {
        let v = &self.values[4 * t..4 * t + 4];
        scale(0.25, add(add(v[0], v[1]), add(v[2], v[3])))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(norm(*v)))
    }
}

/// Tag naming the space a coefficient vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    P1,
    Nedelec,
    CrouzeixRaviart,
    Quadrature,
}

/// A coefficient vector tagged with its space. Quadrature data is stored
/// flattened, three components per point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub space: SpaceTag,
    pub coeffs: Vec<f64>,
    /// Degrees of freedom fixed to zero, if any.
    pub mask: Option<Vec<bool>>,
}

impl FieldVector {
    pub fn new(space: SpaceTag, coeffs: Vec<f64>) -> Self {
        FieldVector { space, coeffs, mask: None }
    }

    pub fn from_qfield(q: &QField) -> Self {
        FieldVector::new(SpaceTag::Quadrature, q.values.iter().flatten().copied().collect())
    }

    pub fn to_qfield(&self) -> Result<QField> {
        if self.space != SpaceTag::Quadrature || self.coeffs.len() % 3 != 0 {
            return Err(Error::Dimension("field is not quadrature data".into()));
        }
        Ok(QField { values: self.coeffs.chunks(3).map(|c| [c[0], c[1], c[2]]).collect() })
    }
}

/// Which scalar element a [`ScalarSpace`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    P1,
    Cr,
}

/// A scalar finite element space with piecewise constant gradients.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub kind: ScalarKind,
    pub ndof: usize,
    pub tet_dofs: Vec<[usize; 4]>,
    pub grads: Vec<[V3; 4]>,
    pub vol: Vec<f64>,
    pub boundary: Vec<bool>,
    /// `int phi_i` over the domain.
    pub weights: Vec<f64>,
}

/// Mesh connectivity and geometry for all discrete spaces.
#[derive(Debug, Clone)]
pub struct FemSpaces {
    pub mesh: Mesh,
    pub vol: Vec<f64>,
    /// Gradients of the barycentric coordinates.
    pub grad: Vec<[V3; 4]>,
    /// Global edges, oriented from the lower to the higher vertex index.
    pub edges: Vec<[usize; 2]>,
    pub tet_edges: Vec<[usize; 6]>,
    pub tet_edge_sign: Vec<[f64; 6]>,
    /// Global faces as sorted vertex triples.
    pub faces: Vec<[usize; 3]>,
    /// Face opposite each local vertex.
    pub tet_faces: Vec<[usize; 4]>,
    pub face_tets: Vec<[usize; 2]>,
    /// Index into `mesh.boundary_faces` for boundary faces.
    pub face_boundary: Vec<Option<usize>>,
    pub face_area: Vec<f64>,
    /// Unit normal; outward on the boundary, right-hand on sorted vertices inside.
    pub face_normal: Vec<V3>,
    pub face_centroid: Vec<V3>,
    pub bnd_vertex: Vec<bool>,
    pub bnd_edge: Vec<bool>,
    /// Boundary label of each vertex, 0 inside.
    pub vertex_label: Vec<usize>,
    /// Discrete gradient, edges x vertices.
    pub grad_op: Csr,
}

impl FemSpaces {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let nt = mesh.num_tets();
        let nv = mesh.num_vertices();
        let p = &mesh.vertices;
        let mut vol = Vec::with_capacity(nt);
        let mut grad = Vec::with_capacity(nt);
        for (t, tet) in mesh.tets.iter().enumerate() {
            let v = mesh.signed_volume(t);
            if v <= 0.0 {
                return Err(Error::Quality(format!("tetrahedron {t} has volume {v:.3e}")));
            }
            let x = tet.map(|i| p[i]);
            let mut g = [[0.0; 3]; 4];
            for (k, gk) in g.iter_mut().enumerate() {
                // gradient of lambda_k is the inward normal of the opposite face over 3 vol
                let o: Vec<usize> = (0..4).filter(|&j| j != k).collect();
                let n = cross(sub(x[o[1]], x[o[0]]), sub(x[o[2]], x[o[0]]));
                let s = if dot(n, sub(x[k], x[o[0]])) > 0.0 { 1.0 } else { -1.0 };
                *gk = scale(s / (6.0 * v), n);
            }
            vol.push(v);
            grad.push(g);
        }

        let mut edge_id: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut tet_edges = Vec::with_capacity(nt);
        let mut tet_edge_sign = Vec::with_capacity(nt);
        let mut face_id: HashMap<[usize; 3], usize> = HashMap::new();
        let mut faces = Vec::new();
        let mut face_tets: Vec<[usize; 2]> = Vec::new();
        let mut tet_faces = Vec::with_capacity(nt);
        for (t, tet) in mesh.tets.iter().enumerate() {
            let mut te = [0; 6];
            let mut ts = [0.0; 6];
            for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                let (ga, gb) = (tet[a], tet[b]);
                let key = [ga.min(gb), ga.max(gb)];
                let id = *edge_id.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() - 1
                });
                te[k] = id;
                ts[k] = if ga < gb { 1.0 } else { -1.0 };
            }
            tet_edges.push(te);
            tet_edge_sign.push(ts);
            let mut tf = [0; 4];
            for (k, f) in tf.iter_mut().enumerate() {
                let o: Vec<usize> = (0..4).filter(|&j| j != k).map(|j| tet[j]).collect();
                let key = sorted3([o[0], o[1], o[2]]);
                let id = *face_id.entry(key).or_insert_with(|| {
                    faces.push(key);
                    face_tets.push([NONE, NONE]);
                    faces.len() - 1
                });
                let slot = &mut face_tets[id];
                if slot[0] == NONE {
                    slot[0] = t;
                } else if slot[1] == NONE {
                    slot[1] = t;
                } else {
                    return Err(Error::Topology(format!("face {key:?} shared by more than two tetrahedra")));
                }
                *f = id;
            }
            tet_faces.push(tf);
        }

        let nf = faces.len();
        let mut face_boundary = vec![None; nf];
        for (i, bf) in mesh.boundary_faces.iter().enumerate() {
            let key = sorted3(bf.verts);
            match face_id.get(&key) {
                Some(&f) if face_tets[f][1] == NONE => face_boundary[f] = Some(i),
                _ => return Err(Error::Topology(format!("boundary face {i} is not an exterior face"))),
            }
        }
        let mut face_area = Vec::with_capacity(nf);
        let mut face_normal = Vec::with_capacity(nf);
        let mut face_centroid = Vec::with_capacity(nf);
        let mut bnd_vertex = vec![false; nv];
        let mut vertex_label = vec![0; nv];
        for (f, key) in faces.iter().enumerate() {
            if face_tets[f][1] == NONE && face_boundary[f].is_none() {
                return Err(Error::Topology(format!("exterior face {key:?} has no boundary label")));
            }
            let verts = match face_boundary[f] {
                Some(i) => mesh.boundary_faces[i].verts,
                None => *key,
            };
            let n = mesh.face_normal(verts);
            let a = 0.5 * norm(n);
            face_area.push(a);
            face_normal.push(scale(0.5 / a, n));
            face_centroid.push(scale(1.0 / 3.0, add(add(p[key[0]], p[key[1]]), p[key[2]])));
            if let Some(i) = face_boundary[f] {
                for &v in key {
                    bnd_vertex[v] = true;
                    vertex_label[v] = mesh.boundary_faces[i].label;
                }
            }
        }
        let mut bnd_edge = vec![false; edges.len()];
        for (f, key) in faces.iter().enumerate() {
            if face_boundary[f].is_some() {
                for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                    bnd_edge[edge_id[&[key[a], key[b]]]] = true;
                }
            }
        }
        let mut g = Triplets::with_capacity(edges.len(), nv, 2 * edges.len());
        for (e, &[a, b]) in edges.iter().enumerate() {
            g.push(e, a, -1.0);
            g.push(e, b, 1.0);
        }
        Ok(FemSpaces {
            mesh: mesh.clone(),
            vol,
            grad,
            edges,
            tet_edges,
            tet_edge_sign,
            faces,
            tet_faces,
            face_tets,
            face_boundary,
            face_area,
            face_normal,
            face_centroid,
            bnd_vertex,
            bnd_edge,
            vertex_label,
            grad_op: g.to_csr(),
        })
    }

    pub fn nv(&self) -> usize {
        self.mesh.num_vertices()
    }
    pub fn ne(&self) -> usize {
        self.edges.len()
    }
    pub fn nf(&self) -> usize {
        self.faces.len()
    }
    pub fn nt(&self) -> usize {
        self.mesh.num_tets()
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        self.face_boundary[f].is_some()
    }

    /// Boundary label of a boundary face.
    pub fn face_label(&self, f: usize) -> Option<usize> {
        self.face_boundary[f].map(|i| self.mesh.boundary_faces[i].label)
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.nv()).filter(|&v| !self.bnd_vertex[v]).collect()
    }

    pub fn interior_edges(&self) -> Vec<usize> {
        (0..self.ne()).filter(|&e| !self.bnd_edge[e]).collect()
    }

    pub fn boundary_faces(&self) -> Vec<usize> {
        (0..self.nf()).filter(|&f| self.is_boundary_face(f)).collect()
    }

    /// Quadrature weight of every point in tetrahedron `t`.
    #[inline]
    pub fn qweight(&self, t: usize) -> f64 {
        0.25 * self.vol[t]
    }

    #[inline]
    pub fn qbary(q: usize) -> [f64; 4] {
        let mut l = [QB; 4];
        l[q] = QA;
        l
    }

    pub fn qpoint(&self, t: usize, q: usize) -> V3 {
        let l = Self::qbary(q);
        let tet = self.mesh.tets[t];
        let mut x = [0.0; 3];
        for k in 0..4 {
            x = crate::vec3::axpy(l[k], self.mesh.vertices[tet[k]], x);
        }
        x
    }

    pub fn tet_centroid(&self, t: usize) -> V3 {
        let tet = self.mesh.tets[t];
        let mut x = [0.0; 3];
        for &v in &tet {
            x = add(x, self.mesh.vertices[v]);
        }
        scale(0.25, x)
    }

    pub fn sample(&self, f: impl Fn(V3) -> V3) -> QField {
        let mut values = Vec::with_capacity(4 * self.nt());
        for t in 0..self.nt() {
            for q in 0..4 {
                values.push(f(self.qpoint(t, q)));
            }
        }
        QField { values }
    }

    pub fn inner(&self, a: &QField, b: &QField) -> f64 {
        let mut s = 0.0;
        for t in 0..self.nt() {
            let mut st = 0.0;
            for q in 0..4 {
                st += dot(a.values[4 * t + q], b.values[4 * t + q]);
            }
            s += self.qweight(t) * st;
        }
        s
    }

    /// L2 inner product of piecewise constant fields.
    pub fn p0_inner(&self, a: &[V3], b: &[V3]) -> f64 {
        a.iter().zip(b).zip(&self.vol).map(|((x, y), v)| v * dot(*x, *y)).sum()
    }

    pub fn p0_norm(&self, a: &[V3]) -> f64 {
        self.p0_inner(a, a).max(0.0).sqrt()
    }

    /// Whitney field of edge coefficients `x` at barycentric point `l` of tet `t`.
    pub fn edge_eval(&self, x: &[f64], t: usize, l: &[f64; 4]) -> V3 {
        let mut u = [0.0; 3];
        for k in 0..6 {
            let c = self.tet_edge_sign[t][k] * x[self.tet_edges[t][k]];
            u = crate::vec3::axpy(c, self.whitney_local(t, k, l), u);
        }
        u
    }

    /// Face id of a vertex triple in any order.
    pub fn face_index(&self) -> HashMap<[usize; 3], usize> {
        self.faces.iter().enumerate().map(|(i, f)| (*f, i)).collect()
    }

    /// Tetrahedra containing each vertex.
    pub fn vertex_tets(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.nv()];
        for (t, tet) in self.mesh.tets.iter().enumerate() {
            for &v in tet {
                vt[v].push(t);
            }
        }
        vt
    }

    pub fn l2norm(&self, a: &QField) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.vol.iter().sum()
    }

    /// Local (unsigned) Whitney function of local edge `k` at barycentric `l`.
    #[inline]
    pub fn whitney_local(&self, t: usize, k: usize, l: &[f64; 4]) -> V3 {
        let (a, b) = LOCAL_EDGES[k];
        let g = &self.grad[t];
        sub(scale(l[a], g[b]), scale(l[b], g[a]))
    }

    /// Curl of local edge function `k` including the orientation sign.
    #[inline]
    pub fn curl_local(&self, t: usize, k: usize) -> V3 {
        let (a, b) = LOCAL_EDGES[k];
        let g = &self.grad[t];
        scale(2.0 * self.tet_edge_sign[t][k], cross(g[a], g[b]))
    }

    pub fn edge_to_q(&self, x: &[f64]) -> QField {
        let mut values = Vec::with_capacity(4 * self.nt());
        for t in 0..self.nt() {
            for q in 0..4 {
                let l = Self::qbary(q);
                let mut u = [0.0; 3];
                for k in 0..6 {
                    let c = self.tet_edge_sign[t][k] * x[self.tet_edges[t][k]];
                    u = crate::vec3::axpy(c, self.whitney_local(t, k, &l), u);
                }
                values.push(u);
            }
        }
        QField { values }
    }

    /// Piecewise constant curl of an edge field.
    pub fn curl_tet(&self, x: &[f64]) -> Vec<V3> {
        (0..self.nt())
            .map(|t| {
                let mut c = [0.0; 3];
                for k in 0..6 {
                    c = crate::vec3::axpy(x[self.tet_edges[t][k]], self.curl_local(t, k), c);
                }
                c
            })
            .collect()
    }

    pub fn curl_to_q(&self, x: &[f64]) -> QField {
        QField::from_p0(&self.curl_tet(x))
    }

    /// Gradient of a scalar field in `space`.
    pub fn scalar_grad_tet(&self, space: &ScalarSpace, phi: &[f64]) -> Vec<V3> {
        (0..self.nt())
            .map(|t| {
                let mut g = [0.0; 3];
                for k in 0..4 {
                    g = crate::vec3::axpy(phi[space.tet_dofs[t][k]], space.grads[t][k], g);
                }
                g
            })
            .collect()
    }

    pub fn scalar_grad_q(&self, space: &ScalarSpace, phi: &[f64]) -> QField {
        QField::from_p0(&self.scalar_grad_tet(space, phi))
    }

    /// `int q . w_e` for every edge.
    pub fn edge_load(&self, qf: &QField) -> Vec<f64> {
        let mut r = vec![0.0; self.ne()];
        for t in 0..self.nt() {
            let w = self.qweight(t);
            for q in 0..4 {
                let l = Self::qbary(q);
                let v = qf.values[4 * t + q];
                for k in 0..6 {
                    r[self.tet_edges[t][k]] += w * self.tet_edge_sign[t][k] * dot(v, self.whitney_local(t, k, &l));
                }
            }
        }
        r
    }

    /// `int q . curl w_e` for every edge.
    pub fn curl_load(&self, qf: &QField) -> Vec<f64> {
        let mut r = vec![0.0; self.ne()];
        for t in 0..self.nt() {
            let m = scale(self.vol[t], qf.tet_mean(t));
            for k in 0..6 {
                r[self.tet_edges[t][k]] += dot(m, self.curl_local(t, k));
            }
        }
        r
    }

    /// `int q . grad phi_i` for every dof of `space`.
    pub fn grad_load(&self, space: &ScalarSpace, qf: &QField) -> Vec<f64> {
        let mut r = vec![0.0; space.ndof];
        for t in 0..self.nt() {
            let m = scale(self.vol[t], qf.tet_mean(t));
            for k in 0..4 {
                r[space.tet_dofs[t][k]] += dot(m, space.grads[t][k]);
            }
        }
        r
    }

    /// Edge degrees of freedom `int_e f . t` by 3-point Gauss quadrature.
    pub fn interpolate_edges(&self, f: impl Fn(V3) -> V3) -> Vec<f64> {
        let s = (0.6f64).sqrt();
        let nodes = [(0.5 * (1.0 - s), 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 * (1.0 + s), 5.0 / 18.0)];
        self.edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.mesh.vertices[a], self.mesh.vertices[b]);
                let d = sub(pb, pa);
                nodes.iter().map(|&(x, w)| w * dot(f(crate::vec3::axpy(x, d, pa)), d)).sum()
            })
            .collect()
    }

    /// Edge-midpoint points of a face, for the degree-2 triangle rule.
    pub fn face_midpoints(&self, f: usize) -> [V3; 3] {
        let [a, b, c] = self.faces[f].map(|i| self.mesh.vertices[i]);
        [scale(0.5, add(a, b)), scale(0.5, add(b, c)), scale(0.5, add(a, c))]
    }

    /// `int_F g` over each boundary face with `g(x, nu)`; interior faces get 0.
    pub fn boundary_face_integrals(&self, g: impl Fn(V3, V3) -> f64) -> Vec<f64> {
        (0..self.nf())
            .map(|f| {
                if !self.is_boundary_face(f) {
                    return 0.0;
                }
                let n = self.face_normal[f];
                let m = self.face_midpoints(f);
                self.face_area[f] * m.iter().map(|&x| g(x, n)).sum::<f64>() / 3.0
            })
            .collect()
    }

    /// P1 space on the mesh vertices.
    pub fn p1(&self) -> ScalarSpace {
        let mut weights = vec![0.0; self.nv()];
        for (t, tet) in self.mesh.tets.iter().enumerate() {
            for &v in tet {
                weights[v] += 0.25 * self.vol[t];
            }
        }
        ScalarSpace {
            kind: ScalarKind::P1,
            ndof: self.nv(),
            tet_dofs: self.mesh.tets.clone(),
            grads: self.grad.clone(),
            vol: self.vol.clone(),
            boundary: self.bnd_vertex.clone(),
            weights,
        }
    }

    /// Crouzeix-Raviart space; the basis function of face `F` is `1 - 3 lambda_k`
    /// with `k` the opposite vertex.
    pub fn cr(&self) -> ScalarSpace {
        let mut weights = vec![0.0; self.nf()];
        let mut grads = Vec::with_capacity(self.nt());
        for t in 0..self.nt() {
            for k in 0..4 {
                weights[self.tet_faces[t][k]] += 0.25 * self.vol[t];
            }
            grads.push(self.grad[t].map(|g| scale(-3.0, g)));
        }
        ScalarSpace {
            kind: ScalarKind::Cr,
            ndof: self.nf(),
            tet_dofs: self.tet_faces.clone(),
            grads,
            vol: self.vol.clone(),
            boundary: (0..self.nf()).map(|f| self.is_boundary_face(f)).collect(),
            weights,
        }
    }

    /// Boundary load `int_dOmega g phi_i` for a scalar space. For CR this is the
    /// face integral; for P1 the degree-2 rule with edge midpoints.
    pub fn boundary_load(&self, space: &ScalarSpace, g: impl Fn(V3, V3) -> f64) -> Vec<f64> {
        match space.kind {
            ScalarKind::Cr => self.boundary_face_integrals(g),
            ScalarKind::P1 => {
                let mut r = vec![0.0; self.nv()];
                for f in self.boundary_faces() {
                    let n = self.face_normal[f];
                    let m = self.face_midpoints(f);
                    let gv = m.map(|x| g(x, n));
                    let [a, b, c] = self.faces[f];
                    let w = self.face_area[f] / 3.0;
                    r[a] += w * 0.5 * (gv[0] + gv[2]);
                    r[b] += w * 0.5 * (gv[0] + gv[1]);
                    r[c] += w * 0.5 * (gv[1] + gv[2]);
                }
                r
            }
        }
    }
}

impl ScalarSpace {
    pub fn free_dofs(&self, dirichlet: bool) -> Vec<usize> {
        (0..self.ndof).filter(|&i| !(dirichlet && self.boundary[i])).collect()
    }

    /// Stiffness `int A grad phi_j . grad phi_i` with optional per-tet tensor.
    pub fn stiffness(&self, coeff: Option<&[Mat3]>) -> Csr {
        let nt = self.tet_dofs.len();
        let mut tr = Triplets::with_capacity(self.ndof, self.ndof, 16 * nt);
        for t in 0..nt {
            let g = &self.grads[t];
            let ag: [V3; 4] = match coeff {
                Some(c) => g.map(|v| mat_vec(&c[t], v)),
                None => *g,
            };
            for i in 0..4 {
                for j in 0..4 {
                    tr.push(self.tet_dofs[t][i], self.tet_dofs[t][j], self.vol[t] * dot(ag[j], g[i]));
                }
            }
        }
        tr.to_csr()
    }

    /// Weighted mean `sum w_i phi_i / sum w_i`.
    pub fn mean(&self, phi: &[f64]) -> f64 {
        crate::vec3::vdot(phi, &self.weights) / self.weights.iter().sum::<f64>()
    }
}

#[inline]
pub fn mat_vec(a: &Mat3, v: V3) -> V3 {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}
