//! Galerkin matrices on the edge and nodal spaces.

use crate::vec3::{dot, V3};

use super::spaces::{mat_vec, FemSpaces, Mat3, LOCAL_EDGES};
use super::sparse::{Csr, Triplets};

/// Per-tetrahedron coefficient for weighted forms.
#[derive(Debug, Clone, Copy)]
pub enum Coeff<'a> {
    One,
    Scalar(&'a [f64]),
    Tensor(&'a [Mat3]),
}

impl Coeff<'_> {
    #[inline]
    fn apply(&self, t: usize, v: V3) -> V3 {
        match self {
            Coeff::One => v,
            Coeff::Scalar(s) => crate::vec3::scale(s[t], v),
            Coeff::Tensor(m) => mat_vec(&m[t], v),
        }
    }
}

#[inline]
fn bary_mass(vol: f64, a: usize, b: usize) -> f64 {
    vol * if a == b { 0.1 } else { 0.05 }
}

impl FemSpaces {
    /// `int A w_j . w_i` on the edge space.
    pub fn edge_mass(&self, coeff: Coeff) -> Csr {
        let mut tr = Triplets::with_capacity(self.ne(), self.ne(), 36 * self.nt());
        for t in 0..self.nt() {
            let g = &self.grad[t];
            let ag: [V3; 4] = [0, 1, 2, 3].map(|k| coeff.apply(t, g[k]));
            let v = self.vol[t];
            for (i, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                for (j, &(c, d)) in LOCAL_EDGES.iter().enumerate() {
                    // (l_a g_b - l_b g_a) . A (l_c g_d - l_d g_c)
                    let m = bary_mass(v, a, c) * dot(g[b], ag[d]) - bary_mass(v, a, d) * dot(g[b], ag[c])
                        - bary_mass(v, b, c) * dot(g[a], ag[d])
                        + bary_mass(v, b, d) * dot(g[a], ag[c]);
                    let s = self.tet_edge_sign[t][i] * self.tet_edge_sign[t][j];
                    tr.push(self.tet_edges[t][i], self.tet_edges[t][j], s * m);
                }
            }
        }
        tr.to_csr()
    }

    /// `int A curl w_j . curl w_i`.
    pub fn curl_curl(&self, coeff: Coeff) -> Csr {
        let mut tr = Triplets::with_capacity(self.ne(), self.ne(), 36 * self.nt());
        for t in 0..self.nt() {
            let c: [V3; 6] = [0, 1, 2, 3, 4, 5].map(|k| self.curl_local(t, k));
            for i in 0..6 {
                for j in 0..6 {
                    let m = self.vol[t] * dot(c[i], coeff.apply(t, c[j]));
                    tr.push(self.tet_edges[t][i], self.tet_edges[t][j], m);
                }
            }
        }
        tr.to_csr()
    }

    /// Consistent P1 mass matrix.
    pub fn nodal_mass(&self) -> Csr {
        let mut tr = Triplets::with_capacity(self.nv(), self.nv(), 16 * self.nt());
        for (t, tet) in self.mesh.tets.iter().enumerate() {
            for a in 0..4 {
                for b in 0..4 {
                    tr.push(tet[a], tet[b], bary_mass(self.vol[t], a, b));
                }
            }
        }
        tr.to_csr()
    }

    /// Row-sum lumped P1 mass.
    pub fn nodal_lumped_mass(&self) -> Vec<f64> {
        self.p1().weights
    }

    /// `M_e G`: `int grad phi_j . w_i`, edges x vertices.
    pub fn grad_coupling(&self) -> Csr {
        self.edge_mass(Coeff::One).matmul(&self.grad_op)
    }
}
