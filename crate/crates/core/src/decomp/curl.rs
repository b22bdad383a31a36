//! Constrained curl-curl solves on the edge space.
//!
//! `K x = F` is solved on the gauge space (tangential-zero or natural) with
//! weak divergence `G^T M_e x = 0` and orthogonality to the harmonic kernel.
//! The divergence constraint is handled by Hodge augmentation
//! `K + B D^-1 B^T`, `B = M_e G`, `D` the lumped nodal mass; the right-hand
//! side is first made compatible by removing `B p` with `L p = G^T F`.

use crate::fem::{pcg, solve_csr, Coeff, Csr, FemSpaces, NONE};
use crate::vec3::{vaxpy, vdot};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    /// Edge fields vanishing tangentially on the boundary; kernel `H2`.
    TangentialZero,
    /// All edge fields; kernel `H1`.
    NormalZero,
}

#[derive(Debug, Clone)]
pub struct CurlSystem {
    pub gauge: Gauge,
    pub free_edges: Vec<usize>,
    pub free_nodes: Vec<usize>,
    emap: Vec<usize>,
    /// `(M_e G)` on free edges x free nodes.
    b: Csr,
    bt: Csr,
    dinv: Vec<f64>,
    /// `G^T` on free nodes x free edges.
    gt: Csr,
    lap: Csr,
    kc: Csr,
    nv: usize,
    /// Harmonic kernel as full edge vectors, M_e-orthonormal, with `M_e y`.
    kernel: Vec<(Vec<f64>, Vec<f64>)>,
    me: Csr,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct CurlSolve {
    /// Full edge vector.
    pub x: Vec<f64>,
    /// Nodal multiplier, full length, zero off the free nodes.
    pub p: Vec<f64>,
    pub history: Vec<f64>,
}

impl CurlSystem {
    pub fn new(s: &FemSpaces, gauge: Gauge, kernel: &[Vec<f64>]) -> Result<Self> {
        let (free_edges, free_nodes) = match gauge {
            Gauge::TangentialZero => (s.interior_edges(), s.interior_vertices()),
            Gauge::NormalZero => ((0..s.ne()).collect(), (0..s.nv()).collect()),
        };
        let mut emap = vec![NONE; s.ne()];
        for (i, &e) in free_edges.iter().enumerate() {
            emap[e] = i;
        }
        let me = s.edge_mass(Coeff::One);
        let b = me.matmul(&s.grad_op).submatrix(&free_edges, &free_nodes);
        let lump = s.nodal_lumped_mass();
        let kc = s.curl_curl(Coeff::One);
        let lap = s.p1().stiffness(None).submatrix(&free_nodes, &free_nodes);
        let kernel = kernel.iter().map(|y| (y.clone(), me.matvec(y))).collect();
        let mut sys = CurlSystem {
            gauge,
            bt: b.transpose(),
            b,
            gt: s.grad_op.submatrix(&free_edges, &free_nodes).transpose(),
            nv: s.nv(),
            dinv: free_nodes.iter().map(|&v| 1.0 / lump[v]).collect(),
            lap,
            kc: kc.submatrix(&free_edges, &free_edges),
            kernel,
            me,
            free_edges,
            free_nodes,
            emap,
            tol: 1e-11,
        };
        sys.rescale();
        Ok(sys)
    }

    /// Scale the augmentation so its diagonal matches the curl-curl diagonal.
    fn rescale(&mut self) {
        let dk: f64 = self.kc.diagonal().iter().sum();
        let da: f64 = self.aug_diag().iter().sum();
        if da > 0.0 && dk > 0.0 {
            let f = dk / da;
            self.dinv.iter_mut().for_each(|d| *d *= f);
        }
    }

    fn aug_diag(&self) -> Vec<f64> {
        (0..self.b.nrows).map(|i| self.b.row(i).map(|(j, v)| v * v * self.dinv[j]).sum()).collect()
    }

    pub fn edge_mass(&self) -> &Csr {
        &self.me
    }

    pub fn nfree(&self) -> usize {
        self.free_edges.len()
    }

    /// Restrict a full edge vector to the free edges.
    pub fn restrict(&self, f: &[f64]) -> Vec<f64> {
        self.free_edges.iter().map(|&e| f[e]).collect()
    }

    pub fn extend(&self, xf: &[f64], ne: usize) -> Vec<f64> {
        let mut x = vec![0.0; ne];
        for (i, &e) in self.free_edges.iter().enumerate() {
            x[e] = xf[i];
        }
        x
    }

    pub fn is_free(&self, e: usize) -> bool {
        self.emap[e] != NONE
    }

    /// Project a full edge vector M_e-orthogonally off the harmonic kernel.
    pub fn deflate(&self, x: &mut [f64]) {
        for (y, my) in &self.kernel {
            let c = vdot(my, x);
            vaxpy(-c, y, x);
        }
    }

    /// Curl-curl matrix on the free edges for a per-tet tensor weight.
    pub fn weighted(&self, s: &FemSpaces, w: &[crate::fem::Mat3]) -> Csr {
        s.curl_curl(Coeff::Tensor(w)).submatrix(&self.free_edges, &self.free_edges)
    }

    /// Solve with the unweighted operator.
    pub fn solve(&self, f: &[f64]) -> Result<CurlSolve> {
        self.solve_with(None, f, None)
    }

    /// Solve `K x = F` where `f` is a full edge load; `k` overrides the
    /// curl-curl matrix (free-edge block) and `x0` gives a starting guess.
    pub fn solve_with(&self, k: Option<&Csr>, f: &[f64], x0: Option<&[f64]>) -> Result<CurlSolve> {
        let ne = self.emap.len();
        if f.len() != ne {
            return Err(Error::Dimension(format!("load has {} entries for {} edges", f.len(), ne)));
        }
        let k = k.unwrap_or(&self.kc);
        let mut ff = self.restrict(f);
        // remove the gradient part of the load
        let mut gtf = self.gt.matvec(&ff);
        let p = if self.free_nodes.is_empty() || vdot(&gtf, &gtf) == 0.0 {
            vec![0.0; self.free_nodes.len()]
        } else if self.gauge == Gauge::NormalZero {
            crate::fem::center(&mut gtf);
            let w: Vec<f64> = self.dinv.iter().map(|d| 1.0 / d).collect();
            solve_csr(&self.lap, &gtf, 0.1 * self.tol, Some(&w))?.x
        } else {
            solve_csr(&self.lap, &gtf, 0.1 * self.tol, None)?.x
        };
        let bp = self.b.matvec(&p);
        for (a, b) in ff.iter_mut().zip(&bp) {
            *a -= b;
        }
        // remove the harmonic part
        for (y, my) in &self.kernel {
            let c = vdot(&self.restrict(y), &ff);
            vaxpy(-c, &self.restrict(my), &mut ff);
        }
        let mut diag = k.diagonal();
        for (d, a) in diag.iter_mut().zip(self.aug_diag()) {
            *d += a;
        }
        let apply = |x: &[f64], y: &mut [f64]| {
            k.matvec_into(x, y);
            let mut t = self.bt.matvec(x);
            for (ti, di) in t.iter_mut().zip(&self.dinv) {
                *ti *= di;
            }
            let a = self.b.matvec(&t);
            for (yi, ai) in y.iter_mut().zip(&a) {
                *yi += ai;
            }
        };
        let x0f = x0.map(|x| self.restrict(x));
        let out = pcg(&apply, &diag, &ff, x0f.as_deref(), self.tol, 20 * self.nfree() + 200, None).map_err(|e| match e {
            Error::Solver { history, .. } => Error::solver("curl-curl system", history),
            e => e,
        })?;
        let mut x = self.extend(&out.x, ne);
        self.deflate(&mut x);
        let mut pfull = vec![0.0; self.nv];
        for (i, &v) in self.free_nodes.iter().enumerate() {
            pfull[v] = p[i];
        }
        Ok(CurlSolve { x, p: pfull, history: out.history })
    }
}
