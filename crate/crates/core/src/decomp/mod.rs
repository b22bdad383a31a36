//! L2 decompositions, the projections `P_nu` and `P_n`, vector potentials and
//! divergence-free extensions.
//!
//! Piecewise constant fields split exactly as
//! `curl V0 + grad_NC CR + H1` and `curl V + grad_NC CR0 + H2`, where `V`, `V0`
//! are the edge spaces without and with zero tangential trace and `CR`, `CR0`
//! the Crouzeix-Raviart spaces.

mod curl;

pub use curl::{CurlSolve, CurlSystem, Gauge};

use crate::fem::{center, solve_with_dirichlet, Coeff, Csr, FemSpaces, QField, ScalarSpace};
use crate::harmonic::{compute_harmonic_basis, HarmonicBasis};
use crate::mesh::Mesh;
use crate::vec3::{add, axpy, dot, sub, vdot, V3};
use crate::{Error, Result};

pub(crate) const STOL: f64 = 1e-12;

/// Everything assembled once per mesh.
#[derive(Debug, Clone)]
pub struct Context {
    pub s: FemSpaces,
    pub basis: HarmonicBasis,
    pub p1: ScalarSpace,
    pub cr: ScalarSpace,
    pub k_p1: Csr,
    pub k_cr: Csr,
    pub me: Csr,
    pub tangential: CurlSystem,
    pub normal: CurlSystem,
}

impl Context {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let s = FemSpaces::new(mesh)?;
        let basis = compute_harmonic_basis(&s)?;
        let p1 = s.p1();
        let cr = s.cr();
        Ok(Context {
            k_p1: p1.stiffness(None),
            k_cr: cr.stiffness(None),
            me: s.edge_mass(Coeff::One),
            tangential: CurlSystem::new(&s, Gauge::TangentialZero, &basis.h2_edge)?,
            normal: CurlSystem::new(&s, Gauge::NormalZero, &basis.h1_edge)?,
            p1,
            cr,
            basis,
            s,
        })
    }

    pub fn system(&self, g: Gauge) -> &CurlSystem {
        match g {
            Gauge::TangentialZero => &self.tangential,
            Gauge::NormalZero => &self.normal,
        }
    }

    pub fn p0_of(&self, q: &QField) -> Vec<V3> {
        (0..self.s.nt()).map(|t| q.tet_mean(t)).collect()
    }

    pub fn edge_p0(&self, x: &[f64]) -> Vec<V3> {
        self.p0_of(&self.s.edge_to_q(x))
    }

    /// `M_e`-inner product of edge fields.
    pub fn edge_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        vdot(&self.me.matvec(a), b)
    }

    /// Neumann P1 solve `int grad phi . grad eta = b(eta)`, mean-zero.
    pub fn p1_neumann(&self, mut b: Vec<f64>) -> Result<Vec<f64>> {
        center(&mut b);
        solve_with_dirichlet(&self.k_p1, &b, &vec![false; self.s.nv()], &[], &self.p1.weights, STOL)
    }

    /// Crouzeix-Raviart solve, Neumann (mean-zero) or with zero boundary values.
    pub fn cr_solve(&self, mut b: Vec<f64>, dirichlet: bool) -> Result<Vec<f64>> {
        let nf = self.s.nf();
        if dirichlet {
            solve_with_dirichlet(&self.k_cr, &b, &self.cr.boundary, &vec![0.0; nf], &self.cr.weights, STOL)
        } else {
            center(&mut b);
            solve_with_dirichlet(&self.k_cr, &b, &vec![false; nf], &[], &self.cr.weights, STOL)
        }
    }

    /// Boundary functional `g(w) = int_dOmega (nu x H) . w` on every edge.
    pub fn tangential_pairing(&self, h: impl Fn(V3) -> V3) -> Vec<f64> {
        self.tangential_pairing_n(|x, _| h(x))
    }

    /// As [`Context::tangential_pairing`] for data `H(x, nu)` that may depend
    /// on the outward normal.
    pub fn tangential_pairing_n(&self, h: impl Fn(V3, V3) -> V3) -> Vec<f64> {
        let s = &self.s;
        let mut g = vec![0.0; s.ne()];
        for f in s.boundary_faces() {
            let t = s.face_tets[f][0];
            let opp = s.tet_faces[t].iter().position(|&x| x == f).unwrap();
            let n = s.face_normal[f];
            let tet = s.mesh.tets[t];
            // edge-midpoint rule on the face
            let fl: Vec<usize> = (0..4).filter(|&k| k != opp).collect();
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                let mut l = [0.0; 4];
                l[fl[a]] = 0.5;
                l[fl[b]] = 0.5;
                let mut x = [0.0; 3];
                for k in 0..4 {
                    x = axpy(l[k], s.mesh.vertices[tet[k]], x);
                }
                let nh = crate::vec3::cross(n, h(x, n));
                let w = s.face_area[f] / 3.0;
                for k in 0..6 {
                    let e = s.tet_edges[t][k];
                    if s.bnd_edge[e] {
                        g[e] += w * s.tet_edge_sign[t][k] * dot(nh, s.whitney_local(t, k, &l));
                    }
                }
            }
        }
        g
    }
}

/// Result of a projection `w + grad phi`.
#[derive(Debug, Clone)]
pub struct Projection {
    pub field: QField,
    /// Mean-zero P1 potential.
    pub potential: Vec<f64>,
}

/// `P_nu[w] = w + grad phi` with `-div grad phi = div w`, `d phi/d nu = -nu . w`.
pub fn project_pnu(ctx: &Context, w: &QField) -> Result<Projection> {
    let b: Vec<f64> = ctx.s.grad_load(&ctx.p1, w).iter().map(|v| -v).collect();
    let phi = ctx.p1_neumann(b)?;
    let g = ctx.s.scalar_grad_q(&ctx.p1, &phi);
    Ok(Projection { field: w.add(&g), potential: phi })
}

/// Compatibility margins of a curl-trace functional on P1: total and per inner
/// component against the harmonic potentials.
pub fn curl_trace_margins(ctx: &Context, ct: &[f64]) -> Result<Vec<f64>> {
    let etas = crate::harmonic::harmonic_potentials(&ctx.s)?;
    let mut m = vec![ct.iter().sum::<f64>()];
    for eta in &etas {
        m.push(vdot(ct, eta));
    }
    Ok(m)
}

/// Curl-trace functional `eta -> <nu . curl H_T, eta>` of a boundary field,
/// evaluated as `int (nu x H) . grad eta`.
pub fn curl_trace_of(ctx: &Context, h: impl Fn(V3) -> V3) -> Vec<f64> {
    ctx.s.grad_op.tmatvec(&ctx.tangential_pairing(h))
}

/// `P_n[w] = w + grad psi` with Neumann datum `nu . curl H_T - nu . w`, the
/// first given as a P1 functional `ct`.
pub fn project_pn(ctx: &Context, w: &QField, ct: &[f64]) -> Result<Projection> {
    if ct.len() != ctx.s.nv() {
        return Err(Error::Dimension("curl trace must be a nodal functional".into()));
    }
    let scale = ct.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    for (j, m) in curl_trace_margins(ctx, ct)?.into_iter().enumerate() {
        if m.abs() > 1e-9 * scale {
            let condition = if j == 0 { "curl trace total".to_string() } else { format!("curl trace on Gamma_{j}") };
            return Err(Error::Compatibility { condition, margin: m });
        }
    }
    let b: Vec<f64> = ctx.s.grad_load(&ctx.p1, w).iter().zip(ct).map(|(v, c)| c - v).collect();
    let psi = ctx.p1_neumann(b)?;
    let g = ctx.s.scalar_grad_q(&ctx.p1, &psi);
    Ok(Projection { field: w.add(&g), potential: psi })
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Curl part with its edge potential.
    pub curl_part: Vec<V3>,
    pub potential: Vec<f64>,
    pub harmonic: Vec<V3>,
    pub harmonic_coeffs: Vec<f64>,
    pub gradient: Vec<V3>,
    /// CR potential of the gradient part.
    pub scalar: Vec<f64>,
    /// `|w - sum parts| / |w|`.
    pub residual: f64,
    /// Largest pairwise `|(a, b)| / |w|^2`.
    pub orthogonality: f64,
}

/// `w = curl a + H1 part + grad_NC chi` with `a` tangential-zero, `chi` in CR.
pub fn helmholtz_type1(ctx: &Context, w: &[V3]) -> Result<Decomposition> {
    decompose(ctx, w, Gauge::TangentialZero)
}

/// `w = curl a + H2 part + grad_NC chi` with `chi` zero on the boundary.
pub fn helmholtz_type2(ctx: &Context, w: &[V3]) -> Result<Decomposition> {
    decompose(ctx, w, Gauge::NormalZero)
}

fn decompose(ctx: &Context, w: &[V3], gauge: Gauge) -> Result<Decomposition> {
    let s = &ctx.s;
    if w.len() != s.nt() {
        return Err(Error::Dimension(format!("{} values for {} tetrahedra", w.len(), s.nt())));
    }
    let q = QField::from_p0(w);
    let a = ctx.system(gauge).solve(&s.curl_load(&q))?.x;
    let curl_part = s.curl_tet(&a);
    let dirichlet = gauge == Gauge::NormalZero;
    let chi = ctx.cr_solve(s.grad_load(&ctx.cr, &q), dirichlet)?;
    let gradient = s.scalar_grad_tet(&ctx.cr, &chi);
    let hb = if dirichlet { &ctx.basis.h2 } else { &ctx.basis.h1 };
    let harmonic_coeffs: Vec<f64> = hb.iter().map(|h| s.p0_inner(w, h)).collect();
    let harmonic = crate::harmonic::combine(hb, &harmonic_coeffs, s.nt());
    let rest: Vec<V3> = (0..s.nt())
        .map(|t| sub(w[t], add(add(curl_part[t], harmonic[t]), gradient[t])))
        .collect();
    let nw2 = s.p0_inner(w, w).max(1e-300);
    let residual = (s.p0_inner(&rest, &rest) / nw2).sqrt();
    let orthogonality = [
        s.p0_inner(&curl_part, &harmonic),
        s.p0_inner(&curl_part, &gradient),
        s.p0_inner(&harmonic, &gradient),
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(v.abs() / nw2));
    Ok(Decomposition { curl_part, potential: a, harmonic, harmonic_coeffs, gradient, scalar: chi, residual, orthogonality })
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub u: Vec<f64>,
    /// `|curl u - Z| / |Z|`.
    pub residual: f64,
    pub multiplier: Vec<f64>,
}

/// Relative membership tolerance for [`vector_potential`].
pub const IMAGE_TOL: f64 = 1e-6;

/// Edge field `u` in the gauge space with `curl u = Z`, weakly divergence-free
/// and orthogonal to the gauge's harmonic kernel.
pub fn vector_potential(ctx: &Context, z: &[V3], gauge: Gauge) -> Result<Potential> {
    let s = &ctx.s;
    let nz = s.p0_norm(z);
    if nz == 0.0 {
        return Ok(Potential { u: vec![0.0; s.ne()], residual: 0.0, multiplier: vec![0.0; s.nv()] });
    }
    let sol = ctx.system(gauge).solve(&s.curl_load(&QField::from_p0(z)))?;
    let c = s.curl_tet(&sol.x);
    let d: Vec<V3> = c.iter().zip(z).map(|(a, b)| sub(*a, *b)).collect();
    let residual = s.p0_norm(&d) / nz;
    if residual > IMAGE_TOL {
        let space = match gauge {
            Gauge::TangentialZero => "curl of tangential-zero fields (zero normal trace and cut fluxes)",
            Gauge::NormalZero => "curl of edge fields (zero flux through every boundary component)",
        };
        return Err(Error::ImageSpace(format!("field is not in the {space}: relative defect {residual:.3e}")));
    }
    Ok(Potential { u: sol.x, residual, multiplier: sol.p })
}

#[derive(Debug, Clone)]
pub struct Extension {
    /// Edge field with the prescribed boundary coefficients.
    pub u: Vec<f64>,
    /// Its piecewise constant curl.
    pub b: Vec<V3>,
}

/// Curl-energy minimizing, weakly divergence-free edge field with prescribed
/// tangential boundary coefficients (entries on interior edges must be zero).
pub fn divfree_extension(ctx: &Context, boundary: &[f64]) -> Result<Extension> {
    let s = &ctx.s;
    if boundary.len() != s.ne() {
        return Err(Error::Dimension(format!("{} edge values for {} edges", boundary.len(), s.ne())));
    }
    for (e, v) in boundary.iter().enumerate() {
        if !v.is_finite() || (!s.bnd_edge[e] && *v != 0.0) {
            return Err(Error::Trace(format!("edge {e} carries invalid trace data {v}")));
        }
    }
    let sys = &ctx.tangential;
    let kx = s.curl_curl(Coeff::One).matvec(boundary);
    let f: Vec<f64> = kx.iter().map(|v| -v).collect();
    let v = sys.solve(&f)?.x;
    let mut u: Vec<f64> = boundary.iter().zip(&v).map(|(a, b)| a + b).collect();
    // weak divergence against interior nodes
    let r = s.grad_op.tmatvec(&ctx.me.matvec(&u));
    let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
    let g = vec![0.0; s.nv()];
    let phi = solve_with_dirichlet(&ctx.k_p1, &rhs, &s.bnd_vertex, &g, &ctx.p1.weights, STOL)?;
    crate::vec3::vaxpy(1.0, &s.grad_of(&phi), &mut u);
    sys.deflate(&mut u);
    let b = s.curl_tet(&u);
    Ok(Extension { u, b })
}

/// Membership defect of a current in the closure of div-free fields with zero
/// flux on every boundary component: weak divergence against interior nodes
/// and the pairings with the `H2` edge fields, relative to `|J|`.
pub fn current_defect(ctx: &Context, j: &QField) -> Result<f64> {
    let s = &ctx.s;
    let nj = s.l2norm(j);
    if nj == 0.0 {
        return Ok(0.0);
    }
    let div = s.div_residual(j)?;
    let mut acc = div * div;
    for y in &ctx.basis.h2_edge {
        let c = s.inner(j, &s.edge_to_q(y));
        acc += c * c;
    }
    Ok(acc.sqrt() / nj)
}
