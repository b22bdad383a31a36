//! Dense identity-law oracles for the given-current problems. Each one builds
//! the discrete weak form row by row from the element curls and solves it by
//! SVD least squares, independent of the library's solvers.

use curlforge::decomp::Context;
use curlforge::fem::QField;
use curlforge::vec3::{cross, dot, V3};
use nalgebra::{DMatrix, DVector};

use super::*;

// A = (y^2, z^2, x^2), curl A = -2 (z, x, y), curl curl A = (-2, -2, -2).
pub fn a_quad(x: V3) -> V3 {
    [x[1] * x[1], x[2] * x[2], x[0] * x[0]]
}

// B = (-y, x, 0) with curl B = (0, 0, 2).
pub fn swirl(x: V3) -> V3 {
    [-x[1], x[0], 0.0]
}

/// Rows of the weak curl-curl form for the identity law on the chosen edges,
/// `int (curl u + z) . curl w_e = l_e`, as a dense system in `u`.
pub fn curlcurl_rows(ctx: &Context, edges: &[usize], z: &[V3], l: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let s = &ctx.s;
    let c = curl_dense(s);
    let k = c.transpose() * &c;
    let cz = c.transpose() * p0_rhs(s, z);
    let a = DMatrix::from_fn(edges.len(), s.ne(), |i, j| k[(edges[i], j)]);
    let b = DVector::from_fn(edges.len(), |i, _| l[edges[i]] - cz[edges[i]]);
    (a, b)
}

pub fn h2_field(ctx: &Context, c: &[f64]) -> Vec<V3> {
    let mut out = vec![[0.0; 3]; ctx.s.nt()];
    for (k, f) in ctx.basis.h2.iter().enumerate() {
        for t in 0..ctx.s.nt() {
            for i in 0..3 {
                out[t][i] += c[k] * f[t][i];
            }
        }
    }
    out
}

pub fn h1_load(ctx: &Context, c: &[f64]) -> Vec<f64> {
    let mut f = vec![[0.0; 3]; ctx.s.nt()];
    for (k, h) in ctx.basis.h1.iter().enumerate() {
        for t in 0..ctx.s.nt() {
            for i in 0..3 {
                f[t][i] += c[k] * h[t][i];
            }
        }
    }
    ctx.s.edge_load(&QField::from_p0(&f))
}

pub fn add_p0(a: &[V3], b: &[V3]) -> Vec<V3> {
    a.iter().zip(b).map(|(x, y)| [x[0] + y[0], x[1] + y[1], x[2] + y[2]]).collect()
}

/// Edge interpolant of `f` on boundary edges, zero inside.
pub fn boundary_dofs(c: &Context, f: fn(V3) -> V3) -> Vec<f64> {
    zero_interior(c, c.s.interpolate_edges(f))
}

fn zero_interior(c: &Context, mut u: Vec<f64>) -> Vec<f64> {
    for e in 0..c.s.ne() {
        if !c.s.bnd_edge[e] {
            u[e] = 0.0;
        }
    }
    u
}

/// Identity-law Dirichlet problem: fix the boundary edges and solve the
/// interior curl-curl rows. Returns `curl u + h2`.
pub fn dirichlet_oracle(c: &Context, u0: &[f64], l: &[f64], h2: &[f64]) -> Vec<V3> {
    let s = &c.s;
    let interior: Vec<usize> = (0..s.ne()).filter(|&e| !s.bnd_edge[e]).collect();
    let bnd: Vec<usize> = (0..s.ne()).filter(|&e| s.bnd_edge[e]).collect();
    let z = h2_field(c, h2);
    let (a, b) = curlcurl_rows(c, &interior, &z, l);
    let fix = DMatrix::from_fn(bnd.len(), s.ne(), |i, j| if bnd[i] == j { 1.0 } else { 0.0 });
    let fixb = DVector::from_fn(bnd.len(), |i, _| u0[bnd[i]]);
    let u = lstsq(&vstack(&[a, fix]), &vcat(&[b, fixb]));
    add_p0(&s.curl_tet(u.as_slice()), &z)
}

/// `int_Gamma (nu x B) . w_e` by the edge-midpoint rule on each boundary
/// face, from the Whitney functions of the adjacent tetrahedron.
pub fn boundary_tangential_pairing(c: &Context, b: fn(V3) -> V3) -> Vec<f64> {
    let s = &c.s;
    let mut out = vec![0.0; s.ne()];
    for f in s.boundary_faces() {
        let t = s.face_tets[f][0];
        let nu = s.face_normal[f];
        let o = (0..4).find(|&i| s.tet_faces[t][i] == f).unwrap();
        let others: Vec<usize> = (0..4).filter(|&i| i != o).collect();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let mut l = [0.0; 4];
            l[others[i]] = 0.5;
            l[others[j]] = 0.5;
            let tet = s.mesh.tets[t];
            let mut x = [0.0; 3];
            for v in 0..4 {
                for d in 0..3 {
                    x[d] += l[v] * s.mesh.vertices[tet[v]][d];
                }
            }
            let g = cross(nu, b(x));
            for k in 0..6 {
                let w = s.whitney_local(t, k, &l);
                out[s.tet_edges[t][k]] += s.tet_edge_sign[t][k] * s.face_area[f] / 3.0 * dot(g, w);
            }
        }
    }
    out
}

/// All-edge weak form with the natural boundary term `-int (nu x B) . w`.
/// Shared by the tangential-curl and natural problems with identity law.
/// Returns `curl u`.
pub fn natural_oracle(c: &Context, load: &[f64], b: fn(V3) -> V3) -> Vec<V3> {
    let s = &c.s;
    let bt = boundary_tangential_pairing(c, b);
    let f: Vec<f64> = load.iter().zip(&bt).map(|(l, t)| l - t).collect();
    let all: Vec<usize> = (0..s.ne()).collect();
    let (a, rhs) = curlcurl_rows(c, &all, &vec![[0.0; 3]; s.nt()], &f);
    s.curl_tet(lstsq(&a, &rhs).as_slice())
}

/// Normal-curl problem: interior curl-curl rows, boundary flux rows by the
/// midpoint rule, and the `H1` coefficients of `curl u`. Returns `curl u`.
pub fn normal_curl_oracle(c: &Context, load: &[f64], bn: fn(V3, V3) -> f64, h1: &[f64]) -> Vec<V3> {
    let s = &c.s;
    let interior: Vec<usize> = (0..s.ne()).filter(|&e| !s.bnd_edge[e]).collect();
    let (a, b) = curlcurl_rows(c, &interior, &vec![[0.0; 3]; s.nt()], load);
    let bf = s.boundary_faces();
    let cd = curl_dense(s);
    let mut flux = DMatrix::zeros(bf.len(), s.ne());
    let mut fb = DVector::zeros(bf.len());
    for (i, &f) in bf.iter().enumerate() {
        let t = s.face_tets[f][0];
        let nu = s.face_normal[f];
        for j in 0..s.ne() {
            let w = s.vol[t].sqrt();
            flux[(i, j)] = s.face_area[f] * (0..3).map(|k| nu[k] * cd[(3 * t + k, j)] / w).sum::<f64>();
        }
        fb[i] = s.face_midpoints(f).iter().map(|&x| s.face_area[f] * bn(x, nu)).sum::<f64>() / 3.0;
    }
    let mut hrow = DMatrix::zeros(c.basis.n(), s.ne());
    let mut hb = DVector::zeros(c.basis.n());
    for (k, e) in c.basis.h1.iter().enumerate() {
        let r = cd.transpose() * p0_rhs(s, e);
        hrow.row_mut(k).copy_from(&r.transpose());
        hb[k] = h1[k];
    }
    let u = lstsq(&vstack(&[a, flux, hrow]), &vcat(&[b, fb, hb]));
    s.curl_tet(u.as_slice())
}
