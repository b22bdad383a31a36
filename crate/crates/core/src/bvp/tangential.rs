//! Tangential-curl problem: `nu x curl u = nu x B0`.
//!
//! With `H0 = H(B0_T)` the weak form on all edges reads
//! `int H . curl w_e = F_e := l_e - int (nu x H0) . w_e`. Writing
//! `H = Y0 + h1^0 + grad_NC phi` fixes the boundary values of the
//! Crouzeix-Raviart potential through the dual boundary graph; the interior
//! follows from `div B(H) = 0` and `h2^0` is the `H2` part of `B(H)`.

use nalgebra::{DMatrix, DVector};

use crate::decomp::{vector_potential, Gauge};
use crate::fem::QField;
use crate::scalar::{solve_with_guess, BoundaryData, QuasilinearProblem};
use crate::vec3::{cross, sub, tangential, V3};
use crate::{Error, Result};

use super::graph::{dual_boundary_graph, integrate_graph};
use super::{h1_p0, h2_p0, hcurl_dual, p0_add, weak_div, BoundaryDatum, BvpKind, BvpSolution, GivenCurrentProblem, Residual};

/// Data of the boundary reduction, computed before any compatibility
/// verdict.
pub(crate) struct Setup {
    pub f: Vec<f64>,
    pub y0: Vec<V3>,
    pub h10: Vec<f64>,
    pub h1f: Vec<V3>,
    /// Boundary-face values of the potential.
    pub values: Vec<f64>,
    /// Relative defect of the normal current trace identity.
    pub normal_trace: f64,
    /// Relative largest cycle misfit on the dual boundary graph.
    pub circulation: f64,
}

pub(crate) fn setup(p: &GivenCurrentProblem, h1_trial: Option<&[f64]>) -> Result<Setup> {
    p.validate()?;
    let BoundaryDatum::TangentialCurl(b0) = &p.datum else {
        return Err(Error::Parameter("the tangential-curl solver needs B0 data".into()));
    };
    let ctx = p.ctx;
    let s = &ctx.s;
    let n = ctx.basis.n();
    if let Some(h) = h1_trial {
        if h.len() != n {
            return Err(Error::Dimension(format!("{} coefficients for dim H1 = {n}", h.len())));
        }
    }
    let law = &p.law;
    let load = p.load()?;
    let y0 = s.curl_tet(&ctx.tangential.solve(&load)?.x);
    let pairing = ctx.tangential_pairing_n(|x, nu| law.h(x, tangential(b0(x), nu)));
    let f: Vec<f64> = load.iter().zip(&pairing).map(|(a, b)| a - b).collect();

    // normal trace of the current against the curl trace of H0
    let gtf = s.grad_op.tmatvec(&f);
    let mut worst = 0.0f64;
    let mut denom = vec![0.0f64; s.nv()];
    for (e, &[a, b]) in s.edges.iter().enumerate() {
        let v = load[e].abs() + pairing[e].abs();
        denom[a] += v;
        denom[b] += v;
    }
    let dmax = denom.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for v in 0..s.nv() {
        if s.bnd_vertex[v] {
            worst = worst.max(gtf[v].abs() / dmax);
        }
    }
    // boundary values of phi on the dual boundary graph
    let dual = dual_boundary_graph(ctx)?;
    let rhs_of = |field: &[V3]| -> Vec<f64> {
        let c = s.curl_load(&QField::from_p0(field));
        dual.edge_ids.iter().map(|&e| c[e]).collect()
    };
    let fg: Vec<f64> = dual.edge_ids.iter().map(|&e| f[e]).collect();
    let y0g = rhs_of(&y0);
    let g0: Vec<f64> = fg.iter().zip(&y0g).map(|(a, b)| a - b).collect();
    let gscale = fg.iter().map(|v| v.abs()).sum::<f64>().max(y0g.iter().map(|v| v.abs()).sum::<f64>()).max(f64::MIN_POSITIVE);
    let h10: Vec<f64> = match h1_trial {
        Some(h) => h.to_vec(),
        None if n == 0 => vec![],
        None => {
            let base = integrate_graph(&dual.active, &dual.links, &g0);
            let cols: Vec<Vec<f64>> = ctx
                .basis
                .h1
                .iter()
                .map(|e| integrate_graph(&dual.active, &dual.links, &rhs_of(e)).cycles.iter().map(|c| c.1).collect())
                .collect();
            let m = base.cycles.len();
            let a = DMatrix::from_fn(m, n, |i, j| cols[j][i]);
            let b = DVector::from_fn(m, |i, _| base.cycles[i].1);
            let ata = a.transpose() * &a;
            let atb = a.transpose() * b;
            match ata.lu().solve(&atb) {
                Some(x) => x.iter().copied().collect(),
                None => vec![0.0; n],
            }
        }
    };
    let h1f = h1_p0(ctx, &h10);
    let g: Vec<f64> = g0.iter().zip(rhs_of(&h1f)).map(|(a, b)| a - b).collect();
    let gi = integrate_graph(&dual.active, &dual.links, &g);
    let circ = gi.cycles.iter().fold(0.0f64, |m, c| m.max(c.1.abs())) / gscale;
    // zero area-weighted mean on each boundary component
    let ncomp = s.mesh.num_boundary_components();
    let mut sum = vec![0.0; ncomp + 1];
    let mut area = vec![0.0; ncomp + 1];
    for fc in s.boundary_faces() {
        let l = s.face_label(fc).unwrap_or(0);
        sum[l] += s.face_area[fc] * gi.phi[fc];
        area[l] += s.face_area[fc];
    }
    let mut values = vec![0.0; s.nf()];
    for fc in s.boundary_faces() {
        let l = s.face_label(fc).unwrap_or(0);
        values[fc] = gi.phi[fc] - sum[l] / area[l];
    }

    Ok(Setup { f, y0, h10, h1f, values, normal_trace: worst, circulation: circ })
}

/// Solve with a prescribed `h1^0`, or with `None` to pick the `h1^0` that
/// closes the boundary cycles in the least-squares sense.
pub fn solve_tangential_curl(p: &GivenCurrentProblem, h1_trial: Option<&[f64]>) -> Result<BvpSolution> {
    let st = setup(p, h1_trial)?;
    let BoundaryDatum::TangentialCurl(b0) = &p.datum else { unreachable!() };
    p.require_membership()?;
    super::require_trace_condition(p, "tangential trace")?;
    if st.normal_trace > p.params.tol_compat {
        return Err(Error::Compatibility { condition: "normal current trace (nu . curl H(B0_T) = nu . J)".into(), margin: st.normal_trace });
    }
    if st.circulation > p.params.tol_compat {
        return Err(Error::Obstruction(format!(
            "boundary circulation: tangential data are not closed around a boundary cycle (relative defect {:.3e}); the pairing with H1 does not vanish",
            st.circulation
        )));
    }
    let ctx = p.ctx;
    let s = &ctx.s;
    let law = &p.law;
    let Setup { f, y0, h10, h1f, values, normal_trace: worst, circulation: circ } = st;
    let drift = p0_add(&y0, &h1f);
    let prob = QuasilinearProblem { law, drift: QField::from_p0(&drift), data: BoundaryData::Dirichlet(values), params: p.params.scalar };
    let sol = solve_with_guess(s, &ctx.cr, &prob, None)?;
    let y = p0_add(&drift, &s.scalar_grad_tet(&ctx.cr, &sol.phi));
    let b = super::b_tet(ctx, law, &y)?;
    let h20: Vec<f64> = ctx.basis.h2.iter().map(|e| s.p0_inner(&b, e)).collect();
    let z: Vec<V3> = b.iter().zip(&h2_p0(ctx, &h20)).map(|(a, c)| sub(*a, *c)).collect();
    let pot = vector_potential(ctx, &z, Gauge::NormalZero)?;
    let u = pot.u;

    // residuals
    let bfull = p0_add(&s.curl_tet(&u), &h2_p0(ctx, &h20));
    let hfull = super::h_tet(ctx, law, &bfull);
    let mut r = s.curl_load(&QField::from_p0(&hfull));
    for (ri, fi) in r.iter_mut().zip(&f) {
        *ri -= fi;
    }
    let scale = hcurl_dual(ctx, &f)?.max(s.p0_norm(&hfull)).max(f64::MIN_POSITIVE);
    let weak = hcurl_dual(ctx, &r)? / scale;
    let mut trace = 0.0f64;
    let mut tmax = 0.0f64;
    for fc in s.boundary_faces() {
        let t = s.face_tets[fc][0];
        let nu = s.face_normal[fc];
        let xb = s.face_centroid[fc];
        let bt = cross(nu, b0(xb));
        tmax = tmax.max(crate::vec3::norm(bt));
        trace = trace.max(crate::vec3::norm(sub(cross(nu, bfull[t]), bt)));
    }
    let trace = trace / tmax.max(1.0);
    let disc = p.h2.iter().zip(&h20).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let tol = p.params.tol.max(1e-8);
    let residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "divergence".into(), value: weak_div(ctx, &u, false)?, tol: Some(tol) },
        Residual { name: "potential".into(), value: pot.residual, tol: Some(1e-8) },
        Residual { name: "scalar".into(), value: sol.residual, tol: Some(p.params.scalar.tol.max(1e-9)) },
        Residual { name: "normal current trace".into(), value: worst, tol: Some(p.params.tol_compat) },
        Residual { name: "boundary circulation".into(), value: circ, tol: Some(p.params.tol_compat) },
        Residual { name: "boundary trace".into(), value: trace, tol: None },
    ];
    Ok(BvpSolution {
        kind: BvpKind::TangentialCurl,
        u,
        h1: h10,
        h2: h20,
        phi: sol.phi,
        multiplier: 0.0,
        h2_discrepancy: Some(disc),
        residuals,
        history: sol.history.iter().map(|r| r.residual).collect(),
        tolerance: format!("default relative {tol:.0e}; tangential trace at discretization level"),
    })
}
