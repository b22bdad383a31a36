//! Normal-curl, co-normal and natural problems.

use crate::decomp::{vector_potential, Gauge};
use crate::fem::QField;
use crate::scalar::{solve_with_guess, BoundaryData, QuasilinearProblem};
use crate::vec3::{dot, sub, tangential, vdot, V3};
use crate::{Error, Result};

use super::monotone::CurlProblem;
use super::{h1_p0, h2_p0, hcurl_dual, p0_add, weak_div, BoundaryDatum, BvpKind, BvpSolution, GivenCurrentProblem, Residual};

/// Solve `div B(Y0 + h1^0 + grad phi) = 0` with `nu . B(...) = g` on the
/// boundary, `g` given as face integrals, and rebuild `u`.
fn normal_pipeline(
    p: &GivenCurrentProblem,
    h1_trial: Option<&[f64]>,
    flux: Vec<f64>,
    kind: BvpKind,
) -> Result<(BvpSolution, Vec<V3>)> {
    let ctx = p.ctx;
    let s = &ctx.s;
    let n = ctx.basis.n();
    let h10 = match h1_trial {
        Some(h) if h.len() != n => {
            return Err(Error::Dimension(format!("{} coefficients for dim H1 = {n}", h.len())));
        }
        Some(h) => h.to_vec(),
        None => vec![0.0; n],
    };
    p.require_membership()?;
    let total: f64 = flux.iter().sum();
    let fscale = flux.iter().map(|v| v.abs()).sum::<f64>();
    if fscale > 0.0 && total.abs() > p.params.tol_compat * fscale {
        return Err(Error::Compatibility { condition: "total flux (int B0_n dS = 0)".into(), margin: total / fscale });
    }
    let law = &p.law;
    let load = p.load()?;
    let y0 = s.curl_tet(&ctx.tangential.solve(&load)?.x);
    let drift = p0_add(&y0, &h1_p0(ctx, &h10));
    let mut g = flux.clone();
    let nb = ctx.cr.boundary.iter().filter(|&&b| b).count().max(1) as f64;
    for (gi, &bd) in g.iter_mut().zip(&ctx.cr.boundary) {
        if bd {
            *gi -= total / nb;
        }
    }
    let prob = QuasilinearProblem { law, drift: QField::from_p0(&drift), data: BoundaryData::Neumann(g), params: p.params.scalar };
    let sol = solve_with_guess(s, &ctx.cr, &prob, None)?;
    let y = p0_add(&drift, &s.scalar_grad_tet(&ctx.cr, &sol.phi));
    let b = super::b_tet(ctx, law, &y)?;
    let h2: Vec<f64> = ctx.basis.h2.iter().map(|e| s.p0_inner(&b, e)).collect();
    let z: Vec<V3> = b.iter().zip(&h2_p0(ctx, &h2)).map(|(a, c)| sub(*a, *c)).collect();
    let pot = vector_potential(ctx, &z, Gauge::NormalZero)?;
    let u = pot.u;

    // curl H(curl u + h2) = J + h1 against tangential-zero tests
    let bfull = p0_add(&s.curl_tet(&u), &h2_p0(ctx, &h2));
    let cp = CurlProblem { ctx, sys: &ctx.tangential, law, offset: bfull.clone(), load: load.clone(), params: &p.params };
    let zero = vec![0.0; s.ne()];
    let scale = hcurl_dual(ctx, &load)?.max(s.p0_norm(&super::h_tet(ctx, law, &bfull))).max(f64::MIN_POSITIVE);
    let weak = cp.residual_norm(&zero)? / scale;
    // boundary fluxes of curl u + h2
    let mut fmax = 0.0f64;
    let mut fnorm = 0.0f64;
    for f in s.boundary_faces() {
        let t = s.face_tets[f][0];
        let d = s.face_area[f] * dot(s.face_normal[f], bfull[t]) - flux[f];
        fmax = fmax.max(d.abs());
        fnorm = fnorm.max(flux[f].abs()).max(s.face_area[f] * crate::vec3::norm(bfull[t]));
    }
    let tol = p.params.tol.max(1e-8);
    let disc = p.h2.iter().zip(&h2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "divergence".into(), value: weak_div(ctx, &u, false)?, tol: Some(tol) },
        Residual { name: "potential".into(), value: pot.residual, tol: Some(1e-8) },
        Residual { name: "scalar".into(), value: sol.residual, tol: Some(p.params.scalar.tol.max(1e-9)) },
        Residual { name: "boundary flux".into(), value: fmax / fnorm.max(f64::MIN_POSITIVE), tol: Some(1e-8) },
    ];
    let out = BvpSolution {
        kind,
        u,
        h1: h10,
        h2,
        phi: sol.phi,
        multiplier: 0.0,
        h2_discrepancy: Some(disc),
        residuals,
        history: sol.history.iter().map(|r| r.residual).collect(),
        tolerance: format!("default relative {tol:.0e}"),
    };
    Ok((out, y))
}

/// `nu . (curl u + h2) = B0_n`; `h2` is computed as the `H2` part of `B(Y)`.
pub fn solve_normal_curl(p: &GivenCurrentProblem, h1_trial: Option<&[f64]>) -> Result<BvpSolution> {
    p.validate()?;
    let BoundaryDatum::NormalCurl(bn) = &p.datum else {
        return Err(Error::Parameter("the normal-curl solver needs B0_n data".into()));
    };
    let flux = p.ctx.s.boundary_face_integrals(|x, nu| bn(x, nu));
    Ok(normal_pipeline(p, h1_trial, flux, BvpKind::NormalCurl)?.0)
}

/// `nu . H(curl u + h2) = nu . H0`, solved as a normal-curl problem with
/// datum `nu . B(H0)`.
pub fn solve_conormal_bvp(p: &GivenCurrentProblem, h1_trial: Option<&[f64]>) -> Result<BvpSolution> {
    p.validate()?;
    let BoundaryDatum::CoNormal(h0) = &p.datum else {
        return Err(Error::Parameter("the co-normal solver needs H0 data".into()));
    };
    super::require_trace_condition(p, "normal trace")?;
    let ctx = p.ctx;
    let s = &ctx.s;
    let law = &p.law;
    let err = std::cell::RefCell::new(None);
    let flux = s.boundary_face_integrals(|x, nu| match law.b(x, h0(x)) {
        Ok(b) => dot(nu, b),
        Err(e) => {
            *err.borrow_mut() = Some(e);
            0.0
        }
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let (mut sol, y) = normal_pipeline(p, h1_trial, flux, BvpKind::CoNormal)?;
    // a-posteriori: nu . H against the face mean of nu . H0
    let mut worst = 0.0f64;
    let mut hmax = 0.0f64;
    for f in s.boundary_faces() {
        let t = s.face_tets[f][0];
        let nu = s.face_normal[f];
        let m = s.face_midpoints(f);
        let hn = m.iter().map(|&x| dot(nu, h0(x))).sum::<f64>() / 3.0;
        hmax = hmax.max(hn.abs());
        worst = worst.max((dot(nu, y[t]) - hn).abs());
    }
    sol.residuals.push(Residual { name: "co-normal trace".into(), value: worst / hmax.max(1.0), tol: None });
    Ok(sol)
}

/// `nu x H(curl u + h2) = nu x H0`: monotone iteration on the div-free edge
/// space orthogonal to `H1`, after checking both compatibility identities.
pub fn solve_natural(p: &GivenCurrentProblem) -> Result<BvpSolution> {
    p.validate()?;
    let BoundaryDatum::Natural(h0) = &p.datum else {
        return Err(Error::Parameter("the natural solver needs H0 data".into()));
    };
    let ctx = p.ctx;
    let s = &ctx.s;
    p.require_membership()?;
    let law = &p.law;
    let load = p.load()?;
    let pairing = ctx.tangential_pairing_n(|x, nu| tangential(h0(x), nu));
    let ln: Vec<f64> = load.iter().zip(&pairing).map(|(a, b)| a - b).collect();
    let (node, harm) = natural_margins(p, &load, &pairing);
    if node > p.params.tol_compat {
        return Err(Error::Compatibility { condition: "natural normal trace (nu . curl H0_T = nu . J)".into(), margin: node });
    }
    if harm > p.params.tol_compat {
        return Err(Error::Compatibility { condition: "natural H1 pairing".into(), margin: harm });
    }
    let offset = h2_p0(ctx, &p.h2);
    let cp = CurlProblem { ctx, sys: &ctx.normal, law, offset: offset.clone(), load: ln.clone(), params: &p.params };
    let out = cp.solve(None)?;
    let u = out.x;
    let r = cp.residual_full(&u);
    let hfull = super::h_tet(ctx, law, &p0_add(&s.curl_tet(&u), &offset));
    let scale = hcurl_dual(ctx, &ln)?.max(s.p0_norm(&hfull)).max(f64::MIN_POSITIVE);
    let weak = hcurl_dual(ctx, &r)? / scale;
    let tol = p.params.tol.max(1e-8);
    let residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "divergence".into(), value: weak_div(ctx, &u, false)?, tol: Some(tol) },
        Residual { name: "natural normal trace".into(), value: node, tol: Some(p.params.tol_compat) },
        Residual { name: "natural H1 pairing".into(), value: harm, tol: Some(p.params.tol_compat) },
    ];
    Ok(BvpSolution {
        kind: BvpKind::Natural,
        u,
        h1: p.h1.clone(),
        h2: p.h2.clone(),
        phi: vec![],
        multiplier: 0.0,
        h2_discrepancy: None,
        residuals,
        history: out.history,
        tolerance: format!("default relative {tol:.0e}"),
    })
}

/// Relative defects of `G^T l_N = 0` (all nodes) and `l_N . y = 0` (`H1`
/// edge fields) for `l_N = l - pairing`.
pub(crate) fn natural_margins(p: &GivenCurrentProblem, load: &[f64], pairing: &[f64]) -> (f64, f64) {
    let s = &p.ctx.s;
    let ln: Vec<f64> = load.iter().zip(pairing).map(|(a, b)| a - b).collect();
    let gt = s.grad_op.tmatvec(&ln);
    let mut denom = vec![0.0f64; s.nv()];
    for (e, &[a, b]) in s.edges.iter().enumerate() {
        let v = load[e].abs() + pairing[e].abs();
        denom[a] += v;
        denom[b] += v;
    }
    let dmax = denom.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let node = gt.iter().fold(0.0f64, |m, v| m.max(v.abs())) / dmax;
    let mut harm = 0.0f64;
    for y in &p.ctx.basis.h1_edge {
        let d: f64 = (0..s.ne()).map(|e| (load[e].abs() + pairing[e].abs()) * y[e].abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        harm = harm.max(vdot(&ln, y).abs() / d);
    }
    (node, harm)
}
