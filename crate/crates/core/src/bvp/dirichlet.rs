//! Tangential-trace (Dirichlet) problem: `u_T = u0_T`.

use crate::decomp::{divfree_extension, vector_potential, Extension, Gauge};
use crate::fem::QField;
use crate::scalar::{solve_with_guess, BoundaryData, QuasilinearProblem};
use crate::vec3::{sub, vdot, V3};
use crate::{Error, Result};

use super::monotone::CurlProblem;
use super::xi::{solve_xi_system, XiOptions};
use super::{h1_p0, h2_p0, p0_add, weak_div, BoundaryDatum, BvpKind, BvpSolution, GivenCurrentProblem, Residual};

struct Prepared {
    u0: Vec<f64>,
    ext: Extension,
    load: Vec<f64>,
    /// `b + h2` per tetrahedron.
    offset: Vec<V3>,
    multiplier: f64,
    /// `j0 = curl a`, the tangential-zero potential of the load.
    j0: Vec<V3>,
}

fn prepare(p: &GivenCurrentProblem) -> Result<Prepared> {
    p.validate()?;
    let BoundaryDatum::Dirichlet(f) = &p.datum else {
        return Err(Error::Parameter("the Dirichlet solver needs tangential data for u".into()));
    };
    p.require_membership()?;
    let ctx = p.ctx;
    let s = &ctx.s;
    let mut u0 = s.interpolate_edges(|x| f(x));
    for (e, v) in u0.iter_mut().enumerate() {
        if !s.bnd_edge[e] {
            *v = 0.0;
        }
    }
    let ext = divfree_extension(ctx, &u0)?;
    let load = p.load()?;
    let sol = ctx.tangential.solve(&load)?;
    // De Rham multiplier: |grad p|^2 = p . G^T l on the free nodes
    let gtl = s.grad_op.tmatvec(&load);
    let gp2 = vdot(&sol.p, &gtl).max(0.0);
    let an = vdot(&sol.x, &load).max(0.0);
    let multiplier = if gp2 == 0.0 { 0.0 } else { (gp2 / (an + gp2)).sqrt() };
    let j0 = s.curl_tet(&sol.x);
    let offset = p0_add(&ext.b, &h2_p0(ctx, &p.h2));
    Ok(Prepared { u0, ext, load, offset, multiplier, j0 })
}

fn finish(
    p: &GivenCurrentProblem,
    pre: &Prepared,
    u: Vec<f64>,
    h1: Vec<f64>,
    phi: Vec<f64>,
    history: Vec<f64>,
) -> Result<BvpSolution> {
    let ctx = p.ctx;
    let s = &ctx.s;
    let v: Vec<f64> = u.iter().zip(&pre.ext.u).map(|(a, b)| a - b).collect();
    let cp = CurlProblem { ctx, sys: &ctx.tangential, law: &p.law, offset: pre.offset.clone(), load: pre.load.clone(), params: &p.params };
    let scale = cp.residual_norm(&vec![0.0; s.ne()])?.max(super::hcurl_dual(ctx, &pre.load)?).max(s.p0_norm(&pre.offset)).max(f64::MIN_POSITIVE);
    let weak = cp.residual_norm(&v)? / scale;
    let umax = pre.u0.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let trace = (0..s.ne())
        .filter(|&e| s.bnd_edge[e])
        .fold(0.0f64, |m, e| m.max((u[e] - pre.u0[e]).abs()))
        / umax.max(1.0);
    let tol = p.params.tol.max(1e-8);
    let residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "divergence".into(), value: weak_div(ctx, &u, true)?, tol: Some(tol) },
        Residual { name: "boundary trace".into(), value: trace, tol: Some(1e-12) },
        Residual { name: "multiplier".into(), value: pre.multiplier, tol: Some(tol) },
    ];
    Ok(BvpSolution {
        kind: BvpKind::Dirichlet,
        u,
        h1,
        h2: p.h2.clone(),
        phi,
        multiplier: pre.multiplier,
        h2_discrepancy: None,
        residuals,
        history,
        tolerance: format!("default relative {tol:.0e}"),
    })
}

/// Monotone iteration on the tangential-zero, div-free space orthogonal to
/// `H2`, for `u = U + v` with `U` the divergence-free extension of the data.
pub fn solve_dirichlet_monotone(p: &GivenCurrentProblem) -> Result<BvpSolution> {
    solve_dirichlet_monotone_from(p, None)
}

/// As [`solve_dirichlet_monotone`] from a starting guess for `u`.
pub fn solve_dirichlet_monotone_from(p: &GivenCurrentProblem, u0: Option<&[f64]>) -> Result<BvpSolution> {
    let pre = prepare(p)?;
    let ctx = p.ctx;
    // boundary values of a guess are overridden by the data
    let x0 = u0.map(|u| {
        (0..ctx.s.ne()).map(|e| if ctx.s.bnd_edge[e] { 0.0 } else { u[e] - pre.ext.u[e] }).collect::<Vec<f64>>()
    });
    let cp = CurlProblem { ctx, sys: &ctx.tangential, law: &p.law, offset: pre.offset.clone(), load: pre.load.clone(), params: &p.params };
    let out = cp.solve(x0.as_deref())?;
    let u: Vec<f64> = out.x.iter().zip(&pre.ext.u).map(|(a, b)| a + b).collect();
    finish(p, &pre, u, p.h1.clone(), vec![], out.history)
}

/// Evaluates `xi -> f(xi) - c` for the reduction, where
/// `f_i(xi) = int B(j0 + sum xi_k e_k + grad phi_xi) . e_i` and
/// `c_i = int (b + h2) . e_i`.
pub struct XiMap<'a> {
    p: &'a GivenCurrentProblem<'a>,
    j0: Vec<V3>,
    neumann: Vec<f64>,
    pub c: Vec<f64>,
    /// Last potential, reused as the next starting guess.
    pub phi: Vec<f64>,
    pub evaluations: usize,
}

impl XiMap<'_> {
    pub fn drift(&self, xi: &[f64]) -> Vec<V3> {
        p0_add(&self.j0, &h1_p0(self.p.ctx, xi))
    }

    /// Solve the scalar problem at `xi`; returns `(f - c, B)`.
    pub fn evaluate(&mut self, xi: &[f64]) -> Result<(Vec<f64>, Vec<V3>)> {
        let ctx = self.p.ctx;
        let s = &ctx.s;
        let drift = self.drift(xi);
        let prob = QuasilinearProblem {
            law: &self.p.law,
            drift: QField::from_p0(&drift),
            data: BoundaryData::Neumann(self.neumann.clone()),
            params: self.p.params.scalar,
        };
        let guess = if self.phi.is_empty() { None } else { Some(&self.phi[..]) };
        let sol = solve_with_guess(s, &ctx.cr, &prob, guess)?;
        let g = s.scalar_grad_tet(&ctx.cr, &sol.phi);
        self.phi = sol.phi;
        self.evaluations += 1;
        let b = super::b_tet(ctx, &self.p.law, &p0_add(&drift, &g))?;
        let f = ctx.basis.h1.iter().zip(&self.c).map(|(e, c)| s.p0_inner(&b, e) - c).collect();
        Ok((f, b))
    }

    /// `f(xi) - c` only.
    pub fn residual(&mut self, xi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.evaluate(xi)?.0)
    }
}

/// The coefficient residual map of the reduction for a Dirichlet problem.
pub fn xi_residual_map<'a>(p: &'a GivenCurrentProblem<'a>) -> Result<XiMap<'a>> {
    let pre = prepare(p)?;
    Ok(xi_map_from(p, &pre))
}

fn xi_map_from<'a>(p: &'a GivenCurrentProblem<'a>, pre: &Prepared) -> XiMap<'a> {
    let s = &p.ctx.s;
    let q = QField::from_p0(&pre.offset);
    let neumann = s.grad_load(&p.ctx.cr, &q);
    let c = p.ctx.basis.h1.iter().map(|e| s.p0_inner(&pre.offset, e)).collect();
    XiMap { p, j0: pre.j0.clone(), neumann, c, phi: vec![], evaluations: 0 }
}

/// Reduction route: scalar problem `div B(j0 + h1' + grad phi) = 0` with
/// co-normal data `nu . (b + h2)`, coefficients `h1'` from `f(xi) = c`, then
/// `curl v = B(...) - b - h2` with `v` tangential-zero.
pub fn solve_dirichlet_reduction(p: &GivenCurrentProblem) -> Result<BvpSolution> {
    solve_dirichlet_reduction_from(p, None)
}

/// As [`solve_dirichlet_reduction`] with a starting potential for the scalar
/// solves.
pub fn solve_dirichlet_reduction_from(p: &GivenCurrentProblem, phi0: Option<Vec<f64>>) -> Result<BvpSolution> {
    let pre = prepare(p)?;
    let ctx = p.ctx;
    let s = &ctx.s;
    let mut map = xi_map_from(p, &pre);
    if let Some(phi) = phi0 {
        map.phi = phi;
    }
    let n = ctx.basis.n();
    let lambda_b = p.law.b_monotone_bounds().0;
    let bj0 = s.p0_norm(&super::b_tet(ctx, &p.law, &pre.j0)?);
    let cn = norm3(&map.c);
    let scale = cn + bj0 + 1.0;
    let opts = XiOptions {
        tol: p.params.xi_tol * scale,
        budget: p.params.xi_budget,
        r_hint: p.params.r_hint,
        r_max: (4.0 * scale / lambda_b).max(p.params.r_hint),
    };
    let out = solve_xi_system(n, &mut |xi| map.residual(xi), &opts)?;
    let (_, bf) = map.evaluate(&out.xi)?;
    let z: Vec<V3> = bf.iter().zip(&pre.offset).map(|(a, b)| sub(*a, *b)).collect();
    let v = vector_potential(ctx, &z, Gauge::TangentialZero)?;
    let u: Vec<f64> = v.u.iter().zip(&pre.ext.u).map(|(a, b)| a + b).collect();
    let mut sol = finish(p, &pre, u, out.xi.clone(), map.phi.clone(), out.history.clone())?;
    sol.residuals.push(Residual { name: "xi system".into(), value: out.residual / scale, tol: Some(p.params.xi_tol) });
    sol.residuals.push(Residual { name: "potential".into(), value: v.residual, tol: Some(1e-8) });
    Ok(sol)
}

fn norm3(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
