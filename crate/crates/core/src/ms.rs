//! Maxwell-Stokes problems with a solution-dependent current:
//! `curl H(curl u + h2) = f(x, curl u + h2) + h1 + grad p`, `div u = 0`.
//!
//! Every variant works with `Y = H(curl u + h2)` split as
//! `Y = w + h_hat + grad psi`. For fixed `w` the scalar problem gives `psi`,
//! then `f(B(Y))` is projected (`P_nu` or `P_n`) and a div-curl system gives
//! the next `w`. The pressure is the potential of that projection.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bvp::monotone::CurlProblem;
use crate::bvp::{
    b_tet, h1_p0, h2_p0, h_tet, hcurl_dual, p0_add, require_trace, solve_xi_system, weak_div, BoundaryDatum,
    BvpKind, BvpParams, Residual, XiOptions,
};
use crate::constitutive::{par_map, CurrentLaw, MaterialLaw};
use crate::decomp::{curl_trace_of, project_pn, project_pnu, vector_potential, Context, Gauge};
use crate::fem::QField;
use crate::scalar::{solve_with_guess, BoundaryData, QuasilinearProblem};
use crate::vec3::{dot, sub, tangential, vaxpy, vdot, vnorm, V3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointParams {
    pub max_iter: usize,
    /// Relaxation in `(0, 1]`.
    pub omega: f64,
    /// Relative tolerance on `|V(w) - w|`.
    pub tol_fp: f64,
    /// Ball radius; `None` uses `100 max(1, |V(w0)|)`.
    pub radius: Option<f64>,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams { max_iter: 200, omega: 1.0, tol_fp: 1e-9, radius: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixedPoint {
    pub w: Vec<f64>,
    /// `V(w)` at the returned iterate.
    pub value: Vec<f64>,
    /// `|V(w_k) - w_k|` per iteration.
    pub history: Vec<f64>,
    /// Geometric mean of the last few residual ratios.
    pub rate: Option<f64>,
    pub radius: f64,
    pub warnings: Vec<String>,
}

fn rate_of(history: &[f64]) -> Option<f64> {
    let r: Vec<f64> = history.windows(2).filter(|w| w[0] > 0.0 && w[1] > 0.0).map(|w| w[1] / w[0]).collect();
    if r.is_empty() {
        return None;
    }
    let tail = &r[r.len().saturating_sub(5)..];
    Some((tail.iter().map(|x| x.ln()).sum::<f64>() / tail.len() as f64).exp())
}

/// Relaxed Picard iteration `w <- (1 - omega) w + omega V(w)`.
///
/// Leaving the ball of radius `R` only warns (and only when the current is
/// not known to be sublinear); leaving `10 R` is a divergence error.
pub fn picard_driver(
    map: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    w0: &[f64],
    params: &FixedPointParams,
    norm: &dyn Fn(&[f64]) -> f64,
    sublinear: bool,
) -> Result<FixedPoint> {
    if !(params.omega > 0.0 && params.omega <= 1.0) {
        return Err(Error::Parameter(format!("relaxation must lie in (0, 1], got {}", params.omega)));
    }
    if !(params.tol_fp > 0.0) {
        return Err(Error::Parameter("fixed-point tolerance must be positive".into()));
    }
    let mut w = w0.to_vec();
    let mut history = Vec::new();
    let mut warnings = Vec::new();
    let mut radius = params.radius;
    for k in 0..=params.max_iter {
        let v = map(&w)?;
        if v.len() != w.len() {
            return Err(Error::Dimension(format!("map returned {} values for {}", v.len(), w.len())));
        }
        let d: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let dn = norm(&d);
        if !dn.is_finite() {
            return Err(Error::solver("fixed-point iteration (non-finite update)", history));
        }
        history.push(dn);
        let sc = norm(&v).max(norm(&w));
        let r = *radius.get_or_insert(100.0 * sc.max(1.0));
        if dn <= params.tol_fp * sc || sc == 0.0 {
            return Ok(FixedPoint { w, value: v, rate: rate_of(&history), history, radius: r, warnings });
        }
        if k == params.max_iter {
            break;
        }
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += params.omega * (vi - *wi);
        }
        let nw = norm(&w);
        if nw > 10.0 * r {
            return Err(Error::Divergence { norm: nw, bound: 10.0 * r });
        }
        if nw > r && !sublinear && warnings.is_empty() {
            warnings.push(format!(
                "iterate left the ball of radius {r:.3e}; the current is not sublinear, so existence is not guaranteed"
            ));
        }
    }
    let rate = rate_of(&history).unwrap_or(f64::NAN);
    Err(Error::solver(format!("fixed-point iteration stagnated (contraction estimate {rate:.3})"), history))
}

/// A Maxwell-Stokes problem. The boundary datum selects the variant:
/// normal curl (`B0_n`), natural (`nu x H0`) or co-normal (`H0_n` through an
/// extension `H0`).
#[derive(Clone, Debug)]
pub struct MaxwellStokesProblem<'a> {
    pub ctx: &'a Context,
    pub law: MaterialLaw,
    pub current: CurrentLaw,
    pub h1: Vec<f64>,
    /// Trial `H1` coefficients in `Y` (normal-curl and co-normal variants).
    pub h1_hat: Vec<f64>,
    /// Given `H2` coefficients (natural variant).
    pub h2: Vec<f64>,
    pub datum: BoundaryDatum,
    pub params: BvpParams,
    pub fixed_point: FixedPointParams,
    /// Starting `w` per tetrahedron; zero when absent.
    pub w0: Option<Vec<V3>>,
}

impl<'a> MaxwellStokesProblem<'a> {
    pub fn new(ctx: &'a Context, law: MaterialLaw, current: CurrentLaw, datum: BoundaryDatum) -> Self {
        let (n, m) = (ctx.basis.n(), ctx.basis.m());
        MaxwellStokesProblem {
            ctx,
            law,
            current,
            h1: vec![0.0; n],
            h1_hat: vec![0.0; n],
            h2: vec![0.0; m],
            datum,
            params: BvpParams::default(),
            fixed_point: FixedPointParams::default(),
            w0: None,
        }
    }

    pub fn with_h1(mut self, c: Vec<f64>) -> Self {
        self.h1 = c;
        self
    }

    pub fn with_h1_hat(mut self, c: Vec<f64>) -> Self {
        self.h1_hat = c;
        self
    }

    pub fn with_h2(mut self, c: Vec<f64>) -> Self {
        self.h2 = c;
        self
    }

    pub fn with_start(mut self, w0: Vec<V3>) -> Self {
        self.w0 = Some(w0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        let b = &self.ctx.basis;
        if self.h1.len() != b.n() || self.h1_hat.len() != b.n() || self.h2.len() != b.m() {
            return Err(Error::Dimension(format!(
                "harmonic coefficients ({}, {}, {}) for dimensions ({}, {})",
                self.h1.len(),
                self.h1_hat.len(),
                self.h2.len(),
                b.n(),
                b.m()
            )));
        }
        if let Some(w) = &self.w0 {
            if w.len() != self.ctx.s.nt() {
                return Err(Error::Dimension(format!("{} start values for {} tetrahedra", w.len(), self.ctx.s.nt())));
            }
        }
        Ok(())
    }

    fn start(&self) -> Vec<f64> {
        match &self.w0 {
            Some(w) => flat(w),
            None => vec![0.0; 3 * self.ctx.s.nt()],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxwellStokesSolution {
    pub kind: BvpKind,
    pub u: Vec<f64>,
    /// Nodal pressure, the potential of the projection of `f`.
    pub p: Vec<f64>,
    /// Given `h1`, or the computed one for the natural variant.
    pub h1: Vec<f64>,
    pub h1_hat: Vec<f64>,
    /// Computed closure `h2`, or the given one for the natural variant.
    pub h2: Vec<f64>,
    /// Outer root of the natural variant.
    pub h2_hat: Vec<f64>,
    /// Fixed point per tetrahedron.
    pub w: Vec<V3>,
    /// `|V(w_k) - w_k|` of the (last) Picard run.
    pub history: Vec<f64>,
    pub rate: Option<f64>,
    pub residuals: Vec<Residual>,
    pub warnings: Vec<String>,
}

impl MaxwellStokesSolution {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn all_pass(&self) -> bool {
        self.residuals.iter().all(Residual::pass)
    }

    /// `curl u + h2` per tetrahedron.
    pub fn induction(&self, ctx: &Context) -> Vec<V3> {
        p0_add(&ctx.s.curl_tet(&self.u), &h2_p0(ctx, &self.h2))
    }
}

fn flat(w: &[V3]) -> Vec<f64> {
    w.iter().flat_map(|v| v.iter().copied()).collect()
}

fn unflat(w: &[f64]) -> Vec<V3> {
    w.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

fn f_tet(ctx: &Context, law: &CurrentLaw, b: &[V3]) -> Vec<V3> {
    par_map(b.len(), |t| law.f(ctx.s.tet_centroid(t), b[t]))
}

fn rel(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den.max(f64::MIN_POSITIVE)
    }
}

/// Boundary face fluxes of the datum, checked for zero total and re-centred.
fn centred_flux(ctx: &Context, flux: &[f64], tol: f64) -> Result<Vec<f64>> {
    let total: f64 = flux.iter().sum();
    let sc = flux.iter().map(|v| v.abs()).sum::<f64>();
    if sc > 0.0 && total.abs() > tol * sc {
        return Err(Error::Compatibility { condition: "total flux (int B0_n dS = 0)".into(), margin: total / sc });
    }
    let nb = ctx.cr.boundary.iter().filter(|&&b| b).count().max(1) as f64;
    Ok(flux.iter().zip(&ctx.cr.boundary).map(|(g, &b)| if b { g - total / nb } else { *g }).collect())
}

fn common_residuals(ctx: &Context, u: &[f64], fp: &FixedPoint, tol_fp: f64, f: &[V3], proj: &[V3], p: &[f64]) -> Result<Vec<Residual>> {
    let s = &ctx.s;
    let gp = s.scalar_grad_tet(&ctx.p1, p);
    let d: Vec<V3> = (0..s.nt()).map(|t| sub(proj[t], crate::vec3::add(f[t], gp[t]))).collect();
    let sc = vnorm(&fp.value).max(vnorm(&fp.w));
    Ok(vec![
        Residual { name: "fixed point".into(), value: rel(*fp.history.last().unwrap_or(&0.0), sc), tol: Some(tol_fp) },
        Residual { name: "divergence".into(), value: weak_div(ctx, u, false)?, tol: Some(1e-8) },
        Residual { name: "pressure identity".into(), value: rel(s.p0_norm(&d), s.p0_norm(f)), tol: Some(1e-10) },
    ])
}

/// Normal-curl and co-normal variants: Neumann scalar problem with face
/// fluxes `flux`, `P_nu` projection, tangential-zero div-curl solve.
fn normal_like(p: &MaxwellStokesProblem, flux: Vec<f64>, kind: BvpKind) -> Result<(MaxwellStokesSolution, Vec<V3>)> {
    let ctx = p.ctx;
    let s = &ctx.s;
    let law = &p.law;
    let g = centred_flux(ctx, &flux, p.params.tol_compat)?;
    let hhat = h1_p0(ctx, &p.h1_hat);
    let h1_load = s.edge_load(&QField::from_p0(&h1_p0(ctx, &p.h1)));
    let psi = RefCell::new(Vec::<f64>::new());
    let inner = |w: &[V3]| -> Result<(Vec<V3>, Vec<V3>)> {
        let drift = p0_add(w, &hhat);
        let prob = QuasilinearProblem {
            law,
            drift: QField::from_p0(&drift),
            data: BoundaryData::Neumann(g.clone()),
            params: p.params.scalar,
        };
        let guess = psi.borrow().clone();
        let sol = solve_with_guess(s, &ctx.cr, &prob, if guess.is_empty() { None } else { Some(&guess) })?;
        let y = p0_add(&drift, &s.scalar_grad_tet(&ctx.cr, &sol.phi));
        *psi.borrow_mut() = sol.phi;
        let b = b_tet(ctx, law, &y)?;
        Ok((y, b))
    };
    // load of P_nu[f] + h1 and the pressure
    let project = |b: &[V3]| -> Result<(Vec<V3>, Vec<V3>, Vec<f64>, Vec<f64>)> {
        let f = f_tet(ctx, &p.current, b);
        let pr = project_pnu(ctx, &QField::from_p0(&f))?;
        let mut load = s.edge_load(&pr.field);
        vaxpy(1.0, &h1_load, &mut load);
        Ok((f, ctx.p0_of(&pr.field), pr.potential, load))
    };
    let mut map = |wf: &[f64]| -> Result<Vec<f64>> {
        let (_, b) = inner(&unflat(wf))?;
        let (_, _, _, load) = project(&b)?;
        Ok(flat(&s.curl_tet(&ctx.tangential.solve(&load)?.x)))
    };
    let norm = |v: &[f64]| s.p0_norm(&unflat(v));
    let fp = picard_driver(&mut map, &p.start(), &p.fixed_point, &norm, p.current.constants().sublinear)?;
    let w = unflat(&fp.w);
    let (y, b) = inner(&w)?;
    let (f, proj, pres, load) = project(&b)?;
    let h2: Vec<f64> = ctx.basis.h2.iter().map(|e| s.p0_inner(&b, e)).collect();
    let z: Vec<V3> = b.iter().zip(&h2_p0(ctx, &h2)).map(|(a, c)| sub(*a, *c)).collect();
    let pot = vector_potential(ctx, &z, Gauge::NormalZero)?;
    let u = pot.u;

    let bfull = p0_add(&s.curl_tet(&u), &h2_p0(ctx, &h2));
    let cp = CurlProblem { ctx, sys: &ctx.tangential, law, offset: bfull.clone(), load: load.clone(), params: &p.params };
    let scale = hcurl_dual(ctx, &load)?.max(s.p0_norm(&h_tet(ctx, law, &bfull)));
    let weak = rel(cp.residual_norm(&vec![0.0; s.ne()])?, scale);
    let fg: Vec<V3> = p0_add(&f, &s.scalar_grad_tet(&ctx.p1, &pres));
    let pe = s.grad_load(&ctx.p1, &QField::from_p0(&fg));
    let pscale = vnorm(&s.grad_load(&ctx.p1, &QField::from_p0(&f)));
    let (mut fmax, mut fnorm) = (0.0f64, 0.0f64);
    for fc in s.boundary_faces() {
        let t = s.face_tets[fc][0];
        let d = s.face_area[fc] * dot(s.face_normal[fc], bfull[t]) - flux[fc];
        fmax = fmax.max(d.abs());
        fnorm = fnorm.max(flux[fc].abs()).max(s.face_area[fc] * crate::vec3::norm(bfull[t]));
    }
    let tol = p.params.tol.max(1e-8);
    let mut residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "pressure equation".into(), value: rel(vnorm(&pe), pscale), tol: Some(tol) },
        Residual { name: "boundary flux".into(), value: rel(fmax, fnorm), tol: Some(1e-8) },
        Residual { name: "potential".into(), value: pot.residual, tol: Some(1e-8) },
    ];
    residuals.extend(common_residuals(ctx, &u, &fp, p.fixed_point.tol_fp, &f, &proj, &pres)?);
    let sol = MaxwellStokesSolution {
        kind,
        u,
        p: pres,
        h1: p.h1.clone(),
        h1_hat: p.h1_hat.clone(),
        h2,
        h2_hat: vec![],
        w,
        history: fp.history,
        rate: fp.rate,
        residuals,
        warnings: fp.warnings,
    };
    Ok((sol, y))
}

/// Normal-curl variant; `h2` is the closure making `curl u = B - h2`
/// orthogonal to `H2`.
pub fn solve_ms_normal_curl(p: &MaxwellStokesProblem) -> Result<MaxwellStokesSolution> {
    p.validate()?;
    let BoundaryDatum::NormalCurl(bn) = &p.datum else {
        return Err(Error::Parameter("the normal-curl variant needs B0_n data".into()));
    };
    let flux = p.ctx.s.boundary_face_integrals(|x, nu| bn(x, nu));
    Ok(normal_like(p, flux, BvpKind::NormalCurl)?.0)
}

/// Co-normal variant: the scalar problem carries `nu . B(H0)`.
pub fn solve_ms_conormal(p: &MaxwellStokesProblem) -> Result<MaxwellStokesSolution> {
    p.validate()?;
    let BoundaryDatum::CoNormal(h0) = &p.datum else {
        return Err(Error::Parameter("the co-normal variant needs H0 data".into()));
    };
    let ctx = p.ctx;
    let s = &ctx.s;
    require_trace(ctx, &p.law, p.params.trace_normals, "normal trace")?;
    let err = RefCell::new(None);
    let flux = s.boundary_face_integrals(|x, nu| match p.law.b(x, h0(x)) {
        Ok(b) => dot(nu, b),
        Err(e) => {
            *err.borrow_mut() = Some(e);
            0.0
        }
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let (mut sol, y) = normal_like(p, flux, BvpKind::CoNormal)?;
    let (mut worst, mut hmax) = (0.0f64, 0.0f64);
    for f in s.boundary_faces() {
        let t = s.face_tets[f][0];
        let nu = s.face_normal[f];
        let hn = s.face_midpoints(f).iter().map(|&x| dot(nu, h0(x))).sum::<f64>() / 3.0;
        hmax = hmax.max(hn.abs());
        worst = worst.max((dot(nu, y[t]) - hn).abs());
    }
    sol.residuals.push(Residual { name: "co-normal trace".into(), value: worst / hmax.max(1.0), tol: None });
    Ok(sol)
}

/// Natural variant. For each trial `h2_hat` a Picard iteration runs with the
/// unique `h1` that makes the div-curl right side compatible; the outer root
/// solve enforces that the `H2` part of `B` equals the given `h2`.
pub fn solve_ms_natural(p: &MaxwellStokesProblem) -> Result<MaxwellStokesSolution> {
    p.validate()?;
    let BoundaryDatum::Natural(h0) = &p.datum else {
        return Err(Error::Parameter("the natural variant needs H0 data".into()));
    };
    let ctx = p.ctx;
    let s = &ctx.s;
    let law = &p.law;
    let (n, m) = (ctx.basis.n(), ctx.basis.m());
    let pairing = ctx.tangential_pairing_n(|x, nu| tangential(h0(x), nu));
    let ct = curl_trace_of(ctx, |x| h0(x));
    let e_loads: Vec<Vec<f64>> = ctx.basis.h1.iter().map(|e| s.edge_load(&QField::from_p0(e))).collect();
    let gram = DMatrix::from_fn(n, n, |k, j| vdot(&e_loads[j], &ctx.basis.h1_edge[k]));
    let gram_lu = gram.lu();
    let zero = vec![0.0; s.nf()];

    struct Step {
        f: Vec<V3>,
        proj: Vec<V3>,
        pres: Vec<f64>,
        h1: Vec<f64>,
        load: Vec<f64>,
        h1_defect: f64,
    }
    let psi = RefCell::new(Vec::<f64>::new());
    let inner = |w: &[V3], h2hat: &[f64]| -> Result<(Vec<V3>, Vec<V3>)> {
        let drift = p0_add(w, &h2_p0(ctx, h2hat));
        let prob = QuasilinearProblem {
            law,
            drift: QField::from_p0(&drift),
            data: BoundaryData::Dirichlet(zero.clone()),
            params: p.params.scalar,
        };
        let guess = psi.borrow().clone();
        let sol = solve_with_guess(s, &ctx.cr, &prob, if guess.is_empty() { None } else { Some(&guess) })?;
        let y = p0_add(&drift, &s.scalar_grad_tet(&ctx.cr, &sol.phi));
        *psi.borrow_mut() = sol.phi;
        let b = b_tet(ctx, law, &y)?;
        Ok((y, b))
    };
    let step = |b: &[V3]| -> Result<Step> {
        let f = f_tet(ctx, &p.current, b);
        let pr = project_pn(ctx, &QField::from_p0(&f), &ct)?;
        let mut load = s.edge_load(&pr.field);
        vaxpy(-1.0, &pairing, &mut load);
        let mut h1 = vec![0.0; n];
        if n > 0 {
            let rhs = DVector::from_fn(n, |k, _| -vdot(&load, &ctx.basis.h1_edge[k]));
            let c = gram_lu.solve(&rhs).ok_or_else(|| Error::Undefined("singular H1 Gram matrix".into()))?;
            for (j, el) in e_loads.iter().enumerate() {
                h1[j] = c[j];
                vaxpy(c[j], el, &mut load);
            }
        }
        let sc = load.iter().map(|v| v.abs()).sum::<f64>();
        let h1_defect = ctx.basis.h1_edge.iter().fold(0.0f64, |a, y| a.max(rel(vdot(&load, y).abs(), sc)));
        Ok(Step { f, proj: ctx.p0_of(&pr.field), pres: pr.potential, h1, load, h1_defect })
    };
    let norm = |v: &[f64]| s.p0_norm(&unflat(v));
    let sublinear = p.current.constants().sublinear;
    let last_w = RefCell::new(p.start());
    let picard = |h2hat: &[f64]| -> Result<FixedPoint> {
        let mut map = |wf: &[f64]| -> Result<Vec<f64>> {
            let (_, b) = inner(&unflat(wf), h2hat)?;
            let st = step(&b)?;
            Ok(flat(&s.curl_tet(&ctx.normal.solve(&st.load)?.x)))
        };
        let start = last_w.borrow().clone();
        let fp = picard_driver(&mut map, &start, &p.fixed_point, &norm, sublinear)?;
        *last_w.borrow_mut() = fp.w.clone();
        Ok(fp)
    };

    let h2_norm = p.h2.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (h2hat, outer) = if m == 0 {
        (vec![], None)
    } else {
        let scale = h2_norm + 1.0;
        let opts = XiOptions {
            tol: p.params.xi_tol * scale,
            budget: p.params.xi_budget,
            r_hint: p.params.r_hint.max(h2_norm),
            r_max: (4.0 * scale / law.b_monotone_bounds().0).max(p.params.r_hint) * 10.0,
        };
        let mut closure = |h2hat: &[f64]| -> Result<Vec<f64>> {
            let fp = picard(h2hat)?;
            let (_, b) = inner(&unflat(&fp.w), h2hat)?;
            Ok(ctx.basis.h2.iter().zip(&p.h2).map(|(e, c)| s.p0_inner(&b, e) - c).collect())
        };
        let out = solve_xi_system(m, &mut closure, &opts)?;
        let r = out.residual / scale;
        (out.xi, Some(r))
    };
    let fp = picard(&h2hat)?;
    let w = unflat(&fp.w);
    let (_, b) = inner(&w, &h2hat)?;
    let st = step(&b)?;
    let closure: Vec<f64> = ctx.basis.h2.iter().map(|e| s.p0_inner(&b, e)).collect();
    let z: Vec<V3> = b.iter().zip(&h2_p0(ctx, &p.h2)).map(|(a, c)| sub(*a, *c)).collect();
    let pot = vector_potential(ctx, &z, Gauge::NormalZero)?;
    let u = pot.u;

    // all-edge weak form with the boundary term
    let bfull = p0_add(&s.curl_tet(&u), &h2_p0(ctx, &p.h2));
    let hfull = h_tet(ctx, law, &bfull);
    let mut r = s.curl_load(&QField::from_p0(&hfull));
    vaxpy(-1.0, &st.load, &mut r);
    let scale = hcurl_dual(ctx, &st.load)?.max(s.p0_norm(&hfull));
    let weak = rel(hcurl_dual(ctx, &r)?, scale);
    let fg = p0_add(&st.f, &s.scalar_grad_tet(&ctx.p1, &st.pres));
    let mut pe = s.grad_load(&ctx.p1, &QField::from_p0(&fg));
    vaxpy(-1.0, &ct, &mut pe);
    let pscale = vnorm(&s.grad_load(&ctx.p1, &QField::from_p0(&st.f))).max(vnorm(&ct));
    let cdef = closure.iter().zip(&p.h2).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt();
    let tol = p.params.tol.max(1e-8);
    let mut residuals = vec![
        Residual { name: "weak form".into(), value: weak, tol: Some(10.0 * tol) },
        Residual { name: "pressure equation".into(), value: rel(vnorm(&pe), pscale), tol: Some(tol) },
        Residual { name: "H1 compatibility".into(), value: st.h1_defect, tol: Some(1e-8) },
        Residual { name: "H2 closure".into(), value: rel(cdef, h2_norm.max(1.0)), tol: Some(p.params.xi_tol.max(1e-9) * 10.0) },
        Residual { name: "potential".into(), value: pot.residual, tol: Some(1e-8) },
    ];
    if let Some(r) = outer {
        residuals.push(Residual { name: "outer root".into(), value: r, tol: Some(p.params.xi_tol) });
    }
    residuals.extend(common_residuals(ctx, &u, &fp, p.fixed_point.tol_fp, &st.f, &st.proj, &st.pres)?);
    Ok(MaxwellStokesSolution {
        kind: BvpKind::Natural,
        u,
        p: st.pres,
        h1: st.h1,
        h1_hat: vec![],
        h2: p.h2.clone(),
        h2_hat: h2hat,
        w,
        history: fp.history,
        rate: fp.rate,
        residuals,
        warnings: fp.warnings,
    })
}

/// Dispatch on the boundary datum.
pub fn solve_ms(p: &MaxwellStokesProblem) -> Result<MaxwellStokesSolution> {
    match p.datum {
        BoundaryDatum::NormalCurl(_) => solve_ms_normal_curl(p),
        BoundaryDatum::Natural(_) => solve_ms_natural(p),
        BoundaryDatum::CoNormal(_) => solve_ms_conormal(p),
        _ => Err(Error::Parameter(format!("no Maxwell-Stokes variant for {:?} data", p.datum.kind()))),
    }
}
