//! Given-current boundary value problems for
//! `curl[H(x, curl u + h2)] = J + h1`, `div u = 0` with one of five boundary
//! conditions: tangential trace of `u`, tangential or normal trace of the
//! curl, tangential or normal trace of `H`.
//!
//! Two routes are available for the Dirichlet problem. The monotone route
//! iterates directly on the constrained edge space; the reduction route goes
//! through a scalar problem for `div B(x, j0 + h1' + grad phi) = 0`, a small
//! root solve for the `H1` coefficients and a vector potential. The other
//! four problems use the reduction pipeline (normal curl, co-normal,
//! tangential curl) or the monotone route on the natural space.

mod compat;
mod dirichlet;
mod fields;
mod graph;
pub(crate) mod monotone;
mod normal;
mod tangential;
mod xi;

pub use compat::{check_compatibility, CompatibilityReport};
pub use dirichlet::{
    solve_dirichlet_monotone, solve_dirichlet_monotone_from, solve_dirichlet_reduction, solve_dirichlet_reduction_from, xi_residual_map, XiMap,
};
pub use fields::{recover_fields, Permittivity, RecoveredFields};
pub use graph::{integrate_tangential_gradient, BoundaryPotential};
pub use xi::{solve_xi_system, XiOptions, XiOutcome};
pub use normal::{solve_conormal_bvp, solve_natural, solve_normal_curl};
pub use tangential::solve_tangential_curl;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::constitutive::{check_conditions, MaterialLaw, SampleSpec};
use crate::decomp::{current_defect, Context};
use crate::fem::{solve_csr, QField};
use crate::scalar::SolverParams;
use crate::vec3::{add, vdot, V3};
use crate::{Error, Result};

/// Vector-valued data `x -> v(x)`.
pub type VecFn = Arc<dyn Fn(V3) -> V3 + Send + Sync>;
/// Scalar boundary data `(x, nu) -> g`.
pub type FluxFn = Arc<dyn Fn(V3, V3) -> f64 + Send + Sync>;

/// Applied current.
#[derive(Clone, Debug, Default)]
pub enum Current {
    #[default]
    Zero,
    /// Values at quadrature points.
    Field(QField),
    /// Edge coefficients; the load is `M_e J`.
    Edge(Vec<f64>),
    /// A functional on the edge space, `w_e -> int J . w_e`.
    Load(Vec<f64>),
}

impl Current {
    /// `int J . w_e` on every edge.
    pub fn load(&self, ctx: &Context) -> Result<Vec<f64>> {
        let ne = ctx.s.ne();
        let l = match self {
            Current::Zero => vec![0.0; ne],
            Current::Field(q) => {
                if q.len() != 4 * ctx.s.nt() {
                    return Err(Error::Dimension(format!("current has {} quadrature values", q.len())));
                }
                ctx.s.edge_load(q)
            }
            Current::Edge(x) => ctx.me.matvec(check_len(x, ne)?),
            Current::Load(l) => check_len(l, ne)?.to_vec(),
        };
        Ok(l)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Current::Zero => true,
            Current::Field(q) => q.max_abs() == 0.0,
            Current::Edge(x) | Current::Load(x) => x.iter().all(|&v| v == 0.0),
        }
    }

    /// Quadrature values when the current is a field.
    pub fn qfield(&self, ctx: &Context) -> Option<QField> {
        match self {
            Current::Zero => Some(QField::zeros(ctx.s.nt())),
            Current::Field(q) => Some(q.clone()),
            Current::Edge(x) => Some(ctx.s.edge_to_q(x)),
            Current::Load(_) => None,
        }
    }
}

impl std::fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BoundaryDatum::Dirichlet(_) => "Dirichlet(u0)",
            BoundaryDatum::TangentialCurl(_) => "TangentialCurl(B0)",
            BoundaryDatum::NormalCurl(_) => "NormalCurl(B0_n)",
            BoundaryDatum::Natural(_) => "Natural(H0)",
            BoundaryDatum::CoNormal(_) => "CoNormal(H0)",
        })
    }
}

fn check_len(x: &[f64], n: usize) -> Result<&[f64]> {
    if x.len() != n {
        return Err(Error::Dimension(format!("{} edge values for {} edges", x.len(), n)));
    }
    Ok(x)
}

/// The boundary condition and its data. Only the relevant trace of each
/// field is used.
#[derive(Clone)]
pub enum BoundaryDatum {
    /// `u_T = u0_T`.
    Dirichlet(VecFn),
    /// `nu x curl u = nu x B0`.
    TangentialCurl(VecFn),
    /// `nu . (curl u + h2) = B0_n`.
    NormalCurl(FluxFn),
    /// `nu x H(curl u + h2) = nu x H0`.
    Natural(VecFn),
    /// `nu . H(curl u + h2) = nu . H0`, with `H0` any extension of the normal data.
    CoNormal(VecFn),
}

impl BoundaryDatum {
    pub fn kind(&self) -> BvpKind {
        match self {
            BoundaryDatum::Dirichlet(_) => BvpKind::Dirichlet,
            BoundaryDatum::TangentialCurl(_) => BvpKind::TangentialCurl,
            BoundaryDatum::NormalCurl(_) => BvpKind::NormalCurl,
            BoundaryDatum::Natural(_) => BvpKind::Natural,
            BoundaryDatum::CoNormal(_) => BvpKind::CoNormal,
        }
    }

    pub fn zero(kind: BvpKind) -> Self {
        let z: VecFn = Arc::new(|_| [0.0; 3]);
        match kind {
            BvpKind::Dirichlet => BoundaryDatum::Dirichlet(z),
            BvpKind::TangentialCurl => BoundaryDatum::TangentialCurl(z),
            BvpKind::NormalCurl => BoundaryDatum::NormalCurl(Arc::new(|_, _| 0.0)),
            BvpKind::Natural => BoundaryDatum::Natural(z),
            BvpKind::CoNormal => BoundaryDatum::CoNormal(z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BvpKind {
    Dirichlet,
    TangentialCurl,
    NormalCurl,
    Natural,
    CoNormal,
}

impl std::str::FromStr for BvpKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dirichlet" => BvpKind::Dirichlet,
            "tangential_curl" => BvpKind::TangentialCurl,
            "normal_curl" => BvpKind::NormalCurl,
            "natural" => BvpKind::Natural,
            "co_normal" | "conormal" => BvpKind::CoNormal,
            _ => return Err(Error::Config(format!("unknown problem kind '{s}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvpParams {
    /// Relative tolerance of the nonlinear curl iteration.
    pub tol: f64,
    pub max_iter: usize,
    /// Newton is tried below this relative residual; 1 means from the start.
    pub newton_switch: f64,
    pub newton: bool,
    /// Relative tolerance of discrete compatibility identities.
    pub tol_compat: f64,
    /// Relative tolerance of the current membership test.
    pub tol_membership: f64,
    /// Inner scalar solves.
    pub scalar: SolverParams,
    /// Relative tolerance of the harmonic-coefficient root solve.
    pub xi_tol: f64,
    /// Residual-map evaluations allowed in the root solve.
    pub xi_budget: usize,
    /// Initial ball radius of the root solve.
    pub r_hint: f64,
    /// Boundary normals sampled for the trace conditions on `H`.
    pub trace_normals: usize,
}

impl Default for BvpParams {
    fn default() -> Self {
        BvpParams {
            tol: 1e-9,
            max_iter: 200,
            newton_switch: 1.0,
            newton: true,
            tol_compat: 1e-8,
            tol_membership: 1e-8,
            scalar: SolverParams { tol: 1e-11, ..SolverParams::default() },
            xi_tol: 1e-9,
            xi_budget: 200,
            r_hint: 1.0,
            trace_normals: 64,
        }
    }
}

/// A given-current problem on an assembled mesh context.
#[derive(Clone, Debug)]
pub struct GivenCurrentProblem<'a> {
    pub ctx: &'a Context,
    pub law: MaterialLaw,
    pub current: Current,
    /// Coefficients in the `H1` basis.
    pub h1: Vec<f64>,
    /// Coefficients in the `H2` basis; an input for the Dirichlet and natural
    /// problems and compared against the computed one elsewhere.
    pub h2: Vec<f64>,
    pub datum: BoundaryDatum,
    pub params: BvpParams,
}

impl<'a> GivenCurrentProblem<'a> {
    pub fn new(ctx: &'a Context, law: MaterialLaw, datum: BoundaryDatum) -> Self {
        GivenCurrentProblem {
            ctx,
            law,
            current: Current::Zero,
            h1: vec![0.0; ctx.basis.n()],
            h2: vec![0.0; ctx.basis.m()],
            datum,
            params: BvpParams::default(),
        }
    }

    pub fn with_current(mut self, j: Current) -> Self {
        self.current = j;
        self
    }

    pub fn with_h1(mut self, c: Vec<f64>) -> Self {
        self.h1 = c;
        self
    }

    pub fn with_h2(mut self, c: Vec<f64>) -> Self {
        self.h2 = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.law.validate()?;
        let b = &self.ctx.basis;
        if self.h1.len() != b.n() || self.h2.len() != b.m() {
            return Err(Error::Dimension(format!(
                "harmonic coefficients ({}, {}) for dimensions ({}, {})",
                self.h1.len(),
                self.h2.len(),
                b.n(),
                b.m()
            )));
        }
        if self.h1.iter().chain(&self.h2).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("non-finite harmonic coefficient".into()));
        }
        Ok(())
    }

    /// Edge load of `J + h1`.
    pub fn load(&self) -> Result<Vec<f64>> {
        let mut l = self.current.load(self.ctx)?;
        if self.h1.iter().any(|&c| c != 0.0) {
            let h = QField::from_p0(&h1_p0(self.ctx, &self.h1));
            crate::vec3::vaxpy(1.0, &self.ctx.s.edge_load(&h), &mut l);
        }
        Ok(l)
    }

    /// Relative membership defect of `J` in the div-free, zero-flux class.
    pub fn membership_defect(&self) -> Result<f64> {
        match self.current.qfield(self.ctx) {
            Some(q) => current_defect(self.ctx, &q),
            None => load_defect(self.ctx, &self.current.load(self.ctx)?),
        }
    }

    pub(crate) fn require_membership(&self) -> Result<f64> {
        let d = self.membership_defect()?;
        if d > self.params.tol_membership {
            return Err(Error::Compatibility { condition: "current membership (div J = 0, zero flux per component)".into(), margin: d });
        }
        Ok(d)
    }
}

/// Membership defect of a current given only as an edge functional:
/// interior weak divergence and `H2` pairings relative to the dual norm.
pub fn load_defect(ctx: &Context, l: &[f64]) -> Result<f64> {
    let s = &ctx.s;
    let nl = {
        let x = solve_csr(&ctx.me, l, 1e-12, None)?.x;
        vdot(&x, l).max(0.0).sqrt()
    };
    if nl == 0.0 {
        return Ok(0.0);
    }
    let gt = s.grad_op.tmatvec(l);
    let free = ctx.p1.free_dofs(true);
    let mut acc = 0.0;
    if !free.is_empty() {
        let r: Vec<f64> = free.iter().map(|&i| gt[i]).collect();
        let x = solve_csr(&ctx.k_p1.submatrix(&free, &free), &r, 1e-12, None)?.x;
        acc += vdot(&x, &r).max(0.0);
    }
    for y in &ctx.basis.h2_edge {
        let c = vdot(l, y);
        acc += c * c;
    }
    Ok(acc.sqrt() / nl)
}

/// Replace `J` by its closest member of the div-free, zero-flux class:
/// `J + grad phi` with `phi` constant on each boundary component.
pub fn project_current(ctx: &Context, j: &QField) -> Result<QField> {
    let s = &ctx.s;
    let r: Vec<f64> = s.grad_load(&ctx.p1, j).iter().map(|v| -v).collect();
    let zero = vec![0.0; s.nv()];
    let phi0 = crate::fem::solve_with_dirichlet(&ctx.k_p1, &r, &s.bnd_vertex, &zero, &ctx.p1.weights, 1e-12)?;
    let mut out = j.add(&s.scalar_grad_q(&ctx.p1, &phi0));
    let etas = crate::harmonic::harmonic_potentials(s)?;
    if !etas.is_empty() {
        let m = etas.len();
        let ke: Vec<Vec<f64>> = etas.iter().map(|e| ctx.k_p1.matvec(e)).collect();
        let a = nalgebra::DMatrix::from_fn(m, m, |i, k| vdot(&ke[k], &etas[i]));
        let gl = s.grad_load(&ctx.p1, &out);
        let b = nalgebra::DVector::from_fn(m, |i, _| -vdot(&gl, &etas[i]));
        let c = a.lu().solve(&b).ok_or_else(|| Error::Undefined("singular harmonic potential Gram matrix".into()))?;
        for (k, e) in etas.iter().enumerate() {
            out.axpy(c[k], &s.scalar_grad_q(&ctx.p1, e));
        }
    }
    Ok(out)
}

/// Residual diagnostic with the tolerance it was judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    /// `None` for quantities reported at discretization level only.
    pub tol: Option<f64>,
}

impl Residual {
    pub fn pass(&self) -> bool {
        self.tol.is_none_or(|t| self.value <= t)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BvpSolution {
    pub kind: BvpKind,
    /// Edge coefficients of `u`.
    pub u: Vec<f64>,
    /// `H1` coefficients used in the constitutive argument (`h1'` or `h1^0`).
    pub h1: Vec<f64>,
    /// `H2` coefficients, given or computed.
    pub h2: Vec<f64>,
    /// Crouzeix-Raviart potential of the reduction, when one was solved.
    pub phi: Vec<f64>,
    /// Relative norm of the De Rham multiplier of the load.
    pub multiplier: f64,
    /// `|h2_input - h2_computed|` when the problem determines `h2`.
    pub h2_discrepancy: Option<f64>,
    pub residuals: Vec<Residual>,
    /// Relative residual per outer iteration.
    pub history: Vec<f64>,
    /// Tolerance class in force.
    pub tolerance: String,
}

impl BvpSolution {
    pub fn residual(&self, name: &str) -> Option<f64> {
        self.residuals.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn all_pass(&self) -> bool {
        self.residuals.iter().all(Residual::pass)
    }

    /// `curl u + h2` per tetrahedron.
    pub fn induction(&self, ctx: &Context) -> Vec<V3> {
        let h2 = h2_p0(ctx, &self.h2);
        ctx.s.curl_tet(&self.u).iter().zip(&h2).map(|(a, b)| add(*a, *b)).collect()
    }

    pub fn history_csv(&self) -> String {
        let mut s = String::from("iteration,residual\n");
        for (i, r) in self.history.iter().enumerate() {
            s.push_str(&format!("{i},{r:.17e}\n"));
        }
        s
    }
}

/// Solve by dispatching on the boundary datum; the Dirichlet problem uses the
/// monotone route.
pub fn solve(p: &GivenCurrentProblem) -> Result<BvpSolution> {
    match p.datum {
        BoundaryDatum::Dirichlet(_) => solve_dirichlet_monotone(p),
        BoundaryDatum::TangentialCurl(_) => solve_tangential_curl(p, None),
        BoundaryDatum::NormalCurl(_) => solve_normal_curl(p, None),
        BoundaryDatum::Natural(_) => solve_natural(p),
        BoundaryDatum::CoNormal(_) => solve_conormal_bvp(p, None),
    }
}

pub(crate) fn h1_p0(ctx: &Context, c: &[f64]) -> Vec<V3> {
    let mut out = vec![[0.0; 3]; ctx.s.nt()];
    for (f, &ci) in ctx.basis.h1.iter().zip(c) {
        crate::vec3::vaxpy3(ci, f, &mut out);
    }
    out
}

pub(crate) fn h2_p0(ctx: &Context, c: &[f64]) -> Vec<V3> {
    let mut out = vec![[0.0; 3]; ctx.s.nt()];
    for (f, &ci) in ctx.basis.h2.iter().zip(c) {
        crate::vec3::vaxpy3(ci, f, &mut out);
    }
    out
}

pub(crate) fn p0_add(a: &[V3], b: &[V3]) -> Vec<V3> {
    a.iter().zip(b).map(|(x, y)| add(*x, *y)).collect()
}

/// `H(x, z)` per tetrahedron at the centroid.
pub(crate) fn h_tet(ctx: &Context, law: &MaterialLaw, z: &[V3]) -> Vec<V3> {
    crate::constitutive::par_map(z.len(), |t| law.h(ctx.s.tet_centroid(t), z[t]))
}

/// `B(x, w)` per tetrahedron at the centroid.
pub(crate) fn b_tet(ctx: &Context, law: &MaterialLaw, w: &[V3]) -> Result<Vec<V3>> {
    crate::constitutive::par_map(w.len(), |t| law.b(ctx.s.tet_centroid(t), w[t])).into_iter().collect()
}

/// Distinct outward normals of boundary faces, at most `k`, in mesh order.
pub(crate) fn boundary_normals(ctx: &Context, k: usize) -> Vec<V3> {
    let mut out: Vec<V3> = Vec::new();
    for f in ctx.s.boundary_faces() {
        let n = ctx.s.face_normal[f];
        if out.iter().all(|m| crate::vec3::norm(crate::vec3::sub(*m, n)) > 1e-6) {
            out.push(n);
        }
    }
    if out.len() > k && k > 0 {
        let step = out.len() as f64 / k as f64;
        out = (0..k).map(|i| out[(i as f64 * step) as usize]).collect();
    }
    out
}

/// Sampled trace condition on the boundary normals of the mesh.
pub(crate) fn require_trace_condition(p: &GivenCurrentProblem, id: &str) -> Result<()> {
    require_trace(p.ctx, &p.law, p.params.trace_normals, id)
}

pub(crate) fn require_trace(ctx: &Context, law: &MaterialLaw, k: usize, id: &str) -> Result<()> {
    let normals = boundary_normals(ctx, k);
    let rep = check_conditions(law, &SampleSpec { points: 200, ..SampleSpec::default() }, &normals);
    match rep.get(id) {
        Some(r) if !r.pass => Err(Error::Compatibility { condition: id.to_string(), margin: r.margin }),
        _ => Ok(()),
    }
}

/// Relative weak divergence of an edge field against the given nodes.
pub(crate) fn weak_div(ctx: &Context, u: &[f64], interior_only: bool) -> Result<f64> {
    let s = &ctx.s;
    let nu = ctx.edge_inner(u, u).max(0.0).sqrt();
    if nu == 0.0 {
        return Ok(0.0);
    }
    let r = s.grad_op.tmatvec(&ctx.me.matvec(u));
    let free = ctx.p1.free_dofs(interior_only);
    if free.is_empty() {
        return Ok(0.0);
    }
    let mut rf: Vec<f64> = free.iter().map(|&i| r[i]).collect();
    let k = ctx.k_p1.submatrix(&free, &free);
    let w = if interior_only { None } else { Some(&ctx.p1.weights[..]) };
    if !interior_only {
        crate::fem::center(&mut rf);
    }
    let x = solve_csr(&k, &rf, 1e-12, w)?.x;
    Ok(vdot(&x, &rf).max(0.0).sqrt() / nu)
}

/// Dual norm of an edge functional in `H(curl)`, relative to `scale`.
pub(crate) fn hcurl_dual(ctx: &Context, r: &[f64]) -> Result<f64> {
    let a = ctx.me.add_scaled(1.0, &ctx.s.curl_curl(crate::fem::Coeff::One));
    let x = solve_csr(&a, r, 1e-12, None)?.x;
    Ok(vdot(&x, r).max(0.0).sqrt())
}
