//! Structured compatibility diagnostics for the given-current problems.

use serde::Serialize;

use crate::constitutive::{check_conditions, ConditionResult, SampleSpec};
use crate::decomp::divfree_extension;
use crate::vec3::{dot, tangential};
use crate::Result;

use super::{boundary_normals, BoundaryDatum, BvpKind, GivenCurrentProblem};

#[derive(Debug, Clone, Serialize)]
pub struct CompatibilityReport {
    pub kind: BvpKind,
    pub results: Vec<ConditionResult>,
}

impl CompatibilityReport {
    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.id == id)
    }

    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.pass).map(|r| r.id.as_str()).collect()
    }
}

fn verdict(id: &str, defect: f64, tol: f64) -> ConditionResult {
    ConditionResult { id: id.into(), pass: defect <= tol, margin: tol - defect, witness: None }
}

/// Evaluate every discrete condition that applies to the problem's boundary
/// datum. Failures are reported, not raised; errors only come from the
/// underlying linear solves.
pub fn check_compatibility(p: &GivenCurrentProblem) -> Result<CompatibilityReport> {
    p.validate()?;
    let ctx = p.ctx;
    let s = &ctx.s;
    let tol = p.params.tol_compat;
    let mut results = vec![verdict("current membership", p.membership_defect()?, p.params.tol_membership)];
    let trace = |id: &str| -> ConditionResult {
        let normals = boundary_normals(ctx, p.params.trace_normals);
        let rep = check_conditions(&p.law, &SampleSpec { points: 200, ..SampleSpec::default() }, &normals);
        rep.get(id).cloned().unwrap_or(ConditionResult { id: id.into(), pass: true, margin: 0.0, witness: None })
    };
    let total_flux = |flux: &[f64]| -> ConditionResult {
        let t: f64 = flux.iter().sum();
        let sc = flux.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        verdict("total flux", t.abs() / sc, tol)
    };
    match &p.datum {
        BoundaryDatum::Dirichlet(f) => {
            let mut u0 = s.interpolate_edges(|x| f(x));
            for (e, v) in u0.iter_mut().enumerate() {
                if !s.bnd_edge[e] {
                    *v = 0.0;
                }
            }
            let ok = divfree_extension(ctx, &u0).is_ok_and(|e| e.u.iter().all(|v| v.is_finite()));
            let r = |id: &str| ConditionResult { id: id.into(), pass: ok, margin: if ok { 0.0 } else { -1.0 }, witness: None };
            results.push(r("dirichlet extension"));
            // sufficient test only: a divergence-free extension exists
            results.push(r("curl trace image"));
        }
        BoundaryDatum::TangentialCurl(_) => {
            results.push(trace("tangential trace"));
            let st = super::tangential::setup(p, None)?;
            results.push(verdict("normal current trace", st.normal_trace, tol));
            results.push(verdict("boundary circulation", st.circulation, tol));
        }
        BoundaryDatum::NormalCurl(bn) => {
            results.push(total_flux(&s.boundary_face_integrals(|x, nu| bn(x, nu))));
        }
        BoundaryDatum::CoNormal(h0) => {
            results.push(trace("normal trace"));
            let flux = s.boundary_face_integrals(|x, nu| p.law.b(x, h0(x)).map_or(f64::NAN, |b| dot(nu, b)));
            results.push(total_flux(&flux));
        }
        BoundaryDatum::Natural(h0) => {
            let load = p.load()?;
            let pairing = ctx.tangential_pairing_n(|x, nu| tangential(h0(x), nu));
            let (node, harm) = super::normal::natural_margins(p, &load, &pairing);
            results.push(verdict("natural normal trace", node, tol));
            results.push(verdict("natural H1 pairing", harm, tol));
        }
    }
    Ok(CompatibilityReport { kind: p.datum.kind(), results })
}
