//! Physical fields from a potential pair `(u, p)`.

use serde::Serialize;

use crate::constitutive::MaterialLaw;
use crate::decomp::Context;
use crate::fem::{mat_vec, solve_csr, Mat3, QField};
use crate::vec3::{add, scale, vnorm, V3};
use crate::{Error, Result};

use super::{h1_p0, h2_p0};

/// Permittivity, constant or one symmetric positive definite matrix per
/// tetrahedron.
#[derive(Debug, Clone)]
pub enum Permittivity {
    Scalar(f64),
    Tensor(Vec<Mat3>),
}

#[derive(Debug, Clone, Serialize)]
pub struct RecoveredFields {
    pub e: Vec<V3>,
    pub b: Vec<V3>,
    pub h: Vec<V3>,
    /// Nodal charge density, the mass-matrix representative of
    /// `eta -> -int (eps/sigma)(grad p + h1) . grad eta`.
    pub rho: Vec<f64>,
    pub j: Vec<V3>,
    /// Relative weak residual of `div[(eps/sigma)(grad p + h1)] = rho`
    /// against every nodal test.
    pub charge_residual: f64,
    /// Relative weak residual of `-div j_a = (sigma/eps) rho`, for scalar
    /// permittivity and a given `j_a`.
    pub source_residual: Option<f64>,
}

/// `E = (grad p + h1)/sigma`, `B = curl u + h2`, `H = H(B)`, the charge
/// density and `j = j_a + sigma E`. `p` is nodal, `j_a` per tetrahedron.
#[allow(clippy::too_many_arguments)]
pub fn recover_fields(
    ctx: &Context,
    u: &[f64],
    p: &[f64],
    h1: &[f64],
    h2: &[f64],
    sigma: f64,
    eps: &Permittivity,
    law: &MaterialLaw,
    ja: Option<&[V3]>,
) -> Result<RecoveredFields> {
    let s = &ctx.s;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("conductivity must be positive, got {sigma}")));
    }
    match eps {
        Permittivity::Scalar(e) if !(*e > 0.0) => {
            return Err(Error::Parameter(format!("permittivity must be positive, got {e}")));
        }
        Permittivity::Tensor(m) if m.len() != s.nt() => {
            return Err(Error::Dimension(format!("{} permittivity tensors for {} tetrahedra", m.len(), s.nt())));
        }
        _ => {}
    }
    if u.len() != s.ne() || p.len() != s.nv() {
        return Err(Error::Dimension("u must be an edge field and p a nodal field".into()));
    }
    let gp = s.scalar_grad_tet(&ctx.p1, p);
    let h1f = h1_p0(ctx, h1);
    let se: Vec<V3> = gp.iter().zip(&h1f).map(|(a, b)| add(*a, *b)).collect();
    let e: Vec<V3> = se.iter().map(|v| scale(1.0 / sigma, *v)).collect();
    let b: Vec<V3> = s.curl_tet(u).iter().zip(&h2_p0(ctx, h2)).map(|(a, c)| add(*a, *c)).collect();
    let h = super::h_tet(ctx, law, &b);
    let d: Vec<V3> = match eps {
        Permittivity::Scalar(ep) => se.iter().map(|v| scale(ep / sigma, *v)).collect(),
        Permittivity::Tensor(m) => se.iter().zip(m).map(|(v, a)| scale(1.0 / sigma, mat_vec(a, *v))).collect(),
    };
    let r: Vec<f64> = s.grad_load(&ctx.p1, &QField::from_p0(&d)).iter().map(|v| -v).collect();
    let mass = s.nodal_mass();
    let rho = solve_csr(&mass, &r, 1e-13, None)?.x;
    let mr = mass.matvec(&rho);
    let rn = vnorm(&r);
    let charge_residual = if rn == 0.0 { 0.0 } else { r.iter().zip(&mr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / rn };
    let (j, source_residual) = match ja {
        Some(ja) => {
            if ja.len() != s.nt() {
                return Err(Error::Dimension(format!("{} current values for {} tetrahedra", ja.len(), s.nt())));
            }
            let j = ja.iter().zip(&se).map(|(a, b)| add(*a, *b)).collect();
            let res = match eps {
                Permittivity::Scalar(ep) => {
                    let lj = s.grad_load(&ctx.p1, &QField::from_p0(ja));
                    let rhs: Vec<f64> = mr.iter().map(|v| v * sigma / ep).collect();
                    let diff: Vec<f64> = lj.iter().zip(&rhs).map(|(a, b)| a - b).collect();
                    let sc = vnorm(&lj).max(vnorm(&rhs)).max(f64::MIN_POSITIVE);
                    Some(vnorm(&diff) / sc)
                }
                Permittivity::Tensor(_) => None,
            };
            (j, res)
        }
        None => (se.clone(), None),
    };
    Ok(RecoveredFields { e, b, h, rho, j, charge_residual, source_residual })
}
