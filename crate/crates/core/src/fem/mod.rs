//! Finite element spaces, assembly and linear solvers.

mod assembly;
mod cg;
mod sparse;
mod spaces;

pub use assembly::Coeff;
pub use cg::{pcg, solve_spd as solve_csr, CgOutcome};

pub use spaces::{
    mat_vec, FemSpaces, FieldVector, Mat3, QField, ScalarKind, ScalarSpace, SpaceTag, LOCAL_EDGES, NONE, QA, QB,
};
pub use sparse::{Csr, Triplets};

use crate::vec3::vnorm;
use crate::{Error, Result};

/// Bilinear forms available through [`assemble`].
#[derive(Debug, Clone)]
pub enum Form {
    MassScalar,
    MassVector,
    Stiffness,
    CurlCurl,
    GradCoupling,
    /// Edge mass weighted by one scalar per tetrahedron.
    WeightedMass(Vec<f64>),
}

impl std::str::FromStr for Form {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mass_scalar" => Form::MassScalar,
            "mass_vector" => Form::MassVector,
            "stiffness" => Form::Stiffness,
            "curlcurl" => Form::CurlCurl,
            "grad_coupling" => Form::GradCoupling,
            _ => return Err(Error::Parameter(format!("unknown form `{s}`"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub matrix: Csr,
    pub symmetric: bool,
}

pub fn assemble(form: &Form, spaces: &FemSpaces) -> Result<SparseOperator> {
    let (matrix, symmetric) = match form {
        Form::MassScalar => (spaces.nodal_mass(), true),
        Form::MassVector => (spaces.edge_mass(Coeff::One), true),
        Form::Stiffness => (spaces.p1().stiffness(None), true),
        Form::CurlCurl => (spaces.curl_curl(Coeff::One), true),
        Form::GradCoupling => (spaces.grad_coupling(), false),
        Form::WeightedMass(c) => {
            if c.len() != spaces.nt() {
                return Err(Error::Dimension(format!(
                    "coefficient has {} entries for {} tetrahedra",
                    c.len(),
                    spaces.nt()
                )));
            }
            (spaces.edge_mass(Coeff::Scalar(c)), true)
        }
    };
    Ok(SparseOperator { matrix, symmetric })
}

/// Solve with a symmetric operator; a singular P1 Neumann Laplacian is
/// detected by a vanishing row sum and solved for the zero-sum representative.
pub fn solve_spd(a: &SparseOperator, b: &FieldVector, tol: f64) -> Result<FieldVector> {
    if !a.symmetric {
        return Err(Error::Parameter("operator is not symmetric".into()));
    }
    let m = &a.matrix;
    if b.coeffs.len() != m.nrows {
        return Err(Error::Dimension(format!("rhs {} against {} rows", b.coeffs.len(), m.nrows)));
    }
    let (mat, rhs, free) = match &b.mask {
        Some(mask) => {
            let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
            let rhs: Vec<f64> = free.iter().map(|&i| b.coeffs[i]).collect();
            (m.submatrix(&free, &free), rhs, Some(free))
        }
        None => (m.clone(), b.coeffs.clone(), None),
    };
    let ones = vec![1.0; mat.ncols];
    let rowsum = mat.matvec(&ones);
    let singular = vnorm(&rowsum) <= 1e-12 * mat.max_abs() * (mat.nrows as f64).sqrt();
    let out = solve_csr(&mat, &rhs, tol, singular.then_some(&ones[..]))?;
    let coeffs = match free {
        Some(free) => {
            let mut x = vec![0.0; m.nrows];
            for (k, &i) in free.iter().enumerate() {
                x[i] = out.x[k];
            }
            x
        }
        None => out.x,
    };
    Ok(FieldVector { space: b.space, coeffs, mask: b.mask.clone() })
}

/// Subtract the arithmetic mean; used on Neumann right-hand sides whose zero
/// sum holds exactly in theory but only to rounding in practice.
pub fn center(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len().max(1) as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solve `K x = b` with `x = g` on the dofs marked `fixed`. With nothing fixed
/// the system is a pure Neumann problem and the solution has zero mean under
/// `weights`.
pub fn solve_with_dirichlet(
    k: &Csr,
    b: &[f64],
    fixed: &[bool],
    g: &[f64],
    weights: &[f64],
    tol: f64,
) -> Result<Vec<f64>> {
    let n = b.len();
    if fixed.iter().any(|&f| f) {
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let mut gc = g.to_vec();
        for i in 0..n {
            if !fixed[i] {
                gc[i] = 0.0;
            }
        }
        let kg = k.matvec(&gc);
        let rhs: Vec<f64> = free.iter().map(|&i| b[i] - kg[i]).collect();
        let mut x = gc;
        if !free.is_empty() {
            let out = solve_csr(&k.submatrix(&free, &free), &rhs, tol, None)?;
            for (j, &i) in free.iter().enumerate() {
                x[i] = out.x[j];
            }
        }
        Ok(x)
    } else {
        Ok(solve_csr(k, b, tol, Some(weights))?.x)
    }
}

impl FemSpaces {
    /// L2 inner product of two fields in the same space.
    pub fn l2_inner(&self, u: &FieldVector, v: &FieldVector) -> Result<f64> {
        if u.space != v.space || u.coeffs.len() != v.coeffs.len() {
            return Err(Error::Dimension("space mismatch".into()));
        }
        Ok(match u.space {
            SpaceTag::P1 => crate::vec3::vdot(&self.nodal_mass().matvec(&u.coeffs), &v.coeffs),
            SpaceTag::Nedelec => crate::vec3::vdot(&self.edge_mass(Coeff::One).matvec(&u.coeffs), &v.coeffs),
            SpaceTag::CrouzeixRaviart => {
                let cr = self.cr();
                let mut s = 0.0;
                for t in 0..self.nt() {
                    let d = cr.tet_dofs[t];
                    for i in 0..4 {
                        for j in 0..4 {
                            let m = if i == j { 0.4 } else { -0.05 };
                            s += self.vol[t] * m * u.coeffs[d[i]] * v.coeffs[d[j]];
                        }
                    }
                }
                s
            }
            SpaceTag::Quadrature => self.inner(&u.to_qfield()?, &v.to_qfield()?),
        })
    }

    pub fn l2_norm(&self, u: &FieldVector) -> Result<f64> {
        Ok(self.l2_inner(u, u)?.max(0.0).sqrt())
    }

    /// Edge coefficients of the gradient of a nodal field.
    pub fn grad_of(&self, phi: &[f64]) -> Vec<f64> {
        self.grad_op.matvec(phi)
    }

    /// Weak divergence functional `v -> int u . grad v` restricted to interior
    /// vertices, measured in the dual norm of the P1 Laplacian.
    pub fn div_residual(&self, u: &QField) -> Result<f64> {
        let p1 = self.p1();
        let r = self.grad_load(&p1, u);
        let free = p1.free_dofs(true);
        if free.is_empty() {
            return Ok(0.0);
        }
        let rf: Vec<f64> = free.iter().map(|&i| r[i]).collect();
        let k = p1.stiffness(None).submatrix(&free, &free);
        let x = solve_csr(&k, &rf, 1e-12, None)?.x;
        Ok(crate::vec3::vdot(&x, &rf).max(0.0).sqrt())
    }
}
