//! Preconditioned conjugate gradients.

use crate::vec3::{vdot, vnorm};
use crate::{Error, Result};

use super::sparse::Csr;

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual after each iteration.
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned CG for `A x = b` with `A` given as an operator.
///
/// `project`, when present, is applied to the residual each iteration; it
/// keeps semidefinite problems inside the range of `A`.
pub fn pcg(
    apply: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    project: Option<&dyn Fn(&mut [f64])>,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = vnorm(b);
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    if bnorm == 0.0 {
        return Ok(CgOutcome { x: vec![0.0; n], iterations: 0, history: vec![0.0] });
    }
    let minv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = vec![0.0; n];
    apply(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if let Some(p) = project {
        p(&mut r);
    }
    let mut history = vec![vnorm(&r) / bnorm];
    if history[0] <= tol {
        return Ok(CgOutcome { x, iterations: 0, history });
    }
    let mut z: Vec<f64> = r.iter().zip(&minv).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut rz = vdot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = vdot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if let Some(pr) = project {
            pr(&mut r);
        }
        let rel = vnorm(&r) / bnorm;
        history.push(rel);
        if rel <= tol {
            return Ok(CgOutcome { x, iterations: it, history });
        }
        for i in 0..n {
            z[i] = r[i] * minv[i];
        }
        let rz_new = vdot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::solver("conjugate gradients", history))
}

/// Solve an SPD or constant-kernel semidefinite CSR system.
///
/// With `constant_kernel`, `b` must have zero sum (checked against `tol`) and
/// the returned solution has zero mean under `weights`.
pub fn solve_spd(a: &Csr, b: &[f64], tol: f64, constant_kernel: Option<&[f64]>) -> Result<CgOutcome> {
    if a.nrows != a.ncols || b.len() != a.nrows {
        return Err(Error::Dimension(format!(
            "matrix {}x{} against vector {}",
            a.nrows,
            a.ncols,
            b.len()
        )));
    }
    let diag = a.diagonal();
    let apply = |x: &[f64], y: &mut [f64]| a.matvec_into(x, y);
    let max_iter = 20 * a.nrows + 100;
    match constant_kernel {
        None => pcg(&apply, &diag, b, None, tol, max_iter, None),
        Some(w) => {
            let n = b.len() as f64;
            let mean = b.iter().sum::<f64>() / n;
            let scale = vnorm(b).max(f64::MIN_POSITIVE);
            if mean.abs() * n.sqrt() > 1e-10 * scale {
                return Err(Error::Range(format!(
                    "right-hand side has nonzero sum {:.3e} on a constant-kernel system",
                    mean * n
                )));
            }
            let centre = |v: &mut [f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter_mut().for_each(|x| *x -= m);
            };
            let mut bb = b.to_vec();
            centre(&mut bb);
            let mut out = pcg(&apply, &diag, &bb, None, tol, max_iter, Some(&centre))?;
            let wsum: f64 = w.iter().sum();
            let m = vdot(&out.x, w) / wsum;
            out.x.iter_mut().for_each(|x| *x -= m);
            Ok(out)
        }
    }
}
