//! Root solve for the finite-dimensional coefficient system `f(xi) = c`.
//!
//! Damped Newton with a forward-difference Jacobian inside a ball `|xi| <= R`;
//! on stagnation the ball is doubled, up to the radius where the acute-angle
//! condition `<f(xi) - c, xi> > 0` is known to hold.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiOptions {
    /// Absolute tolerance on `|f(xi) - c|`.
    pub tol: f64,
    /// Residual-map evaluations allowed.
    pub budget: usize,
    /// Initial ball radius.
    pub r_hint: f64,
    /// Largest radius tried.
    pub r_max: f64,
}

impl Default for XiOptions {
    fn default() -> Self {
        XiOptions { tol: 1e-10, budget: 200, r_hint: 1.0, r_max: 1e6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiOutcome {
    pub xi: Vec<f64>,
    /// `|f(xi) - c|` at the returned point.
    pub residual: f64,
    /// `|f - c|` after each accepted Newton step, starting at `xi = 0`.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub radius: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `F(xi) = 0` for `F = f - c` of dimension `n`.
pub fn solve_xi_system(
    n: usize,
    map: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    opts: &XiOptions,
) -> Result<XiOutcome> {
    if n == 0 {
        return Ok(XiOutcome { xi: vec![], residual: 0.0, history: vec![], evaluations: 0, radius: 0.0 });
    }
    if !(opts.r_hint > 0.0) || !(opts.r_max >= opts.r_hint) {
        return Err(Error::Parameter(format!("ball radii r_hint = {}, r_max = {}", opts.r_hint, opts.r_max)));
    }
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<Vec<f64>> {
        *evals += 1;
        let f = map(x)?;
        if f.len() != n || f.iter().any(|v| !v.is_finite()) {
            return Err(Error::RootSolver(format!("residual map returned an invalid value at {x:?}")));
        }
        Ok(f)
    };
    let mut xi = vec![0.0; n];
    let mut f = eval(&xi, &mut evals)?;
    let mut fnorm = norm(&f);
    let mut history = vec![fnorm];
    let mut radius = opts.r_hint;
    while evals < opts.budget {
        if fnorm <= opts.tol {
            return Ok(XiOutcome { xi, residual: fnorm, history, evaluations: evals, radius });
        }
        // forward-difference Jacobian
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + xi[j].abs());
            let mut xp = xi.clone();
            xp[j] += h;
            let fp = eval(&xp, &mut evals)?;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f[i]) / h;
            }
        }
        let rhs = DVector::from_fn(n, |i, _| -f[i]);
        let step = jac.clone().lu().solve(&rhs).unwrap_or_else(|| {
            // singular Jacobian: gradient direction of |F|^2
            -jac.transpose() * DVector::from_column_slice(&f)
        });
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..20 {
            if evals >= opts.budget {
                break;
            }
            let mut trial: Vec<f64> = (0..n).map(|i| xi[i] + t * step[i]).collect();
            let tn = norm(&trial);
            if tn > radius {
                trial.iter_mut().for_each(|v| *v *= radius / tn);
            }
            let ft = eval(&trial, &mut evals)?;
            let nt = norm(&ft);
            if nt < fnorm {
                xi = trial;
                f = ft;
                fnorm = nt;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if moved {
            history.push(fnorm);
        } else {
            if radius >= opts.r_max {
                break;
            }
            radius = (2.0 * radius).min(opts.r_max);
        }
    }
    if fnorm <= opts.tol {
        return Ok(XiOutcome { xi, residual: fnorm, history, evaluations: evals, radius });
    }
    Err(Error::RootSolver(format!(
        "|f(xi) - c| = {fnorm:.3e} after {evals} evaluations (radius {radius:.3e}); best iterate {xi:?}"
    )))
}
