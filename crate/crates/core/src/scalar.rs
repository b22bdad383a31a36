//! Scalar quasilinear problems `div B(x, F + grad phi) = 0` with co-normal or
//! Dirichlet data, solved by a Laplacian-preconditioned Zarantonello iteration
//! and a Newton finish.

use serde::{Deserialize, Serialize};

use crate::constitutive::{apply_b, apply_b_with_jacobian, tet_mean_mat, zarantonello_step_size, MaterialLaw};
use crate::fem::{solve_csr, Csr, FemSpaces, QField, ScalarSpace};
use crate::vec3::{vdot, vnorm};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Relative tolerance on the preconditioned residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual level (relative) below which Newton steps take over.
    pub newton_switch: f64,
    pub newton: bool,
    /// Relaxation; `None` uses `lambda / L^2` from the law constants.
    pub tau: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams { tol: 1e-9, max_iter: 500, newton_switch: 1e-3, newton: true, tau: None }
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryData {
    /// Functional `<g_N, eta_i>` on every dof; must sum to zero.
    Neumann(Vec<f64>),
    /// Values on boundary dofs; interior entries are ignored.
    Dirichlet(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct QuasilinearProblem<'a> {
    pub law: &'a MaterialLaw,
    /// Drift `F` at quadrature points.
    pub drift: QField,
    pub data: BoundaryData,
    pub params: SolverParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub residual: f64,
    pub step: f64,
    pub newton: bool,
}

#[derive(Debug, Clone)]
pub struct ScalarSolution {
    pub phi: Vec<f64>,
    pub history: Vec<IterRecord>,
    /// Relative preconditioned residual at exit.
    pub residual: f64,
    /// Predicted Zarantonello contraction.
    pub contraction: f64,
    /// `|grad phi|_L2`, the quantity of the a-priori bound.
    pub grad_norm: f64,
    /// `|grad phi| / (|g|_* + |F| + 1)`.
    pub bound_ratio: f64,
}

impl ScalarSolution {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,residual,step_norm,newton\n");
        for (i, r) in self.history.iter().enumerate() {
            s.push_str(&format!("{},{:.17e},{:.17e},{}\n", i, r.residual, r.step, r.newton as u8));
        }
        s
    }
}

struct Setup<'a> {
    s: &'a FemSpaces,
    space: &'a ScalarSpace,
    law: &'a MaterialLaw,
    drift: &'a QField,
    load: Vec<f64>,
    free: Vec<usize>,
    lap: Csr,
    neumann: bool,
}

impl Setup<'_> {
    fn restrict(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| v[i]).collect()
    }

    fn argument(&self, phi: &[f64]) -> QField {
        let g = self.s.scalar_grad_tet(self.space, phi);
        let mut a = self.drift.clone();
        for (i, v) in a.values.iter_mut().enumerate() {
            *v = crate::vec3::add(*v, g[i / 4]);
        }
        a
    }

    /// Free-dof residual `int B(F + grad phi) . grad eta - g`.
    fn residual(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let b = apply_b(self.s, self.law, &self.argument(phi))?;
        let r = self.s.grad_load(self.space, &b);
        Ok(self.free.iter().map(|&i| r[i] - self.load[i]).collect())
    }

    /// Riesz representative `L^-1 r` and the dual norm.
    fn precondition(&self, r: &[f64]) -> Result<(Vec<f64>, f64)> {
        let mut rr = r.to_vec();
        if self.neumann {
            crate::fem::center(&mut rr);
        }
        let kern = if self.neumann { Some(&self.space.weights[..]) } else { None };
        let d = solve_csr(&self.lap, &rr, 1e-13, kern)?.x;
        let n = vdot(&d, &rr).max(0.0).sqrt();
        Ok((d, n))
    }

    fn jacobian(&self, phi: &[f64]) -> Result<Csr> {
        let (_, j) = apply_b_with_jacobian(self.s, self.law, &self.argument(phi))?;
        let k = self.space.stiffness(Some(&tet_mean_mat(&j)));
        Ok(k.submatrix(&self.free, &self.free))
    }
}

pub fn solve_conormal(s: &FemSpaces, space: &ScalarSpace, p: &QuasilinearProblem) -> Result<ScalarSolution> {
    solve_with_guess(s, space, p, None)
}

pub fn solve_dirichlet(s: &FemSpaces, space: &ScalarSpace, p: &QuasilinearProblem) -> Result<ScalarSolution> {
    solve_with_guess(s, space, p, None)
}

/// Solve from an optional initial guess. Dispatches on the boundary data.
pub fn solve_with_guess(
    s: &FemSpaces,
    space: &ScalarSpace,
    p: &QuasilinearProblem,
    guess: Option<&[f64]>,
) -> Result<ScalarSolution> {
    let n = space.ndof;
    if p.drift.len() != 4 * s.nt() {
        return Err(Error::Dimension(format!("drift has {} points, mesh needs {}", p.drift.len(), 4 * s.nt())));
    }
    let (neumann, load, mut phi) = match &p.data {
        BoundaryData::Neumann(g) => {
            if g.len() != n {
                return Err(Error::Dimension("Neumann functional length".into()));
            }
            let total: f64 = g.iter().sum();
            let scale = g.iter().map(|v| v.abs()).sum::<f64>();
            if total.abs() > 1e-10 * scale.max(1e-300) && total.abs() > 1e-14 {
                return Err(Error::Compatibility { condition: "zero total flux".into(), margin: -total.abs() });
            }
            (true, g.clone(), guess.map_or_else(|| vec![0.0; n], |v| v.to_vec()))
        }
        BoundaryData::Dirichlet(g) => {
            if g.len() != n {
                return Err(Error::Dimension("Dirichlet trace length".into()));
            }
            let mut phi = guess.map_or_else(|| vec![0.0; n], |v| v.to_vec());
            for i in 0..n {
                if space.boundary[i] {
                    phi[i] = g[i];
                }
            }
            (false, vec![0.0; n], phi)
        }
    };
    let free = space.free_dofs(!neumann);
    let lap = space.stiffness(None).submatrix(&free, &free);
    let st = Setup { s, space, law: p.law, drift: &p.drift, load, free, lap, neumann };
    if st.free.is_empty() {
        return Ok(finish(&st, phi, vec![], 0.0, 0.0));
    }

    let (lb, lip) = p.law.b_monotone_bounds();
    let (tau0, q) = zarantonello_step_size(lb, lip)?;
    let tau = p.params.tau.unwrap_or(tau0);

    // residual scale: |B(F)|, |g|_* and the initial residual
    let bf = apply_b(s, p.law, &p.drift)?;
    let gnorm = if neumann { st.precondition(&st.restrict(&st.load))?.1 } else { 0.0 };
    let mut r = st.residual(&phi)?;
    let (mut d, mut res) = st.precondition(&r)?;
    let scale = s.l2norm(&bf).max(gnorm).max(res).max(f64::MIN_POSITIVE);
    let mut history = vec![IterRecord { residual: res / scale, step: 0.0, newton: false }];
    let mut use_newton = false;
    for _ in 0..p.params.max_iter {
        if res <= p.params.tol * scale {
            let rel = res / scale;
            return Ok(finish(&st, phi, history, rel, q).with_norms(gnorm, s.l2norm(&p.drift)));
        }
        if p.params.newton && res <= p.params.newton_switch * scale {
            use_newton = true;
        }
        let mut accepted = false;
        if use_newton {
            let j = st.jacobian(&phi)?;
            let mut rr = r.clone();
            if neumann {
                crate::fem::center(&mut rr);
            }
            let kern = if neumann { Some(&space.weights[..]) } else { None };
            if let Ok(out) = solve_csr(&j, &rr, 1e-13, kern) {
                let mut t = 1.0;
                while t > 1e-3 {
                    let mut trial = phi.clone();
                    for (k, &i) in st.free.iter().enumerate() {
                        trial[i] -= t * out.x[k];
                    }
                    let rt = st.residual(&trial)?;
                    let (dt, nt) = st.precondition(&rt)?;
                    if nt < res {
                        let step = t * vnorm(&out.x);
                        phi = trial;
                        r = rt;
                        d = dt;
                        res = nt;
                        history.push(IterRecord { residual: res / scale, step, newton: true });
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
        }
        if !accepted {
            if use_newton && res <= 1e3 * f64::EPSILON * scale {
                // Newton stagnated at rounding level
                return Ok(finish(&st, phi, history, res / scale, q).with_norms(gnorm, s.l2norm(&p.drift)));
            }
            for (k, &i) in st.free.iter().enumerate() {
                phi[i] -= tau * d[k];
            }
            r = st.residual(&phi)?;
            let step = tau * vnorm(&d);
            let out = st.precondition(&r)?;
            d = out.0;
            res = out.1;
            history.push(IterRecord { residual: res / scale, step, newton: false });
        }
        if !res.is_finite() {
            break;
        }
    }
    if res <= p.params.tol * scale {
        return Ok(finish(&st, phi, history, res / scale, q).with_norms(gnorm, s.l2norm(&p.drift)));
    }
    Err(Error::solver(
        format!("quasilinear solve (predicted contraction {q:.4})"),
        history.iter().map(|h| h.residual).collect(),
    ))
}

fn finish(st: &Setup, mut phi: Vec<f64>, history: Vec<IterRecord>, residual: f64, q: f64) -> ScalarSolution {
    if st.neumann {
        let m = st.space.mean(&phi);
        phi.iter_mut().for_each(|v| *v -= m);
    }
    let g = st.s.scalar_grad_tet(st.space, &phi);
    let grad_norm = st.s.p0_norm(&g);
    ScalarSolution { phi, history, residual, contraction: q, grad_norm, bound_ratio: f64::NAN }
}

impl ScalarSolution {
    fn with_norms(mut self, gnorm: f64, fnorm: f64) -> Self {
        self.bound_ratio = self.grad_norm / (gnorm + fnorm + 1.0);
        self
    }
}

/// H1 seminorm `|grad (a - b)|_L2` of two scalar fields.
pub fn h1_seminorm_diff(s: &FemSpaces, space: &ScalarSpace, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    s.p0_norm(&s.scalar_grad_tet(space, &d))
}
