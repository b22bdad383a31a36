//! Monotone iteration for `int H(curl x + o) . curl w = l(w)` on a
//! constrained edge space (a [`CurlSystem`]).

use crate::constitutive::MaterialLaw;
use crate::decomp::{Context, CurlSystem};
use crate::fem::Mat3;
use crate::vec3::{vdot, V3};
use crate::{Error, Result};

use super::{p0_add, BvpParams};

pub(crate) struct CurlProblem<'a> {
    pub ctx: &'a Context,
    pub sys: &'a CurlSystem,
    pub law: &'a MaterialLaw,
    /// Fixed part of the constitutive argument, per tetrahedron.
    pub offset: Vec<V3>,
    /// Full edge load.
    pub load: Vec<f64>,
    pub params: &'a BvpParams,
}

pub(crate) struct CurlOutcome {
    pub x: Vec<f64>,
    /// Relative dual residual per iteration.
    pub history: Vec<f64>,
}

impl CurlProblem<'_> {
    fn argument(&self, x: &[f64]) -> Vec<V3> {
        p0_add(&self.ctx.s.curl_tet(x), &self.offset)
    }

    /// Residual on all edges.
    pub fn residual_full(&self, x: &[f64]) -> Vec<f64> {
        let s = &self.ctx.s;
        let h = super::h_tet(self.ctx, self.law, &self.argument(x));
        let mut r = s.curl_load(&crate::fem::QField::from_p0(&h));
        for (ri, li) in r.iter_mut().zip(&self.load) {
            *ri -= li;
        }
        r
    }

    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.residual_full(x);
        for (e, v) in r.iter_mut().enumerate() {
            if !self.sys.is_free(e) {
                *v = 0.0;
            }
        }
        r
    }

    /// Riesz representative in the constrained space and the dual norm.
    fn dual(&self, r: &[f64]) -> Result<(Vec<f64>, f64)> {
        let d = self.sys.solve(r)?.x;
        let n = vdot(&d, r).max(0.0).sqrt();
        Ok((d, n))
    }

    /// Dual norm of the residual in the constrained space.
    pub fn residual_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(self.dual(&self.residual(x))?.1)
    }

    fn tangent(&self, x: &[f64]) -> Vec<Mat3> {
        let arg = self.argument(x);
        crate::constitutive::par_map(arg.len(), |t| self.law.jacobian(self.ctx.s.tet_centroid(t), arg[t]))
    }

    pub fn solve(&self, x0: Option<&[f64]>) -> Result<CurlOutcome> {
        let ne = self.ctx.s.ne();
        // a starting guess only contributes its curl; the gauge is restored
        let mut x = match x0 {
            Some(v) => crate::decomp::vector_potential(self.ctx, &self.ctx.s.curl_tet(v), self.sys.gauge)?.u,
            None => vec![0.0; ne],
        };
        self.sys.deflate(&mut x);
        let (mu, m2) = {
            let c = self.law.constants();
            (c.mu, c.m2)
        };
        let tau = mu / (m2 * m2);
        let mut r = self.residual(&x);
        let (mut d, mut n) = self.dual(&r)?;
        let load_norm = self.dual(&self.load)?.1;
        let h0 = self.ctx.s.p0_norm(&super::h_tet(self.ctx, self.law, &self.offset));
        let scale = n.max(load_norm).max(h0).max(f64::MIN_POSITIVE);
        let mut history = vec![n / scale];
        let linear = matches!(self.law, MaterialLaw::Identity | MaterialLaw::Linear { .. });
        for _ in 0..self.params.max_iter {
            if n <= self.params.tol * scale {
                return Ok(CurlOutcome { x, history });
            }
            let mut accepted = false;
            if self.params.newton && (linear || n / scale < self.params.newton_switch) {
                let k = self.sys.weighted(&self.ctx.s, &self.tangent(&x));
                let delta = self.sys.solve_with(Some(&k), &r, None)?.x;
                let mut t = 1.0;
                for _ in 0..12 {
                    let xt: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a - t * b).collect();
                    let rt = self.residual(&xt);
                    let (dt, nt) = self.dual(&rt)?;
                    if nt < n {
                        x = xt;
                        r = rt;
                        d = dt;
                        n = nt;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if !accepted {
                crate::vec3::vaxpy(-tau, &d, &mut x);
                r = self.residual(&x);
                let out = self.dual(&r)?;
                d = out.0;
                n = out.1;
            }
            if !n.is_finite() {
                return Err(Error::solver("monotone curl iteration", history));
            }
            history.push(n / scale);
        }
        if n <= self.params.tol * scale {
            return Ok(CurlOutcome { x, history });
        }
        Err(Error::solver("monotone curl iteration", history))
    }
}
