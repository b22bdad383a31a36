//! Material laws `H(x, z)`, their inverses `B(x, w)`, current laws `f(x, z)`
//! and sampled checks of the structural conditions.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fem::Mat3;
use crate::vec3::{add, dot, norm, scale, sub, V3};
use crate::{Error, Result};

/// A magnetic constitutive law `H = H(x, B)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialLaw {
    Identity,
    /// `H = A z` with `A` symmetric positive definite.
    Linear { matrix: Mat3 },
    /// `a(|z|^2) z` with `a(s) = 1 + 1/(1+s)`.
    Saturating,
    /// `a(|z|^2) z` with `a(s) = 1 + exp(-s)`.
    Exponential,
    /// Gradient of `P(z) = |z|^2 + log cosh |z|`.
    LogCosh,
    /// `H_i = z_i + beta tanh z_i`.
    Componentwise { beta: f64 },
}

/// Constants of the growth and ellipticity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawConstants {
    pub c1: f64,
    pub c2: f64,
    pub g1: f64,
    pub g2: f64,
    pub mu: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Constants transferred to the inverse law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BConstants {
    pub c3: f64,
    pub c4: f64,
    pub g3: f64,
    pub g4: f64,
    pub lambda0: f64,
}

pub fn derive_b_constants(c1: f64, c2: f64, g1: f64, g2: f64, mu: f64, m2: f64) -> Result<BConstants> {
    for (n, v) in [("c1", c1), ("c2", c2), ("mu", mu), ("M2", m2)] {
        if !(v > 0.0) {
            return Err(Error::Parameter(format!("{n} must be positive, got {v}")));
        }
    }
    let c3 = c1 / (2.0 * c2 * c2);
    Ok(BConstants { c3, c4: 1.0 / c1, g3: g1 + c3 * g2 * g2, g4: (2.0 * g1.abs() / c1).sqrt(), lambda0: mu / (m2 * m2) })
}

fn to_na(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

fn from_na(m: &Matrix3<f64>) -> Mat3 {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

pub fn identity3() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn outer(a: V3, b: V3) -> Mat3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| a[i] * b[j]))
}

fn mat_add(a: &Mat3, s: f64, b: &Mat3) -> Mat3 {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| a[i][j] + s * b[i][j]))
}

fn mat_scale(s: f64, a: &Mat3) -> Mat3 {
    a.map(|r| r.map(|v| s * v))
}

/// Extreme eigenvalues of the symmetric part.
pub fn sym_eig_range(m: &Mat3) -> (f64, f64) {
    let a = to_na(m);
    let e = SymmetricEigen::new((a + a.transpose()) * 0.5).eigenvalues;
    (e.min(), e.max())
}

pub fn spectral_norm(m: &Mat3) -> f64 {
    let a = to_na(m);
    SymmetricEigen::new(a.transpose() * a).eigenvalues.max().max(0.0).sqrt()
}

pub fn mat_inverse(m: &Mat3) -> Option<Mat3> {
    to_na(m).try_inverse().map(|i| from_na(&i))
}

pub const INVERT_TOL: f64 = 1e-12;
const INVERT_CAP: usize = 50;

impl MaterialLaw {
    pub fn name(&self) -> &'static str {
        match self {
            MaterialLaw::Identity => "identity",
            MaterialLaw::Linear { .. } => "linear",
            MaterialLaw::Saturating => "saturating",
            MaterialLaw::Exponential => "exponential",
            MaterialLaw::LogCosh => "log_cosh",
            MaterialLaw::Componentwise { .. } => "componentwise",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MaterialLaw::Linear { matrix } => {
                let asym = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (matrix[i][j] - matrix[j][i]).abs());
                if asym.fold(0.0, f64::max) > 1e-12 * spectral_norm(matrix) {
                    return Err(Error::Parameter("linear law matrix must be symmetric".into()));
                }
                if !(sym_eig_range(matrix).0 > 0.0) {
                    return Err(Error::Parameter("linear law matrix must be positive definite".into()));
                }
                Ok(())
            }
            MaterialLaw::Componentwise { beta } if !(*beta >= 0.0) => {
                Err(Error::Parameter(format!("componentwise law needs beta >= 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Scalar coefficient `a(s)` and `a'(s)` of isotropic laws `a(|z|^2) z`.
    pub fn isotropic(&self) -> Option<fn(f64) -> (f64, f64)> {
        match self {
            MaterialLaw::Identity => Some(|_| (1.0, 0.0)),
            MaterialLaw::Saturating => Some(|s| (1.0 + 1.0 / (1.0 + s), -1.0 / ((1.0 + s) * (1.0 + s)))),
            MaterialLaw::Exponential => Some(|s| (1.0 + (-s).exp(), -(-s).exp())),
            _ => None,
        }
    }

    pub fn h(&self, _x: V3, z: V3) -> V3 {
        match self {
            MaterialLaw::Linear { matrix } => crate::fem::mat_vec(matrix, z),
            MaterialLaw::LogCosh => {
                let r = norm(z);
                let t = if r > 1e-8 { r.tanh() / r } else { 1.0 - r * r / 3.0 };
                scale(2.0 + t, z)
            }
            MaterialLaw::Componentwise { beta } => z.map(|v| v + beta * v.tanh()),
            _ => {
                let (a, _) = self.isotropic().unwrap()(dot(z, z));
                scale(a, z)
            }
        }
    }

    /// `d H / d z`.
    pub fn jacobian(&self, _x: V3, z: V3) -> Mat3 {
        match self {
            MaterialLaw::Linear { matrix } => *matrix,
            MaterialLaw::LogCosh => {
                let r = norm(z);
                if r < 1e-6 {
                    return mat_scale(3.0 - r * r, &identity3());
                }
                let n = scale(1.0 / r, z);
                let t = r.tanh();
                let perp = 2.0 + t / r;
                let rad = 2.0 + 1.0 - t * t;
                mat_add(&mat_scale(perp, &identity3()), rad - perp, &outer(n, n))
            }
            MaterialLaw::Componentwise { beta } => {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    let t = z[i].tanh();
                    m[i][i] = 1.0 + beta * (1.0 - t * t);
                }
                m
            }
            _ => {
                let (a, da) = self.isotropic().unwrap()(dot(z, z));
                mat_add(&mat_scale(a, &identity3()), 2.0 * da, &outer(z, z))
            }
        }
    }

    /// Inverse law: `z` with `H(x, z) = w`.
    pub fn b(&self, x: V3, w: V3) -> Result<V3> {
        match self {
            MaterialLaw::Identity => Ok(w),
            MaterialLaw::Linear { matrix } => {
                let z = to_na(matrix)
                    .lu()
                    .solve(&Vector3::new(w[0], w[1], w[2]))
                    .ok_or(Error::Inversion { residual: f64::INFINITY })?;
                Ok([z[0], z[1], z[2]])
            }
            MaterialLaw::Componentwise { beta } => {
                let mut z = [0.0; 3];
                for i in 0..3 {
                    z[i] = invert_scalar(|v| (v + beta * v.tanh(), 1.0 + beta * (1.0 - v.tanh().powi(2))), w[i], w[i])?;
                }
                Ok(z)
            }
            MaterialLaw::LogCosh => {
                // |H| = 2r + tanh r is increasing in r = |z|
                let m = norm(w);
                if m == 0.0 {
                    return Ok([0.0; 3]);
                }
                let r = invert_scalar(|r| (2.0 * r + r.tanh(), 3.0 - r.tanh().powi(2)), m, m / 3.0)?;
                Ok(scale(r / m, w))
            }
            _ => {
                let a = self.isotropic().unwrap();
                let m = norm(w);
                if m == 0.0 {
                    return Ok([0.0; 3]);
                }
                // |H| = a(r^2) r is increasing in r under ellipticity
                let r = invert_scalar(
                    |r| {
                        let (av, da) = a(r * r);
                        (av * r, av + 2.0 * da * r * r)
                    },
                    m,
                    m / a(0.0).0,
                )?;
                let z = scale(r / m, w);
                let res = norm(sub(self.h(x, z), w));
                if res > INVERT_TOL * (1.0 + m) * 10.0 {
                    return Err(Error::Inversion { residual: res });
                }
                Ok(z)
            }
        }
    }

    /// Generic damped Newton inversion, independent of the closed forms above.
    pub fn invert_newton(&self, x: V3, w: V3, tol: f64) -> Result<V3> {
        let mut z = w;
        let mut res = norm(sub(self.h(x, z), w));
        for _ in 0..INVERT_CAP {
            if res <= tol * (1.0 + norm(w)) {
                return Ok(z);
            }
            let r = sub(w, self.h(x, z));
            let jinv = mat_inverse(&self.jacobian(x, z)).ok_or(Error::Inversion { residual: res })?;
            let step = crate::fem::mat_vec(&jinv, r);
            let mut t = 1.0;
            loop {
                let zn = add(z, scale(t, step));
                let rn = norm(sub(self.h(x, zn), w));
                if rn < res || t < 1e-4 {
                    z = zn;
                    res = rn;
                    break;
                }
                t *= 0.5;
            }
        }
        if res <= tol * (1.0 + norm(w)) {
            Ok(z)
        } else {
            Err(Error::Inversion { residual: res })
        }
    }

    /// `d B / d w = (d H / d z)^-1` at `z = B(w)`.
    pub fn b_jacobian(&self, x: V3, w: V3) -> Result<Mat3> {
        let z = self.b(x, w)?;
        mat_inverse(&self.jacobian(x, z)).ok_or(Error::Inversion { residual: f64::NAN })
    }

    /// Analytic structural constants.
    pub fn constants(&self) -> LawConstants {
        let (c1, c2, mu, m2) = match self {
            MaterialLaw::Identity => (1.0, 1.0, 1.0, 1.0),
            MaterialLaw::Linear { matrix } => {
                let (lo, hi) = sym_eig_range(matrix);
                (lo, spectral_norm(matrix), lo, spectral_norm(matrix).max(hi))
            }
            // radial eigenvalue 1 + (1 - s)/(1 + s)^2 is smallest at s = 3
            MaterialLaw::Saturating => (1.0, 2.0, 7.0 / 8.0, 2.0),
            // radial eigenvalue 1 + exp(-s)(1 - 2s) is smallest at s = 3/2
            MaterialLaw::Exponential => (1.0, 2.0, 1.0 - 2.0 * (-1.5f64).exp(), 2.0),
            MaterialLaw::LogCosh => (2.0, 3.0, 2.0, 3.0),
            MaterialLaw::Componentwise { beta } => (1.0, 1.0 + beta, 1.0, 1.0 + beta),
        };
        LawConstants { c1, c2, g1: 0.0, g2: 0.0, mu, m1: 0.0, m2 }
    }

    pub fn b_constants(&self) -> BConstants {
        let c = self.constants();
        derive_b_constants(c.c1, c.c2, c.g1, c.g2, c.mu, c.m2).expect("builtin constants are positive")
    }

    /// Monotonicity and Lipschitz constants of `B` used by the solvers.
    /// For symmetric Jacobians `dB = (dH)^-1` has spectrum in `[1/M2, 1/mu]`,
    /// which is sharper than `mu / M2^2`.
    pub fn b_monotone_bounds(&self) -> (f64, f64) {
        let c = self.constants();
        (1.0 / c.m2, 1.0 / c.mu)
    }

    /// True when both trace conditions hold for every boundary normal.
    pub fn is_trace_compatible(&self) -> bool {
        matches!(self, MaterialLaw::Identity)
    }
}

/// Solve the scalar monotone equation `g(v) = target` by safeguarded Newton.
fn invert_scalar(g: impl Fn(f64) -> (f64, f64), target: f64, guess: f64) -> Result<f64> {
    // bracket
    let (mut lo, mut hi) = (guess.min(0.0), guess.max(0.0));
    while g(lo).0 > target {
        lo = 2.0 * lo - 1.0;
    }
    while g(hi).0 < target {
        hi = 2.0 * hi + 1.0;
    }
    let mut v = guess.clamp(lo, hi);
    for _ in 0..200 {
        let (gv, dg) = g(v);
        let r = gv - target;
        if r.abs() <= INVERT_TOL * (1.0 + target.abs()) {
            return Ok(v);
        }
        if r > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let nv = v - r / dg;
        v = if nv > lo && nv < hi { nv } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * (1.0 + v.abs()) {
            return Ok(v);
        }
    }
    Err(Error::Inversion { residual: (g(v).0 - target).abs() })
}

/// Current law `f(x, z)` of the Maxwell-Stokes problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurrentLaw {
    Zero,
    /// `k z`
    Linear { k: f64 },
    /// `alpha z / (1 + |z|)`
    Sublinear { alpha: f64 },
    /// A fixed vector.
    Constant { value: V3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentConstants {
    pub k0: f64,
    pub k2: f64,
    pub f0: f64,
    pub sublinear: bool,
}

impl CurrentLaw {
    pub fn name(&self) -> &'static str {
        match self {
            CurrentLaw::Zero => "zero",
            CurrentLaw::Linear { .. } => "linear",
            CurrentLaw::Sublinear { .. } => "sublinear",
            CurrentLaw::Constant { .. } => "constant",
        }
    }

    pub fn f(&self, _x: V3, z: V3) -> V3 {
        match self {
            CurrentLaw::Zero => [0.0; 3],
            CurrentLaw::Linear { k } => scale(*k, z),
            CurrentLaw::Sublinear { alpha } => scale(alpha / (1.0 + norm(z)), z),
            CurrentLaw::Constant { value } => *value,
        }
    }

    pub fn jacobian(&self, _x: V3, z: V3) -> Mat3 {
        match self {
            CurrentLaw::Zero | CurrentLaw::Constant { .. } => [[0.0; 3]; 3],
            CurrentLaw::Linear { k } => mat_scale(*k, &identity3()),
            CurrentLaw::Sublinear { alpha } => {
                let r = norm(z);
                let d = 1.0 + r;
                let base = mat_scale(alpha / d, &identity3());
                if r == 0.0 {
                    base
                } else {
                    mat_add(&base, -alpha / (d * d * r), &outer(z, z))
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CurrentLaw::Zero => true,
            CurrentLaw::Linear { k } => *k == 0.0,
            CurrentLaw::Sublinear { alpha } => *alpha == 0.0,
            CurrentLaw::Constant { value } => *value == [0.0; 3],
        }
    }

    pub fn constants(&self) -> CurrentConstants {
        match self {
            CurrentLaw::Zero => CurrentConstants { k0: 0.0, k2: 0.0, f0: 0.0, sublinear: true },
            CurrentLaw::Linear { k } => CurrentConstants { k0: k.abs(), k2: k.abs(), f0: 0.0, sublinear: *k == 0.0 },
            CurrentLaw::Sublinear { alpha } => {
                CurrentConstants { k0: alpha.abs(), k2: alpha.abs(), f0: 0.0, sublinear: true }
            }
            CurrentLaw::Constant { value } => CurrentConstants { k0: 0.0, k2: 0.0, f0: norm(*value), sublinear: true },
        }
    }
}

/// Sampling parameters for condition checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub points: usize,
    pub radius: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { points: 1000, radius: 10.0, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub id: String,
    pub pass: bool,
    /// Worst slack over the sample; negative means violated.
    pub margin: f64,
    pub witness: Option<V3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub law: String,
    pub results: Vec<ConditionResult>,
    /// Largest admissible `delta` in condition (a), for isotropic laws.
    pub delta: Option<f64>,
}

impl ConditionReport {
    pub fn get(&self, id: &str) -> Option<&ConditionResult> {
        self.results.iter().find(|r| r.id == id)
    }
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }
}

/// Sample points with radii spread over `[0, R]` on a log-like scale.
fn sample(rng: &mut ChaCha8Rng, radius: f64) -> V3 {
    let d = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0f64)];
    let n = norm(d).max(1e-12);
    let u: f64 = rng.random_range(0.0..1.0);
    let r = radius * if rng.random_bool(0.5) { u } else { u.powi(4) };
    scale(r / n, d)
}

struct Worst {
    id: String,
    margin: f64,
    witness: Option<V3>,
}

impl Worst {
    fn new(id: &str) -> Self {
        Worst { id: id.into(), margin: f64::INFINITY, witness: None }
    }
    fn see(&mut self, m: f64, at: V3) {
        if m < self.margin || m.is_nan() {
            self.margin = m;
            self.witness = Some(at);
        }
    }
    fn finish(self, tol: f64) -> ConditionResult {
        ConditionResult { pass: self.margin >= -tol, id: self.id, margin: self.margin, witness: self.witness }
    }
}

/// Default boundary normals for the trace conditions: the coordinate axes.
pub const AXIS_NORMALS: [V3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Sampled checks of coercivity, Jacobian ellipticity, strong monotonicity,
/// invertibility, coercivity and growth of the inverse, the bounds on `a` for
/// isotropic laws, and the tangential and normal trace conditions on the given
/// boundary normals.
pub fn check_conditions(law: &MaterialLaw, spec: &SampleSpec, normals: &[V3]) -> ConditionReport {
    let c = law.constants();
    let bc = law.b_constants();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = [0.0; 3];
    let tol = 1e-9;
    let mut h1 = Worst::new("coercivity");
    let mut h2 = Worst::new("ellipticity");
    let mut h3 = Worst::new("invertibility");
    let mut h4 = Worst::new("strong monotonicity");
    let mut b1 = Worst::new("inverse coercivity");
    let mut b2 = Worst::new("inverse growth");
    let mut jac = Worst::new("jacobian");
    let mut h3t = Worst::new("tangential trace");
    let mut h3n = Worst::new("normal trace");
    for _ in 0..spec.points {
        let z = sample(&mut rng, spec.radius);
        let z2 = sample(&mut rng, spec.radius);
        let hz = law.h(x, z);
        let nz = norm(z);
        h1.see((dot(hz, z) - (c.c1 * nz * nz - c.g1)).min(c.c2 * nz + c.g2 - norm(hz)), z);
        let j = law.jacobian(x, z);
        let (lo, _) = sym_eig_range(&j);
        h2.see((lo - c.mu).min(c.m2 - spectral_norm(&j)), z);
        let d = sub(z2, z);
        h4.see(dot(sub(law.h(x, z2), hz), d) - c.mu * dot(d, d), z2);
        // finite-difference Jacobian
        let mut fd_err: f64 = 0.0;
        for k in 0..3 {
            let hstep = 1e-6 * (1.0 + nz);
            let mut zp = z;
            let mut zm = z;
            zp[k] += hstep;
            zm[k] -= hstep;
            let col = scale(0.5 / hstep, sub(law.h(x, zp), law.h(x, zm)));
            for i in 0..3 {
                fd_err = fd_err.max((col[i] - j[i][k]).abs());
            }
        }
        jac.see(1e-6 * spectral_norm(&j).max(1.0) - fd_err, z);
        // inverse and the transferred conditions, with w sampled directly
        let w = z;
        let w2 = z2;
        match (law.b(x, w), law.b(x, w2)) {
            (Ok(bw), Ok(bw2)) => {
                h3.see(1e-9 * (1.0 + norm(w)) - norm(sub(law.h(x, bw), w)), w);
                let nw = norm(w);
                b1.see((dot(bw, w) - (bc.c3 * nw * nw - bc.g3)).min(bc.c4 * nw + bc.g4 - norm(bw)), w);
                let dw = sub(w2, w);
                b2.see(dot(sub(bw2, bw), dw) - bc.lambda0 * dot(dw, dw), w2);
                for &n in normals {
                    let n = scale(1.0 / norm(n), n);
                    // z_T = B_T(y) implies y_T = H_T(z_T), whatever the normal part of z
                    let zt = crate::vec3::tangential(bw, n);
                    let e = norm(crate::vec3::tangential(sub(law.h(x, zt), w), n));
                    h3t.see(1e-8 * (1.0 + nw) - e, w);
                    // nu . z = nu . B(w) implies nu . w = nu . H(z), for any tangential part of z
                    let zz = add(bw, crate::vec3::tangential(z2, n));
                    let e = (dot(n, law.h(x, zz)) - dot(n, w)).abs();
                    h3n.see(1e-8 * (1.0 + nw) - e, w);
                }
            }
            (Err(_), _) => h3.see(f64::NEG_INFINITY, w),
            (_, Err(_)) => h3.see(f64::NEG_INFINITY, w2),
        }
    }
    let mut results = vec![h1.finish(tol), h2.finish(tol), h3.finish(0.0), h4.finish(tol)];
    results.extend([b1.finish(tol), b2.finish(tol), jac.finish(0.0)]);
    if !normals.is_empty() {
        results.extend([h3t.finish(0.0), h3n.finish(0.0)]);
    }
    let mut delta = None;
    if let Some(a) = law.isotropic() {
        // lambda <= a <= Lambda and s a'(s) >= -(1 - delta)/2 a(s)
        let mut worst: f64 = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut at = [0.0; 3];
        let smax = spec.radius * spec.radius;
        let n = spec.points.max(2);
        for i in 0..n {
            let s = smax * (i as f64 / (n - 1) as f64).powi(3);
            let (av, da) = a(s);
            lo = lo.min(av);
            hi = hi.max(av);
            let r = -2.0 * s * da / av;
            if r > worst {
                worst = r;
                at = [s.sqrt(), 0.0, 0.0];
            }
        }
        let d = 1.0 - worst;
        delta = Some(d);
        results.push(ConditionResult { id: "isotropic bounds".into(), pass: d > 0.0 && lo > 0.0 && hi.is_finite(), margin: d, witness: Some(at) });
    }
    ConditionReport { law: law.name().into(), results, delta }
}

/// Sampled linear growth bound and the sublinearity surrogate.
pub fn check_current(law: &CurrentLaw, spec: &SampleSpec) -> ConditionReport {
    let c = law.constants();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = [0.0; 3];
    let mut f1 = Worst::new("current growth");
    for _ in 0..spec.points {
        let z = sample(&mut rng, spec.radius);
        f1.see(c.k0 * norm(z) + c.f0 - norm(law.f(x, z)), z);
        f1.see(c.k2 - spectral_norm(&law.jacobian(x, z)), z);
    }
    // |f(z)|/|z| along growing radii must decay below 1e-2
    let dir = [0.6, 0.0, 0.8];
    let ratios: Vec<f64> = (3..9).map(|k| 10f64.powi(k)).map(|r| norm(law.f(x, scale(r, dir))) / r).collect();
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let last = *ratios.last().unwrap();
    let f0 = ConditionResult { id: "sublinearity".into(), pass: decreasing && last < 1e-2, margin: 1e-2 - last, witness: Some(scale(1e8, dir)) };
    ConditionReport { law: law.name().into(), results: vec![f1.finish(1e-9), f0], delta: None }
}

/// Zarantonello step `tau = lambda0 / L^2` and contraction `sqrt(1 - lambda0^2/L^2)`.
pub fn zarantonello_step_size(lambda0: f64, l: f64) -> Result<(f64, f64)> {
    if !(lambda0 > 0.0) || !(l > 0.0) || lambda0 > l {
        return Err(Error::Parameter(format!("need 0 < lambda0 <= L, got {lambda0}, {l}")));
    }
    Ok((lambda0 / (l * l), (1.0 - (lambda0 / l).powi(2)).max(0.0).sqrt()))
}

/// Names of the builtin material laws with representative parameters.
pub fn builtin_laws() -> Vec<MaterialLaw> {
    vec![
        MaterialLaw::Identity,
        MaterialLaw::Linear { matrix: [[2.0, 0.5, 0.0], [0.5, 1.5, 0.2], [0.0, 0.2, 1.0]] },
        MaterialLaw::Saturating,
        MaterialLaw::Exponential,
        MaterialLaw::LogCosh,
        MaterialLaw::Componentwise { beta: 0.5 },
    ]
}

pub fn builtin_currents() -> Vec<CurrentLaw> {
    vec![
        CurrentLaw::Zero,
        CurrentLaw::Linear { k: 1.0 },
        CurrentLaw::Sublinear { alpha: 0.5 },
        CurrentLaw::Constant { value: [0.0, 0.0, 1.0] },
    ]
}

/// Evaluate `f(i)` for `i < n`, in parallel when the `parallel` feature is on.
pub(crate) fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

use crate::fem::{FemSpaces, QField};

/// `H(x, z)` at every quadrature point.
pub fn apply_h(s: &FemSpaces, law: &MaterialLaw, z: &QField) -> QField {
    QField { values: par_map(z.len(), |i| law.h(s.qpoint(i / 4, i % 4), z.values[i])) }
}

/// `B(x, w)` at every quadrature point.
pub fn apply_b(s: &FemSpaces, law: &MaterialLaw, w: &QField) -> Result<QField> {
    let v: Result<Vec<V3>> = par_map(w.len(), |i| law.b(s.qpoint(i / 4, i % 4), w.values[i])).into_iter().collect();
    Ok(QField { values: v? })
}

/// `B(x, w)` with its Jacobian at every quadrature point.
pub fn apply_b_with_jacobian(s: &FemSpaces, law: &MaterialLaw, w: &QField) -> Result<(QField, Vec<Mat3>)> {
    let out = par_map(w.len(), |i| -> Result<(V3, Mat3)> {
        let x = s.qpoint(i / 4, i % 4);
        let z = law.b(x, w.values[i])?;
        let j = mat_inverse(&law.jacobian(x, z)).ok_or(Error::Inversion { residual: f64::NAN })?;
        Ok((z, j))
    });
    let mut vals = Vec::with_capacity(w.len());
    let mut jac = Vec::with_capacity(w.len());
    for o in out {
        let (z, j) = o?;
        vals.push(z);
        jac.push(j);
    }
    Ok((QField { values: vals }, jac))
}

/// `f(x, z)` at every quadrature point.
pub fn apply_f(s: &FemSpaces, law: &CurrentLaw, z: &QField) -> QField {
    QField { values: par_map(z.len(), |i| law.f(s.qpoint(i / 4, i % 4), z.values[i])) }
}

/// Per-tet mean of quadrature-point matrices.
pub fn tet_mean_mat(m: &[Mat3]) -> Vec<Mat3> {
    m.chunks(4)
        .map(|c| {
            let mut a = [[0.0; 3]; 3];
            for x in c {
                a = mat_add(&a, 0.25, x);
            }
            a
        })
        .collect()
}
