mod common;

use common::*;
use curlforge::constitutive::{MaterialLaw, SampleSpec};
use curlforge::fem::{FemSpaces, QField, ScalarSpace};
use curlforge::mesh::GeometryKind;
use curlforge::scalar::*;
use curlforge::vec3::{add, dot, sub, V3};
use curlforge::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn problem<'a>(law: &'a MaterialLaw, drift: QField, data: BoundaryData) -> QuasilinearProblem<'a> {
    QuasilinearProblem { law, drift, data, params: SolverParams::default() }
}

fn random_q(seed: u64, s: &FemSpaces, amp: f64) -> QField {
    let v = random_vec(&mut rng(seed), 12 * s.nt());
    QField { values: v.chunks(3).map(|c| [amp * c[0], amp * c[1], amp * c[2]]).collect() }
}

#[test]
fn zero_data_gives_zero() {
    let s = spaces(GeometryKind::SolidTorus, 3);
    let p1 = s.p1();
    let law = MaterialLaw::Saturating;
    let sol = solve_conormal(&s, &p1, &problem(&law, QField::zeros(s.nt()), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    assert!(sol.phi.iter().all(|&v| v == 0.0));
    let sol = solve_dirichlet(&s, &p1, &problem(&law, QField::zeros(s.nt()), BoundaryData::Dirichlet(vec![0.0; s.nv()]))).unwrap();
    assert!(sol.phi.iter().all(|&v| v == 0.0));
}

#[test]
fn gradient_drift_cancels() {
    let s = spaces(GeometryKind::SphericalShell, 2);
    let p1 = s.p1();
    let chi = random_vec(&mut rng(4), s.nv());
    let drift = s.scalar_grad_q(&p1, &chi);
    let sol = solve_conormal(&s, &p1, &problem(&MaterialLaw::Identity, drift, BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    let shift = p1.mean(&chi);
    for i in 0..s.nv() {
        assert!((sol.phi[i] + chi[i] - shift).abs() < 1e-9, "{i}");
    }
}

#[test]
fn neumann_linear_flux_reproduces_linear_function() {
    let s = spaces(GeometryKind::Box, 4);
    let p1 = s.p1();
    let c = [0.3, -1.0, 2.0];
    let g = s.boundary_load(&p1, |_, n| dot(c, n));
    let sol = solve_conormal(&s, &p1, &problem(&MaterialLaw::Identity, QField::zeros(s.nt()), BoundaryData::Neumann(g))).unwrap();
    let l: Vec<f64> = s.mesh.vertices.iter().map(|&x| dot(c, x)).collect();
    let m = p1.mean(&l);
    for i in 0..s.nv() {
        assert!((sol.phi[i] - (l[i] - m)).abs() < 1e-8);
    }
}

#[test]
fn incompatible_flux_is_rejected() {
    let s = spaces(GeometryKind::Box, 2);
    let p1 = s.p1();
    let g = s.boundary_load(&p1, |_, _| 1.0);
    let r = solve_conormal(&s, &p1, &problem(&MaterialLaw::Identity, QField::zeros(s.nt()), BoundaryData::Neumann(g)));
    assert!(matches!(r, Err(Error::Compatibility { .. })));
}

#[test]
fn dirichlet_linear_trace_is_reproduced() {
    let s = spaces(GeometryKind::SolidTorus, 3);
    let p1 = s.p1();
    let l: Vec<f64> = s.mesh.vertices.iter().map(|x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2]).collect();
    for law in [MaterialLaw::Identity, MaterialLaw::Linear { matrix: [[2.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 1.5]] }] {
        let sol = solve_dirichlet(&s, &p1, &problem(&law, QField::zeros(s.nt()), BoundaryData::Dirichlet(l.clone()))).unwrap();
        for i in 0..s.nv() {
            assert!((sol.phi[i] - l[i]).abs() < 1e-8);
        }
    }
}

/// Independent dense Newton with line search for the co-normal problem; the
/// Jacobian is taken by finite differences of the residual.
fn dense_newton_oracle(s: &FemSpaces, law: &MaterialLaw, drift: &QField) -> Vec<f64> {
    let n = s.nv();
    let residual = |phi: &DVector<f64>| -> DVector<f64> {
        let mut r = DVector::zeros(n);
        for t in 0..s.nt() {
            let tet = s.mesh.tets[t];
            let mut g = [0.0; 3];
            for k in 0..4 {
                for c in 0..3 {
                    g[c] += phi[tet[k]] * s.grad[t][k][c];
                }
            }
            for q in 0..4 {
                let b = law.invert_newton([0.0; 3], add(drift.values[4 * t + q], g), 1e-14).unwrap();
                for k in 0..4 {
                    r[tet[k]] += 0.25 * s.vol[t] * dot(b, s.grad[t][k]);
                }
            }
        }
        r
    };
    let mut phi = DVector::zeros(n);
    let mut r = residual(&phi);
    for _ in 0..40 {
        if r.norm() < 1e-13 {
            break;
        }
        let mut j = DMatrix::zeros(n + 1, n + 1);
        let h = 1e-7;
        for c in 0..n {
            let mut p = phi.clone();
            p[c] += h;
            let rp = residual(&p);
            p[c] -= 2.0 * h;
            let rm = residual(&p);
            j.view_mut((0, c), (n, 1)).copy_from(&((rp - rm) / (2.0 * h)));
            j[(n, c)] = 1.0;
            j[(c, n)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(-&r));
        rhs[n] = -phi.sum();
        let d = j.lu().solve(&rhs).unwrap();
        let mut t = 1.0;
        loop {
            let trial = &phi + t * d.rows(0, n);
            let rt = residual(&trial);
            if rt.norm() < r.norm() || t < 1e-4 {
                phi = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    phi.iter().copied().collect()
}

#[test]
fn saturating_conormal_matches_dense_newton() {
    let s = spaces(GeometryKind::SphericalShell, 2);
    let p1 = s.p1();
    let law = MaterialLaw::Saturating;
    let drift = random_q(9, &s, 2.0);
    let sol = solve_conormal(&s, &p1, &problem(&law, drift.clone(), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    let oracle = dense_newton_oracle(&s, &law, &drift);
    let d = h1_seminorm_diff(&s, &p1, &sol.phi, &oracle);
    assert!(d < 1e-7, "H1 difference {d:.3e}");
}

#[test]
fn uniqueness_from_different_guesses() {
    let s = spaces(GeometryKind::SolidTorus, 3);
    let p1 = s.p1();
    let law = MaterialLaw::Exponential;
    let pb = problem(&law, random_q(1, &s, 1.5), BoundaryData::Neumann(vec![0.0; s.nv()]));
    let a = solve_with_guess(&s, &p1, &pb, None).unwrap();
    let guess = random_vec(&mut rng(77), s.nv());
    let b = solve_with_guess(&s, &p1, &pb, Some(&guess)).unwrap();
    assert!(h1_seminorm_diff(&s, &p1, &a.phi, &b.phi) < 1e-8);
}

#[test]
fn observed_contraction_below_prediction() {
    // B = A^-1 has spectrum [1/2, 1]: lambda = 0.5, L = 1, q = sqrt(3)/2
    let s = spaces(GeometryKind::Box, 4);
    let p1 = s.p1();
    let law = MaterialLaw::Linear { matrix: [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.5]] };
    let mut pb = problem(&law, random_q(3, &s, 1.0), BoundaryData::Neumann(vec![0.0; s.nv()]));
    pb.params.newton = false;
    let sol = solve_conormal(&s, &p1, &pb).unwrap();
    assert!((sol.contraction - 0.75f64.sqrt()).abs() < 1e-12);
    for w in sol.history.windows(2) {
        assert!(w[1].residual <= (sol.contraction + 0.05) * w[0].residual);
    }
}

#[test]
fn data_continuity_and_a_priori_bound() {
    let s = spaces(GeometryKind::SphericalShell, 2);
    let p1 = s.p1();
    let law = MaterialLaw::LogCosh;
    let c = law.constants();
    // |grad(phi1 - phi2)| <= (M2 / mu) |dF| from strong monotonicity of B
    let f1 = random_q(5, &s, 3.0);
    let delta = random_q(6, &s, 0.1);
    let a = solve_conormal(&s, &p1, &problem(&law, f1.clone(), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    let b = solve_conormal(&s, &p1, &problem(&law, f1.add(&delta), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    let d = h1_seminorm_diff(&s, &p1, &a.phi, &b.phi);
    assert!(d <= c.m2 / c.mu * s.l2norm(&delta));
    for seed in 10..14 {
        let f = random_q(seed, &s, seed as f64);
        let sol = solve_conormal(&s, &p1, &problem(&law, f, BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
        assert!(sol.bound_ratio <= c.m2 / c.mu, "{}", sol.bound_ratio);
    }
}

fn l2_error(s: &FemSpaces, phi: &[f64], exact: impl Fn(V3) -> f64) -> f64 {
    let mut e = 0.0;
    for t in 0..s.nt() {
        for q in 0..4 {
            let l = FemSpaces::qbary(q);
            let v: f64 = (0..4).map(|k| l[k] * phi[s.mesh.tets[t][k]]).sum();
            e += s.qweight(t) * (v - exact(s.qpoint(t, q))).powi(2);
        }
    }
    e.sqrt()
}

#[test]
fn manufactured_dirichlet_converges_at_second_order() {
    // B(F + grad phi*) = G with div G = 0, hence F = H(G) - grad phi*
    let law = MaterialLaw::Saturating;
    let phi_star = |x: V3| (x[0] + 0.5 * x[1]).sin() * x[2].cosh();
    let grad_star = |x: V3| {
        let (a, c) = (x[0] + 0.5 * x[1], x[2]);
        [a.cos() * c.cosh(), 0.5 * a.cos() * c.cosh(), a.sin() * c.sinh()]
    };
    let g_field = |x: V3| [x[1].sin(), x[2].sin(), x[0].sin()];
    let mut errs = vec![];
    for n in [4, 8, 16] {
        let s = spaces(GeometryKind::Box, n);
        let p1 = s.p1();
        let drift = s.sample(|x| sub(law.h(x, g_field(x)), grad_star(x)));
        let trace: Vec<f64> = s.mesh.vertices.iter().map(|&x| phi_star(x)).collect();
        let sol = solve_dirichlet(&s, &p1, &problem(&law, drift, BoundaryData::Dirichlet(trace))).unwrap();
        errs.push(l2_error(&s, &sol.phi, phi_star));
    }
    let r1 = (errs[0] / errs[1]).log2();
    let r2 = (errs[1] / errs[2]).log2();
    assert!(r1 > 1.7 && r2 > 1.7, "{errs:?} rates {r1:.2} {r2:.2}");
}

#[test]
fn cr_space_conormal_with_identity() {
    // for B = identity the problem is linear: K phi = -int F . grad eta
    let s = spaces(GeometryKind::SolidTorus, 3);
    let cr: ScalarSpace = s.cr();
    let f = random_q(8, &s, 1.0);
    let sol = solve_conormal(&s, &cr, &problem(&MaterialLaw::Identity, f.clone(), BoundaryData::Neumann(vec![0.0; cr.ndof]))).unwrap();
    let k = dense(&cr.stiffness(None));
    let rhs = -DVector::from_vec(s.grad_load(&cr, &f));
    let x = lstsq(&k, &rhs);
    let xs: Vec<f64> = x.iter().copied().collect();
    assert!(h1_seminorm_diff(&s, &cr, &sol.phi, &xs) < 1e-8 * (1.0 + sol.grad_norm));
}

#[test]
fn history_exports_csv() {
    let s = spaces(GeometryKind::Box, 2);
    let p1 = s.p1();
    let law = MaterialLaw::Saturating;
    let sol = solve_conormal(&s, &p1, &problem(&law, random_q(2, &s, 1.0), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
    let csv = sol.to_csv();
    assert!(csv.starts_with("iteration,residual,step_norm"));
    assert_eq!(csv.lines().count(), sol.history.len() + 1);
    let _ = SampleSpec::default();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn residual_history_is_monotone(seed in 0u64..1000, amp in 0.1f64..5.0) {
        let s = spaces(GeometryKind::Box, 3);
        let p1 = s.p1();
        let law = MaterialLaw::Saturating;
        let sol = solve_conormal(&s, &p1, &problem(&law, random_q(seed, &s, amp), BoundaryData::Neumann(vec![0.0; s.nv()]))).unwrap();
        for w in sol.history.windows(2) {
            prop_assert!(w[1].residual <= w[0].residual + 1e-12);
        }
    }
}
