use curlforge::constitutive::*;
use curlforge::vec3::{dot, norm, sub, V3};
use curlforge::Error;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use proptest::prelude::*;

const X: V3 = [0.1, 0.2, 0.3];

#[test]
fn b_constants_follow_the_remark_formulas() {
    let b = derive_b_constants(1.0, 2.0, 0.0, 0.0, 1.0, 2.0).unwrap();
    assert_eq!(b.c3, 1.0 / 8.0);
    assert_eq!(b.c4, 1.0);
    assert_eq!(b.lambda0, 0.25);
    let id = derive_b_constants(1.0, 1.0, 0.0, 0.0, 1.0, 1.0).unwrap();
    assert_eq!((id.c3, id.c4, id.g3, id.g4, id.lambda0), (0.5, 1.0, 0.0, 0.0, 1.0));
    let g = derive_b_constants(2.0, 1.0, 0.5, 3.0, 1.0, 1.0).unwrap();
    assert!((g.g3 - (0.5 + 1.0 * 9.0)).abs() < 1e-15);
    assert!((g.g4 - 0.5f64.sqrt()).abs() < 1e-15);
    for bad in [(0.0, 1.0, 1.0, 1.0), (1.0, -1.0, 1.0, 1.0), (1.0, 1.0, 0.0, 1.0), (1.0, 1.0, 1.0, f64::NAN)] {
        assert!(matches!(derive_b_constants(bad.0, bad.1, 0.0, 0.0, bad.2, bad.3), Err(Error::Parameter(_))));
    }
}

#[test]
fn linear_inverse_matches_dense_solve() {
    let m = [[3.0, 0.4, -0.2], [0.4, 2.0, 0.1], [-0.2, 0.1, 1.5]];
    let law = MaterialLaw::Linear { matrix: m };
    law.validate().unwrap();
    let w = [1.0, -2.0, 0.5];
    let z = law.b(X, w).unwrap();
    let a = Matrix3::from_fn(|i, j| m[i][j]);
    let oracle = a.try_inverse().unwrap() * Vector3::new(w[0], w[1], w[2]);
    for i in 0..3 {
        assert!((z[i] - oracle[i]).abs() < 1e-12);
    }
    assert!(MaterialLaw::Linear { matrix: [[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] }.validate().is_err());
    assert!(MaterialLaw::Linear { matrix: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]] }.validate().is_err());
}

#[test]
fn identity_inverse_is_trivial() {
    let w = [3.0, -1.0, 7.5];
    assert_eq!(MaterialLaw::Identity.b(X, w).unwrap(), w);
}

#[test]
fn saturating_round_trip() {
    let law = MaterialLaw::Saturating;
    for w in [[0.0, 0.0, 0.0], [1e-8, 0.0, 0.0], [1.0, 2.0, 3.0], [-50.0, 20.0, 1e3]] {
        let z = law.b(X, w).unwrap();
        assert!(norm(sub(law.h(X, z), w)) <= 1e-10 * (1.0 + norm(w)));
        let zn = law.invert_newton(X, w, 1e-12).unwrap();
        assert!(norm(sub(z, zn)) <= 1e-10 * (1.0 + norm(z)));
    }
}

/// Independent grid maximisation of `-2 s a'(s) / a(s)`.
fn delta_oracle(ratio: impl Fn(f64) -> f64, smax: f64) -> f64 {
    let n = 2_000_000;
    let worst = (0..=n).map(|i| ratio(smax * i as f64 / n as f64)).fold(0.0, f64::max);
    1.0 - worst
}

#[test]
fn cond_a_delta_for_saturating_and_exponential() {
    let spec = SampleSpec { points: 4000, radius: 10.0, seed: 3 };
    let sat = check_conditions(&MaterialLaw::Saturating, &spec, &[]);
    let d = sat.delta.unwrap();
    // closed form: max of 2s/((1+s)(2+s)) at s = sqrt 2
    let exact = 1.0 - 2.0 * 2f64.sqrt() / (4.0 + 3.0 * 2f64.sqrt());
    assert!(d >= exact - 1e-12 && d - exact < 1e-3, "{d} vs {exact}");
    assert!(sat.get("isotropic bounds").unwrap().pass);

    let exp = check_conditions(&MaterialLaw::Exponential, &spec, &[]);
    let d = exp.delta.unwrap();
    let oracle = delta_oracle(|s| 2.0 * s / (s.exp() + 1.0), 100.0);
    assert!(d >= oracle - 1e-9 && d - oracle < 1e-3, "{d} vs {oracle}");
    assert!((oracle - 0.443).abs() < 1e-3);
}

#[test]
fn saturating_bounds_lambda_one_lambda_two() {
    let a = MaterialLaw::Saturating.isotropic().unwrap();
    for s in [0.0, 0.5, 3.0, 1e6] {
        let v = a(s).0;
        assert!((1.0..=2.0).contains(&v));
    }
}

#[test]
fn builtin_laws_pass_their_checks() {
    let spec = SampleSpec { points: 2000, radius: 10.0, seed: 11 };
    for law in builtin_laws() {
        let rep = check_conditions(&law, &spec, &[]);
        for r in &rep.results {
            assert!(r.pass, "{} fails {} (margin {:.3e} at {:?})", law.name(), r.id, r.margin, r.witness);
        }
    }
    let id = check_conditions(&MaterialLaw::Identity, &spec, &AXIS_NORMALS);
    assert!(id.all_pass());
    assert!(id.get("ellipticity").unwrap().margin.abs() < 1e-12);
}

#[test]
fn log_cosh_hessian_eigenvalues_within_bounds() {
    // finite-difference Hessian of P(z) = |z|^2 + log cosh |z|
    let p = |z: [f64; 3]| dot(z, z) + norm(z).cosh().ln();
    let c = MaterialLaw::LogCosh.constants();
    let h = 1e-4;
    for z in [[0.3, -0.2, 0.1], [2.0, 1.0, -1.0], [0.0, 5.0, 0.5]] {
        let hess = Matrix3::from_fn(|i, j| {
            let e = |k: usize, s: f64| {
                let mut v = [0.0; 3];
                v[k] = s;
                v
            };
            let at = |a: [f64; 3], b: [f64; 3]| p([z[0] + a[0] + b[0], z[1] + a[1] + b[1], z[2] + a[2] + b[2]]);
            (at(e(i, h), e(j, h)) - at(e(i, h), e(j, -h)) - at(e(i, -h), e(j, h)) + at(e(i, -h), e(j, -h))) / (4.0 * h * h)
        });
        let ev = SymmetricEigen::new(hess).eigenvalues;
        assert!(ev.min() >= c.mu - 1e-5 && ev.max() <= c.m2 + 1e-5, "{ev:?}");
    }
}

#[test]
fn current_law_reports() {
    let spec = SampleSpec::default();
    let lin = check_current(&CurrentLaw::Linear { k: 1.0 }, &spec);
    assert!(lin.get("current growth").unwrap().pass);
    assert!(!lin.get("sublinearity").unwrap().pass);
    let sub = check_current(&CurrentLaw::Sublinear { alpha: 0.5 }, &spec);
    assert!(sub.all_pass());
    assert!(check_current(&CurrentLaw::Constant { value: [0.0, 0.0, 2.0] }, &spec).all_pass());
}

#[test]
fn trace_conditions_separate_isotropic_from_componentwise() {
    let spec = SampleSpec { points: 300, radius: 5.0, seed: 5 };
    let sat = check_conditions(&MaterialLaw::Saturating, &spec, &AXIS_NORMALS);
    assert!(!sat.get("tangential trace").unwrap().pass);
    assert!(!sat.get("normal trace").unwrap().pass);
    let cw = check_conditions(&MaterialLaw::Componentwise { beta: 0.5 }, &spec, &AXIS_NORMALS);
    assert!(cw.get("tangential trace").unwrap().pass && cw.get("normal trace").unwrap().pass);
    // an oblique normal breaks the componentwise law
    let tilted = check_conditions(&MaterialLaw::Componentwise { beta: 0.5 }, &spec, &[[1.0, 1.0, 0.0]]);
    assert!(!tilted.get("normal trace").unwrap().pass);
}

#[test]
fn zarantonello_examples() {
    assert_eq!(zarantonello_step_size(1.0, 1.0).unwrap(), (1.0, 0.0));
    let (t, q) = zarantonello_step_size(0.25, 2.0).unwrap();
    assert!((t - 1.0 / 16.0).abs() < 1e-15 && (q - 63f64.sqrt() / 8.0).abs() < 1e-15);
    assert!(matches!(zarantonello_step_size(2.0, 1.0), Err(Error::Parameter(_))));
}

#[test]
fn laws_deserialize_from_tables() {
    let l: MaterialLaw = toml::from_str("name = \"componentwise\"\nbeta = 0.25").unwrap();
    assert_eq!(l, MaterialLaw::Componentwise { beta: 0.25 });
    let c: CurrentLaw = toml::from_str("name = \"sublinear\"\nalpha = 2.0").unwrap();
    assert_eq!(c, CurrentLaw::Sublinear { alpha: 2.0 });
    assert!(toml::from_str::<MaterialLaw>("name = \"componentwise\"\nbeta = 1.0\nextra = 1").is_err());
}

fn v3() -> impl Strategy<Value = V3> {
    prop::array::uniform3(-20.0..20.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn inverse_consistency(z in v3(), k in 0usize..6) {
        let law = &builtin_laws()[k];
        let w = law.h(X, z);
        let back = law.b(X, w).unwrap();
        prop_assert!(norm(sub(back, z)) <= 1e-9 * (1.0 + norm(z)));
        let again = law.h(X, law.b(X, z).unwrap());
        prop_assert!(norm(sub(again, z)) <= 1e-9 * (1.0 + norm(z)));
    }

    #[test]
    fn monotonicity_transfers_to_b(w1 in v3(), w2 in v3(), k in 0usize..6) {
        let law = &builtin_laws()[k];
        let l0 = law.b_constants().lambda0;
        let d = sub(w2, w1);
        let lhs = dot(sub(law.b(X, w2).unwrap(), law.b(X, w1).unwrap()), d);
        prop_assert!(lhs >= l0 * dot(d, d) - 1e-9 * (1.0 + dot(d, d)));
        let c3 = law.b_constants().c3;
        prop_assert!(dot(law.b(X, w1).unwrap(), w1) >= c3 * dot(w1, w1) - 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences(z in v3(), k in 0usize..6) {
        let law = &builtin_laws()[k];
        let j = law.jacobian(X, z);
        let h = 1e-6 * (1.0 + norm(z));
        for c in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[c] += h;
            zm[c] -= h;
            let (hp, hm) = (law.h(X, zp), law.h(X, zm));
            for r in 0..3 {
                let fd = (hp[r] - hm[r]) / (2.0 * h);
                prop_assert!((fd - j[r][c]).abs() <= 1e-6 * (1.0 + j[r][c].abs()));
            }
        }
    }
}
