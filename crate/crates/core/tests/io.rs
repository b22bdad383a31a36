mod common;

use std::path::Path;
use std::process::Command as Proc;

use common::*;
use curlforge::io::*;
use curlforge::mesh::GeometryKind;
use proptest::prelude::*;

fn ev(s: &str, x: [f64; 3]) -> f64 {
    Expr::parse(s).unwrap().eval(x)
}

#[test]
fn expressions_follow_arithmetic_precedence() {
    let p = [0.3, -1.2, 2.0];
    let (x, y, z) = (p[0], p[1], p[2]);
    let cases: Vec<(&str, f64)> = vec![
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("8 / 4 / 2", 1.0),
        ("2 ^ 3 ^ 2", 512.0),
        ("-2 ^ 2", -4.0),
        ("2 * -3", -6.0),
        ("1.5e2 - 2.5E-1", 149.75),
        ("x*y - z", x * y - z),
        ("sin(x) + cos(y)*exp(z)", x.sin() + y.cos() * z.exp()),
        ("sqrt(x*x + y*y + z*z)", (x * x + y * y + z * z).sqrt()),
        ("pow(z, 0.5) + pow(2, -1)", z.sqrt() + 0.5),
        ("pi * x", std::f64::consts::PI * x),
        ("+x - -y", x + y),
    ];
    for (s, want) in cases {
        let got = ev(s, p);
        assert!((got - want).abs() <= 1e-15 * want.abs().max(1.0), "{s}: {got} vs {want}");
    }
}

#[test]
fn malformed_expressions_are_config_errors() {
    for s in ["", "1 +", "(x", "x)", "foo(1)", "sin(1, 2)", "pow(1)", "2 $ 3", "w", "1e", "sin x"] {
        match Expr::parse(s) {
            Err(curlforge::Error::Config(_)) => {}
            other => panic!("'{s}' gave {other:?}"),
        }
    }
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-50i32..50).prop_map(|v| format!("{}", v as f64 / 4.0)),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!['+', '-', '*', '/'])).prop_map(|(a, b, o)| format!("{a} {o} {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
            inner.clone().prop_map(|a| format!("-({a})")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
        ]
    })
}

proptest! {
    #[test]
    fn printed_expressions_parse_back(src in arb_expr(), x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let e = Expr::parse(&src).unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        prop_assert_eq!(&again, &e);
        let (a, b) = (e.eval([x, y, z]), again.eval([x, y, z]));
        prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
    }

    #[test]
    fn reals_round_trip_through_the_vtk_format(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let s = curlforge::io::vtk::real(v);
        prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn rate_fit_recovers_power_laws(c in 0.1f64..10.0, r in 0.5f64..3.0) {
        let h = [0.4f64, 0.2, 0.1, 0.05];
        let e: Vec<f64> = h.iter().map(|h| c * h.powf(r)).collect();
        prop_assert!((fit_rate(&h, &e).unwrap() - r).abs() < 1e-10);
    }
}

const BOX: &str = r#"
[geometry]
kind = "box"
resolution = 3

[problem]
kind = "dirichlet"
data = ["y^2", "z^2", "x^2"]
current = ["-2", "-2", "-2"]
exact_induction = ["-2*z", "-2*x", "-2*y"]
"#;

#[test]
fn config_rejects_unknown_keys_everywhere() {
    assert!(RunConfig::parse(BOX, &[], None).is_ok());
    for bad in [
        BOX.replace("resolution = 3", "resolution = 3\ncolour = 1"),
        BOX.replace("kind = \"dirichlet\"", "kind = \"dirichlet\"\nflux = \"1\""),
        format!("{BOX}\n[solver]\nsed = 3\n"),
        format!("{BOX}\n[solver.bvp]\ntoll = 1e-3\n"),
        format!("{BOX}\n[fixed_point]\nrelax = 0.5\n"),
        format!("{BOX}\n[law]\nname = \"saturating\"\nk = 2\n"),
        BOX.replace("\"box\"", "\"sphere\""),
        BOX.replace("[\"-2\", \"-2\", \"-2\"]", "[\"-2\", \"-2\"]"),
    ] {
        assert!(matches!(RunConfig::parse(&bad, &[], None), Err(curlforge::Error::Config(_))), "{bad}");
    }
}

#[test]
fn overrides_and_echo_reproduce_the_config() {
    let o = vec!["tol=1e-11".to_string(), "solver.bvp.xi_budget=17".to_string(), "omega=0.5".to_string()];
    let c = RunConfig::parse(BOX, &o, Some(99)).unwrap();
    assert_eq!(c.solver.bvp.tol, 1e-11);
    assert_eq!(c.solver.bvp.xi_budget, 17);
    assert_eq!(c.fixed_point.omega, 0.5);
    assert_eq!(c.solver.seed, 99);
    let again = RunConfig::parse(&c.echo(), &[], None).unwrap();
    assert_eq!(again, c);
    assert!(RunConfig::parse(BOX, &["tol".into()], None).is_err());
    assert!(RunConfig::parse(BOX, &["geometry.kind.x=1".into()], None).is_err());
}

/// A small reader for the legacy ASCII grammar: header, UNSTRUCTURED_GRID,
/// counted sections and attribute blocks.
fn check_vtk(text: &str) -> (Vec<[f64; 3]>, Vec<String>) {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    let title = lines.next().unwrap();
    assert!(title.len() < 256);
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET UNSTRUCTURED_GRID"));
    let toks: Vec<&str> = lines.flat_map(|l| l.split_whitespace()).collect();
    let pos = std::cell::Cell::new(0);
    let next = || {
        pos.set(pos.get() + 1);
        *toks.get(pos.get() - 1).expect("unexpected end")
    };
    assert_eq!(next(), "POINTS");
    let nv: usize = next().parse().unwrap();
    assert!(["float", "double"].contains(&next()));
    let pts: Vec<[f64; 3]> = (0..nv).map(|_| [next().parse().unwrap(), next().parse().unwrap(), next().parse().unwrap()]).collect();
    assert_eq!(next(), "CELLS");
    let nt: usize = next().parse().unwrap();
    let size: usize = next().parse().unwrap();
    let mut read = 0;
    for _ in 0..nt {
        let k: usize = next().parse().unwrap();
        read += k + 1;
        for _ in 0..k {
            let v: usize = next().parse().unwrap();
            assert!(v < nv);
        }
    }
    assert_eq!(read, size);
    assert_eq!(next(), "CELL_TYPES");
    assert_eq!(next().parse::<usize>().unwrap(), nt);
    for _ in 0..nt {
        assert_eq!(next(), "10");
    }
    let mut names = vec![];
    let mut count = 0;
    while pos.get() < toks.len() {
        match next() {
            "CELL_DATA" => {
                count = next().parse().unwrap();
                assert_eq!(count, nt);
            }
            "POINT_DATA" => {
                count = next().parse().unwrap();
                assert_eq!(count, nv);
            }
            "VECTORS" => {
                names.push(next().to_string());
                assert_eq!(next(), "double");
                for _ in 0..3 * count {
                    next().parse::<f64>().unwrap();
                }
            }
            "SCALARS" => {
                names.push(next().to_string());
                assert_eq!(next(), "double");
                assert_eq!(next(), "1");
                assert_eq!(next(), "LOOKUP_TABLE");
                assert_eq!(next(), "default");
                for _ in 0..count {
                    next().parse::<f64>().unwrap();
                }
            }
            other => panic!("unexpected keyword {other}"),
        }
    }
    (pts, names)
}

#[test]
fn vtk_files_follow_the_legacy_grammar() {
    let m = mesh(GeometryKind::SphericalShell, 2);
    let empty = vtk_string(&m, &[], "mesh").unwrap();
    let (pts, names) = check_vtk(&empty);
    assert!(names.is_empty());
    for (a, b) in pts.iter().zip(&m.vertices) {
        for i in 0..3 {
            assert_eq!(a[i].to_bits(), b[i].to_bits());
        }
    }
    let nt = m.tets.len();
    let nv = m.vertices.len();
    let fields = vec![
        VtkField::new("B", FieldData::CellVectors(vec![[1.0, -2.0, 1e-300]; nt])),
        VtkField::new("p", FieldData::PointScalars((0..nv).map(|i| i as f64 / 3.0).collect())),
        VtkField::new("level", FieldData::CellScalars(vec![0.5; nt])),
    ];
    let (_, names) = check_vtk(&vtk_string(&m, &fields, "fields").unwrap());
    assert_eq!(names, vec!["B", "level", "p"]);
    let short = vec![VtkField::new("B", FieldData::CellVectors(vec![[0.0; 3]; nt - 1]))];
    assert!(vtk_string(&m, &short, "x").is_err());
}

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_curlforge"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn cli_smoke_run_on_the_box() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "box.toml", BOX);
    let out = tmp.path().join("out");
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--output").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stdout));
    assert!(out.join("solution.vtk").exists());
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 0);
    let res = m["result"]["residuals"].as_array().unwrap();
    let weak = res.iter().find(|r| r["name"] == "weak form").unwrap();
    assert!(weak["value"].as_f64().unwrap() <= 1e-8);
    let (_, names) = check_vtk(&std::fs::read_to_string(out.join("solution.vtk")).unwrap());
    assert_eq!(names, vec!["u", "B", "H"]);
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, text: &str, sub: &str| {
        let cfg = write(tmp.path(), name, text);
        let out = tmp.path().join(name.replace(".toml", ""));
        let st = bin().arg(sub).arg("--config").arg(&cfg).arg("--output").arg(&out).output().unwrap();
        (st.status.code(), String::from_utf8_lossy(&st.stdout).into_owned(), out)
    };
    // a current with nonzero normal trace against zero tangential data
    let incompatible = "[geometry]\nkind = \"box\"\nresolution = 3\n[problem]\nkind = \"tangential_curl\"\ncurrent = [\"0\", \"0\", \"1\"]\n";
    let (code, _, out) = run("inc.toml", incompatible, "solve");
    assert_eq!(code, Some(2));
    let failed = manifest(&out)["failed_conditions"].as_array().unwrap().clone();
    assert!(failed.iter().any(|f| f.as_str().unwrap().contains("normal current trace")), "{failed:?}");
    let (code, _, out) = run("bad.toml", "[geometry]\nkind = \"box\"\nresolution = \"x\"\n", "solve");
    assert_eq!(code, Some(4));
    assert_eq!(manifest(&out)["status"], "error");
    let (code, _, _) = run("noproblem.toml", "[geometry]\nkind = \"box\"\nresolution = 3\n", "solve");
    assert_eq!(code, Some(4));
    let st = bin().args(["solve", "--config", "/nonexistent.toml"]).output().unwrap();
    assert_eq!(st.status.code(), Some(4));
    let st = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(st.status.code(), Some(4));
    // a diverging fixed point on a tiny ball
    let ms = "[geometry]\nkind = \"box\"\nresolution = 2\n[problem]\nkind = \"normal_curl\"\ndata = [\"0\", \"0\", \"1\"]\n\
              current_law = { name = \"linear\", k = 40.0 }\n[fixed_point]\nradius = 1e-6\nmax_iter = 5\n";
    let (code, stdout, _) = run("ms.toml", ms, "solve");
    assert_eq!(code, Some(3), "{stdout}");
}

#[test]
fn cli_harmonic_check_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let torus = write(tmp.path(), "torus.toml", "[geometry]\nkind = \"solid_torus\"\nresolution = 4\n");
    let st = bin().arg("harmonic").arg("--config").arg(&torus).arg("--output").arg(tmp.path().join("h")).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&st.stdout).contains("N=1, m=0"));
    let st = bin().arg("check").arg("--config").arg(&torus).arg("--output").arg(tmp.path().join("c")).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("c/conditions.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("true")), "{csv}");

    // two-point refinement series through the CLI, then the rate table
    let mut dirs = vec![];
    for n in [3, 6] {
        let cfg = write(tmp.path(), &format!("b{n}.toml"), &BOX.replace("resolution = 3", &format!("resolution = {n}")));
        let out = tmp.path().join(format!("b{n}"));
        let st = bin().arg("solve").arg("--config").arg(&cfg).arg("--output").arg(&out).output().unwrap();
        assert_eq!(st.status.code(), Some(0));
        dirs.push(out);
    }
    let rep = tmp.path().join("rep");
    let st = bin().arg("report").args(&dirs).arg("--output").arg(&rep).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    // independent fit from the two summaries
    let read = |d: &Path| {
        let s = std::fs::read_to_string(d.join("summary.csv")).unwrap();
        let row: Vec<String> = s.lines().nth(1).unwrap().split(',').map(String::from).collect();
        (row[2].parse::<f64>().unwrap(), row[5].parse::<f64>().unwrap())
    };
    let (h0, e0) = read(&dirs[0]);
    let (h1, e1) = read(&dirs[1]);
    let want = (e1 / e0).ln() / (h1 / h0).ln();
    let table = std::fs::read_to_string(rep.join("report.csv")).unwrap();
    let got: f64 = table.lines().nth(2).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!((got - want).abs() < 1e-12);
    assert!(got > 0.8);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "box.toml", BOX);
    let mut outs = vec![];
    for k in 0..2 {
        let out = tmp.path().join(format!("run{k}"));
        let o = RunOptions { output: out.clone(), seed: Some(5), overrides: vec![], threads: Some(2) };
        let r = run(&Command::Solve, Some(&std::fs::read_to_string(&cfg).unwrap()), &o);
        assert_eq!(r.code, 0);
        outs.push(out);
    }
    for f in ["manifest.json", "solution.vtk", "residuals.csv", "history.csv", "summary.csv"] {
        let a = std::fs::read(outs[0].join(f)).unwrap();
        let b = std::fs::read(outs[1].join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn batch_runs_use_isolated_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write(tmp.path(), "a.toml", BOX);
    let b = write(tmp.path(), "b.toml", &BOX.replace("resolution = 3", "resolution = 2"));
    let out = tmp.path().join("batch");
    let st = bin().arg("solve").arg("--config").arg(&a).arg("--config").arg(&b).arg("--output").arg(&out).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    assert!(out.join("a/manifest.json").exists() && out.join("b/manifest.json").exists());
    assert_ne!(manifest(&out.join("a"))["result"]["mesh"], manifest(&out.join("b"))["result"]["mesh"]);
}

#[test]
fn sample_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let cfg = RunConfig::parse(&std::fs::read_to_string(&path).unwrap(), &[], None);
        assert!(cfg.is_ok(), "{}: {cfg:?}", path.display());
        n += 1;
    }
    assert!(n >= 3);
}
