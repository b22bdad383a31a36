//! Subcommand execution: `mesh`, `harmonic`, `check`, `solve`, `report`.
//!
//! Every run writes `manifest.json` into the output directory. The manifest
//! holds no timestamps or host data, so a fixed seed and thread count give
//! byte-identical files.

use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use serde_json::json;

use super::config::{DirichletMethod, Format, ProblemConfig, RunConfig};
use super::expr::VecExpr;
use super::vtk::{csv_string, real, vtk_string, write_file, FieldData, VtkField};
use crate::bvp::{
    self, boundary_normals, check_compatibility, project_current, BoundaryDatum, BvpKind, Current, GivenCurrentProblem, Residual,
};
use crate::constitutive::{check_conditions, ConditionResult, SampleSpec};
use crate::decomp::Context;
use crate::fem::QField;
use crate::mesh::{build_canonical_mesh, mesh_quality_report, write_mesh, Mesh};
use crate::ms::{solve_ms, MaxwellStokesProblem};
use crate::vec3::{dot, V3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Mesh,
    Harmonic,
    Check,
    Solve,
    /// Aggregate `summary.csv` files (or directories holding one).
    Report(Vec<PathBuf>),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Mesh => "mesh",
            Command::Harmonic => "harmonic",
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub output: PathBuf,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
    /// Recorded in the manifest; the pool itself is set up by the caller.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    /// Human-readable table or error line for stdout.
    pub message: String,
}

/// 2 for violated compatibility conditions, 3 for solver failures, 4 for
/// config and input errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Compatibility { .. } | Error::Obstruction(_) | Error::Trace(_) | Error::ImageSpace(_) => 2,
        Error::Solver { .. } | Error::Divergence { .. } | Error::RootSolver(_) | Error::Inversion { .. } => 3,
        Error::Config(_) | Error::Format(_) | Error::Parameter(_) | Error::Dimension(_) | Error::Io(_) => 4,
        _ => 1,
    }
}

/// Output of a successful command before the manifest is written.
struct Done {
    code: i32,
    message: String,
    body: serde_json::Value,
    files: Vec<String>,
}

struct Failure {
    error: Error,
    /// Named conditions known to fail, for the manifest.
    failed: Vec<String>,
    body: serde_json::Value,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, failed: vec![], body: json!({}) }
    }
}

/// Run one command. `config` is the TOML text (unused by `report`).
pub fn run(cmd: &Command, config: Option<&str>, opts: &RunOptions) -> Outcome {
    let parsed = match (cmd, config) {
        (Command::Report(_), _) => Ok(None),
        (_, Some(text)) => RunConfig::parse(text, &opts.overrides, opts.seed).map(Some),
        (_, None) => Err(Error::Config("--config is required".into())),
    };
    let result = match parsed {
        Err(e) => Err(Failure::from(e)),
        Ok(cfg) => execute(cmd, cfg.as_ref(), opts),
    };
    let (code, message, mut manifest) = match result {
        Ok(d) => (d.code, d.message, json!({ "status": if d.code == 0 { "ok" } else { "failed checks" }, "result": d.body, "files": d.files })),
        Err(f) => {
            let mut failed = f.failed;
            if let Error::Compatibility { condition, .. } = &f.error {
                if !failed.contains(condition) {
                    failed.insert(0, condition.clone());
                }
            }
            let code = exit_code(&f.error);
            let msg = format!("error: {}", f.error);
            (code, msg.clone(), json!({ "status": "error", "error": msg, "failed_conditions": failed, "result": f.body }))
        }
    };
    let obj = manifest.as_object_mut().expect("object");
    obj.insert("tool".into(), json!("curlforge"));
    obj.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    obj.insert("command".into(), json!(cmd.name()));
    obj.insert("exit_code".into(), json!(code));
    obj.insert("threads".into(), json!(opts.threads));
    obj.insert("overrides".into(), json!(opts.overrides));
    if let Some(text) = config {
        // the echo is canonical, so it reruns the same job
        if let Ok(cfg) = RunConfig::parse(text, &opts.overrides, opts.seed) {
            obj.insert("config".into(), json!(cfg.echo()));
        }
    }
    let text = serde_json::to_string_pretty(&manifest).unwrap_or_default() + "\n";
    let code = match write_file(&opts.output.join("manifest.json"), &text) {
        Ok(()) => code,
        Err(e) => {
            log::error!("{e}");
            if code == 0 {
                4
            } else {
                code
            }
        }
    };
    Outcome { code, message }
}

fn execute(cmd: &Command, cfg: Option<&RunConfig>, opts: &RunOptions) -> std::result::Result<Done, Failure> {
    match cmd {
        Command::Report(inputs) => Ok(report(inputs, &opts.output)?),
        _ => {
            let cfg = cfg.expect("parsed config");
            let g = &cfg.geometry;
            info!("building {:?} mesh at resolution {}", g.kind, g.resolution);
            let mesh = build_canonical_mesh(g.kind, g.resolution, &g.params)?;
            match cmd {
                Command::Mesh => Ok(mesh_cmd(cfg, &mesh, &opts.output)?),
                Command::Harmonic => Ok(harmonic_cmd(cfg, &mesh, &opts.output)?),
                Command::Check => check_cmd(cfg, &mesh, &opts.output),
                Command::Solve => solve_cmd(cfg, &mesh, &opts.output),
                Command::Report(_) => unreachable!(),
            }
        }
    }
}

fn wants(cfg: &RunConfig, f: Format) -> bool {
    cfg.output.formats.contains(&f)
}

fn mesh_summary(ctx: &Context) -> serde_json::Value {
    let s = &ctx.s;
    json!({
        "vertices": s.nv(), "edges": s.ne(), "faces": s.nf(), "tets": s.nt(),
        "h": s.mesh.h(), "dim_h1": ctx.basis.n(), "dim_h2": ctx.basis.m(),
    })
}

fn mesh_cmd(cfg: &RunConfig, mesh: &Mesh, out: &Path) -> Result<Done> {
    let q = mesh_quality_report(mesh)?;
    let mut files = vec!["mesh.txt".to_string()];
    write_file(&out.join("mesh.txt"), &write_mesh(mesh))?;
    if wants(cfg, Format::Vtk) {
        write_file(&out.join("mesh.vtk"), &vtk_string(mesh, &[], "curlforge mesh")?)?;
        files.push("mesh.vtk".into());
    }
    let msg = format!(
        "{} vertices, {} tets, {} boundary components, h = {:.4}, min dihedral {:.2} deg",
        mesh.num_vertices(),
        mesh.num_tets(),
        mesh.num_boundary_components(),
        q.h,
        q.min_dihedral.to_degrees()
    );
    Ok(Done { code: 0, message: msg, body: json!({ "quality": q, "euler_characteristic": mesh.euler_characteristic() }), files })
}

fn harmonic_cmd(cfg: &RunConfig, mesh: &Mesh, out: &Path) -> Result<Done> {
    let ctx = Context::new(mesh)?;
    let b = &ctx.basis;
    let g = &cfg.geometry;
    let kind = serde_json::to_value(g.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let row = vec![kind, g.resolution.to_string(), b.n().to_string(), b.m().to_string(), real(b.gram_residual), real(b.cross_residual)];
    let mut files = vec![];
    if wants(cfg, Format::Csv) {
        let t = csv_string(&["geometry", "resolution", "N", "m", "gram_residual", "cross_residual"], &[row])?;
        write_file(&out.join("harmonic.csv"), &t)?;
        files.push("harmonic.csv".to_string());
    }
    if wants(cfg, Format::Vtk) {
        let mut fields = vec![];
        for (i, f) in b.h1.iter().enumerate() {
            fields.push(VtkField::new(&format!("h1_{i}"), FieldData::CellVectors(f.clone())));
        }
        for (k, f) in b.h2.iter().enumerate() {
            fields.push(VtkField::new(&format!("h2_{k}"), FieldData::CellVectors(f.clone())));
        }
        write_file(&out.join("harmonic.vtk"), &vtk_string(mesh, &fields, "curlforge harmonic fields")?)?;
        files.push("harmonic.vtk".into());
    }
    let msg = format!("N={}, m={}", b.n(), b.m());
    Ok(Done { code: 0, message: msg, body: json!({ "mesh": mesh_summary(&ctx), "gram_residual": b.gram_residual, "cross_residual": b.cross_residual }), files })
}

fn given_problem<'a>(ctx: &'a Context, cfg: &RunConfig, p: &ProblemConfig) -> Result<GivenCurrentProblem<'a>> {
    let data = VecExpr::parse(&p.data)?;
    let datum = datum_of(p.kind, data);
    let mut g = GivenCurrentProblem::new(ctx, cfg.law.clone(), datum);
    g.params = cfg.solver.bvp;
    if let Some(c) = &p.current {
        let e = VecExpr::parse(c)?;
        let mut q = ctx.s.sample(|x| e.eval(x));
        if p.project_current {
            q = project_current(ctx, &q)?;
        }
        g = g.with_current(Current::Field(q));
    }
    if let Some(h) = &p.h1 {
        g = g.with_h1(h.clone());
    }
    if let Some(h) = &p.h2 {
        g = g.with_h2(h.clone());
    }
    Ok(g)
}

fn datum_of(kind: BvpKind, data: VecExpr) -> BoundaryDatum {
    match kind {
        BvpKind::Dirichlet => BoundaryDatum::Dirichlet(data.into_fn()),
        BvpKind::TangentialCurl => BoundaryDatum::TangentialCurl(data.into_fn()),
        BvpKind::NormalCurl => BoundaryDatum::NormalCurl(std::sync::Arc::new(move |x, nu| dot(nu, data.eval(x)))),
        BvpKind::Natural => BoundaryDatum::Natural(data.into_fn()),
        BvpKind::CoNormal => BoundaryDatum::CoNormal(data.into_fn()),
    }
}

fn condition_rows(source: &str, r: &[ConditionResult]) -> Vec<Vec<String>> {
    r.iter().map(|c| vec![source.to_string(), c.id.clone(), c.pass.to_string(), real(c.margin)]).collect()
}

fn table(rows: &[Vec<String>]) -> String {
    let mut s = format!("{:<14} {:<28} {:<6} {}\n", "source", "condition", "pass", "margin");
    for r in rows {
        s.push_str(&format!("{:<14} {:<28} {:<6} {}\n", r[0], r[1], r[2], r[3]));
    }
    s
}

fn check_cmd(cfg: &RunConfig, mesh: &Mesh, out: &Path) -> std::result::Result<Done, Failure> {
    let ctx = Context::new(mesh)?;
    let spec = SampleSpec { points: cfg.solver.sample_points, radius: cfg.solver.sample_radius, seed: cfg.solver.seed };
    let normals = boundary_normals(&ctx, cfg.solver.bvp.trace_normals);
    let law = check_conditions(&cfg.law, &spec, &normals);
    let mut rows = condition_rows("constitutive", &law.results);
    let mut compat = None;
    if let Some(p) = &cfg.problem {
        let g = given_problem(&ctx, cfg, p)?;
        let r = check_compatibility(&g)?;
        rows.extend(condition_rows("compatibility", &r.results));
        compat = Some(r);
    }
    let failed: Vec<String> = rows.iter().filter(|r| r[2] == "false").map(|r| r[1].clone()).collect();
    let mut files = vec![];
    if wants(cfg, Format::Csv) {
        write_file(&out.join("conditions.csv"), &csv_string(&["source", "condition", "pass", "margin"], &rows)?)?;
        files.push("conditions.csv".to_string());
    }
    let code = if failed.is_empty() { 0 } else { 2 };
    let body = json!({ "conditions": law, "compatibility": compat, "failed_conditions": failed });
    Ok(Done { code, message: table(&rows), body, files })
}

fn residual_rows(r: &[Residual]) -> Vec<Vec<String>> {
    r.iter()
        .map(|x| vec![x.name.clone(), real(x.value), x.tol.map(real).unwrap_or_default(), x.pass().to_string()])
        .collect()
}

fn history_rows(h: &[f64]) -> Vec<Vec<String>> {
    h.iter().enumerate().map(|(i, v)| vec![i.to_string(), real(*v)]).collect()
}

#[derive(Serialize)]
struct SolveBody {
    kind: BvpKind,
    maxwell_stokes: bool,
    mesh: serde_json::Value,
    residuals: Vec<Residual>,
    iterations: usize,
    h1: Vec<f64>,
    h2: Vec<f64>,
    h2_hat: Option<Vec<f64>>,
    relative_error: Option<f64>,
    warnings: Vec<String>,
    compatibility: Vec<ConditionResult>,
}

fn solve_cmd(cfg: &RunConfig, mesh: &Mesh, out: &Path) -> std::result::Result<Done, Failure> {
    let p = cfg.problem.as_ref().ok_or_else(|| Error::Config("solve needs a [problem] block".into()))?;
    let ctx = Context::new(mesh)?;
    let s = &ctx.s;
    let ms = p.current_law.is_some();
    // diagnostics only; the solver re-checks what it needs
    let compat = if ms {
        vec![]
    } else {
        check_compatibility(&given_problem(&ctx, cfg, p)?).map(|r| r.results).unwrap_or_default()
    };
    let failed: Vec<String> = compat.iter().filter(|c| !c.pass).map(|c| c.id.clone()).collect();
    info!("solving {:?}{}", p.kind, if ms { " (Maxwell-Stokes)" } else { "" });
    let solved = if let Some(f) = &p.current_law {
        let data = VecExpr::parse(&p.data)?;
        let mut m = MaxwellStokesProblem::new(&ctx, cfg.law.clone(), f.clone(), datum_of(p.kind, data));
        m.params = cfg.solver.bvp;
        m.fixed_point = cfg.fixed_point;
        if let Some(h) = &p.h1 {
            m = m.with_h1(h.clone());
        }
        if let Some(h) = &p.h1_hat {
            m = m.with_h1_hat(h.clone());
        }
        if let Some(h) = &p.h2 {
            m = m.with_h2(h.clone());
        }
        solve_ms(&m).map(|sol| {
            let b = sol.induction(&ctx);
            (sol.u.clone(), Some(sol.p.clone()), b, sol.residuals.clone(), sol.history.clone(), sol.h1.clone(), sol.h2.clone(), Some(sol.h2_hat.clone()), sol.warnings.clone())
        })
    } else {
        let g = given_problem(&ctx, cfg, p)?;
        let h1_hat = p.h1_hat.as_deref();
        let r = match (p.kind, p.method) {
            (BvpKind::Dirichlet, DirichletMethod::Reduction) => bvp::solve_dirichlet_reduction(&g),
            (BvpKind::TangentialCurl, _) => bvp::solve_tangential_curl(&g, h1_hat),
            (BvpKind::NormalCurl, _) => bvp::solve_normal_curl(&g, h1_hat),
            (BvpKind::CoNormal, _) => bvp::solve_conormal_bvp(&g, h1_hat),
            _ => bvp::solve(&g),
        };
        r.map(|sol| {
            let b = sol.induction(&ctx);
            (sol.u.clone(), None, b, sol.residuals.clone(), sol.history.clone(), sol.h1.clone(), sol.h2.clone(), None, vec![])
        })
    };
    let (u, pres, b, residuals, history, h1, h2, h2_hat, warnings) = match solved {
        Ok(v) => v,
        Err(error) => return Err(Failure { error, failed, body: json!({ "compatibility": compat }) }),
    };
    let relative_error = match &p.exact_induction {
        Some(e) => {
            let e = VecExpr::parse(e)?;
            let exact = s.sample(|x| e.eval(x));
            let diff = QField::from_p0(&b).sub(&exact);
            Some(s.l2norm(&diff) / s.l2norm(&exact).max(f64::MIN_POSITIVE))
        }
        None => None,
    };
    let mut files = vec![];
    if wants(cfg, Format::Vtk) {
        let h = bvp::h_tet(&ctx, &cfg.law, &b);
        let uq = s.edge_to_q(&u);
        let uc: Vec<V3> = (0..s.nt()).map(|t| uq.tet_mean(t)).collect();
        let mut fields =
            vec![VtkField::new("u", FieldData::CellVectors(uc)), VtkField::new("B", FieldData::CellVectors(b.clone())), VtkField::new("H", FieldData::CellVectors(h))];
        if let Some(pr) = &pres {
            fields.push(VtkField::new("p", FieldData::PointScalars(pr.clone())));
        }
        write_file(&out.join("solution.vtk"), &vtk_string(mesh, &fields, "curlforge solution")?)?;
        files.push("solution.vtk".to_string());
    }
    if cfg.output.mesh_file {
        write_file(&out.join("mesh.txt"), &write_mesh(mesh))?;
        files.push("mesh.txt".to_string());
    }
    let all_pass = residuals.iter().all(Residual::pass);
    if wants(cfg, Format::Csv) {
        write_file(&out.join("residuals.csv"), &csv_string(&["name", "value", "tol", "pass"], &residual_rows(&residuals))?)?;
        write_file(&out.join("history.csv"), &csv_string(&["iteration", "residual"], &history_rows(&history))?)?;
        let g = &cfg.geometry;
        let kind = serde_json::to_value(g.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let row = vec![
            kind,
            g.resolution.to_string(),
            real(s.mesh.h()),
            s.nt().to_string(),
            s.ne().to_string(),
            relative_error.map(real).unwrap_or_default(),
            history.len().to_string(),
        ];
        write_file(&out.join("summary.csv"), &csv_string(&["geometry", "resolution", "h", "tets", "edges", "error", "iterations"], &[row])?)?;
        files.extend(["residuals.csv", "history.csv", "summary.csv"].map(String::from));
    }
    let mut msg = String::new();
    for r in &residuals {
        msg.push_str(&format!("{:<22} {:.3e} {}\n", r.name, r.value, if r.pass() { "ok" } else { "FAIL" }));
    }
    if let Some(e) = relative_error {
        msg.push_str(&format!("{:<22} {e:.3e}\n", "relative error"));
    }
    for w in &warnings {
        msg.push_str(&format!("warning: {w}\n"));
    }
    let body = SolveBody {
        kind: p.kind,
        maxwell_stokes: ms,
        mesh: mesh_summary(&ctx),
        residuals,
        iterations: history.len(),
        h1,
        h2,
        h2_hat,
        relative_error,
        warnings,
        compatibility: compat,
    };
    let body = serde_json::to_value(body).map_err(|e| Error::Io(e.to_string()))?;
    Ok(Done { code: if all_pass { 0 } else { 3 }, message: msg, body, files })
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h.iter().zip(e).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

fn report(inputs: &[PathBuf], out: &Path) -> Result<Done> {
    let mut rows: Vec<(String, usize, f64, f64)> = vec![];
    for path in inputs {
        let file = if path.is_dir() { path.join("summary.csv") } else { path.clone() };
        let mut rd = csv::Reader::from_path(&file).map_err(|e| Error::Io(format!("{}: {e}", file.display())))?;
        let hdr = rd.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
        let col = |name: &str| hdr.iter().position(|h| h == name).ok_or_else(|| Error::Format(format!("{}: no '{name}' column", file.display())));
        let (cg, cr, ch, ce) = (col("geometry")?, col("resolution")?, col("h")?, col("error")?);
        for rec in rd.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| Error::Format(format!("{}: bad number '{}'", file.display(), &rec[i])));
            rows.push((rec[cg].to_string(), rec[cr].trim().parse().unwrap_or(0), num(ch)?, num(ce)?));
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("report needs at least one summary".into()));
    }
    rows.sort_by(|a, b| b.2.total_cmp(&a.2));
    let hs: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let fit = fit_rate(&hs, &es);
    let mut table = vec![];
    for (i, r) in rows.iter().enumerate() {
        let rate = if i == 0 { None } else { fit_rate(&hs[i - 1..=i], &es[i - 1..=i]) };
        table.push(vec![r.0.clone(), r.1.to_string(), real(r.2), real(r.3), rate.map(real).unwrap_or_default()]);
    }
    let text = csv_string(&["geometry", "resolution", "h", "error", "rate"], &table)?;
    write_file(&out.join("report.csv"), &text)?;
    let mut msg = format!("{:<16} {:>10} {:>12} {:>12} {:>8}\n", "geometry", "resolution", "h", "error", "rate");
    for r in &table {
        let rate = r[4].parse::<f64>().map(|v| format!("{v:.3}")).unwrap_or_default();
        let h: f64 = r[2].parse().unwrap_or(f64::NAN);
        let e: f64 = r[3].parse().unwrap_or(f64::NAN);
        msg.push_str(&format!("{:<16} {:>10} {:>12.4e} {:>12.4e} {:>8}\n", r[0], r[1], h, e, rate));
    }
    if let Some(f) = fit {
        msg.push_str(&format!("least-squares rate: {f:.3}\n"));
    }
    Ok(Done { code: 0, message: msg, body: json!({ "rows": rows.len(), "rate": fit }), files: vec!["report.csv".into()] })
}

