//! Browser demo: harmonic field dimensions, sampled law conditions and a
//! small Dirichlet solve, each returning JSON for `www/index.html`.
//!
//! The plain functions are the demo's logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only turn errors into strings.

use std::sync::Arc;

use curlforge::bvp::{solve_dirichlet_monotone, BoundaryDatum, Current, GivenCurrentProblem};
use curlforge::constitutive::{check_conditions, MaterialLaw, SampleSpec, AXIS_NORMALS};
use curlforge::decomp::Context;
use curlforge::fem::FemSpaces;
use curlforge::harmonic::compute_harmonic_basis;
use curlforge::mesh::{build_canonical_mesh, GeometryKind, GeometryParams};
use curlforge::vec3::{norm, V3};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Keeps a page click from freezing the tab.
pub const MAX_RESOLUTION: usize = 8;

fn kind_of(name: &str) -> Result<GeometryKind, String> {
    serde_json::from_value(Value::String(name.into())).map_err(|_| format!("unknown geometry '{name}'"))
}

fn law_of(name: &str) -> Result<MaterialLaw, String> {
    serde_json::from_value(json!({ "name": name })).map_err(|e| format!("law '{name}': {e}"))
}

fn check_resolution(res: usize) -> Result<(), String> {
    if (2..=MAX_RESOLUTION).contains(&res) {
        Ok(())
    } else {
        Err(format!("resolution must be in 2..={MAX_RESOLUTION}"))
    }
}

/// Mesh counts and the dimensions of the two harmonic spaces.
pub fn harmonic_summary(geometry: &str, res: usize) -> Result<Value, String> {
    check_resolution(res)?;
    let mesh = build_canonical_mesh(kind_of(geometry)?, res, &GeometryParams::default()).map_err(|e| e.to_string())?;
    let s = FemSpaces::new(&mesh).map_err(|e| e.to_string())?;
    let b = compute_harmonic_basis(&s).map_err(|e| e.to_string())?;
    Ok(json!({
        "geometry": geometry,
        "resolution": res,
        "vertices": s.nv(),
        "edges": s.ne(),
        "tets": s.nt(),
        "boundary_components": mesh.num_boundary_components(),
        "dim_h1": b.n(),
        "dim_h2": b.m(),
    }))
}

/// Sampled structural conditions of a builtin law.
pub fn law_report(law: &str, points: usize, seed: u64) -> Result<Value, String> {
    let law = law_of(law)?;
    let rep = check_conditions(&law, &SampleSpec { points: points.clamp(1, 100_000), radius: 10.0, seed }, &AXIS_NORMALS);
    let b = law.b_constants();
    Ok(json!({
        "law": rep.law,
        "conditions": rep.results.iter().map(|r| json!({ "id": r.id, "pass": r.pass, "margin": r.margin })).collect::<Vec<_>>(),
        "c3": b.c3,
        "lambda0": b.lambda0,
    }))
}

// u = (sin pi y, sin pi z, sin pi x) on the unit cube
fn u_exact(x: V3) -> V3 {
    let pi = std::f64::consts::PI;
    [(pi * x[1]).sin(), (pi * x[2]).sin(), (pi * x[0]).sin()]
}

fn b_exact(x: V3) -> V3 {
    let pi = std::f64::consts::PI;
    [-pi * (pi * x[2]).cos(), -pi * (pi * x[0]).cos(), -pi * (pi * x[1]).cos()]
}

/// Dirichlet problem on the unit box whose exact induction is
/// `-pi (cos pi z, cos pi x, cos pi y)`. Returns the relative error and the
/// cells cut by the mid-plane `z = 1/2` with `|B|` for plotting.
pub fn box_solve(law: &str, res: usize) -> Result<Value, String> {
    check_resolution(res)?;
    let law = law_of(law)?;
    let mesh = build_canonical_mesh(GeometryKind::Box, res, &GeometryParams::default()).map_err(|e| e.to_string())?;
    let ctx = Context::new(&mesh).map_err(|e| e.to_string())?;
    let s = &ctx.s;
    let hq = s.sample(|x| law.h(x, b_exact(x)));
    let p = GivenCurrentProblem::new(&ctx, law.clone(), BoundaryDatum::Dirichlet(Arc::new(u_exact)))
        .with_current(Current::Load(s.curl_load(&hq)));
    let sol = solve_dirichlet_monotone(&p).map_err(|e| e.to_string())?;
    let b = sol.induction(&ctx);
    let exact: Vec<V3> = (0..s.nt()).map(|t| b_exact(s.tet_centroid(t))).collect();
    let diff: Vec<V3> = b.iter().zip(&exact).map(|(a, e)| curlforge::vec3::sub(*a, *e)).collect();
    let cells: Vec<Value> = (0..s.nt())
        .filter(|&t| {
            let zs = mesh.tets[t].map(|v| mesh.vertices[v][2]);
            zs.iter().any(|&z| z <= 0.5) && zs.iter().any(|&z| z >= 0.5)
        })
        .map(|t| {
            let c = s.tet_centroid(t);
            json!([c[0], c[1], norm(b[t])])
        })
        .collect();
    Ok(json!({
        "law": format!("{law:?}"),
        "resolution": res,
        "h": mesh.h(),
        "iterations": sol.history.len(),
        "error": s.p0_norm(&diff) / s.p0_norm(&exact),
        "residuals": sol.residuals.iter().map(|r| json!({ "name": r.name, "value": r.value, "pass": r.pass() })).collect::<Vec<_>>(),
        "cells": cells,
    }))
}

#[wasm_bindgen]
pub fn harmonic(geometry: &str, res: usize) -> Result<String, JsValue> {
    harmonic_summary(geometry, res).map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn conditions(law: &str, points: usize, seed: u64) -> Result<String, JsValue> {
    law_report(law, points, seed).map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn solve(law: &str, res: usize) -> Result<String, JsValue> {
    box_solve(law, res).map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}
