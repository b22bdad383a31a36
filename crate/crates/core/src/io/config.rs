//! TOML run configuration.
//!
//! ```toml
//! [geometry]
//! kind = "solid_torus"          # box | spherical_shell | solid_torus
//! resolution = 4
//! # [geometry.params] extents, inner_radius, ... (defaults otherwise)
//!
//! [law]
//! name = "saturating"           # plus the law's own keys
//!
//! [problem]
//! kind = "dirichlet"            # dirichlet | tangential_curl | normal_curl | natural | co_normal
//! data = ["-y", "x", "0"]       # u0, B0 or H0 as (x, y, z) expressions
//! current = ["0", "0", "0"]     # optional applied current J
//! h1 = [0.5]
//! # current_law = { name = "sublinear", alpha = 0.5 } selects Maxwell-Stokes
//!
//! [solver]
//! seed = 7
//! [solver.bvp]                  # tolerances and budgets
//! tol = 1e-10
//!
//! [fixed_point]                 # Maxwell-Stokes only
//! omega = 1.0
//!
//! [output]
//! formats = ["vtk", "csv"]
//! ```
//!
//! Unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};

use crate::bvp::{BvpKind, BvpParams};
use crate::constitutive::{CurrentLaw, MaterialLaw};
use crate::mesh::{GeometryKind, GeometryParams};
use crate::ms::FixedPointParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    #[serde(default = "default_law", deserialize_with = "strict")]
    pub law: MaterialLaw,
    pub problem: Option<ProblemConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fixed_point: FixedPointParams,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_law() -> MaterialLaw {
    MaterialLaw::Identity
}

/// Tagged unit variants accept any extra keys, so compare the input table
/// with the keys that survive a serialize round trip.
fn strict<'de, D, T>(d: D) -> std::result::Result<T, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Serialize + serde::de::DeserializeOwned,
{
    use serde::de::Error as _;
    let raw = toml::Table::deserialize(d)?;
    let v: T = raw.clone().try_into().map_err(D::Error::custom)?;
    let back = toml::Table::try_from(&v).map_err(D::Error::custom)?;
    if let Some(k) = raw.keys().find(|k| !back.contains_key(*k)) {
        return Err(D::Error::custom(format!("unknown field `{k}`")));
    }
    Ok(v)
}

fn strict_opt<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Serialize + serde::de::DeserializeOwned,
{
    strict(d).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub resolution: usize,
    #[serde(default)]
    pub params: GeometryParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletMethod {
    #[default]
    Monotone,
    Reduction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: BvpKind,
    /// Boundary data as three expressions; the relevant trace is used. For
    /// `normal_curl` the datum is `nu . data`.
    #[serde(default = "zero_vec")]
    pub data: Vec<String>,
    /// Applied current (given-current problems).
    pub current: Option<Vec<String>>,
    /// Replace the current by its closest admissible member before solving.
    #[serde(default)]
    pub project_current: bool,
    pub h1: Option<Vec<f64>>,
    pub h2: Option<Vec<f64>>,
    /// Trial `H1` coefficients of the normal-curl type problems.
    pub h1_hat: Option<Vec<f64>>,
    #[serde(default)]
    pub method: DirichletMethod,
    /// Solution-dependent current; present means a Maxwell-Stokes solve.
    #[serde(default, deserialize_with = "strict_opt")]
    pub current_law: Option<CurrentLaw>,
    /// Exact `curl u + h2`, for error reporting.
    pub exact_induction: Option<Vec<String>>,
}

fn zero_vec() -> Vec<String> {
    vec!["0".into(), "0".into(), "0".into()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Seeds every sampled check.
    pub seed: u64,
    /// Sample size of the constitutive condition checks.
    pub sample_points: usize,
    pub sample_radius: f64,
    pub bvp: BvpParams,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { seed: 7, sample_points: 1000, sample_radius: 10.0, bvp: BvpParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Vtk,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub formats: Vec<Format>,
    /// Also write the mesh in the native text format.
    pub mesh_file: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { formats: vec![Format::Vtk, Format::Csv], mesh_file: false }
    }
}

/// Short override keys and the config paths they stand for.
const ALIASES: &[(&str, &str)] = &[
    ("tol", "solver.bvp.tol"),
    ("tol_compat", "solver.bvp.tol_compat"),
    ("tol_membership", "solver.bvp.tol_membership"),
    ("xi_tol", "solver.bvp.xi_tol"),
    ("scalar_tol", "solver.bvp.scalar.tol"),
    ("tol_fp", "fixed_point.tol_fp"),
    ("omega", "fixed_point.omega"),
];

impl RunConfig {
    /// Parse with `key=value` overrides applied to the raw table first.
    pub fn parse(text: &str, overrides: &[String], seed: Option<u64>) -> Result<RunConfig> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override '{o}' is not K=V")))?;
            let path = ALIASES.iter().find(|a| a.0 == k.trim()).map_or(k.trim(), |a| a.1);
            set_path(&mut table, path, parse_value(v.trim()))?;
        }
        if let Some(s) = seed {
            let s = i64::try_from(s).map_err(|_| Error::Config(format!("seed {s} out of range")))?;
            set_path(&mut table, "solver.seed", toml::Value::Integer(s))?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.resolution < 2 {
            return Err(Error::Config("geometry.resolution must be at least 2".into()));
        }
        if let Some(p) = &self.problem {
            let vec3 = |name: &str, v: &[String]| {
                if v.len() != 3 {
                    Err(Error::Config(format!("problem.{name} needs 3 components")))
                } else {
                    Ok(())
                }
            };
            vec3("data", &p.data)?;
            if let Some(c) = &p.current {
                vec3("current", c)?;
            }
            if let Some(c) = &p.exact_induction {
                vec3("exact_induction", c)?;
            }
            if p.current_law.is_some() && p.current.is_some() {
                return Err(Error::Config("give either problem.current or problem.current_law".into()));
            }
            if p.current_law.is_some() && matches!(p.kind, BvpKind::Dirichlet | BvpKind::TangentialCurl) {
                return Err(Error::Config(format!("no Maxwell-Stokes variant for {:?}", p.kind)));
            }
        }
        Ok(())
    }

    /// Canonical TOML; parsing it reproduces the config.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

fn parse_value(v: &str) -> toml::Value {
    // a bare TOML value when it parses as one, otherwise a string
    match format!("v = {v}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or(toml::Value::String(v.into())),
        Err(_) => toml::Value::String(v.into()),
    }
}

fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("bad key '{path}'")))?;
    let mut t = table;
    for p in parts {
        let entry = t.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| Error::Config(format!("'{p}' in '{path}' is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}
