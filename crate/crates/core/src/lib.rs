//! Finite elements for quasilinear magnetostatic curl systems
//! `curl[H(x, curl u + h2)] = J + h1 (+ grad p)` on bounded 3-D domains with
//! holes and handles.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: canonical meshes (box, spherical shell, solid torus), labels,
//!   cutting surfaces, quality and the text file format.
//! * [`fem`]: sparse storage, conjugate gradients, the nodal / edge /
//!   Crouzeix-Raviart spaces and quadrature fields.
//! * [`harmonic`]: Neumann and Dirichlet harmonic fields.
//! * [`decomp`]: Helmholtz splittings, the two Neumann projections, vector
//!   potentials and divergence-free extensions.
//! * [`constitutive`]: material laws, current laws and sampled condition checks.
//! * [`scalar`]: strongly monotone solvers for `div B(x, F + grad phi) = 0`.
//! * [`bvp`]: the five given-current boundary value problems.
//! * [`ms`]: the three Maxwell-Stokes problems with solution-dependent current.
//! * [`io`]: config, expressions, VTK/CSV export and the CLI driver.

pub mod bvp;
pub mod constitutive;
pub mod decomp;
pub mod error;
pub mod fem;
pub mod harmonic;
pub mod io;
pub mod mesh;
pub mod ms;
pub mod scalar;
pub mod vec3;

pub use error::{Error, Result};
