//! Config parsing, expressions, export and the subcommand driver.

pub mod config;
pub mod expr;
pub mod run;
pub mod vtk;

pub use config::RunConfig;
pub use expr::{Expr, VecExpr};
pub use run::{exit_code, fit_rate, run, Command, Outcome, RunOptions};
pub use vtk::{export_vtk, vtk_string, FieldData, VtkField};
