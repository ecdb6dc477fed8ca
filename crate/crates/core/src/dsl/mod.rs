//! The immersion language: parsing, printing, catalog surfaces and jet evaluation.

mod ast;
pub mod catalog;
mod eval;
pub mod fd;
pub mod jet;
mod parser;

use thiserror::Error;

pub use ast::{Expr, ExprKind, Func, ImmersionSpec, Interval, MAX_AMBIENT};
pub use catalog::{catalog, catalog_defaults, catalog_source, catalog_entries, CatalogEntry, ParamValue, Params};
pub use eval::{eval_jet, eval_taylor, JetPoint};
pub use fd::{fd_discrepancy, fd_jet, random_interior_points, FD_STEP};
pub use jet::{Jet, JetFault, Layout};
pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {line}:{column}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid immersion: {0}")]
    InvalidSpec(String),
    #[error("chart point outside the domain box on axis u{axis}: {value} not in [{lo}, {hi}]")]
    Domain { axis: usize, value: f64, lo: f64, hi: f64 },
    #[error("evaluation failed in x{component}: {fault}")]
    Eval { component: usize, fault: JetFault },
    #[error("jet order {0} not supported (1..=4)")]
    Order(usize),
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),
    #[error("catalog entry `{entry}` requires parameter `{param}`")]
    MissingParameter { entry: String, param: String },
    #[error("catalog entry `{entry}`: bad parameter `{param}`: {reason}")]
    BadParameter {
        entry: String,
        param: String,
        reason: String,
    },
}
