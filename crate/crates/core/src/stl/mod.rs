//! Signal temporal logic: syntax, parsing, robust and Boolean semantics.

mod ast;
mod boolean;
mod parser;
mod robust;

use thiserror::Error;

pub use ast::{Affine, Formula, Interval, Predicate};
pub use boolean::eval_boolean;
pub use parser::{parse, parse_formula};
pub use robust::{robustness, Monitor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown signal '{name}' (offset {offset})")]
    UnknownSignal { name: String, offset: usize },
    #[error("sample index {index} out of range (trace has {len} samples)")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Formats a robustness value in plain decimal with at least 12
/// significant digits; infinities print as `inf` / `-inf`.
pub fn format_robustness(v: f64) -> String {
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return format!("{:.11}", 0.0);
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(1) as usize;
    format!("{v:.decimals$}")
}
