//! Surface syntax: parsing, printing and fragment checks for programs and
//! closed-form expressions.

mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

pub use ast::*;
pub use pretty::render_stmts;
pub use validate::{validate, FragmentReport};

use crate::gf::Guard;
use crate::symexpr::{Indeterminate, SymError, SymExpr};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

pub fn parse_program(src: &str) -> Result<ProgramAst, ParseError> {
    let mut p = parser::Parser::new(src)?;
    p.program()
}

pub fn parse_guard(src: &str) -> Result<Guard, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let g = p.guard()?;
    p.expect_end()?;
    Ok(g)
}

pub fn parse_coef(src: &str) -> Result<Coef, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let c = p.coef()?;
    p.expect_end()?;
    Ok(c)
}

pub fn parse_dist(src: &str) -> Result<Dist, ParseError> {
    let mut p = parser::Parser::new(src)?;
    let d = p.dist()?;
    p.expect_end()?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExprError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Parses a closed-form expression. Names listed in `program_vars` become
/// program indeterminates, `@x` the paired meta indeterminate, `!` the violation
/// marker, and every other name a parameter.
pub fn parse_symexpr<S: AsRef<str>>(src: &str, program_vars: &[S]) -> Result<SymExpr, ExprError> {
    let c = parse_coef(src)?;
    let resolve = |n: &str| {
        if program_vars.iter().any(|v| v.as_ref() == n) {
            Indeterminate::program(n)
        } else {
            Indeterminate::param(n)
        }
    };
    Ok(c.to_symexpr(&resolve)?)
}
