//! pWhile syntax: AST, parser and printer.
//!
//! ```text
//! i low int; k high int array 3; s high int;
//! i := 1;
//! while (i <= 3) do
//!   if (k[i] == 1) then s := s; skip else skip fi;
//!   i := i + 1
//! od
//! ```

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod render;

pub use ast::{BaseType, BinOp, Command, Decl, Expr, Level, Program, Prob};
pub use parser::{parse_command, parse_expr, parse_program, DeclError, LangError, ParseError};
pub use render::{render_command, render_expr, render_program, RenderOptions};

use std::collections::BTreeSet;

pub fn free_vars_expr(e: &Expr) -> BTreeSet<String> {
    e.free_vars()
}

pub fn free_vars(c: &Command) -> BTreeSet<String> {
    c.free_vars()
}
