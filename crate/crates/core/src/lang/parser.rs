use std::collections::{BTreeSet, HashSet};

use num_traits::One;

use super::ast::{BaseType, BinOp, Command, Decl, Expr, Level, Program, Prob};
use super::lexer::{tokenize, Spanned, Tok};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Tokens that would have been accepted at this position; empty when the
    /// error is not about token choice (e.g. a probability out of range).
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DeclError {
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("identifier `{0}` declared more than once")]
    Duplicate(String),
    #[error("array `{0}` must have a positive length")]
    EmptyArray(String),
    #[error("probability parameter `{0}` clashes with a declared variable")]
    ParamClash(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LangError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("declaration error: {0}")]
    Decl(#[from] DeclError),
}

const COMMAND_START: &[&str] = &[
    "identifier", "`skip`", "`skipAsn`", "`skipIf`", "`if`", "`while`", "`choose`",
];
const EXPR_START: &[&str] = &["identifier", "number", "`true`", "`false`", "`(`", "`-`"];

pub fn parse_program(src: &str) -> Result<Program, LangError> {
    let prog = parse_unchecked(src)?;
    check_decls(&prog)?;
    Ok(prog)
}

/// Parses without resolving identifiers against the declarations.
pub fn parse_unchecked(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        column: e.column,
        expected: Vec::new(),
        found: format!("`{}`", e.found),
        message: format!("unexpected character `{}`", e.found),
    })?;
    let mut p = Parser { toks, pos: 0 };
    let decls = p.decls()?;
    let body = p.seq()?;
    p.expect_eof()?;
    Ok(Program { decls, body })
}

/// Parses a bare command (no declarations).
pub fn parse_command(src: &str) -> Result<Command, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        column: e.column,
        expected: Vec::new(),
        found: format!("`{}`", e.found),
        message: format!("unexpected character `{}`", e.found),
    })?;
    let mut p = Parser { toks, pos: 0 };
    let c = p.seq()?;
    p.expect_eof()?;
    Ok(c)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src).map_err(|e| ParseError {
        line: e.line,
        column: e.column,
        expected: Vec::new(),
        found: format!("`{}`", e.found),
        message: format!("unexpected character `{}`", e.found),
    })?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn check_decls(prog: &Program) -> Result<(), DeclError> {
    let mut seen = HashSet::new();
    for d in &prog.decls {
        if !seen.insert(d.name.as_str()) {
            return Err(DeclError::Duplicate(d.name.clone()));
        }
        if d.array_len == Some(0) {
            return Err(DeclError::EmptyArray(d.name.clone()));
        }
    }
    let used: BTreeSet<String> = prog.body.free_vars();
    if let Some(x) = used.iter().find(|x| !seen.contains(x.as_str())) {
        return Err(DeclError::Undeclared(x.clone()));
    }
    if let Some(p) = prog.params().iter().find(|p| seen.contains(p.as_str())) {
        return Err(DeclError::ParamClash(p.clone()));
    }
    Ok(())
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let here = &self.toks[self.pos];
        let expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        ParseError {
            line: here.line,
            column: here.column,
            message: format!("expected {}, found {}", expected.join(" or "), here.tok),
            found: here.tok.to_string(),
            expected,
        }
    }

    fn error_msg(&self, at: usize, message: String) -> ParseError {
        let here = &self.toks[at];
        ParseError {
            line: here.line,
            column: here.column,
            expected: Vec::new(),
            found: here.tok.to_string(),
            message,
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, k: &str) -> bool {
        if matches!(self.peek(), Tok::Kw(x) if *x == k) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &'static str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{s}`")]))
        }
    }

    fn expect_kw(&mut self, k: &'static str) -> Result<(), ParseError> {
        if self.eat_kw(k) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{k}`")]))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["`;`", "end of input"]))
        }
    }

    fn decls(&mut self) -> Result<Vec<Decl>, ParseError> {
        let mut out = Vec::new();
        while matches!(self.peek(), Tok::Ident(_))
            && matches!(self.peek_at(1), Tok::Kw("low") | Tok::Kw("high"))
        {
            let name = self.expect_ident()?;
            let level = if self.eat_kw("low") {
                Level::Low
            } else {
                self.expect_kw("high")?;
                Level::High
            };
            let base = if self.eat_kw("int") {
                BaseType::Int
            } else if self.eat_kw("bool") {
                BaseType::Bool
            } else {
                return Err(self.error(&["`int`", "`bool`"]));
            };
            let array_len = if self.eat_kw("array") {
                let at = self.pos;
                match self.bump() {
                    Tok::Number(n) => Some(
                        n.parse::<usize>()
                            .map_err(|_| self.error_msg(at, format!("invalid array length `{n}`")))?,
                    ),
                    _ => {
                        self.pos = at;
                        return Err(self.error(&["number"]));
                    }
                }
            } else {
                None
            };
            self.expect_sym(";")?;
            out.push(Decl {
                name,
                level,
                base,
                array_len,
            });
        }
        Ok(out)
    }

    fn at_seq_end(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Eof | Tok::Kw("else") | Tok::Kw("fi") | Tok::Kw("od") | Tok::Kw("or") | Tok::Kw("ro")
        )
    }

    fn seq(&mut self) -> Result<Command, ParseError> {
        let mut items = vec![self.command()?];
        while self.eat_sym(";") {
            if self.at_seq_end() {
                break;
            }
            items.push(self.command()?);
        }
        Ok(Command::seq_all(items))
    }

    fn command(&mut self) -> Result<Command, ParseError> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                self.expect_sym(":=")?;
                Ok(Command::Assign(x, self.expr()?))
            }
            Tok::Kw("skip") => {
                self.bump();
                Ok(Command::Skip)
            }
            Tok::Kw("skipAsn") => {
                self.bump();
                let x = self.expect_ident()?;
                Ok(Command::SkipAsn(x, self.expr()?))
            }
            Tok::Kw("skipIf") => {
                self.bump();
                let e = self.expr()?;
                self.expect_kw("then")?;
                let c = self.seq()?;
                self.expect_kw("fi")?;
                Ok(Command::skip_if(e, c))
            }
            Tok::Kw("if") => {
                self.bump();
                let e = self.expr()?;
                self.expect_kw("then")?;
                let c = self.seq()?;
                self.expect_kw("else")?;
                let d = self.seq()?;
                self.expect_kw("fi")?;
                Ok(Command::if_then_else(e, c, d))
            }
            Tok::Kw("while") => {
                self.bump();
                let e = self.expr()?;
                self.expect_kw("do")?;
                let c = self.seq()?;
                self.expect_kw("od")?;
                Ok(Command::while_do(e, c))
            }
            Tok::Kw("choose") => {
                self.bump();
                let p = self.prob()?;
                self.expect_sym(":")?;
                let c = self.seq()?;
                self.expect_kw("or")?;
                let second_at = self.pos;
                let q = match (self.peek(), self.peek_at(1)) {
                    (Tok::Number(_), _) | (Tok::Ident(_), Tok::Sym(":")) => {
                        let q = self.prob()?;
                        self.expect_sym(":")?;
                        Some(q)
                    }
                    _ => None,
                };
                let d = self.seq()?;
                self.expect_kw("ro")?;
                if let Some(q) = q {
                    self.check_complement(&p, &q, second_at)?;
                }
                Ok(Command::choose(p, c, d))
            }
            _ => Err(self.error(COMMAND_START)),
        }
    }

    fn check_complement(&self, p: &Prob, q: &Prob, at: usize) -> Result<(), ParseError> {
        match (p, q) {
            (Prob::Lit(a), Prob::Lit(b)) if a + b == Rational::one() => Ok(()),
            (Prob::Lit(a), Prob::Lit(b)) => Err(self.error_msg(
                at,
                format!(
                    "choice weights {} and {} do not sum to 1",
                    rational::exact(a),
                    rational::exact(b)
                ),
            )),
            (Prob::Param(a), Prob::Param(b)) if a != b => Ok(()),
            _ => Err(self.error_msg(
                at,
                "second weight must be the complement of the first".to_string(),
            )),
        }
    }

    fn prob(&mut self) -> Result<Prob, ParseError> {
        let at = self.pos;
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(Prob::Param(name))
            }
            Tok::Number(n) => {
                self.bump();
                let text = if self.eat_sym("/") {
                    match self.bump() {
                        Tok::Number(d) => format!("{n}/{d}"),
                        _ => {
                            self.pos -= 1;
                            return Err(self.error(&["number"]));
                        }
                    }
                } else {
                    n
                };
                let r = rational::parse(&text)
                    .map_err(|_| self.error_msg(at, format!("invalid probability `{text}`")))?;
                if !rational::is_probability(&r) {
                    return Err(self.error_msg(at, format!("probability {text} out of range [0,1]")));
                }
                Ok(Prob::Lit(r))
            }
            _ => Err(self.error(&["probability", "identifier"])),
        }
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, ParseError> {
        let l = self.sum()?;
        let op = match self.peek() {
            Tok::Sym("==") | Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.sum()?;
        if matches!(
            self.peek(),
            Tok::Sym("==") | Tok::Sym("=") | Tok::Sym("!=") | Tok::Sym("<") | Tok::Sym("<=")
        ) {
            return Err(self.error_msg(self.pos, "comparison operators do not chain".to_string()));
        }
        Ok(Expr::bin(op, l, r))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.product()?;
            l = Expr::bin(op, l, r);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut l = self.atom()?;
        while self.eat_sym("*") {
            let r = self.atom()?;
            l = Expr::bin(BinOp::Mul, l, r);
        }
        Ok(l)
    }

    fn int_literal(&mut self, negative: bool) -> Result<Expr, ParseError> {
        let at = self.pos;
        match self.bump() {
            Tok::Number(n) if !n.contains('.') => {
                let text = if negative { format!("-{n}") } else { n };
                text.parse::<i64>()
                    .map(Expr::Int)
                    .map_err(|_| self.error_msg(at, format!("integer literal {text} out of range")))
            }
            Tok::Number(n) => Err(self.error_msg(at, format!("`{n}` is not an integer"))),
            _ => {
                self.pos = at;
                Err(self.error(&["number"]))
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(_) => self.int_literal(false),
            Tok::Sym("-") => {
                self.bump();
                self.int_literal(true)
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Ident(x) => {
                self.bump();
                if self.eat_sym("[") {
                    let i = self.expr()?;
                    self.expect_sym("]")?;
                    Ok(Expr::Index(x, Box::new(i)))
                } else {
                    Ok(Expr::Var(x))
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.error(EXPR_START)),
        }
    }
}
