use std::fmt::Write;

use super::ast::{BaseType, Command, Decl, Expr, Level, Program, Prob};
use crate::rational;

#[derive(Debug, Clone, Copy, Default)]
pub struct RenderOptions {
    /// Print `skipAsn x e` as the time-spending self-assignment `x := x`.
    pub skip_asn_as_self_assign: bool,
}

pub fn render_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, _, _) => op.precedence(),
        _ => u8::MAX,
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Int(n) => write!(out, "{n}").unwrap(),
        Expr::Bool(b) => write!(out, "{b}").unwrap(),
        Expr::Var(x) => out.push_str(x),
        Expr::Index(a, i) => {
            out.push_str(a);
            out.push('[');
            write_expr(out, i);
            out.push(']');
        }
        Expr::Bin(op, l, r) => {
            let p = op.precedence();
            let lp = prec(l) < p || (p == 1 && prec(l) == 1);
            let rp = prec(r) <= p;
            write_operand(out, l, lp);
            write!(out, " {} ", op.symbol()).unwrap();
            write_operand(out, r, rp);
        }
    }
}

fn write_operand(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

pub fn render_prob(p: &Prob) -> String {
    match p {
        Prob::Lit(r) => rational::exact(r),
        Prob::Param(name) => name.clone(),
    }
}

/// Single-line rendering.
pub fn render_command(c: &Command) -> String {
    render_command_with(c, RenderOptions::default())
}

pub fn render_command_with(c: &Command, opts: RenderOptions) -> String {
    let mut s = String::new();
    inline(&mut s, c, opts);
    s
}

fn inline(out: &mut String, c: &Command, opts: RenderOptions) {
    match c {
        Command::Assign(x, e) => write!(out, "{x} := {}", render_expr(e)).unwrap(),
        Command::SkipAsn(x, _) if opts.skip_asn_as_self_assign => write!(out, "{x} := {x}").unwrap(),
        Command::SkipAsn(x, e) => write!(out, "skipAsn {x} {}", render_expr(e)).unwrap(),
        Command::Skip => out.push_str("skip"),
        Command::If(e, a, b) => {
            write!(out, "if ({}) then ", render_expr(e)).unwrap();
            inline(out, a, opts);
            out.push_str(" else ");
            inline(out, b, opts);
            out.push_str(" fi");
        }
        Command::SkipIf(e, a) => {
            write!(out, "skipIf ({}) then ", render_expr(e)).unwrap();
            inline(out, a, opts);
            out.push_str(" fi");
        }
        Command::While(e, a) => {
            write!(out, "while ({}) do ", render_expr(e)).unwrap();
            inline(out, a, opts);
            out.push_str(" od");
        }
        Command::Seq(a, b) => {
            inline(out, a, opts);
            out.push_str("; ");
            inline(out, b, opts);
        }
        Command::Choose(p, a, b) => {
            write!(out, "choose {}: ", render_prob(p)).unwrap();
            inline(out, a, opts);
            out.push_str(" or ");
            inline(out, b, opts);
            out.push_str(" ro");
        }
    }
}

fn render_decl(d: &Decl) -> String {
    let level = match d.level {
        Level::Low => "low",
        Level::High => "high",
    };
    let base = match d.base {
        BaseType::Int => "int",
        BaseType::Bool => "bool",
    };
    match d.array_len {
        Some(n) => format!("{} {level} {base} array {n};", d.name),
        None => format!("{} {level} {base};", d.name),
    }
}

/// Declarations followed by the body, one command per line.
pub fn render_program(p: &Program) -> String {
    render_program_with(p, RenderOptions::default())
}

pub fn render_program_with(p: &Program, opts: RenderOptions) -> String {
    let mut s = String::new();
    for d in &p.decls {
        s.push_str(&render_decl(d));
        s.push('\n');
    }
    block(&mut s, &p.body, 0, opts);
    s.push('\n');
    s
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn block(out: &mut String, c: &Command, depth: usize, opts: RenderOptions) {
    let items = c.seq_items();
    for (n, item) in items.iter().enumerate() {
        stmt(out, item, depth, opts);
        if n + 1 < items.len() {
            out.push_str(";\n");
        }
    }
}

fn stmt(out: &mut String, c: &Command, depth: usize, opts: RenderOptions) {
    indent(out, depth);
    match c {
        Command::If(e, a, b) => {
            writeln!(out, "if ({}) then", render_expr(e)).unwrap();
            block(out, a, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("else\n");
            block(out, b, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("fi");
        }
        Command::SkipIf(e, a) => {
            writeln!(out, "skipIf ({}) then", render_expr(e)).unwrap();
            block(out, a, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("fi");
        }
        Command::While(e, a) => {
            writeln!(out, "while ({}) do", render_expr(e)).unwrap();
            block(out, a, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("od");
        }
        Command::Choose(p, a, b) => {
            writeln!(out, "choose {}:", render_prob(p)).unwrap();
            block(out, a, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("or\n");
            block(out, b, depth + 1, opts);
            out.push('\n');
            indent(out, depth);
            out.push_str("ro");
        }
        other => inline(out, other, opts),
    }
}
