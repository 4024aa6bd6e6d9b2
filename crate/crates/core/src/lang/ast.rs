use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Mul,
    Sub,
    Eq,
    Ne,
    Lt,
    Le,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Mul => "*",
            BinOp::Sub => "-",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Mul | BinOp::Sub)
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    /// Read-only array element `name[index]`, 1-based.
    Index(String, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn index(name: &str, idx: Expr) -> Expr {
        Expr::Index(name.to_string(), Box::new(idx))
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Index(a, i) => {
                out.insert(a.clone());
                i.collect_vars(out);
            }
            Expr::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }
}

/// Probability attached to the left branch of a `choose`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prob {
    Lit(Rational),
    /// Symbolic parameter such as `p`; must be bound before execution.
    Param(String),
}

impl Prob {
    pub fn literal(&self) -> Option<&Rational> {
        match self {
            Prob::Lit(r) => Some(r),
            Prob::Param(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Assign(String, Expr),
    SkipAsn(String, Expr),
    Skip,
    If(Expr, Box<Command>, Box<Command>),
    SkipIf(Expr, Box<Command>),
    While(Expr, Box<Command>),
    Seq(Box<Command>, Box<Command>),
    Choose(Prob, Box<Command>, Box<Command>),
}

impl Command {
    pub fn assign(x: &str, e: Expr) -> Command {
        Command::Assign(x.to_string(), e)
    }

    pub fn skip_asn(x: &str, e: Expr) -> Command {
        Command::SkipAsn(x.to_string(), e)
    }

    pub fn if_then_else(e: Expr, c: Command, d: Command) -> Command {
        Command::If(e, Box::new(c), Box::new(d))
    }

    pub fn skip_if(e: Expr, c: Command) -> Command {
        Command::SkipIf(e, Box::new(c))
    }

    pub fn while_do(e: Expr, c: Command) -> Command {
        Command::While(e, Box::new(c))
    }

    pub fn choose(p: Prob, c: Command, d: Command) -> Command {
        Command::Choose(p, Box::new(c), Box::new(d))
    }

    /// Sequential composition kept in right-associated normal form.
    pub fn seq(first: Command, second: Command) -> Command {
        match first {
            Command::Seq(a, b) => Command::seq(*a, Command::seq(*b, second)),
            other => Command::Seq(Box::new(other), Box::new(second)),
        }
    }

    /// Right-associated sequence of `cmds`; `Skip` when empty.
    pub fn seq_all<I>(cmds: I) -> Command
    where
        I: IntoIterator<Item = Command>,
        I::IntoIter: DoubleEndedIterator,
    {
        let mut it = cmds.into_iter().rev();
        let Some(last) = it.next() else {
            return Command::Skip;
        };
        it.fold(last, |acc, c| Command::seq(c, acc))
    }

    /// Flattens a right-associated `Seq` chain.
    pub fn seq_items(&self) -> Vec<&Command> {
        let mut out = Vec::new();
        let mut cur = self;
        while let Command::Seq(a, b) = cur {
            out.extend(a.seq_items());
            cur = b;
        }
        out.push(cur);
        out
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Command::Assign(x, e) | Command::SkipAsn(x, e) => {
                out.insert(x.clone());
                e.collect_vars(out);
            }
            Command::Skip => {}
            Command::If(e, c, d) => {
                e.collect_vars(out);
                c.collect_vars(out);
                d.collect_vars(out);
            }
            Command::SkipIf(e, c) | Command::While(e, c) => {
                e.collect_vars(out);
                c.collect_vars(out);
            }
            Command::Seq(c, d) | Command::Choose(_, c, d) => {
                c.collect_vars(out);
                d.collect_vars(out);
            }
        }
    }

    /// Names of unbound probability parameters.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |c| {
            if let Command::Choose(Prob::Param(p), _, _) = c {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Command)) {
        f(self);
        match self {
            Command::If(_, c, d) | Command::Seq(c, d) | Command::Choose(_, c, d) => {
                c.visit(f);
                d.visit(f);
            }
            Command::SkipIf(_, c) | Command::While(_, c) => c.visit(f),
            Command::Assign(..) | Command::SkipAsn(..) | Command::Skip => {}
        }
    }

    /// Replaces every `choose` parameter found in `bindings` by its value.
    pub fn bind(&self, bindings: &dyn Fn(&str) -> Option<Rational>) -> Command {
        match self {
            Command::Choose(p, c, d) => {
                let p = match p {
                    Prob::Param(name) => bindings(name).map(Prob::Lit).unwrap_or_else(|| p.clone()),
                    lit => lit.clone(),
                };
                Command::choose(p, c.bind(bindings), d.bind(bindings))
            }
            Command::If(e, c, d) => Command::if_then_else(e.clone(), c.bind(bindings), d.bind(bindings)),
            Command::SkipIf(e, c) => Command::skip_if(e.clone(), c.bind(bindings)),
            Command::While(e, c) => Command::while_do(e.clone(), c.bind(bindings)),
            Command::Seq(c, d) => Command::Seq(Box::new(c.bind(bindings)), Box::new(d.bind(bindings))),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    #[serde(rename = "L")]
    Low,
    #[serde(rename = "H")]
    High,
}

impl Level {
    pub fn join(self, other: Level) -> Level {
        self.max(other)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Low => "L",
            Level::High => "H",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BaseType {
    Int,
    Bool,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseType::Int => "Int",
            BaseType::Bool => "Bool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decl {
    pub name: String,
    pub level: Level,
    pub base: BaseType,
    /// Fixed length for read-only arrays.
    pub array_len: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub body: Command,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn low_vars(&self) -> BTreeSet<String> {
        self.decls
            .iter()
            .filter(|d| d.level == Level::Low)
            .map(|d| d.name.clone())
            .collect()
    }

    pub fn high_vars(&self) -> BTreeSet<String> {
        self.decls
            .iter()
            .filter(|d| d.level == Level::High)
            .map(|d| d.name.clone())
            .collect()
    }

    pub fn params(&self) -> BTreeSet<String> {
        self.body.params()
    }

    /// Binds probability parameters, e.g. `p` in `choose p: ... ro`.
    pub fn bind(&self, name: &str, value: &Rational) -> Program {
        Program {
            decls: self.decls.clone(),
            body: self.body.bind(&|n| (n == name).then(|| value.clone())),
        }
    }
}
