//! Security typing for pWhile with timing-aware low slices.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::bisim::{Analysis, WeightScheme};
use crate::lang::{BaseType, BinOp, Command, Expr, Level, Program};
use crate::rational::{self, Rational};
use crate::semantics::{build_tree, collapse, BuildError, Config, CostModel, Env, TimedTree, DEFAULT_DEPTH_BOUND};

pub type SecurityLevel = Level;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SecurityType {
    pub base: BaseType,
    pub level: Level,
}

impl SecurityType {
    pub fn new(base: BaseType, level: Level) -> SecurityType {
        SecurityType { base, level }
    }
}

impl fmt::Display for SecurityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.base, self.level)
    }
}

pub fn subtype(t1: SecurityType, t2: SecurityType) -> bool {
    t1.base == t2.base && t1.level <= t2.level
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarInfo {
    pub ty: SecurityType,
    pub array_len: Option<usize>,
}

/// Γ: declared variables with their security types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeEnv(BTreeMap<String, VarInfo>);

impl TypeEnv {
    pub fn from_program(prog: &Program) -> TypeEnv {
        TypeEnv(
            prog.decls
                .iter()
                .map(|d| {
                    (
                        d.name.clone(),
                        VarInfo {
                            ty: SecurityType::new(d.base, d.level),
                            array_len: d.array_len,
                        },
                    )
                })
                .collect(),
        )
    }

    pub fn insert(&mut self, name: &str, ty: SecurityType, array_len: Option<usize>) {
        self.0.insert(name.to_string(), VarInfo { ty, array_len });
    }

    pub fn get(&self, name: &str) -> Option<&VarInfo> {
        self.0.get(name)
    }

    pub fn low_vars(&self) -> BTreeSet<String> {
        self.0
            .iter()
            .filter(|(_, v)| v.ty.level == Level::Low)
            .map(|(k, _)| k.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("base type mismatch: {0}")]
    BaseMismatch(String),
    #[error("`{0}` is an array")]
    ArrayAsScalar(String),
    #[error("`{0}` is not an array")]
    NotAnArray(String),
}

/// Least security type of `e`.
pub fn type_expr(gamma: &TypeEnv, e: &Expr) -> Result<SecurityType, TypeError> {
    match e {
        Expr::Int(_) => Ok(SecurityType::new(BaseType::Int, Level::Low)),
        Expr::Bool(_) => Ok(SecurityType::new(BaseType::Bool, Level::Low)),
        Expr::Var(x) => {
            let v = gamma.get(x).ok_or_else(|| TypeError::Undeclared(x.clone()))?;
            if v.array_len.is_some() {
                return Err(TypeError::ArrayAsScalar(x.clone()));
            }
            Ok(v.ty)
        }
        Expr::Index(a, i) => {
            let v = gamma.get(a).ok_or_else(|| TypeError::Undeclared(a.clone()))?;
            if v.array_len.is_none() {
                return Err(TypeError::NotAnArray(a.clone()));
            }
            let it = type_expr(gamma, i)?;
            if it.base != BaseType::Int {
                return Err(TypeError::BaseMismatch(format!("index of `{a}` must be Int, found {}", it.base)));
            }
            Ok(SecurityType::new(v.ty.base, v.ty.level.join(it.level)))
        }
        Expr::Bin(op, l, r) => {
            let (lt, rt) = (type_expr(gamma, l)?, type_expr(gamma, r)?);
            let level = lt.level.join(rt.level);
            let mismatch = || {
                TypeError::BaseMismatch(format!("`{}` applied to {} and {}", op.symbol(), lt.base, rt.base))
            };
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => {
                    if lt.base != BaseType::Int || rt.base != BaseType::Int {
                        return Err(mismatch());
                    }
                    Ok(SecurityType::new(BaseType::Int, level))
                }
                BinOp::Lt | BinOp::Le => {
                    if lt.base != BaseType::Int || rt.base != BaseType::Int {
                        return Err(mismatch());
                    }
                    Ok(SecurityType::new(BaseType::Bool, level))
                }
                BinOp::Eq | BinOp::Ne => {
                    if lt.base != rt.base {
                        return Err(mismatch());
                    }
                    Ok(SecurityType::new(BaseType::Bool, level))
                }
            }
        }
    }
}

/// Path from the body root: sequence positions and branch names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(into = "String")]
pub struct Location(pub Vec<String>);

impl Location {
    pub fn child(&self, part: impl Into<String>) -> Location {
        let mut v = self.0.clone();
        v.push(part.into());
        Location(v)
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}", self.0.join("/"))
    }
}

impl From<Location> for String {
    fn from(l: Location) -> String {
        l.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FailureKind {
    HighGuardOnWhile,
    LowAssignFromHigh,
    BranchesNotBisimilar,
    BaseTypeMismatch,
    DepthExceeded,
    ArrayWrite,
    RuntimeError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub location: Location,
    pub rule: &'static str,
    pub kind: FailureKind,
    pub reason: String,
    #[serde(with = "rational::serde_str::option", skip_serializing_if = "Option::is_none")]
    pub delta: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeReport {
    pub ok: bool,
    #[serde(serialize_with = "slice_text")]
    pub low_slice: Option<Command>,
    pub failures: Vec<Failure>,
}

fn slice_text<S: serde::Serializer>(c: &Option<Command>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_some(&crate::lang::render_command(c)),
        None => s.serialize_none(),
    }
}

/// Settings for the semantic side condition of high-guarded conditionals.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub cm: CostModel,
    pub depth_bound: usize,
    /// Initial environments; the slices are compared in every environment
    /// in which the conditional is reached from one of these.
    pub probes: Vec<Env>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            cm: CostModel::paper_trees(),
            depth_bound: DEFAULT_DEPTH_BOUND,
            probes: Vec::new(),
        }
    }
}

/// Types a whole program; probes default to the all-zero environment.
pub fn check_program(prog: &Program, opts: &CheckOptions) -> TypeReport {
    let gamma = TypeEnv::from_program(prog);
    let mut opts = opts.clone();
    let zero = Env::zeroed(prog);
    opts.probes = if opts.probes.is_empty() {
        vec![zero]
    } else {
        opts.probes.iter().map(|p| zero.merged(p)).collect()
    };
    check_command(&gamma, &prog.body, &opts)
}

pub fn check_command(gamma: &TypeEnv, c: &Command, opts: &CheckOptions) -> TypeReport {
    let mut checker = Checker {
        gamma,
        opts,
        failures: Vec::new(),
        runs: None,
        body: c,
    };
    let slice = checker.command(c, &Location::default());
    let ok = checker.failures.is_empty();
    TypeReport {
        ok,
        low_slice: ok.then_some(slice),
        failures: checker.failures,
    }
}

/// First command to execute in `c`.
pub(crate) fn head(c: &Command) -> &Command {
    match c {
        Command::Seq(a, _) => head(a),
        other => other,
    }
}

struct Checker<'a> {
    gamma: &'a TypeEnv,
    opts: &'a CheckOptions,
    failures: Vec<Failure>,
    /// Raw trees of the whole command from each probe, built on demand.
    runs: Option<Vec<TimedTree>>,
    body: &'a Command,
}

impl Checker<'_> {
    fn fail(&mut self, loc: &Location, rule: &'static str, kind: FailureKind, reason: String) {
        self.failures.push(Failure {
            location: loc.clone(),
            rule,
            kind,
            reason,
            delta: None,
        });
    }

    fn expr(&mut self, e: &Expr, loc: &Location, rule: &'static str) -> Option<SecurityType> {
        match type_expr(self.gamma, e) {
            Ok(t) => Some(t),
            Err(err) => {
                self.fail(loc, rule, FailureKind::BaseTypeMismatch, err.to_string());
                None
            }
        }
    }

    fn guard(&mut self, e: &Expr, loc: &Location, rule: &'static str) -> Option<Level> {
        let t = self.expr(e, loc, rule)?;
        if t.base != BaseType::Bool {
            self.fail(loc, rule, FailureKind::BaseTypeMismatch, format!("guard has type {t}, expected Bool"));
            return None;
        }
        Some(t.level)
    }

    fn command(&mut self, c: &Command, loc: &Location) -> Command {
        match c {
            Command::Assign(x, e) => self.assign(x, e, loc),
            Command::SkipAsn(x, e) => {
                self.expr(e, loc, "SkipAsn");
                Command::SkipAsn(x.clone(), e.clone())
            }
            Command::Skip => Command::Skip,
            Command::Seq(..) => {
                let items = c.seq_items();
                let slices: Vec<Command> = items
                    .iter()
                    .enumerate()
                    .map(|(i, item)| self.command(item, &loc.child(i.to_string())))
                    .collect();
                Command::seq_all(slices)
            }
            Command::Choose(p, a, b) => {
                let sa = self.command(a, &loc.child("left"));
                let sb = self.command(b, &loc.child("right"));
                Command::choose(p.clone(), sa, sb)
            }
            Command::SkipIf(e, a) => {
                self.guard(e, loc, "SkipIf");
                let sa = self.command(a, &loc.child("body"));
                Command::skip_if(e.clone(), sa)
            }
            Command::While(e, a) => {
                if self.guard(e, loc, "While") == Some(Level::High) {
                    self.fail(
                        loc,
                        "While",
                        FailureKind::HighGuardOnWhile,
                        "loop guard depends on high data".to_string(),
                    );
                }
                let sa = self.command(a, &loc.child("body"));
                Command::while_do(e.clone(), sa)
            }
            Command::If(e, a, b) => {
                let level = self.guard(e, loc, "If");
                let sa = self.command(a, &loc.child("then"));
                let sb = self.command(b, &loc.child("else"));
                match level {
                    Some(Level::High) => {
                        self.bisimilar_slices(c, &sa, &sb, loc);
                        Command::skip_if(e.clone(), sa)
                    }
                    _ => Command::if_then_else(e.clone(), sa, sb),
                }
            }
        }
    }

    fn assign(&mut self, x: &str, e: &Expr, loc: &Location) -> Command {
        let Some(var) = self.gamma.get(x).copied() else {
            self.fail(loc, "Assign", FailureKind::BaseTypeMismatch, format!("undeclared identifier `{x}`"));
            return Command::assign(x, e.clone());
        };
        if var.array_len.is_some() {
            self.fail(loc, "Assign", FailureKind::ArrayWrite, format!("array `{x}` is read-only"));
        }
        let et = self.expr(e, loc, "Assign");
        if let Some(et) = et {
            if et.base != var.ty.base {
                self.fail(
                    loc,
                    "Assign",
                    FailureKind::BaseTypeMismatch,
                    format!("`{x}` has type {} but the expression has type {et}", var.ty),
                );
            }
        }
        match var.ty.level {
            Level::High => Command::skip_asn(x, e.clone()),
            Level::Low => {
                if et.is_some_and(|t| t.level == Level::High) {
                    self.fail(
                        loc,
                        "Assign_L",
                        FailureKind::LowAssignFromHigh,
                        format!("low variable `{x}` assigned from high data"),
                    );
                }
                Command::assign(x, e.clone())
            }
        }
    }

    fn reached_envs(&mut self, site: &Command) -> Vec<Env> {
        if self.runs.is_none() {
            let mut runs = Vec::new();
            for p in &self.opts.probes {
                let cfg = Config::new(p.clone(), self.body.clone());
                if let Ok(t) = build_tree(&cfg, &self.opts.cm, self.opts.depth_bound) {
                    runs.push(t);
                }
            }
            self.runs = Some(runs);
        }
        let mut envs = BTreeSet::new();
        for t in self.runs.as_ref().unwrap() {
            for n in &t.nodes {
                if n.cmd.as_ref().is_some_and(|c| head(c) == site) {
                    envs.insert(n.label.clone());
                }
            }
        }
        if envs.is_empty() {
            self.opts.probes.clone()
        } else {
            envs.into_iter().collect()
        }
    }

    /// The side condition C_L ∼ D_L: structural equality, else δ = 0 between
    /// the collapsed slice trees in every environment reaching the site.
    fn bisimilar_slices(&mut self, site: &Command, sa: &Command, sb: &Command, loc: &Location) {
        if sa == sb {
            return;
        }
        let low = self.gamma.low_vars();
        let mut worst = Rational::zero();
        for env in self.reached_envs(site) {
            let build = |c: &Command| -> Result<TimedTree, BuildError> {
                let t = build_tree(&Config::new(env.clone(), c.clone()), &self.opts.cm, self.opts.depth_bound)?;
                Ok(collapse(&t, &low))
            };
            let (ta, tb) = match (build(sa), build(sb)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    let kind = match e {
                        BuildError::DepthExceeded { .. } | BuildError::TooLarge { .. } => FailureKind::DepthExceeded,
                        BuildError::Eval(_) => FailureKind::RuntimeError,
                    };
                    self.fail(loc, "If_H", kind, format!("cannot execute low slices: {e}"));
                    return;
                }
            };
            let mut an = Analysis::new();
            let (a, b) = (an.add_tree(&ta), an.add_tree(&tb));
            let d = an.delta(a, b, WeightScheme::Uniform).value;
            if d > worst {
                worst = d;
            }
        }
        if !worst.is_zero() {
            self.failures.push(Failure {
                location: loc.clone(),
                rule: "If_H",
                kind: FailureKind::BranchesNotBisimilar,
                reason: format!(
                    "low slices `{}` and `{}` are not bisimilar",
                    crate::lang::render_command(sa),
                    crate::lang::render_command(sb)
                ),
                delta: Some(worst),
            });
        }
    }
}
