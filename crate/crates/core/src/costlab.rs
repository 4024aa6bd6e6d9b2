//! Padding-probability sweeps: expected runtimes, pairwise leakage
//! matrices and the cost trade-off c(p) = α·δ′̄(p) + t̄(p).

use std::collections::BTreeSet;

use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;

use crate::bisim::{Analysis, WeightScheme};
use crate::lang::{BaseType, Decl, Level, Program, Prob};
use crate::padding::{pad_program, PadError, PadOptions};
use crate::rational::{self, exact, to_decimal, Rational};
use crate::semantics::{collapsed_tree, run_stats, BuildError, CostModel, Env, Value, DEFAULT_DEPTH_BOUND};

/// The running example: a square-and-multiply style loop over a 3-bit key.
pub mod case_study {
    pub const AGAT: &str = include_str!("../programs/agat.pw");
    pub const PAGAT: &str = include_str!("../programs/pagat.pw");
    pub const FAGAT: &str = include_str!("../programs/fagat.pw");
}

/// Decimal places used for the companion columns of CSV output.
pub const DECIMAL_PLACES: usize = 6;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("expected `name=value`, got `{0}`")]
    Syntax(String),
    #[error("unknown variable `{0}`")]
    Unknown(String),
    #[error("bad value `{value}` for `{var}`: {reason}")]
    Value { var: String, value: String, reason: String },
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("variable `{0}` given twice")]
    Duplicate(String),
}

/// A finite set of initial high states with display labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HighDomain {
    pub labels: Vec<String>,
    #[serde(skip)]
    pub envs: Vec<Env>,
}

impl HighDomain {
    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    /// Cartesian product; the left domain varies slowest.
    pub fn product(&self, other: &HighDomain) -> HighDomain {
        let mut labels = Vec::new();
        let mut envs = Vec::new();
        for (la, ea) in self.labels.iter().zip(&self.envs) {
            for (lb, eb) in other.labels.iter().zip(&other.envs) {
                labels.push(format!("{la} {lb}"));
                envs.push(ea.merged(eb));
            }
        }
        HighDomain { labels, envs }
    }
}

/// Compact rendering: digit arrays as `011`, everything else as displayed.
pub fn compact_value(v: &Value) -> String {
    match v {
        Value::Array(items) if items.iter().all(|x| matches!(x, Value::Int(0..=9))) => {
            items.iter().map(|x| x.to_string()).collect()
        }
        other => other.to_string(),
    }
}

fn value_error(d: &Decl, value: &str, reason: impl Into<String>) -> SpecError {
    SpecError::Value {
        var: d.name.clone(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn scalar(d: &Decl, text: &str) -> Result<Value, SpecError> {
    match d.base {
        BaseType::Int => text
            .parse::<i64>()
            .map(Value::Int)
            .map_err(|e| value_error(d, text, e.to_string())),
        BaseType::Bool => match text {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(value_error(d, text, "expected true or false")),
        },
    }
}

/// Parses one value for a declared variable. Arrays take one digit per
/// element (`011`), or `0` / `1` for bool arrays.
pub fn parse_value(d: &Decl, text: &str) -> Result<Value, SpecError> {
    let Some(n) = d.array_len else {
        return scalar(d, text);
    };
    if text.chars().count() != n {
        return Err(value_error(d, text, format!("expected {n} digits")));
    }
    text.chars()
        .map(|c| {
            let digit = c.to_digit(10).ok_or_else(|| value_error(d, text, "expected digits"))?;
            Ok(match d.base {
                BaseType::Int => Value::Int(digit as i64),
                BaseType::Bool if digit <= 1 => Value::Bool(digit == 1),
                BaseType::Bool => return Err(value_error(d, text, "bool arrays take 0 or 1")),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Value::Array)
}

fn split_binding(text: &str) -> Result<(&str, &str), SpecError> {
    let (name, value) = text.split_once('=').ok_or_else(|| SpecError::Syntax(text.to_string()))?;
    let (name, value) = (name.trim(), value.trim());
    if name.is_empty() || value.is_empty() {
        return Err(SpecError::Syntax(text.to_string()));
    }
    Ok((name, value))
}

fn lookup<'a>(prog: &'a Program, name: &str) -> Result<&'a Decl, SpecError> {
    prog.decl(name).ok_or_else(|| SpecError::Unknown(name.to_string()))
}

/// Parses `x=1;y=true` (separators `;` or whitespace) into an environment.
pub fn parse_env(prog: &Program, text: &str) -> Result<Env, SpecError> {
    let mut env = Env::new();
    let mut seen = BTreeSet::new();
    for part in text.split([';', ' ', '\t']).filter(|s| !s.is_empty()) {
        let (name, value) = split_binding(part)?;
        let d = lookup(prog, name)?;
        if !seen.insert(name.to_string()) {
            return Err(SpecError::Duplicate(name.to_string()));
        }
        env.set(name, parse_value(d, value)?);
    }
    Ok(env)
}

/// The variable a bare value (e.g. `011`) refers to: the only high array,
/// failing that the only high variable.
pub fn default_high_var(prog: &Program) -> Option<&Decl> {
    let high: Vec<&Decl> = prog.decls.iter().filter(|d| d.level == Level::High).collect();
    let arrays: Vec<&Decl> = high.iter().copied().filter(|d| d.array_len.is_some()).collect();
    match (arrays.as_slice(), high.as_slice()) {
        ([d], _) => Some(*d),
        (_, [d]) => Some(*d),
        _ => None,
    }
}

/// Parses a single high state: `name=value` bindings, or a bare value for
/// the default high variable.
pub fn parse_high_env(prog: &Program, text: &str) -> Result<Env, SpecError> {
    if text.contains('=') {
        return parse_env(prog, text);
    }
    let d = default_high_var(prog).ok_or_else(|| SpecError::Syntax(text.to_string()))?;
    Ok(Env::new().with(&d.name, parse_value(d, text.trim())?))
}

/// Parses one `--high` spec for a single variable:
/// `k=all3` (every digit vector of length 3 over {0,1}), `s=0..3`
/// (inclusive range) or `k=011,010` (explicit list).
pub fn parse_high_spec(prog: &Program, text: &str) -> Result<HighDomain, SpecError> {
    let (name, rest) = split_binding(text)?;
    let d = lookup(prog, name)?;
    let mut values = Vec::new();
    if let Some(n) = rest.strip_prefix("all") {
        let n: u32 = n.parse().map_err(|_| value_error(d, rest, "expected allN"))?;
        if d.array_len != Some(n as usize) {
            return Err(value_error(d, rest, "length does not match the declaration"));
        }
        if n > 20 {
            return Err(value_error(d, rest, "domain too large"));
        }
        for bits in 0..(1u32 << n) {
            let digits: String = (0..n).rev().map(|i| if bits >> i & 1 == 1 { '1' } else { '0' }).collect();
            values.push(parse_value(d, &digits)?);
        }
    } else if let Some((lo, hi)) = rest.split_once("..") {
        if d.array_len.is_some() || d.base != BaseType::Int {
            return Err(value_error(d, rest, "ranges need an int scalar"));
        }
        let lo: i64 = lo.trim().parse().map_err(|_| value_error(d, rest, "bad range start"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| value_error(d, rest, "bad range end"))?;
        if hi.checked_sub(lo).is_none_or(|d| !(0..1 << 20).contains(&d)) {
            return Err(value_error(d, rest, "empty or oversized range"));
        }
        values.extend((lo..=hi).map(Value::Int));
    } else {
        for item in rest.split(',') {
            values.push(parse_value(d, item.trim())?);
        }
    }
    let labels = values.iter().map(compact_value).collect();
    let envs = values.into_iter().map(|v| Env::new().with(name, v)).collect();
    Ok(HighDomain { labels, envs })
}

/// Combines several `--high` specs; names are prefixed once more than one
/// variable is involved.
pub fn parse_high_domain(prog: &Program, specs: &[String]) -> Result<HighDomain, SpecError> {
    let mut seen = BTreeSet::new();
    let mut acc: Option<HighDomain> = None;
    for spec in specs {
        let mut dom = parse_high_spec(prog, spec)?;
        let name = split_binding(spec)?.0.to_string();
        if !seen.insert(name.clone()) {
            return Err(SpecError::Duplicate(name));
        }
        if specs.len() > 1 {
            dom.labels = dom.labels.iter().map(|l| format!("{name}={l}")).collect();
        }
        acc = Some(match acc {
            None => dom,
            Some(a) => a.product(&dom),
        });
    }
    acc.ok_or_else(|| SpecError::Syntax(String::new()))
}

/// The default grid 0, 1/10, ..., 1.
pub fn default_grid() -> Vec<Rational> {
    (0..=10).map(|i| rational::ratio(i, 10)).collect()
}

/// Parses `start:stop:step` (inclusive) or a comma list of rationals.
pub fn parse_grid(text: &str) -> Result<Vec<Rational>, SpecError> {
    let bad = |m: &str| SpecError::Grid(format!("{m} in `{text}`"));
    if text.trim().is_empty() {
        return Err(SpecError::Grid("empty grid".into()));
    }
    let num = |s: &str| rational::parse(s.trim()).map_err(|e| SpecError::Grid(e.to_string()));
    let grid = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step <= Rational::zero() {
            return Err(bad("step must be positive"));
        }
        let count = ((&stop - &start) / &step).floor();
        if count < Rational::zero() || count > rational::int(100_000) {
            return Err(bad("empty or oversized range"));
        }
        let mut out = Vec::new();
        let mut x = start;
        while x <= stop {
            out.push(x.clone());
            x += &step;
        }
        out
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    validate_grid(&grid)?;
    Ok(grid)
}

pub fn validate_grid(grid: &[Rational]) -> Result<(), SpecError> {
    if grid.is_empty() {
        return Err(SpecError::Grid("empty grid".into()));
    }
    if let Some(x) = grid.iter().find(|x| !rational::is_probability(x)) {
        return Err(SpecError::Grid(format!("{} is not in [0,1]", exact(x))));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpecError::Grid("values must be strictly increasing".into()));
    }
    Ok(())
}

/// How δ′ values are averaged over the high domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PairAverage {
    /// Mean over unordered distinct pairs (equal to the mean over ordered
    /// distinct pairs, the matrix being symmetric).
    #[default]
    Distinct,
    /// Mean over all n² ordered pairs, zero diagonal included.
    WithDiagonal,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Either parametric in `param` or padded at each grid point.
    pub program: Program,
    pub low_env: Env,
    pub high: HighDomain,
    pub grid: Vec<Rational>,
    pub alpha: Rational,
    pub cm: CostModel,
    pub depth_bound: usize,
    pub param: String,
    pub p_is_pad_prob: bool,
    pub average: PairAverage,
}

impl SweepConfig {
    pub fn new(program: Program, high: HighDomain) -> SweepConfig {
        SweepConfig {
            program,
            low_env: Env::new(),
            high,
            grid: default_grid(),
            alpha: rational::int(6),
            cm: CostModel::default(),
            depth_bound: DEFAULT_DEPTH_BOUND,
            param: "p".into(),
            p_is_pad_prob: true,
            average: PairAverage::Distinct,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Pad(#[from] PadError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("probability parameter `{0}` is never bound")]
    UnboundParam(String),
    #[error("empty high domain")]
    EmptyDomain,
    #[error("cost model has negative or missing durations")]
    BadCostModel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepRecord {
    #[serde(with = "rational::serde_str")]
    pub p: Rational,
    #[serde(serialize_with = "ser_vec")]
    pub runtimes: Vec<Rational>,
    #[serde(with = "rational::serde_str")]
    pub t_avg: Rational,
    #[serde(serialize_with = "ser_matrix")]
    pub delta: Vec<Vec<Rational>>,
    #[serde(serialize_with = "ser_matrix")]
    pub dprime: Vec<Vec<Rational>>,
    #[serde(with = "rational::serde_str")]
    pub dprime_avg: Rational,
    #[serde(with = "rational::serde_str")]
    pub cost: Rational,
}

fn ser_vec<S: serde::Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(exact))
}

fn ser_matrix<S: serde::Serializer>(m: &[Vec<Rational>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|row| row.iter().map(exact).collect::<Vec<_>>()))
}

/// The program with `param` unbound: as given if already parametric,
/// otherwise padded with a symbolic probability.
fn parametric(cfg: &SweepConfig) -> Result<Program, SweepError> {
    let params = cfg.program.params();
    let prog = if params.contains(&cfg.param) {
        cfg.program.clone()
    } else {
        let opts = PadOptions {
            p: Prob::Param(cfg.param.clone()),
            p_is_pad_prob: cfg.p_is_pad_prob,
        };
        pad_program(&cfg.program, &opts)?.0
    };
    if let Some(other) = prog.params().into_iter().find(|n| *n != cfg.param) {
        return Err(SweepError::UnboundParam(other));
    }
    Ok(prog)
}

pub fn mean(values: impl IntoIterator<Item = Rational>) -> Rational {
    let (sum, n) = values
        .into_iter()
        .fold((Rational::zero(), 0i64), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        Rational::zero()
    } else {
        sum / rational::int(n)
    }
}

pub fn average_pairs(m: &[Vec<Rational>], mode: PairAverage) -> Rational {
    let n = m.len();
    match mode {
        PairAverage::Distinct => mean((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| m[i][j].clone())),
        PairAverage::WithDiagonal => mean(m.iter().flatten().cloned()),
    }
}

fn sweep_point(cfg: &SweepConfig, prog: &Program, p: &Rational) -> Result<SweepRecord, SweepError> {
    let bound = prog.bind(&cfg.param, p);
    let base = Env::zeroed(&bound).merged(&cfg.low_env);
    let mut an = Analysis::new();
    let mut ids = Vec::with_capacity(cfg.high.len());
    let mut runtimes = Vec::with_capacity(cfg.high.len());
    for h in &cfg.high.envs {
        let t = collapsed_tree(&bound, &base.merged(h), &cfg.cm, cfg.depth_bound)?;
        runtimes.push(run_stats(&t).expected_runtime());
        ids.push(an.add_tree(&t));
    }
    let delta = an.matrix(&ids, WeightScheme::Uniform);
    let dprime = an.matrix(&ids, WeightScheme::ClassMatch);
    let t_avg = mean(runtimes.iter().cloned());
    let dprime_avg = average_pairs(&dprime, cfg.average);
    let cost = &cfg.alpha * &dprime_avg + &t_avg;
    Ok(SweepRecord {
        p: p.clone(),
        runtimes,
        t_avg,
        delta,
        dprime,
        dprime_avg,
        cost,
    })
}

/// Evaluates every grid point (in parallel); records come back in grid order.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>, SweepError> {
    validate_grid(&cfg.grid)?;
    if cfg.high.is_empty() {
        return Err(SweepError::EmptyDomain);
    }
    if !cfg.cm.is_valid() {
        return Err(SweepError::BadCostModel);
    }
    let prog = parametric(cfg)?;
    cfg.grid.par_iter().map(|p| sweep_point(cfg, &prog, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostRow {
    #[serde(with = "rational::serde_str")]
    pub p: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_avg: Rational,
    #[serde(with = "rational::serde_str")]
    pub dprime_avg: Rational,
    #[serde(with = "rational::serde_str")]
    pub cost: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostCurve {
    #[serde(with = "rational::serde_str")]
    pub argmin: Rational,
    #[serde(with = "rational::serde_str")]
    pub min_cost: Rational,
    pub table: Vec<CostRow>,
}

/// Grid minimum of c(p); ties go to the smaller p. `None` on no records.
pub fn cost_curve(records: &[SweepRecord]) -> Option<CostCurve> {
    let table: Vec<CostRow> = records
        .iter()
        .map(|r| CostRow {
            p: r.p.clone(),
            t_avg: r.t_avg.clone(),
            dprime_avg: r.dprime_avg.clone(),
            cost: r.cost.clone(),
        })
        .collect();
    let best = table
        .iter()
        .min_by(|a, b| a.cost.cmp(&b.cost).then(a.p.cmp(&b.p)))?
        .clone();
    Some(CostCurve {
        argmin: best.p,
        min_cost: best.cost,
        table,
    })
}

/// Recomputes c(p) for a different α without rebuilding any tree.
pub fn with_alpha(records: &[SweepRecord], alpha: &Rational) -> Vec<SweepRecord> {
    records
        .iter()
        .map(|r| SweepRecord {
            cost: alpha * &r.dprime_avg + &r.t_avg,
            ..r.clone()
        })
        .collect()
}

fn dec(r: &Rational) -> String {
    to_decimal(r, DECIMAL_PLACES)
}

fn to_csv(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv is utf-8")
}

/// `p,t_avg,dprime_avg,cost` with decimal companions.
pub fn summary_csv(records: &[SweepRecord]) -> String {
    let mut rows = vec![["p", "t_avg", "dprime_avg", "cost", "p_dec", "t_avg_dec", "dprime_avg_dec", "cost_dec"]
        .iter()
        .map(|s| s.to_string())
        .collect()];
    for r in records {
        let cols = [&r.p, &r.t_avg, &r.dprime_avg, &r.cost];
        rows.push(cols.iter().map(|x| exact(x)).chain(cols.iter().map(|x| dec(x))).collect());
    }
    to_csv(rows)
}

/// Long form `p,key,expected_runtime` with decimal companions.
pub fn runtimes_csv(records: &[SweepRecord], labels: &[String]) -> String {
    let mut rows = vec![["p", "key", "expected_runtime", "p_dec", "expected_runtime_dec"]
        .iter()
        .map(|s| s.to_string())
        .collect()];
    for r in records {
        for (label, t) in labels.iter().zip(&r.runtimes) {
            rows.push(vec![exact(&r.p), label.clone(), exact(t), dec(&r.p), dec(t)]);
        }
    }
    to_csv(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Delta,
    DeltaPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberStyle {
    Exact,
    Decimal,
}

/// Square matrix with a `key` header row and column, cells in `style`.
pub fn matrix_csv(m: &[Vec<Rational>], labels: &[String], style: NumberStyle) -> String {
    let cell = |r: &Rational| match style {
        NumberStyle::Exact => exact(r),
        NumberStyle::Decimal => dec(r),
    };
    let mut rows = vec![std::iter::once("key".to_string()).chain(labels.iter().cloned()).collect::<Vec<_>>()];
    for (label, row) in labels.iter().zip(m) {
        rows.push(std::iter::once(label.clone()).chain(row.iter().map(cell)).collect());
    }
    to_csv(rows)
}

/// The matrix of `kind` at grid point `p`, or `None` if `p` is off the grid.
pub fn delta_matrix_report(
    records: &[SweepRecord],
    labels: &[String],
    p: &Rational,
    kind: MatrixKind,
    style: NumberStyle,
) -> Option<String> {
    let r = records.iter().find(|r| r.p == *p)?;
    let m = match kind {
        MatrixKind::Delta => &r.delta,
        MatrixKind::DeltaPrime => &r.dprime,
    };
    Some(matrix_csv(m, labels, style))
}

/// c(p) from a table row's own columns.
pub fn recompute_cost(alpha: &Rational, row: &CostRow) -> Rational {
    alpha * &row.dprime_avg + &row.t_avg
}
