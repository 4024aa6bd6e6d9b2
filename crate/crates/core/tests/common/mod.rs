//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timeleak::lang::{parse_program, BinOp, Command, Expr, Program, Prob};
use timeleak::rational::{int, ratio, Rational};
use timeleak::semantics::{eval_expr, CostModel, Env, TimedTree, Value};

pub const DECLS: &str = "l low int; m low int; c1 low int; c2 low int; h high int; g high int;";
pub const LOW: [&str; 2] = ["l", "m"];
pub const HIGH: [&str; 2] = ["h", "g"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("nonempty")
}

fn lit<R: Rng>(rng: &mut R) -> Expr {
    Expr::Int(rng.gen_range(0..4))
}

/// Integer expression over the given variables.
fn int_expr<R: Rng>(rng: &mut R, vars: &[&str]) -> Expr {
    let v = Expr::var(pick(rng, vars));
    match rng.gen_range(0..5) {
        0 => lit(rng),
        1 => v,
        2 => Expr::bin(BinOp::Add, v, lit(rng)),
        3 => Expr::bin(BinOp::Sub, v, Expr::var(pick(rng, vars))),
        _ => Expr::bin(BinOp::Mul, v, Expr::Int(2)),
    }
}

fn bool_expr<R: Rng>(rng: &mut R, vars: &[&str]) -> Expr {
    let op = *[BinOp::Eq, BinOp::Ne, BinOp::Lt, BinOp::Le].choose(rng).unwrap();
    let rhs = if rng.gen_bool(0.5) { lit(rng) } else { Expr::var(pick(rng, vars)) };
    Expr::bin(op, Expr::var(pick(rng, vars)), rhs)
}

fn prob<R: Rng>(rng: &mut R) -> Prob {
    let (n, d) = *[(1, 2), (1, 3), (2, 3), (1, 4), (0, 1), (1, 1)].choose(rng).unwrap();
    Prob::Lit(ratio(n, d))
}

const ALL: [&str; 4] = ["l", "m", "h", "g"];

#[derive(Clone, Copy)]
pub struct GenOptions {
    /// Chance that the else-branch of a high conditional mirrors the
    /// then-branch (same shape, different high values).
    pub mirror: f64,
    pub max_depth: u32,
    /// Extra chance of a high conditional at each non-leaf position.
    pub high_bias: f64,
}

impl GenOptions {
    pub fn random() -> GenOptions {
        GenOptions {
            mirror: 0.3,
            max_depth: 3,
            high_bias: 0.0,
        }
    }

    pub fn typeable() -> GenOptions {
        GenOptions {
            mirror: 0.9,
            max_depth: 3,
            high_bias: 0.25,
        }
    }
}

struct Gen<'a, R> {
    rng: &'a mut R,
    opts: GenOptions,
}

impl<R: Rng> Gen<'_, R> {
    fn low_cmd(&mut self, depth: u32, loops: usize) -> Command {
        if depth > 0 && self.rng.gen_bool(self.opts.high_bias) {
            return self.high_if(depth);
        }
        let top = if depth == 0 { 3 } else { 8 };
        match self.rng.gen_range(0..top) {
            0 => {
                let x = pick(self.rng, &LOW);
                Command::assign(x, int_expr(self.rng, &LOW))
            }
            1 => {
                let x = pick(self.rng, &HIGH);
                Command::assign(x, int_expr(self.rng, &ALL))
            }
            2 => Command::Skip,
            3 => {
                let a = self.low_cmd(depth - 1, loops);
                let b = self.low_cmd(depth - 1, loops);
                Command::seq(a, b)
            }
            4 => {
                let p = prob(self.rng);
                Command::choose(p, self.low_cmd(depth - 1, loops), self.low_cmd(depth - 1, loops))
            }
            5 => {
                let e = bool_expr(self.rng, &LOW);
                Command::if_then_else(e, self.low_cmd(depth - 1, loops), self.low_cmd(depth - 1, loops))
            }
            6 => self.high_if(depth),
            _ if loops < 2 => {
                let c = ["c1", "c2"][loops];
                let n = self.rng.gen_range(1..4);
                let body = self.low_cmd(depth - 1, loops + 1);
                let step = Command::assign(c, Expr::bin(BinOp::Add, Expr::var(c), Expr::Int(1)));
                let guard = Expr::bin(BinOp::Lt, Expr::var(c), Expr::Int(n));
                Command::seq(Command::assign(c, Expr::Int(0)), Command::while_do(guard, Command::seq(body, step)))
            }
            _ => Command::Skip,
        }
    }

    fn high_if(&mut self, depth: u32) -> Command {
        let guard = bool_expr(self.rng, &ALL);
        let guard = if guard.free_vars().iter().any(|v| HIGH.contains(&v.as_str())) {
            guard
        } else {
            Expr::bin(BinOp::Eq, Expr::var(pick(self.rng, &HIGH)), lit(self.rng))
        };
        let a = self.high_cmd(depth - 1);
        let b = if self.rng.gen_bool(self.opts.mirror) {
            self.mirror(&a)
        } else {
            self.high_cmd(depth - 1)
        };
        Command::if_then_else(guard, a, b)
    }

    fn high_cmd(&mut self, depth: u32) -> Command {
        let top = if depth == 0 { 3 } else { 6 };
        match self.rng.gen_range(0..top) {
            0 => {
                let x = pick(self.rng, &HIGH);
                Command::assign(x, int_expr(self.rng, &ALL))
            }
            1 => Command::Skip,
            2 => {
                let x = pick(self.rng, &HIGH);
                Command::skip_asn(x, int_expr(self.rng, &ALL))
            }
            3 => {
                let a = self.high_cmd(depth - 1);
                let b = self.high_cmd(depth - 1);
                Command::seq(a, b)
            }
            4 => {
                let p = prob(self.rng);
                Command::choose(p, self.high_cmd(depth - 1), self.high_cmd(depth - 1))
            }
            _ => self.high_if(depth),
        }
    }

    fn mirror(&mut self, c: &Command) -> Command {
        match c {
            Command::Assign(x, _) => Command::assign(x, int_expr(self.rng, &ALL)),
            Command::Seq(a, b) => {
                let a = self.mirror(a);
                let b = self.mirror(b);
                Command::seq(a, b)
            }
            Command::Choose(p, a, b) => {
                let a = self.mirror(a);
                let b = self.mirror(b);
                Command::choose(p.clone(), a, b)
            }
            Command::If(e, a, b) => {
                let a = self.mirror(a);
                let b = self.mirror(b);
                Command::if_then_else(e.clone(), a, b)
            }
            other => other.clone(),
        }
    }
}

pub fn gen_program<R: Rng>(rng: &mut R, opts: GenOptions) -> Program {
    let depth = rng.gen_range(1..=opts.max_depth);
    let body = Gen { rng, opts }.low_cmd(depth, 0);
    let mut prog = parse_program(&format!("{DECLS} skip")).unwrap();
    prog.body = body;
    prog
}

/// Initial states used by the property tests: every (low, high) completion.
pub fn low_envs() -> Vec<Env> {
    [(0, 1), (2, 0)]
        .iter()
        .map(|&(l, m)| Env::new().with("l", Value::Int(l)).with("m", Value::Int(m)))
        .collect()
}

pub fn high_envs() -> Vec<Env> {
    let mut out = Vec::new();
    for h in 0..3 {
        for g in 0..2 {
            out.push(Env::new().with("h", Value::Int(h)).with("g", Value::Int(g)));
        }
    }
    out
}

pub fn low_vars() -> BTreeSet<String> {
    ["l", "m", "c1", "c2"].iter().map(|s| s.to_string()).collect()
}

/// Final-state distribution by direct structural recursion over the
/// command: (probability, total time, final env), no trees involved.
pub fn big_step(c: &Command, env: &Env, cm: &CostModel) -> Vec<(Rational, Rational, Env)> {
    let guard = |e: &Expr| eval_expr(env, e).unwrap().as_bool().unwrap();
    let shift = |outs: Vec<(Rational, Rational, Env)>, p: &Rational, dt: &Rational| {
        outs.into_iter().map(move |(q, t, e)| (p * q, dt + t, e)).collect::<Vec<_>>()
    };
    let one = Rational::one();
    let branch = &cm.t_e + &cm.t_br;
    match c {
        Command::Assign(x, e) => {
            let v = eval_expr(env, e).unwrap();
            vec![(one, &cm.t_e + &cm.t_x + &cm.t_asn, env.clone().with(x, v))]
        }
        Command::SkipAsn(_, _) => vec![(one, &cm.t_e + &cm.t_asn, env.clone())],
        Command::Skip => vec![(one, cm.t_skip.clone(), env.clone())],
        Command::If(e, a, b) => {
            let next = if guard(e) { a } else { b };
            shift(big_step(next, env, cm), &one, &branch)
        }
        Command::SkipIf(_, a) => shift(big_step(a, env, cm), &one, &branch),
        Command::While(e, a) => {
            if guard(e) {
                let mut out = Vec::new();
                for (p, t, e1) in big_step(a, env, cm) {
                    out.extend(shift(big_step(c, &e1, cm), &p, &(&t + &branch)));
                }
                out
            } else {
                vec![(one, branch, env.clone())]
            }
        }
        Command::Choose(p, a, b) => {
            let p = p.literal().expect("bound").clone();
            let q = &one - &p;
            let mut out = Vec::new();
            if !p.is_zero() {
                out.extend(shift(big_step(a, env, cm), &p, &cm.t_ch));
            }
            if !q.is_zero() {
                out.extend(shift(big_step(b, env, cm), &q, &cm.t_ch));
            }
            out
        }
        Command::Seq(a, b) => {
            let mut out = Vec::new();
            for (p, t, e1) in big_step(a, env, cm) {
                out.extend(shift(big_step(b, &e1, cm), &p, &t));
            }
            out
        }
    }
}

pub fn joint(outs: &[(Rational, Rational, Env)], low: &BTreeSet<String>) -> BTreeMap<(Env, Rational), Rational> {
    let mut m = BTreeMap::new();
    for (p, t, e) in outs {
        *m.entry((e.project(low), t.clone())).or_insert_with(Rational::zero) += p;
    }
    m
}

type Signature = BTreeMap<(Rational, usize), Rational>;

/// Bisimilarity of two tree roots by naive signature refinement over the
/// disjoint union, started from the label partition.
pub fn bisimilar_oracle(t1: &TimedTree, t2: &TimedTree) -> bool {
    let trees = [t1, t2];
    let nodes: Vec<(usize, usize)> = (0..2).flat_map(|i| (0..trees[i].len()).map(move |n| (i, n))).collect();
    let index = |i: usize, n: usize| if i == 0 { n } else { t1.len() + n };
    let mut class: Vec<usize> = {
        let labels: Vec<String> = nodes.iter().map(|&(i, n)| trees[i].nodes[n].label.to_string()).collect();
        let mut ids: BTreeMap<String, usize> = BTreeMap::new();
        labels
            .iter()
            .map(|l| {
                let k = ids.len();
                *ids.entry(l.clone()).or_insert(k)
            })
            .collect()
    };
    loop {
        let mut ids: BTreeMap<(usize, Signature), usize> = BTreeMap::new();
        let next: Vec<usize> = nodes
            .iter()
            .map(|&(i, n)| {
                let mut sig = BTreeMap::new();
                for e in &trees[i].edges[n] {
                    *sig.entry((e.dur.clone(), class[index(i, e.to)])).or_insert_with(Rational::zero) += &e.prob;
                }
                let key = (class[index(i, n)], sig);
                let k = ids.len();
                *ids.entry(key).or_insert(k)
            })
            .collect();
        let stable = next.iter().collect::<BTreeSet<_>>().len() == class.iter().collect::<BTreeSet<_>>().len();
        class = next;
        if stable {
            break;
        }
    }
    class[index(0, t1.root)] == class[index(1, t2.root)]
}

/// Random finite tree with labels over `l ∈ {0,1}` and durations in {1,2}.
pub fn random_tree<R: Rng>(rng: &mut R, max_depth: u32) -> TimedTree {
    let label = |rng: &mut R| Env::new().with("l", Value::Int(rng.gen_range(0..2)));
    let root = label(rng);
    let mut t = TimedTree::leaf(root);
    let mut stack = vec![(t.root, 0u32)];
    while let Some((n, d)) = stack.pop() {
        if d >= max_depth || rng.gen_bool(0.3) {
            continue;
        }
        let k = rng.gen_range(1..=3);
        let weights: Vec<i64> = (0..k).map(|_| rng.gen_range(1..3)).collect();
        let total: i64 = weights.iter().sum();
        for w in weights {
            let lab = label(rng);
            let child = t.add_child(n, ratio(w, total), int(rng.gen_range(1..3)), lab);
            stack.push((child, d + 1));
        }
    }
    t
}
