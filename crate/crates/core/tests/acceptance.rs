//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::process::ExitCode;

use num_traits::{One, Zero};

use common::{big_step, gen_program, joint, low_envs, low_vars, rng, GenOptions};
use timeleak::bisim::{chi, delta, pt_secure, refine, Analysis, WeightScheme};
use timeleak::costlab::{self, case_study, cost_curve, sweep, HighDomain, SweepConfig, SweepRecord};
use timeleak::lang::{parse_program, Command, Program, Prob};
use timeleak::padding::{pad_program, PadOptions};
use timeleak::rational::{exact, int, ratio, Rational};
use timeleak::sectype::{check_program, CheckOptions};
use timeleak::semantics::{collapse, collapsed_tree, program_tree, run_stats, CostModel, Env, NodeId, TimedTree, Value};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn show(m: &[Vec<Rational>]) -> String {
    m.iter()
        .map(|row| row.iter().map(exact).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join(" / ")
}

fn chain(t: &mut TimedTree, from: NodeId, len: usize) {
    let mut cur = from;
    for _ in 0..len {
        cur = t.add_child(cur, int(1), int(1), Env::new());
    }
}

/// The four unit-duration trees with uniform labels used for the δ tables.
fn four_trees() -> Vec<TimedTree> {
    let mut t1 = TimedTree::leaf(Env::new());
    chain(&mut t1, 0, 3);
    let mut t2 = TimedTree::leaf(Env::new());
    let a = t2.add_child(0, ratio(1, 2), int(1), Env::new());
    chain(&mut t2, a, 1);
    let b = t2.add_child(0, ratio(1, 2), int(1), Env::new());
    chain(&mut t2, b, 2);
    let mut t3 = TimedTree::leaf(Env::new());
    let x = t3.add_child(0, int(1), int(1), Env::new());
    t3.add_child(x, ratio(1, 2), int(1), Env::new());
    let y = t3.add_child(x, ratio(1, 2), int(1), Env::new());
    chain(&mut t3, y, 1);
    let mut t4 = TimedTree::leaf(Env::new());
    let x = t4.add_child(0, int(1), int(1), Env::new());
    let y = t4.add_child(x, int(1), int(1), Env::new());
    t4.add_child(y, ratio(1, 2), int(1), Env::new());
    t4.add_child(y, ratio(1, 2), int(1), Env::new());
    vec![t1, t2, t3, t4]
}

fn four_tree_matrix(w: WeightScheme) -> Vec<Vec<Rational>> {
    let mut an = Analysis::new();
    let ids: Vec<usize> = four_trees().iter().map(|t| an.add_tree(t)).collect();
    an.matrix(&ids, w)
}

fn criterion_1() -> Outcome {
    let m = four_tree_matrix(WeightScheme::Uniform);
    let (h, o, z) = (ratio(1, 2), int(1), int(0));
    let want = [
        [&z, &h, &o, &z],
        [&h, &z, &o, &h],
        [&o, &o, &z, &o],
        [&z, &h, &o, &z],
    ];
    for i in 0..4 {
        for j in 0..4 {
            ensure(m[i][j] == *want[i][j], format!("entry ({},{}) is {}", i + 1, j + 1, exact(&m[i][j])))?;
        }
    }
    Ok(format!("delta = {}", show(&m)))
}

fn criterion_2() -> Outcome {
    let m = four_tree_matrix(WeightScheme::ClassMatch);
    let u = four_tree_matrix(WeightScheme::Uniform);
    let d = |i: usize, j: usize| m[i - 1][j - 1].clone();
    let mut problems = Vec::new();
    for i in 0..4 {
        if !m[i][i].is_zero() {
            problems.push(format!("diagonal ({0},{0}) nonzero", i + 1));
        }
        for j in 0..4 {
            if m[i][j] != m[j][i] {
                problems.push(format!("asymmetric at ({},{})", i + 1, j + 1));
            }
            if m[i][j] > u[i][j] {
                problems.push(format!("delta' exceeds delta at ({},{})", i + 1, j + 1));
            }
        }
    }
    if !d(1, 4).is_zero() {
        problems.push("delta'(T1,T4) != 0".into());
    }
    let low_tier_equal = d(1, 3) == d(2, 3) && d(2, 3) == d(3, 4);
    let high_tier_equal = d(1, 2) == d(2, 4);
    let strict = d(1, 3) < d(1, 2);
    if !(low_tier_equal && high_tier_equal && strict) {
        problems.push(format!(
            "ordering d'(1,3)=d'(2,3)=d'(3,4) < d'(1,2)=d'(2,4) violated: d'(1,3)={} d'(2,3)={} d'(3,4)={} d'(1,2)={} d'(2,4)={}",
            exact(&d(1, 3)),
            exact(&d(2, 3)),
            exact(&d(3, 4)),
            exact(&d(1, 2)),
            exact(&d(2, 4))
        ));
    }
    let expected = [(1, 2, ratio(1, 4)), (2, 4, ratio(1, 4)), (1, 3, ratio(1, 8)), (2, 3, ratio(1, 8)), (3, 4, ratio(1, 8))];
    let mismatches: Vec<String> = expected
        .iter()
        .filter(|(i, j, v)| d(*i, *j) != *v)
        .map(|(i, j, v)| format!("({i},{j}) got {} want {}", exact(&d(*i, *j)), exact(v)))
        .collect();
    if !mismatches.is_empty() {
        problems.push(format!("value diagnostic: {}", mismatches.join(", ")));
    }
    if problems.is_empty() {
        Ok(format!("delta' = {}", show(&m)))
    } else {
        Err(format!("delta' = {}; {}", show(&m), problems.join("; ")))
    }
}

fn criterion_3() -> Outcome {
    let white = Env::new().with("l", Value::Int(0));
    let black = Env::new().with("l", Value::Int(1));
    let mut s1 = TimedTree::leaf(white.clone());
    for (t, lab) in [(1, &white), (2, &white), (1, &black), (2, &black)] {
        s1.add_child(0, ratio(1, 4), int(t), lab.clone());
    }
    let mut s2 = TimedTree::leaf(white.clone());
    s2.add_child(0, ratio(1, 2), int(2), black.clone());
    s2.add_child(0, ratio(1, 2), int(1), white.clone());
    let part = refine(&s1, &s2);
    let by_label = |tree: usize, t: &TimedTree| {
        let mut m: BTreeMap<(Rational, String), Rational> = BTreeMap::new();
        for ((dur, block), p) in chi(&part, tree, t.root).iter() {
            let label = part.lumping.block(*block).label.to_string();
            *m.entry((dur.clone(), label)).or_insert_with(Rational::zero) += p;
        }
        m
    };
    let cell = |t: i64, l: &str, p: Rational| ((int(t), l.to_string()), p);
    let want1: BTreeMap<_, _> = [
        cell(1, "l=0", ratio(1, 4)),
        cell(2, "l=0", ratio(1, 4)),
        cell(1, "l=1", ratio(1, 4)),
        cell(2, "l=1", ratio(1, 4)),
    ]
    .into_iter()
    .collect();
    let want2: BTreeMap<_, _> = [cell(2, "l=1", ratio(1, 2)), cell(1, "l=0", ratio(1, 2))].into_iter().collect();
    let (c1, c2) = (by_label(0, &s1), by_label(1, &s2));
    ensure(c1 == want1, format!("chi1 = {c1:?}"))?;
    ensure(c2 == want2, format!("chi2 = {c2:?}"))?;
    let marginal = |c: &BTreeMap<(Rational, String), Rational>, time: bool| {
        let mut m: BTreeMap<String, Rational> = BTreeMap::new();
        for ((t, l), p) in c {
            let key = if time { exact(t) } else { l.clone() };
            *m.entry(key).or_insert_with(Rational::zero) += p;
        }
        m
    };
    ensure(marginal(&c1, true) == marginal(&c2, true), "time marginals differ")?;
    ensure(marginal(&c1, false) == marginal(&c2, false), "label marginals differ")?;
    ensure(marginal(&c1, true).values().all(|p| *p == ratio(1, 2)), "time marginal is not uniform")?;
    let d = delta(&s1, &s2, WeightScheme::Uniform).value;
    ensure(d == ratio(1, 4), format!("delta = {}", exact(&d)))?;
    Ok("chi1, chi2 exact; equal marginals; delta = 1/4".into())
}

fn key_domain() -> HighDomain {
    let prog = parse_program(case_study::PAGAT).unwrap();
    costlab::parse_high_domain(&prog, &["k=all3".to_string()]).unwrap()
}

fn pagat_sweep(grid: Vec<Rational>) -> Vec<SweepRecord> {
    let mut cfg = SweepConfig::new(parse_program(case_study::PAGAT).unwrap(), key_domain());
    cfg.grid = grid;
    sweep(&cfg).unwrap()
}

/// Distinct `prob:duration` items per depth, `p`/`q` standing for the
/// padding probability and its complement.
fn edge_levels(t: &TimedTree, p: &Rational) -> Vec<String> {
    let mut out = Vec::new();
    let mut frontier = vec![t.root];
    while !frontier.is_empty() {
        let mut items: BTreeSet<String> = BTreeSet::new();
        let mut next = Vec::new();
        for n in frontier {
            for e in &t.edges[n] {
                let sym = if e.prob.is_one() { "1" } else if e.prob == *p { "p" } else { "q" };
                items.insert(format!("{sym}:{}", e.dur));
                next.push(e.to);
            }
        }
        if !items.is_empty() {
            let mut items: Vec<String> = items.into_iter().collect();
            items.sort_by_key(|s| !s.starts_with('q'));
            out.push(items.join("|"));
        }
        frontier = next;
    }
    out
}

fn criterion_4() -> Outcome {
    let p = ratio(1, 3);
    let prog = parse_program(case_study::PAGAT).unwrap().bind("p", &p);
    let tree = |bits: [u8; 3]| {
        let env = Env::zeroed(&prog).with("i", Value::Int(1)).with("k", Value::bits(&bits));
        collapsed_tree(&prog, &env, &CostModel::paper_trees(), 10_000).unwrap()
    };
    let a = edge_levels(&tree([0, 1, 1]), &p);
    let b = edge_levels(&tree([0, 1, 0]), &p);
    let want_a = ["1:5", "q:4|p:7", "1:2", "q:6|p:7", "1:2", "q:6|p:7", "1:1"];
    let want_b = ["1:5", "q:4|p:7", "1:2", "q:6|p:7", "1:2", "q:4|p:7", "1:1"];
    ensure(a == want_a, format!("k=011: {}", a.join(" ")))?;
    ensure(b == want_b, format!("k=010: {}", b.join(" ")))?;
    Ok(format!("k=011: {}; k=010: {}", a.join(" "), b.join(" ")))
}

fn criterion_5() -> Outcome {
    let recs = pagat_sweep(vec![int(0), ratio(1, 4), ratio(1, 2), ratio(3, 4), int(1)]);
    for r in &recs[..4] {
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { int(0) } else { int(1) };
                ensure(r.delta[i][j] == want, format!("p={} ({i},{j}) = {}", exact(&r.p), exact(&r.delta[i][j])))?;
            }
        }
    }
    ensure(recs[4].delta.iter().flatten().all(Zero::is_zero), "p=1 matrix is not zero")?;
    Ok("all off-diagonal delta = 1 for p in {0,1/4,1/2,3/4}; all 0 at p = 1".into())
}

fn criterion_6() -> Outcome {
    let grid: Vec<Rational> = (0..=4).map(|i| ratio(i, 4)).collect();
    let recs = pagat_sweep(grid);
    let labels = key_domain().labels;
    for (k, label) in labels.iter().enumerate() {
        let pop = label.chars().filter(|&c| c == '1').count() as i64;
        let t0 = &recs[0].runtimes[k];
        let t1 = &recs[4].runtimes[k];
        let slope = t1 - t0;
        ensure(slope == int(9 - 2 * pop), format!("key {label}: t(1)-t(0) = {}", exact(&slope)))?;
        for r in &recs {
            ensure(r.runtimes[k] == t0 + &slope * &r.p, format!("key {label}: not affine at p={}", exact(&r.p)))?;
        }
        ensure(*t0 == int(22 + 2 * pop), format!("key {label}: t(0) = {}", exact(t0)))?;
        ensure(t0 + int(7) == int(29 + 2 * pop), "offset")?;
    }
    ensure(recs[4].runtimes.iter().all(|t| *t == int(31)), "runtimes differ at p = 1")?;
    Ok("t_k(p) = 22 + 2|k| + (9 - 2|k|)p; p=0 values 22..28 and p=1 value 31".into())
}

#[allow(clippy::needless_range_loop)]
fn criterion_7() -> Outcome {
    let m = &pagat_sweep(vec![ratio(1, 2)])[0].dprime;
    let mut levels_by_position: BTreeMap<usize, BTreeSet<Rational>> = BTreeMap::new();
    let mut levels = BTreeSet::new();
    for i in 0..8 {
        ensure(m[i][i].is_zero(), "nonzero diagonal")?;
        for j in 0..8 {
            ensure(m[i][j] == m[j][i], format!("asymmetric at ({i},{j})"))?;
            if i != j {
                // Bit 0 of the index is the last key bit read.
                let position = 2 - (0..3).find(|b| (i ^ j) >> b & 1 == 1).unwrap();
                levels_by_position.entry(position).or_default().insert(m[i][j].clone());
                levels.insert(m[i][j].clone());
            }
        }
    }
    ensure(levels.len() == 3, format!("{} distinct levels", levels.len()))?;
    let per: Vec<Rational> = levels_by_position
        .values()
        .map(|s| {
            ensure(s.len() == 1, "pair value not determined by the deepest differing bit")?;
            Ok(s.iter().next().unwrap().clone())
        })
        .collect::<Result<_, String>>()?;
    ensure(per.windows(2).all(|w| w[1] < w[0]), "levels do not decrease with depth")?;
    let expected = [ratio(1, 2), ratio(1, 4), ratio(1, 8)];
    let note = if per == expected {
        "exactly 0.5/0.25/0.125"
    } else {
        "differs from the expected levels"
    };
    Ok(format!(
        "levels by differing bit 1..3: {} ({note})",
        per.iter().map(exact).collect::<Vec<_>>().join(", ")
    ))
}

fn criterion_8() -> Outcome {
    let recs = pagat_sweep(costlab::default_grid());
    let curve = cost_curve(&recs).unwrap();
    ensure(
        !curve.argmin.is_zero() && !curve.argmin.is_one(),
        format!("argmin at endpoint {}", exact(&curve.argmin)),
    )?;
    Ok(format!(
        "alpha = 6: argmin p = {} (cost {}); interior; the alpha = 7 optimum at 0.5 depends on criterion 2 holding exactly",
        exact(&curve.argmin),
        exact(&curve.min_cost)
    ))
}

fn has_high_branch(c: &Command, prog: &Program) -> bool {
    let high = prog.high_vars();
    let mut found = false;
    c.visit(&mut |c| {
        if let Command::If(e, ..) = c {
            found |= e.free_vars().iter().any(|v| high.contains(v));
        }
    });
    found
}

fn criterion_9() -> Outcome {
    let cm = CostModel::paper_trees();
    let highs = common::high_envs();
    let probes: Vec<Env> = low_envs()
        .iter()
        .flat_map(|l| highs.iter().map(move |h| l.merged(h)))
        .collect();
    let opts = CheckOptions {
        cm: cm.clone(),
        depth_bound: 10_000,
        probes,
    };
    let (mut accepted, mut with_high, mut pairs, mut seed) = (0, 0, 0, 0u64);
    while accepted < 100 {
        seed += 1;
        ensure(seed < 20_000, format!("only {accepted} typeable programs generated"))?;
        let prog = gen_program(&mut rng(seed), GenOptions::typeable());
        if !check_program(&prog, &opts).ok {
            continue;
        }
        accepted += 1;
        with_high += has_high_branch(&prog.body, &prog) as usize;
        for low in low_envs() {
            let r = pt_secure(&prog, &low, &highs, &cm, 10_000).map_err(|e| e.to_string())?;
            pairs += highs.len() * (highs.len() - 1) / 2;
            ensure(
                r.secure,
                format!("typeable program (seed {seed}) leaks delta {}: {}", exact(&r.max_delta), timeleak::lang::render_command(&prog.body)),
            )?;
        }
    }
    ensure(with_high >= 20, format!("only {with_high} programs branch on high data"))?;
    let key_opts = CheckOptions {
        probes: key_domain().envs,
        ..CheckOptions::default()
    };
    let agat = parse_program(case_study::AGAT).unwrap();
    ensure(!check_program(&agat, &key_opts).ok, "agat typed")?;
    ensure(check_program(&parse_program(case_study::FAGAT).unwrap(), &key_opts).ok, "fagat rejected")?;
    let (padded, _) = pad_program(&agat, &PadOptions::new(Prob::Lit(int(1)))).map_err(|e| e.to_string())?;
    let r = pt_secure(&padded, &Env::new(), &key_domain().envs, &cm, 10_000).map_err(|e| e.to_string())?;
    ensure(r.secure, format!("pad(agat, 1) leaks {}", exact(&r.max_delta)))?;
    Ok(format!(
        "{accepted} typeable programs ({with_high} with high branches), {pairs} low-equivalent pairs all delta = 0; agat rejected, fagat and pad(agat,1) secure"
    ))
}

fn criterion_10() -> Outcome {
    let cm = CostModel::paper_trees();
    let low = low_vars();
    let highs = common::high_envs();
    let mut checked = 0;
    let mut merged = 0;
    for seed in 0..150u64 {
        let prog = gen_program(&mut rng(1_000_000 + seed), GenOptions::random());
        let env = Env::zeroed(&prog).merged(&low_envs()[seed as usize % 2]).merged(&highs[seed as usize % 6]);
        let raw = program_tree(&prog, &env, &cm, 10_000).map_err(|e| e.to_string())?;
        let col = collapse(&raw, &low);
        raw.check_generative().map_err(|e| format!("seed {seed} raw: {e}"))?;
        col.check_generative().map_err(|e| format!("seed {seed} collapsed: {e}"))?;
        let (rs, cs) = (run_stats(&raw), run_stats(&col));
        ensure(rs.total_prob().is_one() && cs.total_prob().is_one(), format!("seed {seed}: mass != 1"))?;
        let outs = big_step(&prog.body, &env, &cm);
        let oracle = joint(&outs, &low);
        let total: Rational = outs.iter().map(|(p, ..)| p.clone()).sum();
        ensure(total.is_one(), format!("seed {seed}: oracle mass {}", exact(&total)))?;
        ensure(cs.joint(&low) == oracle, format!("seed {seed}: joint distribution differs from oracle"))?;
        let expected: Rational = outs.iter().map(|(p, t, _)| p * t).sum();
        ensure(cs.expected_runtime() == expected, format!("seed {seed}: expected runtime differs"))?;
        ensure(rs.expected_runtime() == expected, format!("seed {seed}: raw expected runtime differs"))?;
        checked += 1;
        merged += (col.len() < raw.len()) as usize;
    }
    Ok(format!("{checked} random programs: collapsed joint (low env, time) and expected runtime equal the big-step oracle; {merged} trees shrank"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("delta reference table", criterion_1),
        ("delta' reference table", criterion_2),
        ("joint distributions", criterion_3),
        ("case-study trees", criterion_4),
        ("delta step behaviour", criterion_5),
        ("runtime law", criterion_6),
        ("delta' key table structure", criterion_7),
        ("cost optimum", criterion_8),
        ("typing/security coherence", criterion_9),
        ("semantics oracles", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {:>2} {name}: panicked", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
