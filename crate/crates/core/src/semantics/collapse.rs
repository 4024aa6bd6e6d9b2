use std::collections::{BTreeSet, HashMap};

use num_traits::One;

use super::env::Env;
use super::tree::{Edge, Node, NodeId, TimedTree};
use crate::lang::Command;
use crate::rational::Rational;

/// Observable content of a collapsed node: its low label and merged
/// outgoing edges. High state and residual commands are not part of it, so
/// runs that only differ in unobservable ways end up in the same node.
#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    label: Env,
    /// (duration, child key, merged probability).
    edges: Vec<(Rational, usize, Rational)>,
}

/// A key with the configuration of one node that produced it, kept for
/// display and for the final states reported by path statistics.
struct Interned {
    key: Key,
    env: Env,
    cmd: Option<Command>,
}

/// Low-observation quotient of `t`: each edge absorbs the maximal following
/// run of probability-1 steps during which the low projection is unchanged
/// (the step that changes it is included), parallel edges with equal
/// duration into observably identical successors are merged, and node labels become low
/// projections. Repeated until nothing changes, so the result is idempotent.
pub fn collapse(t: &TimedTree, low_vars: &BTreeSet<String>) -> TimedTree {
    let mut cur = collapse_once(t, low_vars);
    loop {
        let next = collapse_once(&cur, low_vars);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn collapse_once(t: &TimedTree, low_vars: &BTreeSet<String>) -> TimedTree {
    let mut low: HashMap<NodeId, Env> = HashMap::new();
    let mut low_of = |n: NodeId| -> Env {
        low.entry(n)
            .or_insert_with(|| t.nodes[n].label.project(low_vars))
            .clone()
    };

    // Collapsed edges per reachable endpoint, discovered breadth-first.
    let mut order = vec![t.root];
    let mut bundled: HashMap<NodeId, Vec<(Rational, Rational, NodeId)>> = HashMap::new();
    let mut i = 0;
    while i < order.len() {
        let n = order[i];
        i += 1;
        let here = low_of(n);
        let mut out = Vec::with_capacity(t.edges[n].len());
        for e in &t.edges[n] {
            let mut dur = e.dur.clone();
            let mut c = e.to;
            if low_of(c) == here {
                while let [only] = t.edges[c].as_slice() {
                    if !only.prob.is_one() {
                        break;
                    }
                    dur += &only.dur;
                    c = only.to;
                    if low_of(c) != here {
                        break;
                    }
                }
            }
            out.push((e.prob.clone(), dur, c));
            order.push(c);
        }
        bundled.insert(n, out);
    }

    // Hash-cons endpoints bottom-up, merging parallel edges.
    let mut interner: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Interned> = Vec::new();
    let mut key_of: HashMap<NodeId, usize> = HashMap::new();
    for &n in order.iter().rev() {
        if key_of.contains_key(&n) {
            continue;
        }
        // First-occurrence order keeps repeated passes stable.
        let mut merged: Vec<(Rational, usize, Rational)> = Vec::new();
        for (p, d, c) in &bundled[&n] {
            let k = key_of[c];
            match merged.iter_mut().find(|(d2, k2, _)| d2 == d && *k2 == k) {
                Some(slot) => slot.2 += p,
                None => merged.push((d.clone(), k, p.clone())),
            }
        }
        let node = &t.nodes[n];
        let key = Key {
            label: low_of(n),
            edges: merged,
        };
        let id = *interner.entry(key.clone()).or_insert_with(|| {
            keys.push(Interned {
                key,
                env: node.env.clone().unwrap_or_else(|| node.label.clone()),
                cmd: node.cmd.clone(),
            });
            keys.len() - 1
        });
        key_of.insert(n, id);
    }

    expand(&keys, key_of[&t.root])
}

fn expand(keys: &[Interned], root: usize) -> TimedTree {
    let mut out = TimedTree {
        nodes: Vec::new(),
        edges: Vec::new(),
        root: 0,
    };
    let node = |k: &Interned| Node {
        label: k.key.label.clone(),
        env: Some(k.env.clone()),
        cmd: k.cmd.clone(),
    };
    out.add_node(node(&keys[root]));
    let mut stack = vec![(root, 0usize)];
    while let Some((k, id)) = stack.pop() {
        for (d, child, p) in &keys[k].key.edges {
            let cid = out.add_node(node(&keys[*child]));
            out.edges[id].push(Edge {
                prob: p.clone(),
                dur: d.clone(),
                to: cid,
            });
            stack.push((*child, cid));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;
    use crate::rational::{int, ratio};
    use crate::semantics::env::Value;
    use crate::semantics::step::{Config, CostModel};
    use crate::semantics::tree::build_tree;

    fn durations(t: &TimedTree, n: NodeId) -> Vec<(Rational, Rational)> {
        t.edges[n].iter().map(|e| (e.prob.clone(), e.dur.clone())).collect()
    }

    #[test]
    fn example_with_three_way_choice() {
        // if-step, then a three-way choice, then assignments; t_asn = 1 keeps
        // the arithmetic visible.
        let src = "l low int; h high int;\n\
                   if h == 0 then choose 1/2: l := 1 or 1/2: choose 1/2: l := 2 or l := 3 ro ro else skip fi; l := 0";
        let prog = parse_program(src).unwrap();
        let cm = CostModel {
            t_e: int(0),
            t_x: int(0),
            t_asn: int(1),
            t_br: int(1),
            t_ch: int(0),
            t_skip: int(1),
        };
        let env = Env::zeroed(&prog);
        let raw = build_tree(&Config::new(env, prog.body.clone()), &cm, 100).unwrap();
        let t = collapse(&raw, &prog.low_vars());
        assert_eq!(durations(&t, t.root), vec![(int(1), int(1))]);
        let mid = t.edges[t.root][0].to;
        assert_eq!(t.edges[mid].len(), 2);
        let inner = t.edges[mid]
            .iter()
            .find(|e| !t.is_leaf(e.to) && t.edges[e.to].len() == 2)
            .expect("nested choice node");
        assert_eq!(inner.dur, int(0));
        let grand = durations(&t, inner.to);
        assert_eq!(grand, vec![(ratio(1, 2), int(1)), (ratio(1, 2), int(1))]);
        for e in &t.edges[inner.to] {
            assert_eq!(durations(&t, e.to), vec![(int(1), int(1))]);
        }
        t.check_generative().unwrap();
    }

    #[test]
    fn deterministic_low_stable_program_collapses_to_one_edge() {
        let prog = parse_program("l low int; h high int; h := 1; h := h + 1; skip").unwrap();
        let raw = build_tree(
            &Config::new(Env::zeroed(&prog), prog.body.clone()),
            &CostModel::paper_trees(),
            100,
        )
        .unwrap();
        let t = collapse(&raw, &prog.low_vars());
        assert_eq!(t.len(), 2);
        assert_eq!(durations(&t, t.root), vec![(int(1), int(7))]);
        assert_eq!(t.nodes[1].env.as_ref().unwrap().get("h"), Some(&Value::Int(2)));
        assert!(t.nodes[1].label.get("h").is_none());
    }

    #[test]
    fn identical_branches_merge() {
        let prog = parse_program("l low int; choose 1/3: l := 1 or l := 1 ro").unwrap();
        let raw = build_tree(
            &Config::new(Env::zeroed(&prog), prog.body.clone()),
            &CostModel::paper_trees(),
            100,
        )
        .unwrap();
        let t = collapse(&raw, &prog.low_vars());
        assert_eq!(durations(&t, t.root), vec![(int(1), int(3))]);
        assert_eq!(collapse(&t, &prog.low_vars()), t);
    }

    #[test]
    fn high_differences_do_not_block_merging() {
        // Whether the branches leave h equal depends on h itself; the
        // observable shape must not.
        let prog = parse_program("h high int; g high int; choose 1/4: skipAsn g 2 or h := g ro").unwrap();
        for h in [0, 1] {
            let env = Env::zeroed(&prog).with("h", Value::Int(h));
            let raw = build_tree(&Config::new(env, prog.body.clone()), &CostModel::paper_trees(), 100).unwrap();
            let t = collapse(&raw, &prog.low_vars());
            assert_eq!(durations(&t, t.root), vec![(int(1), int(3))], "h = {h}");
        }
    }
}
