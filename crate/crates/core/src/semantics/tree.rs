use std::fmt::Write;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Map, Value as Json};

use super::env::{Env, EvalError};
use super::step::{step, Config, CostModel};
use crate::lang::{render_command, Command};
use crate::rational::{self, Rational};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    /// What an observer compares: the full env in a raw tree, its low
    /// projection after collapsing.
    pub label: Env,
    /// Full environment, kept for analysis when `label` is projected.
    pub env: Option<Env>,
    /// Remaining command; `None` at terminated or synthetic nodes.
    pub cmd: Option<Command>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub prob: Rational,
    pub dur: Rational,
    pub to: NodeId,
}

/// Finite execution tree; edges carry (probability, duration).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedTree {
    pub nodes: Vec<Node>,
    pub edges: Vec<Vec<Edge>>,
    pub root: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("execution exceeded {bound} small steps (possible divergence)")]
    DepthExceeded { bound: usize },
    #[error("execution tree exceeded {limit} nodes")]
    TooLarge { limit: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

pub const DEFAULT_DEPTH_BOUND: usize = 10_000;
pub const DEFAULT_NODE_LIMIT: usize = 2_000_000;

impl TimedTree {
    pub fn leaf(label: Env) -> TimedTree {
        TimedTree {
            nodes: vec![Node {
                label,
                env: None,
                cmd: None,
            }],
            edges: vec![Vec::new()],
            root: 0,
        }
    }

    pub fn add_node(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.edges.push(Vec::new());
        self.nodes.len() - 1
    }

    /// Adds a fresh child carrying only a label.
    pub fn add_child(&mut self, parent: NodeId, prob: Rational, dur: Rational, label: Env) -> NodeId {
        let id = self.add_node(Node {
            label,
            env: None,
            cmd: None,
        });
        self.edges[parent].push(Edge { prob, dur, to: id });
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_leaf(&self, n: NodeId) -> bool {
        self.edges[n].is_empty()
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.len()).filter(|&n| self.is_leaf(n)).collect()
    }

    /// Nodes reachable from the root, parents before children.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for e in self.edges[n].iter().rev() {
                stack.push(e.to);
            }
        }
        out
    }

    /// Longest distance to a leaf, per node.
    pub fn heights(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.len()];
        for &n in self.preorder().iter().rev() {
            h[n] = self.edges[n].iter().map(|e| h[e.to] + 1).max().unwrap_or(0);
        }
        h
    }

    pub fn height(&self) -> usize {
        self.heights()[self.root]
    }

    /// Checks probabilities in (0,1] summing to exactly 1 at every internal
    /// node, and nonnegative durations.
    pub fn check_generative(&self) -> Result<(), String> {
        for n in self.preorder() {
            let out = &self.edges[n];
            if out.is_empty() {
                continue;
            }
            let mut total = Rational::zero();
            for e in out {
                if !e.prob.is_positive() || e.prob > Rational::one() {
                    return Err(format!("node {n}: probability {} outside (0,1]", rational::exact(&e.prob)));
                }
                if e.dur.is_negative() {
                    return Err(format!("node {n}: negative duration {}", rational::exact(&e.dur)));
                }
                total += &e.prob;
            }
            if !total.is_one() {
                return Err(format!("node {n}: outgoing probabilities sum to {}", rational::exact(&total)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Json {
        let order = self.preorder();
        let mut nodes = Vec::with_capacity(order.len());
        let mut edges = Vec::new();
        for &n in &order {
            let mut label = Map::new();
            for (k, v) in self.nodes[n].label.iter() {
                label.insert(k.clone(), Json::String(v.to_string()));
            }
            nodes.push(json!({"id": n, "label": label, "leaf": self.is_leaf(n)}));
            for e in &self.edges[n] {
                edges.push(json!({
                    "from": n,
                    "to": e.to,
                    "prob": rational::exact(&e.prob),
                    "dur": rational::exact(&e.dur),
                }));
            }
        }
        json!({"nodes": nodes, "edges": edges, "root": self.root})
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph tree {\n  node [shape=box, fontname=\"monospace\"];\n");
        for n in self.preorder() {
            let label = self.nodes[n].label.to_string().replace('"', "\\\"");
            let shape = if self.is_leaf(n) { ", peripheries=2" } else { "" };
            writeln!(s, "  n{n} [label=\"{label}\"{shape}];").unwrap();
            for e in &self.edges[n] {
                writeln!(
                    s,
                    "  n{n} -> n{} [label=\"{} : {}\"];",
                    e.to,
                    rational::exact(&e.prob),
                    rational::exact(&e.dur)
                )
                .unwrap();
            }
        }
        s.push_str("}\n");
        s
    }

    /// Indented text outline, one edge per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut stack = vec![(self.root, 0usize, None::<&Edge>)];
        while let Some((n, depth, via)) = stack.pop() {
            for _ in 0..depth {
                s.push_str("  ");
            }
            if let Some(e) = via {
                write!(s, "{} : {} -> ", rational::exact(&e.prob), rational::exact(&e.dur)).unwrap();
            }
            let label = self.nodes[n].label.to_string();
            s.push_str(if label.is_empty() { "*" } else { &label });
            if let Some(c) = &self.nodes[n].cmd {
                write!(s, "  | {}", render_command(c)).unwrap();
            }
            s.push('\n');
            for e in self.edges[n].iter().rev() {
                stack.push((e.to, depth + 1, Some(e)));
            }
        }
        s
    }
}

pub fn build_tree(cfg: &Config, cm: &CostModel, depth_bound: usize) -> Result<TimedTree, BuildError> {
    build_tree_limited(cfg, cm, depth_bound, DEFAULT_NODE_LIMIT)
}

/// Exhaustive unfolding of `step` from `cfg`.
pub fn build_tree_limited(
    cfg: &Config,
    cm: &CostModel,
    depth_bound: usize,
    node_limit: usize,
) -> Result<TimedTree, BuildError> {
    let mut tree = TimedTree {
        nodes: Vec::new(),
        edges: Vec::new(),
        root: 0,
    };
    tree.add_node(Node {
        label: cfg.env.clone(),
        env: None,
        cmd: cfg.cmd.clone(),
    });
    let mut stack = vec![(0usize, cfg.clone(), 0usize)];
    while let Some((id, cfg, depth)) = stack.pop() {
        let steps = step(&cfg, cm)?;
        if steps.is_empty() {
            continue;
        }
        if depth >= depth_bound {
            return Err(BuildError::DepthExceeded { bound: depth_bound });
        }
        for t in steps {
            if tree.len() >= node_limit {
                return Err(BuildError::TooLarge { limit: node_limit });
            }
            let child = tree.add_node(Node {
                label: t.next.env.clone(),
                env: None,
                cmd: t.next.cmd.clone(),
            });
            tree.edges[id].push(Edge {
                prob: t.prob,
                dur: t.dur,
                to: child,
            });
            stack.push((child, t.next, depth + 1));
        }
    }
    Ok(tree)
}
