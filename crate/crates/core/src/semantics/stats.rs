use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use super::env::Env;
use super::tree::TimedTree;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStat {
    /// Product of edge probabilities.
    pub prob: Rational,
    /// Sum of edge durations.
    pub time: Rational,
    pub final_label: Env,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStats {
    pub paths: Vec<PathStat>,
}

impl PathStats {
    pub fn expected_runtime(&self) -> Rational {
        self.paths.iter().map(|p| &p.prob * &p.time).sum()
    }

    pub fn total_prob(&self) -> Rational {
        self.paths.iter().map(|p| p.prob.clone()).sum()
    }

    /// Distribution over (final low env, running time).
    pub fn joint(&self, low_vars: &BTreeSet<String>) -> BTreeMap<(Env, Rational), Rational> {
        let mut out = BTreeMap::new();
        for p in &self.paths {
            *out.entry((p.final_label.project(low_vars), p.time.clone()))
                .or_insert_with(Rational::zero) += &p.prob;
        }
        out
    }

    pub fn time_distribution(&self) -> BTreeMap<Rational, Rational> {
        let mut out = BTreeMap::new();
        for p in &self.paths {
            *out.entry(p.time.clone()).or_insert_with(Rational::zero) += &p.prob;
        }
        out
    }
}

pub fn run_stats(t: &TimedTree) -> PathStats {
    let mut paths = Vec::new();
    let mut stack = vec![(t.root, Rational::one(), Rational::zero())];
    while let Some((n, prob, time)) = stack.pop() {
        if t.is_leaf(n) {
            paths.push(PathStat {
                prob,
                time,
                final_label: t.nodes[n].env.clone().unwrap_or_else(|| t.nodes[n].label.clone()),
            });
            continue;
        }
        for e in t.edges[n].iter().rev() {
            stack.push((e.to, &prob * &e.prob, &time + &e.dur));
        }
    }
    PathStats { paths }
}
