use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::partition::{BlockId, JointDist, Lumping};
use crate::rational::{self, Rational};
use crate::semantics::{NodeId, TimedTree};

/// Per-entry weights ω applied to χ before taking the supremum norm.
#[derive(Debug, Clone, Copy)]
pub enum WeightScheme {
    /// ω ≡ 1; yields δ.
    Uniform,
    /// ω_{tC} = μ(C); yields δ′.
    ClassMatch,
    /// ω_{tC} = f(t).
    TimeRescale(fn(&Rational) -> Rational),
}

impl WeightScheme {
    pub fn name(&self) -> &'static str {
        match self {
            WeightScheme::Uniform => "uniform",
            WeightScheme::ClassMatch => "classmatch",
            WeightScheme::TimeRescale(_) => "timerescale",
        }
    }
}

/// ω(t) = max(0, ln t), as the exact value of the nearest `f64`.
pub fn log_time(t: &Rational) -> Rational {
    let x = rational::to_f64(t);
    if x <= 1.0 {
        return Rational::zero();
    }
    rational::from_f64(x.ln()).unwrap_or_else(Rational::zero)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Largest weighted gap at one (duration, block) entry.
    Entry,
    /// The two nodes carry different low labels.
    LabelMismatch,
    /// No node of the other tree at this height; the full weighted mass counts.
    Unmatched,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub layer: usize,
    /// True when `left` belongs to the first tree.
    pub from_first: bool,
    pub left: NodeId,
    pub right: Option<NodeId>,
    #[serde(with = "rational::serde_str::option")]
    pub entry_duration: Option<Rational>,
    pub entry_block: Option<BlockId>,
    #[serde(with = "rational::serde_str")]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeltaResult {
    #[serde(with = "rational::serde_str")]
    pub value: Rational,
    /// One-directional value scanning the first tree's layers.
    #[serde(with = "rational::serde_str")]
    pub forward: Rational,
    #[serde(with = "rational::serde_str")]
    pub backward: Rational,
    pub witness: Option<Witness>,
}

/// Pairwise leakage estimates over trees sharing one lumping; δ′ values are
/// memoized per unordered block pair for the lifetime of the analysis.
#[derive(Debug, Clone, Default)]
pub struct Analysis {
    pub lumping: Lumping,
    memo: HashMap<(BlockId, BlockId), Rational>,
}

struct Gap {
    value: Rational,
    kind: WitnessKind,
    entry: Option<(Rational, BlockId)>,
    weight: Rational,
}

impl Analysis {
    pub fn new() -> Analysis {
        Analysis::default()
    }

    pub fn add_tree(&mut self, t: &TimedTree) -> usize {
        self.lumping.add_tree(t)
    }

    pub fn delta(&mut self, a: usize, b: usize, w: WeightScheme) -> DeltaResult {
        match w {
            WeightScheme::ClassMatch => self.delta_prime(a, b),
            _ => {
                let (fwd, fw) = self.directed(a, b, w, true);
                let (bwd, bw) = self.directed(b, a, w, false);
                let (value, witness) = if bwd > fwd { (bwd.clone(), bw) } else { (fwd.clone(), fw) };
                DeltaResult {
                    value,
                    forward: fwd,
                    backward: bwd,
                    witness,
                }
            }
        }
    }

    fn entry_weight(w: WeightScheme, dur: &Rational) -> Rational {
        match w {
            WeightScheme::TimeRescale(f) => f(dur),
            _ => Rational::one(),
        }
    }

    fn gap(&self, b1: BlockId, b2: BlockId, w: WeightScheme) -> Gap {
        let (x, y) = (self.lumping.block(b1), self.lumping.block(b2));
        if x.label != y.label {
            return Gap {
                value: Rational::one(),
                kind: WitnessKind::LabelMismatch,
                entry: None,
                weight: Rational::one(),
            };
        }
        sup_gap(&x.chi, &y.chi, |dur, _| Self::entry_weight(w, dur))
    }

    fn mass(&self, b: BlockId, w: WeightScheme) -> Rational {
        self.lumping
            .block(b)
            .chi
            .iter()
            .map(|((t, _), p)| Self::entry_weight(w, t) * p)
            .sum()
    }

    fn directed(&self, a: usize, b: usize, w: WeightScheme, from_first: bool) -> (Rational, Option<Witness>) {
        let top = self.lumping.tree_height(a).max(self.lumping.tree_height(b));
        let mut best = Rational::zero();
        let mut witness = None;
        for h in 0..=top {
            let Some(la) = self.lumping.layer(a, h) else {
                continue;
            };
            let lb = self.lumping.layer(b, h);
            for (&b1, &n1) in la {
                let (beta, wit) = match lb {
                    Some(lb) if !lb.is_empty() => {
                        let mut pick: Option<(Gap, NodeId)> = None;
                        for (&b2, &n2) in lb {
                            let g = self.gap(b1, b2, w);
                            if pick.as_ref().is_none_or(|(p, _)| g.value < p.value) {
                                pick = Some((g, n2));
                            }
                        }
                        let (g, n2) = pick.unwrap();
                        let wit = Witness {
                            kind: g.kind,
                            layer: h,
                            from_first,
                            left: n1,
                            right: Some(n2),
                            entry_duration: g.entry.as_ref().map(|e| e.0.clone()),
                            entry_block: g.entry.map(|e| e.1),
                            weight: g.weight,
                        };
                        (g.value, wit)
                    }
                    _ => {
                        let wit = Witness {
                            kind: WitnessKind::Unmatched,
                            layer: h,
                            from_first,
                            left: n1,
                            right: None,
                            entry_duration: None,
                            entry_block: None,
                            weight: Rational::one(),
                        };
                        (self.mass(b1, w), wit)
                    }
                };
                if beta > best {
                    best = beta;
                    witness = Some(wit);
                }
            }
        }
        (best, witness)
    }

    /// δ′ between the roots of trees `a` and `b`.
    pub fn delta_prime(&mut self, a: usize, b: usize) -> DeltaResult {
        let (r1, r2) = (self.lumping.root_block(a), self.lumping.root_block(b));
        let value = self.block_distance(r1, r2);
        let witness = if value.is_zero() {
            None
        } else {
            let g = self.prime_gap(r1, r2);
            let h = self.lumping.block(r1).height.max(self.lumping.block(r2).height);
            Some(Witness {
                kind: g.kind,
                layer: h,
                from_first: true,
                left: self.root_node(a),
                right: Some(self.root_node(b)),
                entry_duration: g.entry.as_ref().map(|e| e.0.clone()),
                entry_block: g.entry.map(|e| e.1),
                weight: g.weight,
            })
        };
        DeltaResult {
            forward: value.clone(),
            backward: value.clone(),
            value,
            witness,
        }
    }

    fn root_node(&self, tree: usize) -> NodeId {
        let h = self.lumping.tree_height(tree);
        let rb = self.lumping.root_block(tree);
        self.lumping.layer(tree, h).and_then(|l| l.get(&rb)).copied().unwrap_or(0)
    }

    /// δ′ between two blocks: labels must agree; each χ entry at block C
    /// counts with weight μ(C), the distance from C to its nearest other
    /// block among those strictly below the pair.
    pub fn block_distance(&mut self, b1: BlockId, b2: BlockId) -> Rational {
        if b1 == b2 {
            return Rational::zero();
        }
        let key = (b1.min(b2), b1.max(b2));
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let v = self.prime_gap(b1, b2).value;
        self.memo.insert(key, v.clone());
        v
    }

    /// μ(C) for the comparison of `b1` and `b2`.
    pub fn matching_measure(&mut self, c: BlockId, b1: BlockId, b2: BlockId) -> Rational {
        let competitors = self.competitors(b1, b2);
        let mut mu: Option<Rational> = None;
        for &o in competitors.iter().filter(|&&o| o != c) {
            let d = self.block_distance(c, o);
            if mu.as_ref().is_none_or(|m| d < *m) {
                mu = Some(d);
            }
        }
        let mu = mu.unwrap_or_else(Rational::one);
        if mu > Rational::one() {
            Rational::one()
        } else if mu.is_negative() {
            Rational::zero()
        } else {
            mu
        }
    }

    fn competitors(&self, b1: BlockId, b2: BlockId) -> BTreeSet<BlockId> {
        let top = self.lumping.block(b1).height.max(self.lumping.block(b2).height);
        let mut all = self.lumping.reachable(b1);
        all.extend(self.lumping.reachable(b2));
        all.retain(|&b| self.lumping.block(b).height < top);
        all
    }

    fn prime_gap(&mut self, b1: BlockId, b2: BlockId) -> Gap {
        let (x, y) = (self.lumping.block(b1).clone(), self.lumping.block(b2).clone());
        if x.label != y.label {
            return Gap {
                value: Rational::one(),
                kind: WitnessKind::LabelMismatch,
                entry: None,
                weight: Rational::one(),
            };
        }
        let mut entries: BTreeSet<BlockId> = x.chi.0.keys().map(|(_, c)| *c).collect();
        entries.extend(y.chi.0.keys().map(|(_, c)| *c));
        let mut mu = HashMap::new();
        for c in entries {
            mu.insert(c, self.matching_measure(c, b1, b2));
        }
        sup_gap(&x.chi, &y.chi, |_, c| mu[&c].clone())
    }

    /// Recomputes the weighted difference a witness points at.
    pub fn witness_value(&mut self, a: usize, b: usize, w: &Witness, scheme: WeightScheme) -> Rational {
        let (ta, tb) = if w.from_first { (a, b) } else { (b, a) };
        let left = self.lumping.block_of(ta, w.left);
        match w.kind {
            WitnessKind::LabelMismatch => Rational::one(),
            WitnessKind::Unmatched => self.mass(left, scheme),
            WitnessKind::Entry => {
                let right = self.lumping.block_of(tb, w.right.expect("entry witness has a partner"));
                let dur = w.entry_duration.clone().expect("entry duration");
                let c = w.entry_block.expect("entry block");
                let weight = match scheme {
                    WeightScheme::ClassMatch => self.matching_measure(c, left, right),
                    other => Self::entry_weight(other, &dur),
                };
                let p1 = self.lumping.block(left).chi.get(&dur, c);
                let p2 = self.lumping.block(right).chi.get(&dur, c);
                weight * (p1 - p2).abs()
            }
        }
    }

    /// Symmetric matrix of pairwise values between the given trees.
    pub fn matrix(&mut self, trees: &[usize], w: WeightScheme) -> Vec<Vec<Rational>> {
        let n = trees.len();
        let mut m = vec![vec![Rational::zero(); n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = self.delta(trees[i], trees[j], w).value;
                m[i][j] = v.clone();
                m[j][i] = v;
            }
        }
        m
    }
}

fn sup_gap(x: &JointDist, y: &JointDist, weight: impl Fn(&Rational, BlockId) -> Rational) -> Gap {
    let mut keys: BTreeSet<&(Rational, BlockId)> = x.0.keys().collect();
    keys.extend(y.0.keys());
    let mut best = Gap {
        value: Rational::zero(),
        kind: WitnessKind::Entry,
        entry: None,
        weight: Rational::one(),
    };
    for k in keys {
        let (t, c) = k;
        let p1 = x.0.get(k).cloned().unwrap_or_else(Rational::zero);
        let p2 = y.0.get(k).cloned().unwrap_or_else(Rational::zero);
        let wt = weight(t, *c);
        let v = &wt * (p1 - p2).abs();
        if v > best.value {
            best = Gap {
                value: v,
                kind: WitnessKind::Entry,
                entry: Some((t.clone(), *c)),
                weight: wt,
            };
        }
    }
    best
}

pub fn delta(t1: &TimedTree, t2: &TimedTree, w: WeightScheme) -> DeltaResult {
    let mut an = Analysis::new();
    let a = an.add_tree(t1);
    let b = an.add_tree(t2);
    an.delta(a, b, w)
}

pub fn delta_prime(t1: &TimedTree, t2: &TimedTree) -> DeltaResult {
    delta(t1, t2, WeightScheme::ClassMatch)
}
