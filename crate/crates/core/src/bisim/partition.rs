use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::Zero;

use crate::rational::Rational;
use crate::semantics::{Env, NodeId, TimedTree};

pub type BlockId = usize;

/// χ(s): (duration, successor block) -> probability.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointDist(pub BTreeMap<(Rational, BlockId), Rational>);

impl JointDist {
    pub fn get(&self, dur: &Rational, block: BlockId) -> Rational {
        self.0
            .get(&(dur.clone(), block))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn total(&self) -> Rational {
        self.0.values().cloned().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(Rational, BlockId), &Rational)> {
        self.0.iter()
    }

    /// Marginal over durations.
    pub fn time_marginal(&self) -> BTreeMap<Rational, Rational> {
        let mut out = BTreeMap::new();
        for ((t, _), p) in &self.0 {
            *out.entry(t.clone()).or_insert_with(Rational::zero) += p;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockInfo {
    pub label: Env,
    pub height: usize,
    pub chi: JointDist,
}

#[derive(Debug, Clone)]
struct TreeBlocks {
    node_block: Vec<Option<BlockId>>,
    heights: Vec<usize>,
    root: NodeId,
    /// Distinct blocks per height, with one representative node each.
    layers: Vec<BTreeMap<BlockId, NodeId>>,
}

/// Coarsest stable partition over any number of trees, built bottom-up:
/// two nodes share a block iff their low labels agree and their χ over the
/// (already fixed) lower blocks agree. Blocks are hash-consed, so a block id
/// means the same thing for every tree added to one `Lumping`.
#[derive(Debug, Clone, Default)]
pub struct Lumping {
    blocks: Vec<BlockInfo>,
    index: HashMap<(Env, JointDist), BlockId>,
    trees: Vec<TreeBlocks>,
}

impl Lumping {
    pub fn new() -> Lumping {
        Lumping::default()
    }

    /// Adds `t`; node labels are compared as given (project first if needed).
    pub fn add_tree(&mut self, t: &TimedTree) -> usize {
        let heights = t.heights();
        let mut node_block = vec![None; t.len()];
        let order = t.preorder();
        for &n in order.iter().rev() {
            let mut chi = JointDist::default();
            for e in &t.edges[n] {
                let b = node_block[e.to].expect("child before parent");
                *chi.0.entry((e.dur.clone(), b)).or_insert_with(Rational::zero) += &e.prob;
            }
            let label = t.nodes[n].label.clone();
            let key = (label, chi);
            let id = match self.index.get(&key) {
                Some(&id) => id,
                None => {
                    let id = self.blocks.len();
                    self.blocks.push(BlockInfo {
                        label: key.0.clone(),
                        height: heights[n],
                        chi: key.1.clone(),
                    });
                    self.index.insert(key, id);
                    id
                }
            };
            node_block[n] = Some(id);
        }
        let top = heights[t.root];
        let mut layers = vec![BTreeMap::new(); top + 1];
        for &n in &order {
            let b = node_block[n].unwrap();
            layers[heights[n]].entry(b).or_insert(n);
        }
        self.trees.push(TreeBlocks {
            node_block,
            heights,
            root: t.root,
            layers,
        });
        self.trees.len() - 1
    }

    pub fn block(&self, b: BlockId) -> &BlockInfo {
        &self.blocks[b]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_of(&self, tree: usize, node: NodeId) -> BlockId {
        self.trees[tree].node_block[node].expect("node reachable from root")
    }

    pub fn root_block(&self, tree: usize) -> BlockId {
        self.block_of(tree, self.trees[tree].root)
    }

    pub fn height_of(&self, tree: usize, node: NodeId) -> usize {
        self.trees[tree].heights[node]
    }

    pub fn chi(&self, tree: usize, node: NodeId) -> &JointDist {
        &self.blocks[self.block_of(tree, node)].chi
    }

    pub fn tree_height(&self, tree: usize) -> usize {
        self.trees[tree].layers.len() - 1
    }

    /// Distinct blocks at `height` in `tree`, each with a representative node.
    pub fn layer(&self, tree: usize, height: usize) -> Option<&BTreeMap<BlockId, NodeId>> {
        self.trees[tree].layers.get(height)
    }

    /// Blocks reachable from `b`, including `b`.
    pub fn reachable(&self, b: BlockId) -> BTreeSet<BlockId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend(self.blocks[x].chi.0.keys().map(|(_, c)| *c));
            }
        }
        seen
    }
}

/// Nodes of each tree grouped by height: entry `n` holds (tree-1 nodes,
/// tree-2 nodes) of height `n`, from the leaves (0) upwards.
pub fn stratify(t1: &TimedTree, t2: &TimedTree) -> Vec<(Vec<NodeId>, Vec<NodeId>)> {
    let (h1, h2) = (t1.heights(), t2.heights());
    let top = h1[t1.root].max(h2[t2.root]);
    let mut out = vec![(Vec::new(), Vec::new()); top + 1];
    for n in t1.preorder() {
        out[h1[n]].0.push(n);
    }
    for n in t2.preorder() {
        out[h2[n]].1.push(n);
    }
    out
}

/// Block assignment for the disjoint union of two trees.
#[derive(Debug, Clone)]
pub struct Partition {
    pub lumping: Lumping,
}

impl Partition {
    pub fn block_of(&self, tree: usize, node: NodeId) -> BlockId {
        self.lumping.block_of(tree, node)
    }

    pub fn roots_bisimilar(&self) -> bool {
        self.lumping.root_block(0) == self.lumping.root_block(1)
    }
}

pub fn refine(t1: &TimedTree, t2: &TimedTree) -> Partition {
    let mut lumping = Lumping::new();
    lumping.add_tree(t1);
    lumping.add_tree(t2);
    Partition { lumping }
}

pub fn chi(partition: &Partition, tree: usize, node: NodeId) -> JointDist {
    partition.lumping.chi(tree, node).clone()
}
