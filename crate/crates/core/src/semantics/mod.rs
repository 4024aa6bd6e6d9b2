//! Timed probabilistic semantics: evaluation, small steps, execution trees
//! and their low-observation collapse.

pub mod collapse;
pub mod env;
pub mod stats;
pub mod step;
pub mod tree;

pub use collapse::collapse;
pub use env::{eval_expr, Env, EvalError, Value};
pub use stats::{run_stats, PathStat, PathStats};
pub use step::{step, Config, CostModel, Transition};
pub use tree::{build_tree, build_tree_limited, BuildError, Edge, Node, NodeId, TimedTree, DEFAULT_DEPTH_BOUND};

use crate::lang::Program;

/// Raw execution tree of `prog` started in `env`.
pub fn program_tree(prog: &Program, env: &Env, cm: &CostModel, depth_bound: usize) -> Result<TimedTree, BuildError> {
    build_tree(&Config::new(env.clone(), prog.body.clone()), cm, depth_bound)
}

/// Collapsed tree over the program's low variables.
pub fn collapsed_tree(prog: &Program, env: &Env, cm: &CostModel, depth_bound: usize) -> Result<TimedTree, BuildError> {
    Ok(collapse(&program_tree(prog, env, cm, depth_bound)?, &prog.low_vars()))
}
