use num_traits::Zero;
use serde::Serialize;

use super::delta::{Analysis, WeightScheme};
use crate::lang::Program;
use crate::rational::{self, Rational};
use crate::semantics::{collapsed_tree, BuildError, CostModel, Env};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SecureReport {
    pub secure: bool,
    #[serde(with = "rational::serde_str")]
    pub max_delta: Rational,
    /// Indices into the high domain of the pair attaining `max_delta`.
    pub worst_pair: Option<(usize, usize)>,
}

/// Checks that every completion of `low_env` by an entry of `high_domain`
/// yields bisimilar collapsed trees. Undeclared entries start at zero.
pub fn pt_secure(
    prog: &Program,
    low_env: &Env,
    high_domain: &[Env],
    cm: &CostModel,
    depth_bound: usize,
) -> Result<SecureReport, BuildError> {
    let base = Env::zeroed(prog).merged(low_env);
    let mut an = Analysis::new();
    let mut ids = Vec::with_capacity(high_domain.len());
    for h in high_domain {
        let t = collapsed_tree(prog, &base.merged(h), cm, depth_bound)?;
        ids.push(an.add_tree(&t));
    }
    let mut max_delta = Rational::zero();
    let mut worst_pair = None;
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let d = an.delta(ids[i], ids[j], WeightScheme::Uniform).value;
            if d > max_delta {
                max_delta = d;
                worst_pair = Some((i, j));
            }
        }
    }
    Ok(SecureReport {
        secure: max_delta.is_zero(),
        max_delta,
        worst_pair,
    })
}
