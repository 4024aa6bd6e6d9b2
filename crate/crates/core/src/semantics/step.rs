use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::env::{eval_expr, Env, EvalError, Value};
use crate::lang::{Command, Expr, Prob};
use crate::rational::{self, int, Rational};

/// Atomic durations of the timed semantics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CostModel {
    #[serde(with = "rational::serde_str")]
    pub t_e: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_x: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_asn: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_br: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_ch: Rational,
    #[serde(with = "rational::serde_str")]
    pub t_skip: Rational,
}

impl CostModel {
    /// The values that reproduce the case-study trees: assignment 3, branch 1,
    /// skip 1, everything else free.
    pub fn paper_trees() -> CostModel {
        CostModel {
            t_e: int(0),
            t_x: int(0),
            t_asn: int(3),
            t_br: int(1),
            t_ch: int(0),
            t_skip: int(1),
        }
    }

    /// As written in the case-study prose (branch time 2).
    pub fn paper_stated() -> CostModel {
        CostModel {
            t_br: int(2),
            ..CostModel::paper_trees()
        }
    }

    /// Every atomic step costs one tick.
    pub fn unit() -> CostModel {
        CostModel {
            t_e: int(0),
            t_x: int(0),
            t_asn: int(1),
            t_br: int(1),
            t_ch: int(1),
            t_skip: int(1),
        }
    }

    pub fn profile(name: &str) -> Option<CostModel> {
        match name {
            "paper-trees" => Some(CostModel::paper_trees()),
            "paper-stated" => Some(CostModel::paper_stated()),
            "unit" => Some(CostModel::unit()),
            _ => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        [&self.t_e, &self.t_x, &self.t_asn, &self.t_br, &self.t_ch, &self.t_skip]
            .iter()
            .all(|t| !t.is_negative())
    }
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::paper_trees()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    pub env: Env,
    /// `None` once the command has terminated.
    pub cmd: Option<Command>,
}

impl Config {
    pub fn new(env: Env, cmd: Command) -> Config {
        Config { env, cmd: Some(cmd) }
    }

    pub fn terminated(env: Env) -> Config {
        Config { env, cmd: None }
    }

    pub fn is_terminated(&self) -> bool {
        self.cmd.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub prob: Rational,
    pub dur: Rational,
    pub next: Config,
}

fn det(dur: Rational, next: Config) -> Vec<Transition> {
    vec![Transition {
        prob: Rational::one(),
        dur,
        next,
    }]
}

fn guard(env: &Env, e: &Expr) -> Result<bool, EvalError> {
    eval_expr(env, e)?
        .as_bool()
        .ok_or_else(|| EvalError::TypeMismatch("guard is not boolean".to_string()))
}

/// One small step. Returns an empty list for a terminated configuration.
pub fn step(cfg: &Config, cm: &CostModel) -> Result<Vec<Transition>, EvalError> {
    let Some(cmd) = &cfg.cmd else {
        return Ok(Vec::new());
    };
    step_cmd(&cfg.env, cmd, cm)
}

fn step_cmd(env: &Env, cmd: &Command, cm: &CostModel) -> Result<Vec<Transition>, EvalError> {
    match cmd {
        Command::Assign(x, e) => {
            if matches!(env.get(x), Some(Value::Array(_))) {
                return Err(EvalError::ArrayWrite(x.clone()));
            }
            let v = eval_expr(env, e)?;
            let env = env.clone().with(x, v);
            Ok(det(&cm.t_e + &cm.t_x + &cm.t_asn, Config::terminated(env)))
        }
        Command::SkipAsn(_, e) => {
            eval_expr(env, e)?;
            Ok(det(&cm.t_e + &cm.t_asn, Config::terminated(env.clone())))
        }
        Command::Skip => Ok(det(cm.t_skip.clone(), Config::terminated(env.clone()))),
        Command::If(e, c, d) => {
            let next = if guard(env, e)? { c } else { d };
            Ok(det(&cm.t_e + &cm.t_br, Config::new(env.clone(), (**next).clone())))
        }
        Command::SkipIf(e, c) => {
            guard(env, e)?;
            Ok(det(&cm.t_e + &cm.t_br, Config::new(env.clone(), (**c).clone())))
        }
        Command::While(e, c) => {
            let t = &cm.t_e + &cm.t_br;
            if guard(env, e)? {
                let unrolled = Command::seq((**c).clone(), cmd.clone());
                Ok(det(t, Config::new(env.clone(), unrolled)))
            } else {
                Ok(det(t, Config::terminated(env.clone())))
            }
        }
        Command::Choose(p, c, d) => {
            let p = match p {
                Prob::Lit(r) => r.clone(),
                Prob::Param(name) => return Err(EvalError::UnboundParam(name.clone())),
            };
            let q = Rational::one() - &p;
            let mut out = Vec::with_capacity(2);
            for (prob, branch) in [(p, c), (q, d)] {
                if !prob.is_zero() {
                    out.push(Transition {
                        prob,
                        dur: cm.t_ch.clone(),
                        next: Config::new(env.clone(), (**branch).clone()),
                    });
                }
            }
            Ok(out)
        }
        Command::Seq(c, d) => {
            let steps = step_cmd(env, c, cm)?;
            Ok(steps
                .into_iter()
                .map(|t| {
                    let next = match t.next.cmd {
                        None => Config::new(t.next.env, (**d).clone()),
                        Some(c2) => Config::new(t.next.env, Command::seq(c2, (**d).clone())),
                    };
                    Transition { next, ..t }
                })
                .collect())
        }
    }
}
