use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lang::{BaseType, BinOp, Expr, Program};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    /// Read-only array contents.
    Array(Vec<Value>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn bits(bits: &[u8]) -> Value {
        Value::Array(bits.iter().map(|b| Value::Int(i64::from(*b))).collect())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("index {index} out of bounds for `{array}` of length {len}")]
    OutOfBounds { array: String, index: i64, len: usize },
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("integer overflow in `{0}`")]
    Overflow(String),
    #[error("`{0}` is an array and cannot be assigned")]
    ArrayWrite(String),
    #[error("probability parameter `{0}` is unbound")]
    UnboundParam(String),
}

/// Variable store; also used as a node label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Env(BTreeMap<String, Value>);

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    /// Every declared variable at its zero value (0, false, all-zero array).
    pub fn zeroed(prog: &Program) -> Env {
        let mut env = Env::new();
        for d in &prog.decls {
            let zero = match d.base {
                BaseType::Int => Value::Int(0),
                BaseType::Bool => Value::Bool(false),
            };
            let v = match d.array_len {
                Some(n) => Value::Array(vec![zero; n]),
                None => zero,
            };
            env.set(&d.name, v);
        }
        env
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Value)>) -> Env {
        Env(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.0.get(name)
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.0.insert(name.to_string(), v);
    }

    pub fn with(mut self, name: &str, v: Value) -> Env {
        self.set(name, v);
        self
    }

    /// Restriction to `vars`; the E_L of a low projection.
    pub fn project(&self, vars: &BTreeSet<String>) -> Env {
        Env(self
            .0
            .iter()
            .filter(|(k, _)| vars.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Value)> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Overrides entries of `self` with those of `other`.
    pub fn merged(&self, other: &Env) -> Env {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v.clone());
        }
        out
    }
}

impl fmt::Display for Env {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

pub fn eval_expr(env: &Env, e: &Expr) -> Result<Value, EvalError> {
    match e {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Var(x) => match env.get(x) {
            Some(Value::Array(_)) => Err(EvalError::TypeMismatch(format!("array `{x}` used as a scalar"))),
            Some(v) => Ok(v.clone()),
            None => Err(EvalError::Unbound(x.clone())),
        },
        Expr::Index(a, i) => {
            let idx = eval_expr(env, i)?
                .as_int()
                .ok_or_else(|| EvalError::TypeMismatch(format!("index of `{a}` is not an integer")))?;
            let items = match env.get(a) {
                Some(Value::Array(items)) => items,
                Some(_) => return Err(EvalError::TypeMismatch(format!("`{a}` is not an array"))),
                None => return Err(EvalError::Unbound(a.clone())),
            };
            if idx < 1 || idx as u64 > items.len() as u64 {
                return Err(EvalError::OutOfBounds {
                    array: a.clone(),
                    index: idx,
                    len: items.len(),
                });
            }
            Ok(items[(idx - 1) as usize].clone())
        }
        Expr::Bin(op, l, r) => {
            let lv = eval_expr(env, l)?;
            let rv = eval_expr(env, r)?;
            apply(*op, &lv, &rv)
        }
    }
}

fn apply(op: BinOp, l: &Value, r: &Value) -> Result<Value, EvalError> {
    let ints = || match (l, r) {
        (Value::Int(a), Value::Int(b)) => Ok((*a, *b)),
        _ => Err(EvalError::TypeMismatch(format!("`{}` needs integer operands", op.symbol()))),
    };
    let overflow = || EvalError::Overflow(op.symbol().to_string());
    match op {
        BinOp::Add => {
            let (a, b) = ints()?;
            a.checked_add(b).map(Value::Int).ok_or_else(overflow)
        }
        BinOp::Sub => {
            let (a, b) = ints()?;
            a.checked_sub(b).map(Value::Int).ok_or_else(overflow)
        }
        BinOp::Mul => {
            let (a, b) = ints()?;
            a.checked_mul(b).map(Value::Int).ok_or_else(overflow)
        }
        BinOp::Lt => {
            let (a, b) = ints()?;
            Ok(Value::Bool(a < b))
        }
        BinOp::Le => {
            let (a, b) = ints()?;
            Ok(Value::Bool(a <= b))
        }
        BinOp::Eq | BinOp::Ne => {
            let same = match (l, r) {
                (Value::Int(_), Value::Int(_)) | (Value::Bool(_), Value::Bool(_)) => l == r,
                _ => return Err(EvalError::TypeMismatch(format!("`{}` on mixed operands", op.symbol()))),
            };
            Ok(Value::Bool(if op == BinOp::Eq { same } else { !same }))
        }
    }
}
