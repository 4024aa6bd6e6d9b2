//! Probabilistic padding of high-guarded conditionals.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::lang::{BaseType, Command, Expr, Level, Program, Prob};
use crate::sectype::{type_expr, Location, TypeEnv, TypeError};

/// Variables a command may write.
pub fn global_effect(c: &Command) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    c.visit(&mut |c| {
        if let Command::Assign(x, _) = c {
            out.insert(x.clone());
        }
    });
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PadError {
    #[error("{location}: low slice writes {vars:?}")]
    NonEmptyLowSliceEffect { location: Location, vars: BTreeSet<String> },
    #[error("{location}: loop guard depends on high data")]
    HighGuardOnWhile { location: Location },
    #[error("{location}: low variable `{var}` assigned from high data")]
    LowAssignFromHigh { location: Location, var: String },
    #[error("{location}: `{var}` is undeclared or read-only")]
    BadTarget { location: Location, var: String },
    #[error("{location}: {error}")]
    Type { location: Location, error: TypeError },
}

#[derive(Debug, Clone)]
pub struct PadOptions {
    pub p: Prob,
    /// `p` is the probability of running the padded alternative (the
    /// case-study convention); when false, `p` selects the original code.
    pub p_is_pad_prob: bool,
}

impl PadOptions {
    pub fn new(p: Prob) -> PadOptions {
        PadOptions { p, p_is_pad_prob: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PadOutput {
    #[serde(serialize_with = "as_text")]
    pub transformed: Command,
    #[serde(serialize_with = "as_text")]
    pub low_slice: Command,
    pub applied_sites: Vec<Location>,
}

fn as_text<S: serde::Serializer>(c: &Command, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&crate::lang::render_command(c))
}

pub fn pad(gamma: &TypeEnv, c: &Command, opts: &PadOptions) -> Result<PadOutput, PadError> {
    let mut sites = Vec::new();
    let (transformed, low_slice) = Padder { gamma, opts }.run(c, &Location::default(), &mut sites)?;
    Ok(PadOutput {
        transformed,
        low_slice,
        applied_sites: sites,
    })
}

pub fn pad_program(prog: &Program, opts: &PadOptions) -> Result<(Program, PadOutput), PadError> {
    let out = pad(&TypeEnv::from_program(prog), &prog.body, opts)?;
    let padded = Program {
        decls: prog.decls.clone(),
        body: out.transformed.clone(),
    };
    Ok((padded, out))
}

struct Padder<'a> {
    gamma: &'a TypeEnv,
    opts: &'a PadOptions,
}

impl Padder<'_> {
    fn level(&self, e: &Expr, loc: &Location) -> Result<Level, PadError> {
        type_expr(self.gamma, e).map(|t| t.level).map_err(|error| PadError::Type {
            location: loc.clone(),
            error,
        })
    }

    fn guard(&self, e: &Expr, loc: &Location) -> Result<Level, PadError> {
        let t = type_expr(self.gamma, e).map_err(|error| PadError::Type {
            location: loc.clone(),
            error,
        })?;
        if t.base != BaseType::Bool {
            return Err(PadError::Type {
                location: loc.clone(),
                error: TypeError::BaseMismatch(format!("guard has type {t}, expected Bool")),
            });
        }
        Ok(t.level)
    }

    fn choose(&self, padded: Command, original: Command) -> Command {
        if self.opts.p_is_pad_prob {
            Command::choose(self.opts.p.clone(), padded, original)
        } else {
            Command::choose(self.opts.p.clone(), original, padded)
        }
    }

    fn run(&self, c: &Command, loc: &Location, sites: &mut Vec<Location>) -> Result<(Command, Command), PadError> {
        Ok(match c {
            Command::Assign(x, e) => {
                let var = self
                    .gamma
                    .get(x)
                    .filter(|v| v.array_len.is_none())
                    .ok_or_else(|| PadError::BadTarget {
                        location: loc.clone(),
                        var: x.clone(),
                    })?;
                let level = self.level(e, loc)?;
                match var.ty.level {
                    Level::High => (c.clone(), Command::skip_asn(x, e.clone())),
                    Level::Low if level == Level::Low => (c.clone(), c.clone()),
                    Level::Low => {
                        return Err(PadError::LowAssignFromHigh {
                            location: loc.clone(),
                            var: x.clone(),
                        })
                    }
                }
            }
            Command::SkipAsn(..) | Command::Skip => (c.clone(), c.clone()),
            Command::Seq(..) => {
                let mut ds = Vec::new();
                let mut ls = Vec::new();
                for (i, item) in c.seq_items().into_iter().enumerate() {
                    let (d, l) = self.run(item, &loc.child(i.to_string()), sites)?;
                    ds.push(d);
                    ls.push(l);
                }
                (Command::seq_all(ds), Command::seq_all(ls))
            }
            Command::Choose(p, a, b) => {
                let (da, la) = self.run(a, &loc.child("left"), sites)?;
                let (db, lb) = self.run(b, &loc.child("right"), sites)?;
                (Command::choose(p.clone(), da, db), Command::choose(p.clone(), la, lb))
            }
            Command::SkipIf(e, a) => {
                let (d, l) = self.run(a, &loc.child("body"), sites)?;
                (Command::skip_if(e.clone(), d), Command::skip_if(e.clone(), l))
            }
            Command::While(e, a) => {
                if self.guard(e, loc)? == Level::High {
                    return Err(PadError::HighGuardOnWhile { location: loc.clone() });
                }
                let (d, l) = self.run(a, &loc.child("body"), sites)?;
                (Command::while_do(e.clone(), d), Command::while_do(e.clone(), l))
            }
            Command::If(e, a, b) => {
                let level = self.guard(e, loc)?;
                let (d1, l1) = self.run(a, &loc.child("then"), sites)?;
                let (d2, l2) = self.run(b, &loc.child("else"), sites)?;
                match level {
                    Level::Low => (
                        Command::if_then_else(e.clone(), d1, d2),
                        Command::if_then_else(e.clone(), l1, l2),
                    ),
                    Level::High if l1 == l2 => (Command::if_then_else(e.clone(), d1, d2), Command::skip_if(e.clone(), l1)),
                    Level::High => {
                        for l in [&l1, &l2] {
                            let vars = global_effect(l);
                            if !vars.is_empty() {
                                return Err(PadError::NonEmptyLowSliceEffect {
                                    location: loc.clone(),
                                    vars,
                                });
                            }
                        }
                        sites.push(loc.clone());
                        let then_branch = self.choose(Command::seq(d1.clone(), l2.clone()), d1);
                        let else_branch = self.choose(Command::seq(l1.clone(), d2.clone()), d2);
                        (
                            Command::if_then_else(e.clone(), then_branch, else_branch),
                            Command::skip_if(e.clone(), Command::seq(l1, l2)),
                        )
                    }
                }
            }
        })
    }
}
