//! Concrete evaluation. Integer division and modulo are Euclidean, matching
//! SMT-LIB `div`/`mod`; arithmetic overflow is an error rather than wrapping.

use std::collections::HashMap;

use super::{Kind, LogicError, Op, Term, Valuation, Value};

fn arith(op: Op, a: i64, b: i64) -> Result<i64, LogicError> {
    let r = match op {
        Op::Add => a.checked_add(b),
        Op::Sub => a.checked_sub(b),
        Op::Mul => a.checked_mul(b),
        Op::Div | Op::Mod if b == 0 => return Err(LogicError::DivByZero),
        Op::Div => a.checked_div_euclid(b),
        Op::Mod => a.checked_rem_euclid(b),
        _ => unreachable!("not a binary arithmetic operator"),
    };
    r.ok_or(LogicError::Overflow)
}

fn apply(op: Op, args: &[i64]) -> Result<i64, LogicError> {
    let b = |x: bool| x as i64;
    Ok(match op {
        Op::Add | Op::Mul | Op::Sub => {
            let mut acc = args[0];
            for &v in &args[1..] {
                acc = arith(op, acc, v)?;
            }
            acc
        }
        Op::Neg => args[0].checked_neg().ok_or(LogicError::Overflow)?,
        Op::Div | Op::Mod => arith(op, args[0], args[1])?,
        Op::Lt => b(args[0] < args[1]),
        Op::Le => b(args[0] <= args[1]),
        Op::Gt => b(args[0] > args[1]),
        Op::Ge => b(args[0] >= args[1]),
        Op::Eq => b(args[0] == args[1]),
        Op::Distinct => b(args[0] != args[1]),
        Op::And => b(args.iter().all(|&v| v != 0)),
        Op::Or => b(args.iter().any(|&v| v != 0)),
        Op::Not => b(args[0] == 0),
        Op::Implies => b(args[0] == 0 || args[1] != 0),
        Op::Ite => {
            if args[0] != 0 {
                args[1]
            } else {
                args[2]
            }
        }
    })
}

fn partial_apply(op: Op, args: &[Option<i64>]) -> Option<i64> {
    match op {
        Op::And if args.contains(&Some(0)) => Some(0),
        Op::Or if args.iter().any(|a| matches!(a, Some(v) if *v != 0)) => Some(1),
        Op::Implies if args[0] == Some(0) || matches!(args[1], Some(v) if v != 0) => Some(1),
        Op::Ite => match args[0] {
            Some(c) => args[if c != 0 { 1 } else { 2 }],
            None if args[1] == args[2] => args[1],
            None => None,
        },
        _ => {
            let known: Option<Vec<i64>> = args.iter().copied().collect();
            known.and_then(|k| apply(op, &k).ok())
        }
    }
}

fn encode(v: Value) -> i64 {
    match v {
        Value::Int(i) => i,
        Value::Bool(b) => b as i64,
    }
}

fn decode(t: &Term, v: i64) -> Value {
    match t.sort() {
        super::Sort::Int => Value::Int(v),
        super::Sort::Bool => Value::Bool(v != 0),
    }
}

/// Evaluates `t` under `val`. All subterms are evaluated (no short-circuit),
/// so a division by zero anywhere in the term is reported.
pub fn eval(t: &Term, val: &Valuation) -> Result<Value, LogicError> {
    let mut memo: HashMap<u64, i64> = HashMap::new();
    let mut buf = Vec::new();
    for node in t.post_order() {
        let v = match node.kind() {
            Kind::Var(n) => {
                let v = val.get(&**n).ok_or_else(|| LogicError::Unbound(n.to_string()))?;
                if v.sort() != node.sort() {
                    return Err(LogicError::Sort {
                        symbol: n.to_string(),
                        message: format!("valuation assigns a {} value", v.sort()),
                    });
                }
                encode(*v)
            }
            Kind::Int(i) => *i,
            Kind::Bool(b) => *b as i64,
            Kind::App(op, cs) => {
                buf.clear();
                buf.extend(cs.iter().map(|c| memo[&c.id()]));
                apply(*op, &buf)?
            }
        };
        memo.insert(node.id(), v);
    }
    Ok(decode(t, memo[&t.id()]))
}

pub fn eval_bool(t: &Term, val: &Valuation) -> Result<bool, LogicError> {
    match eval(t, val)? {
        Value::Bool(b) => Ok(b),
        Value::Int(_) => Err(LogicError::Sort {
            symbol: t.to_string(),
            message: "expected a Bool term".into(),
        }),
    }
}

#[derive(Clone, Debug)]
enum Instr {
    Slot(usize),
    Const(i64),
    App(Op, Vec<usize>),
}

/// A term compiled against a fixed variable order, for tight enumeration
/// loops. Values are passed as `i64` (booleans as 0/1).
#[derive(Clone, Debug)]
pub struct Compiled {
    code: Vec<Instr>,
}

impl Compiled {
    /// `vars[i]` is the name bound to slot `i`. Fails on free variables not
    /// listed.
    pub fn new(t: &Term, vars: &[String]) -> Result<Compiled, LogicError> {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut code = Vec::new();
        for node in t.post_order() {
            let instr = match node.kind() {
                Kind::Var(n) => {
                    let slot = vars
                        .iter()
                        .position(|v| **v == **n)
                        .ok_or_else(|| LogicError::Unbound(n.to_string()))?;
                    Instr::Slot(slot)
                }
                Kind::Int(i) => Instr::Const(*i),
                Kind::Bool(b) => Instr::Const(*b as i64),
                Kind::App(op, cs) => Instr::App(*op, cs.iter().map(|c| index[&c.id()]).collect()),
            };
            index.insert(node.id(), code.len());
            code.push(instr);
        }
        Ok(Compiled { code })
    }

    pub fn run(&self, slots: &[i64], scratch: &mut Vec<i64>) -> Result<i64, LogicError> {
        scratch.clear();
        let mut args = Vec::with_capacity(4);
        for instr in &self.code {
            let v = match instr {
                Instr::Slot(i) => slots[*i],
                Instr::Const(c) => *c,
                Instr::App(op, ix) => {
                    args.clear();
                    args.extend(ix.iter().map(|&i| scratch[i]));
                    apply(*op, &args)?
                }
            };
            scratch.push(v);
        }
        Ok(*scratch.last().expect("nonempty code"))
    }

    /// True when the code is a single constant.
    pub fn as_const(&self) -> Option<i64> {
        match self.code.as_slice() {
            [Instr::Const(c)] => Some(*c),
            _ => None,
        }
    }

    /// Residual code for the slots that are `Some`: known nodes fold to
    /// constants, `and`/`or` drop decided arguments, decided `ite`s
    /// collapse to a branch. Agrees with [`Compiled::run`] on every
    /// completion of the `None` slots where `run` succeeds.
    pub fn specialize(&self, slots: &[Option<i64>]) -> Compiled {
        let n = self.code.len();
        let mut known: Vec<Option<i64>> = Vec::with_capacity(n);
        // Remaining old-code arguments of undecided nodes; one argument
        // under `and`/`or`/`ite` means the node is that argument.
        let mut rest: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut alias: Vec<bool> = vec![false; n];
        let mut scratch = Vec::new();
        for (i, instr) in self.code.iter().enumerate() {
            let v = match instr {
                Instr::Slot(s) => slots[*s],
                Instr::Const(c) => Some(*c),
                Instr::App(op, ix) => {
                    scratch.clear();
                    scratch.extend(ix.iter().map(|&j| known[j]));
                    let v = partial_apply(*op, &scratch);
                    if v.is_none() {
                        rest[i] = match op {
                            Op::And | Op::Or => ix.iter().copied().filter(|j| known[*j].is_none()).collect(),
                            Op::Ite => match known[ix[0]] {
                                Some(c) => vec![ix[if c != 0 { 1 } else { 2 }]],
                                None => ix.clone(),
                            },
                            _ => ix.clone(),
                        };
                        alias[i] = matches!(op, Op::And | Op::Or | Op::Ite) && rest[i].len() == 1;
                    }
                    v
                }
            };
            known.push(v);
        }
        if let Some(c) = known[n - 1] {
            return Compiled { code: vec![Instr::Const(c)] };
        }
        let mut needed = vec![false; n];
        let mut stack = vec![n - 1];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut needed[i], true) {
                continue;
            }
            if known[i].is_none() {
                stack.extend(rest[i].iter().copied());
            }
        }
        let mut new_ix = vec![usize::MAX; n];
        let mut code = Vec::new();
        for i in 0..n {
            if !needed[i] {
                continue;
            }
            if alias[i] {
                new_ix[i] = new_ix[rest[i][0]];
                continue;
            }
            let instr = match (known[i], &self.code[i]) {
                (Some(c), _) => Instr::Const(c),
                (None, Instr::Slot(s)) => Instr::Slot(*s),
                (None, Instr::App(op, _)) => Instr::App(*op, rest[i].iter().map(|j| new_ix[*j]).collect()),
                (None, Instr::Const(_)) => unreachable!("constants are known"),
            };
            new_ix[i] = code.len();
            code.push(instr);
        }
        // The root may be an alias of an earlier node.
        let root = new_ix[n - 1];
        if root + 1 != code.len() {
            code.truncate(root + 1);
        }
        Compiled { code }
    }

    /// Three-valued run: `None` slots are unknown. Returns a value only when
    /// every completion of the unknown slots yields it (errors count as
    /// unknown).
    pub fn run_partial(&self, slots: &[Option<i64>], scratch: &mut Vec<Option<i64>>) -> Option<i64> {
        scratch.clear();
        let mut args = Vec::with_capacity(4);
        for instr in &self.code {
            let v = match instr {
                Instr::Slot(i) => slots[*i],
                Instr::Const(c) => Some(*c),
                Instr::App(op, ix) => {
                    args.clear();
                    args.extend(ix.iter().map(|&i| scratch[i]));
                    partial_apply(*op, &args)
                }
            };
            scratch.push(v);
        }
        *scratch.last().expect("nonempty code")
    }
}
