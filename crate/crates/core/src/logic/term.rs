//! Hash-consed terms over integer and boolean variables.
//!
//! Every [`Term`] is interned in a process-wide table, so two terms are
//! syntactically equal exactly when they point to the same node. Construction
//! goes through [`Term::app`], which checks sorts and applies the small set of
//! canonicalizing rewrites (flattening of `and`/`or`, unit/absorbing literals,
//! folding of literal-only subterms). Nothing else is simplified.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, LazyLock, Mutex};

use serde::{Deserialize, Serialize};

use super::LogicError;

/// Sort of a term or variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Int,
    Bool,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("Int"),
            Sort::Bool => f.write_str("Bool"),
        }
    }
}

/// Operators of the term language.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    Add,
    Sub,
    Neg,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Distinct,
    And,
    Or,
    Not,
    Implies,
    Ite,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub | Op::Neg => "-",
            Op::Mul => "*",
            Op::Div => "div",
            Op::Mod => "mod",
            Op::Lt => "<",
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Ge => ">=",
            Op::Eq => "=",
            Op::Distinct => "distinct",
            Op::And => "and",
            Op::Or => "or",
            Op::Not => "not",
            Op::Implies => "=>",
            Op::Ite => "ite",
        }
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Var(Arc<str>),
    Int(i64),
    Bool(bool),
    App(Op, Box<[Term]>),
}

#[derive(Debug)]
pub struct Node {
    id: u64,
    sort: Sort,
    kind: Kind,
}

/// An interned, immutable term. Cloning is cheap; equality is identity.
#[derive(Clone)]
pub struct Term(Arc<Node>);

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state);
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(PartialEq, Eq, Hash)]
struct Key {
    sort: Sort,
    kind: Kind,
}

struct Interner {
    table: HashMap<Key, Term>,
}

static INTERNER: LazyLock<Mutex<Interner>> = LazyLock::new(|| {
    Mutex::new(Interner {
        table: HashMap::new(),
    })
});
static NEXT_ID: AtomicU64 = AtomicU64::new(0);

fn intern(sort: Sort, kind: Kind) -> Term {
    let key = Key { sort, kind };
    let mut interner = INTERNER.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(t) = interner.table.get(&key) {
        return t.clone();
    }
    // The key is moved into the node; rebuild a lookup key that shares children.
    let Key { sort, kind } = key;
    let lookup = match &kind {
        Kind::Var(n) => Kind::Var(n.clone()),
        Kind::Int(v) => Kind::Int(*v),
        Kind::Bool(b) => Kind::Bool(*b),
        Kind::App(op, cs) => Kind::App(*op, cs.clone()),
    };
    let term = Term(Arc::new(Node {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        sort,
        kind,
    }));
    interner.table.insert(Key { sort, kind: lookup }, term.clone());
    term
}

impl Term {
    pub fn var(name: &str, sort: Sort) -> Term {
        intern(sort, Kind::Var(Arc::from(name)))
    }

    pub fn int(v: i64) -> Term {
        intern(Sort::Int, Kind::Int(v))
    }

    pub fn bool(b: bool) -> Term {
        intern(Sort::Bool, Kind::Bool(b))
    }

    pub fn tt() -> Term {
        Term::bool(true)
    }

    pub fn ff() -> Term {
        Term::bool(false)
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Process-unique node id. Only meaningful within one run.
    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn children(&self) -> &[Term] {
        match &self.0.kind {
            Kind::App(_, cs) => cs,
            _ => &[],
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.0.kind {
            Kind::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.0.kind {
            Kind::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match &self.0.kind {
            Kind::Var(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.as_bool() == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.as_bool() == Some(false)
    }

    fn is_literal(&self) -> bool {
        matches!(self.0.kind, Kind::Int(_) | Kind::Bool(_))
    }

    /// Builds an application, checking sorts and canonicalizing.
    pub fn app(op: Op, children: Vec<Term>) -> Result<Term, LogicError> {
        let sort = check_sorts(op, &children)?;
        Ok(canonical(op, sort, children))
    }

    /// Like [`Term::app`] for callers that construct well-sorted terms by
    /// design. Panics on a sort error.
    pub fn mk(op: Op, children: Vec<Term>) -> Term {
        match Term::app(op, children) {
            Ok(t) => t,
            Err(e) => panic!("ill-sorted term construction: {e}"),
        }
    }

    pub fn and(children: Vec<Term>) -> Term {
        Term::mk(Op::And, children)
    }

    pub fn or(children: Vec<Term>) -> Term {
        Term::mk(Op::Or, children)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(t: Term) -> Term {
        Term::mk(Op::Not, vec![t])
    }

    pub fn implies(a: Term, b: Term) -> Term {
        Term::mk(Op::Implies, vec![a, b])
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::mk(Op::Eq, vec![a, b])
    }

    pub fn ite(c: Term, a: Term, b: Term) -> Term {
        Term::mk(Op::Ite, vec![c, a, b])
    }

    pub fn le(a: Term, b: Term) -> Term {
        Term::mk(Op::Le, vec![a, b])
    }

    pub fn lt(a: Term, b: Term) -> Term {
        Term::mk(Op::Lt, vec![a, b])
    }

    /// Number of distinct nodes in the DAG rooted at this term.
    pub fn dag_size(&self) -> usize {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if seen.insert(t.id()) {
                stack.extend(t.children().iter().cloned());
            }
        }
        seen.len()
    }

    /// Nodes of the DAG in post-order (children before parents), each once.
    pub fn post_order(&self) -> Vec<Term> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                out.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for c in t.children().iter().rev() {
                if !seen.contains(&c.id()) {
                    stack.push((c.clone(), false));
                }
            }
        }
        out
    }

    /// Free variables with their sorts.
    pub fn free_vars(&self) -> BTreeSet<(String, Sort)> {
        self.post_order()
            .into_iter()
            .filter_map(|t| t.as_var().map(|n| (n.to_string(), t.sort())))
            .collect()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.post_order().iter().any(|t| t.as_var() == Some(name))
    }

    /// Simultaneous substitution of variables by terms of the same sort.
    pub fn substitute(&self, sub: &BTreeMap<String, Term>) -> Result<Term, LogicError> {
        if sub.is_empty() {
            return Ok(self.clone());
        }
        let mut memo: HashMap<u64, Term> = HashMap::new();
        for node in self.post_order() {
            let replaced = match node.kind() {
                Kind::Var(name) => match sub.get(&**name) {
                    Some(r) if r.sort() != node.sort() => {
                        return Err(LogicError::Sort {
                            symbol: name.to_string(),
                            message: format!(
                                "substituted term has sort {} but the variable has sort {}",
                                r.sort(),
                                node.sort()
                            ),
                        })
                    }
                    Some(r) => r.clone(),
                    None => node.clone(),
                },
                Kind::Int(_) | Kind::Bool(_) => node.clone(),
                Kind::App(op, cs) => {
                    let new_children: Vec<Term> = cs.iter().map(|c| memo[&c.id()].clone()).collect();
                    if new_children.iter().zip(cs.iter()).all(|(a, b)| a == b) {
                        node.clone()
                    } else {
                        Term::app(*op, new_children)?
                    }
                }
            };
            memo.insert(node.id(), replaced);
        }
        Ok(memo.remove(&self.id()).expect("root visited"))
    }

    /// Renames variables; all renamed variables keep their sort.
    pub fn rename(&self, f: &dyn Fn(&str) -> Option<String>) -> Term {
        let sub: BTreeMap<String, Term> = self
            .free_vars()
            .into_iter()
            .filter_map(|(n, s)| f(&n).map(|m| (n, Term::var(&m, s))))
            .collect();
        self.substitute(&sub).expect("renaming preserves sorts")
    }
}

fn sort_err(op: Op, message: impl Into<String>) -> LogicError {
    LogicError::Sort {
        symbol: op.symbol().to_string(),
        message: message.into(),
    }
}

fn check_sorts(op: Op, cs: &[Term]) -> Result<Sort, LogicError> {
    let all = |s: Sort| cs.iter().all(|c| c.sort() == s);
    let arity = |lo: usize, hi: usize| -> Result<(), LogicError> {
        if cs.len() < lo || cs.len() > hi {
            Err(sort_err(op, format!("expects {lo}..={hi} arguments, got {}", cs.len())))
        } else {
            Ok(())
        }
    };
    match op {
        Op::Add | Op::Mul => {
            arity(1, usize::MAX)?;
            if !all(Sort::Int) {
                return Err(sort_err(op, "arithmetic on non-Int argument"));
            }
            Ok(Sort::Int)
        }
        Op::Sub => {
            arity(2, usize::MAX)?;
            if !all(Sort::Int) {
                return Err(sort_err(op, "arithmetic on non-Int argument"));
            }
            Ok(Sort::Int)
        }
        Op::Neg => {
            arity(1, 1)?;
            if !all(Sort::Int) {
                return Err(sort_err(op, "negation of non-Int argument"));
            }
            Ok(Sort::Int)
        }
        Op::Div | Op::Mod => {
            arity(2, 2)?;
            if !all(Sort::Int) {
                return Err(sort_err(op, "arithmetic on non-Int argument"));
            }
            Ok(Sort::Int)
        }
        Op::Lt | Op::Le | Op::Gt | Op::Ge => {
            arity(2, 2)?;
            if !all(Sort::Int) {
                return Err(sort_err(op, "comparison of non-Int argument"));
            }
            Ok(Sort::Bool)
        }
        Op::Eq | Op::Distinct => {
            arity(2, 2)?;
            if cs[0].sort() != cs[1].sort() {
                return Err(sort_err(op, "arguments of different sorts"));
            }
            Ok(Sort::Bool)
        }
        Op::And | Op::Or => {
            if !all(Sort::Bool) {
                return Err(sort_err(op, "connective applied to non-Bool argument"));
            }
            Ok(Sort::Bool)
        }
        Op::Not => {
            arity(1, 1)?;
            if !all(Sort::Bool) {
                return Err(sort_err(op, "connective applied to non-Bool argument"));
            }
            Ok(Sort::Bool)
        }
        Op::Implies => {
            arity(2, 2)?;
            if !all(Sort::Bool) {
                return Err(sort_err(op, "connective applied to non-Bool argument"));
            }
            Ok(Sort::Bool)
        }
        Op::Ite => {
            arity(3, 3)?;
            if cs[0].sort() != Sort::Bool {
                return Err(sort_err(op, "condition is not Bool"));
            }
            if cs[1].sort() != cs[2].sort() {
                return Err(sort_err(op, "branches of different sorts"));
            }
            Ok(cs[1].sort())
        }
    }
}

fn canonical(op: Op, sort: Sort, children: Vec<Term>) -> Term {
    match op {
        Op::And | Op::Or => {
            let unit = op == Op::And;
            let mut flat = Vec::with_capacity(children.len());
            for c in children {
                match c.kind() {
                    Kind::Bool(b) if *b == unit => {}
                    Kind::Bool(_) => return Term::bool(!unit),
                    Kind::App(o, cs) if *o == op => flat.extend(cs.iter().cloned()),
                    _ => flat.push(c),
                }
            }
            match flat.len() {
                0 => Term::bool(unit),
                1 => flat.pop().expect("one child"),
                _ => intern(sort, Kind::App(op, flat.into_boxed_slice())),
            }
        }
        _ => {
            if children.iter().all(Term::is_literal) {
                if let Some(v) = fold(op, &children) {
                    return v;
                }
            }
            intern(sort, Kind::App(op, children.into_boxed_slice()))
        }
    }
}

fn fold(op: Op, cs: &[Term]) -> Option<Term> {
    let ints: Option<Vec<i64>> = cs.iter().map(Term::as_int).collect();
    let bools: Option<Vec<bool>> = cs.iter().map(Term::as_bool).collect();
    match op {
        Op::Add => ints?.iter().try_fold(0i64, |a, b| a.checked_add(*b)).map(Term::int),
        Op::Mul => ints?.iter().try_fold(1i64, |a, b| a.checked_mul(*b)).map(Term::int),
        Op::Sub => {
            let v = ints?;
            v[1..].iter().try_fold(v[0], |a, b| a.checked_sub(*b)).map(Term::int)
        }
        Op::Neg => ints?[0].checked_neg().map(Term::int),
        Op::Div => {
            let v = ints?;
            (v[1] != 0).then(|| v[0].checked_div_euclid(v[1])).flatten().map(Term::int)
        }
        Op::Mod => {
            let v = ints?;
            (v[1] != 0).then(|| v[0].checked_rem_euclid(v[1])).flatten().map(Term::int)
        }
        Op::Lt | Op::Le | Op::Gt | Op::Ge => {
            let v = ints?;
            let r = match op {
                Op::Lt => v[0] < v[1],
                Op::Le => v[0] <= v[1],
                Op::Gt => v[0] > v[1],
                _ => v[0] >= v[1],
            };
            Some(Term::bool(r))
        }
        Op::Eq | Op::Distinct => {
            let same = cs[0] == cs[1];
            Some(Term::bool(if op == Op::Eq { same } else { !same }))
        }
        Op::Not => Some(Term::bool(!bools?[0])),
        Op::Implies => {
            let v = bools?;
            Some(Term::bool(!v[0] || v[1]))
        }
        Op::Ite => {
            let c = cs[0].as_bool()?;
            Some(if c { cs[1].clone() } else { cs[2].clone() })
        }
        Op::And | Op::Or => None,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Var(n) => f.write_str(n),
            Kind::Int(v) if *v < 0 => write!(f, "(- {})", v.unsigned_abs()),
            Kind::Int(v) => write!(f, "{v}"),
            Kind::Bool(b) => write!(f, "{b}"),
            Kind::App(op, cs) => {
                write!(f, "({}", op.symbol())?;
                for c in cs.iter() {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}
