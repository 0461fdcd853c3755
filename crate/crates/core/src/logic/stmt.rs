//! Guarded simultaneous assignments with havoc, and Hoare-triple checks via
//! a relational encoding over unprimed and primed copies of the variables.

use std::collections::{BTreeMap, BTreeSet};

use super::{Decls, LogicError, Sort, Term, Valuation, Value};
use crate::solver::{Query, SatResult, Solver};

/// Suffix of the post-state copy of a variable in relational encodings.
pub const POST_SUFFIX: &str = "!post";
const HAVOC_SUFFIX: &str = "!havoc";

/// `assume guard; x1,..,xn := e1,..,en; havoc h1,..,hk`, executed atomically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub guard: Term,
    pub assigns: BTreeMap<String, Term>,
    pub havocs: BTreeSet<String>,
}

impl Default for Statement {
    fn default() -> Self {
        Statement::skip()
    }
}

impl Statement {
    pub fn skip() -> Statement {
        Statement {
            guard: Term::tt(),
            assigns: BTreeMap::new(),
            havocs: BTreeSet::new(),
        }
    }

    pub fn assume(guard: Term) -> Statement {
        Statement {
            guard,
            ..Statement::skip()
        }
    }

    pub fn assign(var: &str, rhs: Term) -> Statement {
        let mut s = Statement::skip();
        s.assigns.insert(var.to_string(), rhs);
        s
    }

    /// Checks sorts, declaredness and assign/havoc disjointness.
    pub fn check(&self, decls: &Decls) -> Result<(), LogicError> {
        if self.guard.sort() != Sort::Bool {
            return Err(LogicError::Statement("guard is not Bool".into()));
        }
        for (v, e) in &self.assigns {
            let sort = decls.get(v).ok_or_else(|| LogicError::Undeclared { name: v.clone(), pos: 0 })?;
            if e.sort() != *sort {
                return Err(LogicError::Sort {
                    symbol: v.clone(),
                    message: format!("assigned a {} expression", e.sort()),
                });
            }
            if self.havocs.contains(v) {
                return Err(LogicError::Statement(format!("`{v}` is both assigned and havoced")));
            }
        }
        for h in &self.havocs {
            if !decls.contains_key(h) {
                return Err(LogicError::Undeclared { name: h.clone(), pos: 0 });
            }
        }
        for t in std::iter::once(&self.guard).chain(self.assigns.values()) {
            for (n, s) in t.free_vars() {
                if decls.get(&n) != Some(&s) {
                    return Err(LogicError::Undeclared { name: n, pos: 0 });
                }
            }
        }
        Ok(())
    }

    /// Variables read or written.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.guard.free_vars().into_iter().map(|v| v.0).collect();
        for (v, e) in &self.assigns {
            out.insert(v.clone());
            out.extend(e.free_vars().into_iter().map(|v| v.0));
        }
        out.extend(self.havocs.iter().cloned());
        out
    }

    /// The transition relation between `pre(v)` and `post(v)` copies of
    /// every declared variable: guard, assignments, frame equalities. Havoced
    /// variables are unconstrained in the post-state.
    pub fn relation(&self, decls: &Decls, pre: &dyn Fn(&str) -> String, post: &dyn Fn(&str) -> String) -> Term {
        let to_pre: BTreeMap<String, Term> = decls.iter().map(|(n, s)| (n.clone(), Term::var(&pre(n), *s))).collect();
        let mut parts = vec![self.guard.substitute(&to_pre).expect("sort-preserving renaming")];
        for (n, s) in decls {
            if self.havocs.contains(n) {
                continue;
            }
            let rhs = match self.assigns.get(n) {
                Some(e) => e.substitute(&to_pre).expect("sort-preserving renaming"),
                None => to_pre[n].clone(),
            };
            parts.push(Term::eq(Term::var(&post(n), *s), rhs));
        }
        Term::and(parts)
    }

    /// Concrete execution. `None` when the guard blocks; havoced variables
    /// take values from `havoc`.
    pub fn execute(&self, pre: &Valuation, havoc: &dyn Fn(&str) -> Value) -> Result<Option<Valuation>, LogicError> {
        if !super::eval_bool(&self.guard, pre)? {
            return Ok(None);
        }
        let mut post = pre.clone();
        for (v, e) in &self.assigns {
            post.insert(v.clone(), super::eval(e, pre)?);
        }
        for h in &self.havocs {
            post.insert(h.clone(), havoc(h));
        }
        Ok(Some(post))
    }
}

/// Weakest precondition `guard => post[assigns, havocs := fresh]`. Havoced
/// variables become `<name>!havoc` symbols that must be read as universally
/// quantified; [`check_hoare`] avoids them by using the relational encoding.
pub fn wp(st: &Statement, post: &Term, decls: &Decls) -> Term {
    let mut sub: BTreeMap<String, Term> = st.assigns.clone();
    for h in &st.havocs {
        if let Some(s) = decls.get(h) {
            sub.insert(h.clone(), Term::var(&format!("{h}{HAVOC_SUFFIX}"), *s));
        }
    }
    let body = post.substitute(&sub).expect("statement checked against decls");
    if st.guard.is_true() {
        body
    } else {
        Term::implies(st.guard.clone(), body)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HoareResult {
    Holds,
    Fails { pre: Valuation, post: Valuation },
    Unknown(String),
}

/// Decides `{pre} st {post}` by asking whether
/// `pre(V) ∧ step(V,V') ∧ ¬post(V')` is satisfiable.
pub fn check_hoare(pre: &Term, st: &Statement, post: &Term, decls: &Decls, solver: &mut dyn Solver) -> HoareResult {
    if pre.is_false() || post.is_true() || st.guard.is_false() {
        return HoareResult::Holds;
    }
    let primed = |n: &str| format!("{n}{POST_SUFFIX}");
    let post_sub: BTreeMap<String, Term> = decls.iter().map(|(n, s)| (n.clone(), Term::var(&primed(n), *s))).collect();
    let step = st.relation(decls, &|n| n.to_string(), &primed);
    let negated = Term::not(post.substitute(&post_sub).expect("sort-preserving renaming"));
    let mut q = Query::from_assertions(vec![pre.clone(), step, negated]);
    // Variables absent from the formulas still belong to the valuation pair.
    for (n, s) in decls {
        for name in [n.clone(), primed(n)] {
            if !q.decls.iter().any(|(m, _)| *m == name) {
                q.decls.push((name, *s));
            }
        }
    }
    q.decls.sort();
    match solver.check(&q) {
        SatResult::Unsat => HoareResult::Holds,
        SatResult::Unknown(r) => HoareResult::Unknown(r),
        SatResult::Sat(model) => {
            let mut pre_v = Valuation::new();
            let mut post_v = Valuation::new();
            for (k, v) in model {
                match k.strip_suffix(POST_SUFFIX) {
                    Some(base) => post_v.insert(base.to_string(), v),
                    None => pre_v.insert(k, v),
                };
            }
            HoareResult::Fails { pre: pre_v, post: post_v }
        }
    }
}
