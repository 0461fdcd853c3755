//! Petri programs: places, transitions labeled with statements, one-safe
//! markings, explicit reachability and the co-related/co-marked relations.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{self, parse_formula, parse_term, Decls, LogicError, Sort, Statement, Term};
use crate::solver::{Query, SatResult, Solver};

/// Upper bound on explored markings; exceeding it aborts exploration.
pub const DEFAULT_MARKING_LIMIT: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlaceId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransId(pub usize);

#[derive(Debug, Error)]
pub enum PetriError {
    #[error("invalid program JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("duplicate identifier `{0}`")]
    Duplicate(String),
    #[error("unknown place `{place}` referenced by {context}")]
    UnknownPlace { place: String, context: String },
    #[error("invalid identifier `{0}` (must be a simple symbol without `!`)")]
    BadName(String),
    #[error("transition `{transition}`: {source}")]
    Statement {
        transition: String,
        #[source]
        source: LogicError,
    },
    #[error("transition `{transition}` is not enabled in marking {marking}")]
    NotEnabled { transition: String, marking: String },
    #[error("one-safety violated at place `{place}` after firing sequence [{}]", sequence.join(", "))]
    NotOneSafe { place: String, sequence: Vec<String> },
    #[error("reachability exploration exceeded {0} markings")]
    TooManyMarkings(usize),
}

/// Set of marked places, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking(Vec<PlaceId>);

impl Marking {
    pub fn new(mut places: Vec<PlaceId>) -> Marking {
        places.sort();
        places.dedup();
        Marking(places)
    }

    pub fn places(&self) -> &[PlaceId] {
        &self.0
    }

    pub fn contains(&self, p: PlaceId) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn contains_all(&self, ps: &[PlaceId]) -> bool {
        ps.iter().all(|p| self.contains(*p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub name: String,
    /// Sorted, deduplicated.
    pub pre: Vec<PlaceId>,
    /// Sorted, deduplicated.
    pub succ: Vec<PlaceId>,
    pub stmt: Statement,
}

#[derive(Clone, Debug)]
pub struct PetriProgram {
    pub decls: Decls,
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: Marking,
    pub errors: BTreeSet<PlaceId>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct VarJson {
    pub name: String,
    pub sort: Sort,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct TransitionJson {
    pub id: String,
    pub pre: Vec<String>,
    pub succ: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assume: Option<String>,
    #[serde(default)]
    pub assign: BTreeMap<String, String>,
    #[serde(default)]
    pub havoc: Vec<String>,
}

/// On-disk program format.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ProgramJson {
    pub variables: Vec<VarJson>,
    pub places: Vec<String>,
    #[serde(default)]
    pub error_places: Vec<String>,
    pub initial_marking: Vec<String>,
    pub transitions: Vec<TransitionJson>,
}

impl PetriProgram {
    pub fn from_json(text: &str) -> Result<PetriProgram, PetriError> {
        let raw: ProgramJson = serde_json::from_str(text)?;
        PetriProgram::from_raw(&raw)
    }

    pub fn from_raw(raw: &ProgramJson) -> Result<PetriProgram, PetriError> {
        let mut decls = Decls::new();
        for v in &raw.variables {
            if !logic::is_valid_name(&v.name) {
                return Err(PetriError::BadName(v.name.clone()));
            }
            if decls.insert(v.name.clone(), v.sort).is_some() {
                return Err(PetriError::Duplicate(v.name.clone()));
            }
        }
        let mut place_ix: HashMap<&str, PlaceId> = HashMap::new();
        for (i, p) in raw.places.iter().enumerate() {
            if !logic::is_valid_name(p) {
                return Err(PetriError::BadName(p.clone()));
            }
            if place_ix.insert(p, PlaceId(i)).is_some() {
                return Err(PetriError::Duplicate(p.clone()));
            }
        }
        let lookup = |names: &[String], context: &str| -> Result<Vec<PlaceId>, PetriError> {
            let mut out = Vec::new();
            for n in names {
                out.push(*place_ix.get(n.as_str()).ok_or_else(|| PetriError::UnknownPlace {
                    place: n.clone(),
                    context: context.to_string(),
                })?);
            }
            out.sort();
            out.dedup();
            Ok(out)
        };
        let mut seen_t = BTreeSet::new();
        let mut transitions = Vec::new();
        for t in &raw.transitions {
            if !logic::is_valid_name(&t.id) {
                return Err(PetriError::BadName(t.id.clone()));
            }
            if place_ix.contains_key(t.id.as_str()) || !seen_t.insert(t.id.clone()) {
                return Err(PetriError::Duplicate(t.id.clone()));
            }
            let ctx = format!("transition `{}`", t.id);
            let wrap = |source| PetriError::Statement {
                transition: t.id.clone(),
                source,
            };
            let guard = match &t.assume {
                Some(g) => parse_formula(g, &decls).map_err(wrap)?,
                None => Term::tt(),
            };
            let mut assigns = BTreeMap::new();
            for (v, e) in &t.assign {
                let rhs = parse_term(e, &decls).map_err(wrap)?;
                assigns.insert(v.clone(), rhs);
            }
            let stmt = Statement {
                guard,
                assigns,
                havocs: t.havoc.iter().cloned().collect(),
            };
            stmt.check(&decls).map_err(wrap)?;
            transitions.push(Transition {
                name: t.id.clone(),
                pre: lookup(&t.pre, &ctx)?,
                succ: lookup(&t.succ, &ctx)?,
                stmt,
            });
        }
        Ok(PetriProgram {
            decls,
            places: raw.places.clone(),
            transitions,
            initial: Marking::new(lookup(&raw.initial_marking, "initial_marking")?),
            errors: lookup(&raw.error_places, "error_places")?.into_iter().collect(),
        })
    }

    pub fn to_raw(&self) -> ProgramJson {
        let names = |ps: &[PlaceId]| ps.iter().map(|p| self.places[p.0].clone()).collect();
        ProgramJson {
            variables: self
                .decls
                .iter()
                .map(|(n, s)| VarJson { name: n.clone(), sort: *s })
                .collect(),
            places: self.places.clone(),
            error_places: self.errors.iter().map(|p| self.places[p.0].clone()).collect(),
            initial_marking: names(self.initial.places()),
            transitions: self
                .transitions
                .iter()
                .map(|t| TransitionJson {
                    id: t.name.clone(),
                    pre: names(&t.pre),
                    succ: names(&t.succ),
                    assume: (!t.stmt.guard.is_true()).then(|| t.stmt.guard.to_string()),
                    assign: t.stmt.assigns.iter().map(|(v, e)| (v.clone(), e.to_string())).collect(),
                    havoc: t.stmt.havocs.iter().cloned().collect(),
                })
                .collect(),
        }
    }

    pub fn place(&self, name: &str) -> Option<PlaceId> {
        self.places.iter().position(|p| p == name).map(PlaceId)
    }

    pub fn transition(&self, name: &str) -> Option<TransId> {
        self.transitions.iter().position(|t| t.name == name).map(TransId)
    }

    pub fn trans(&self, t: TransId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn place_name(&self, p: PlaceId) -> &str {
        &self.places[p.0]
    }

    pub fn place_ids(&self) -> impl Iterator<Item = PlaceId> {
        (0..self.places.len()).map(PlaceId)
    }

    pub fn trans_ids(&self) -> impl Iterator<Item = TransId> {
        (0..self.transitions.len()).map(TransId)
    }

    pub fn is_error_marked(&self, m: &Marking) -> bool {
        m.places().iter().any(|p| self.errors.contains(p))
    }

    pub fn marking_names(&self, m: &Marking) -> Vec<String> {
        m.places().iter().map(|p| self.places[p.0].clone()).collect()
    }

    pub fn show_marking(&self, m: &Marking) -> String {
        format!("{{{}}}", self.marking_names(m).join(","))
    }

    /// A marking from place names; `None` if a name is unknown.
    pub fn marking(&self, names: &[&str]) -> Option<Marking> {
        names.iter().map(|n| self.place(n)).collect::<Option<Vec<_>>>().map(Marking::new)
    }

    pub fn enabled(&self, m: &Marking, t: TransId) -> bool {
        m.contains_all(&self.trans(t).pre)
    }

    /// `(m \ pre(t)) ∪ succ(t)`.
    pub fn fire(&self, m: &Marking, t: TransId) -> Result<Marking, PetriError> {
        let tr = self.trans(t);
        if !self.enabled(m, t) {
            return Err(PetriError::NotEnabled {
                transition: tr.name.clone(),
                marking: self.show_marking(m),
            });
        }
        let mut out: Vec<PlaceId> = m.places().iter().copied().filter(|p| !tr.pre.contains(p)).collect();
        out.extend(tr.succ.iter().copied());
        Ok(Marking::new(out))
    }

    /// A place that would hold two tokens after firing `t` in `m`.
    fn double_token(&self, m: &Marking, t: TransId) -> Option<PlaceId> {
        let tr = self.trans(t);
        tr.succ.iter().copied().find(|p| m.contains(*p) && !tr.pre.contains(p))
    }
}

impl fmt::Display for PetriProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} places, {} transitions, {} variables",
            self.places.len(),
            self.transitions.len(),
            self.decls.len()
        )
    }
}

/// The explicit marking graph.
#[derive(Clone, Debug)]
pub struct ReachGraph {
    /// In breadth-first discovery order; index 0 is the initial marking.
    pub markings: Vec<Marking>,
    pub index: HashMap<Marking, usize>,
    /// `(from, transition, to)`, in discovery order.
    pub edges: Vec<(usize, TransId, usize)>,
    parent: Vec<Option<(usize, TransId)>>,
}

impl ReachGraph {
    pub fn len(&self) -> usize {
        self.markings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markings.is_empty()
    }

    pub fn contains(&self, m: &Marking) -> bool {
        self.index.contains_key(m)
    }

    /// Transition names of a shortest firing sequence reaching marking `i`.
    pub fn path_to(&self, p: &PetriProgram, mut i: usize) -> Vec<String> {
        let mut seq = Vec::new();
        while let Some((prev, t)) = self.parent[i] {
            seq.push(p.trans(t).name.clone());
            i = prev;
        }
        seq.reverse();
        seq
    }
}

/// Breadth-first exploration in place/transition declaration order.
pub fn explore(p: &PetriProgram, limit: usize) -> Result<ReachGraph, PetriError> {
    let mut g = ReachGraph {
        markings: vec![p.initial.clone()],
        index: HashMap::from([(p.initial.clone(), 0)]),
        edges: Vec::new(),
        parent: vec![None],
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let m = g.markings[i].clone();
        for t in p.trans_ids() {
            if !p.enabled(&m, t) {
                continue;
            }
            if let Some(place) = p.double_token(&m, t) {
                let mut sequence = g.path_to(p, i);
                sequence.push(p.trans(t).name.clone());
                return Err(PetriError::NotOneSafe {
                    place: p.place_name(place).to_string(),
                    sequence,
                });
            }
            let m2 = p.fire(&m, t).expect("enabled");
            let j = match g.index.get(&m2) {
                Some(j) => *j,
                None => {
                    if g.markings.len() >= limit {
                        return Err(PetriError::TooManyMarkings(limit));
                    }
                    let j = g.markings.len();
                    g.index.insert(m2.clone(), j);
                    g.markings.push(m2);
                    g.parent.push(Some((i, t)));
                    queue.push_back(j);
                    j
                }
            };
            g.edges.push((i, t, j));
        }
    }
    Ok(g)
}

pub fn reachable_markings(p: &PetriProgram) -> Result<Vec<Marking>, PetriError> {
    explore(p, DEFAULT_MARKING_LIMIT).map(|g| g.markings)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    NotOneSafe { place: String, sequence: Vec<String> },
    NeverEnabled { transition: String },
    UndeclaredVariable { transition: String, variable: String },
    IllFormedStatement { transition: String, message: String },
    EmptyPre { transition: String },
    EmptySucc { transition: String },
    ErrorPlaceInitial { place: String },
    ExplorationLimit { limit: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NotOneSafe { place, sequence } => {
                write!(f, "not one-safe: place {place} receives a second token after [{}]", sequence.join(", "))
            }
            Diagnostic::NeverEnabled { transition } => write!(f, "transition {transition} is never enabled"),
            Diagnostic::UndeclaredVariable { transition, variable } => {
                write!(f, "transition {transition} uses undeclared variable {variable}")
            }
            Diagnostic::IllFormedStatement { transition, message } => write!(f, "transition {transition}: {message}"),
            Diagnostic::EmptyPre { transition } => write!(f, "transition {transition} has no pre-places"),
            Diagnostic::EmptySucc { transition } => write!(f, "transition {transition} has no successor places"),
            Diagnostic::ErrorPlaceInitial { place } => write!(f, "error place {place} is initially marked"),
            Diagnostic::ExplorationLimit { limit } => write!(f, "exploration stopped after {limit} markings"),
        }
    }
}

/// Reports every structural or behavioural problem found; empty means valid.
pub fn validate_program(p: &PetriProgram) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for t in &p.transitions {
        if t.pre.is_empty() {
            out.push(Diagnostic::EmptyPre { transition: t.name.clone() });
        }
        if t.succ.is_empty() {
            out.push(Diagnostic::EmptySucc { transition: t.name.clone() });
        }
        match t.stmt.check(&p.decls) {
            Ok(()) => {}
            Err(LogicError::Undeclared { name, .. }) => out.push(Diagnostic::UndeclaredVariable {
                transition: t.name.clone(),
                variable: name,
            }),
            Err(e) => out.push(Diagnostic::IllFormedStatement {
                transition: t.name.clone(),
                message: e.to_string(),
            }),
        }
    }
    for p_ in p.initial.places() {
        if p.errors.contains(p_) {
            out.push(Diagnostic::ErrorPlaceInitial {
                place: p.place_name(*p_).to_string(),
            });
        }
    }
    // Transitions with an empty preset are enabled everywhere and break one-safety
    // trivially; exploration is only meaningful without them.
    if p.transitions.iter().any(|t| t.pre.is_empty()) {
        return out;
    }
    match explore(p, DEFAULT_MARKING_LIMIT) {
        Ok(g) => {
            let mut fired = vec![false; p.transitions.len()];
            for (_, t, _) in &g.edges {
                fired[t.0] = true;
            }
            for t in p.trans_ids() {
                if !fired[t.0] {
                    out.push(Diagnostic::NeverEnabled {
                        transition: p.trans(t).name.clone(),
                    });
                }
            }
        }
        Err(PetriError::NotOneSafe { place, sequence }) => out.push(Diagnostic::NotOneSafe { place, sequence }),
        Err(PetriError::TooManyMarkings(limit)) => out.push(Diagnostic::ExplorationLimit { limit }),
        Err(e) => unreachable!("exploration only fails on safety or limits: {e}"),
    }
    out
}

/// Square relation over places.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoRelation {
    n: usize,
    bits: Vec<bool>,
}

impl CoRelation {
    pub fn get(&self, a: PlaceId, b: PlaceId) -> bool {
        self.bits[a.0 * self.n + b.0]
    }

    pub fn pairs(&self) -> Vec<(PlaceId, PlaceId)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in a + 1..self.n {
                if self.bits[a * self.n + b] {
                    out.push((PlaceId(a), PlaceId(b)));
                }
            }
        }
        out
    }
}

/// Distinct places jointly covered by some reachable marking.
pub fn co_related(p: &PetriProgram, g: &ReachGraph) -> CoRelation {
    let n = p.places.len();
    let mut bits = vec![false; n * n];
    for m in &g.markings {
        for &a in m.places() {
            for &b in m.places() {
                if a != b {
                    bits[a.0 * n + b.0] = true;
                }
            }
        }
    }
    CoRelation { n, bits }
}

/// Place × transition relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoMarked {
    transitions: usize,
    bits: Vec<bool>,
}

impl CoMarked {
    pub fn get(&self, p: PlaceId, t: TransId) -> bool {
        self.bits[p.0 * self.transitions + t.0]
    }

    /// Pairs in (place, transition) order.
    pub fn pairs(&self) -> Vec<(PlaceId, TransId)> {
        let places = self.bits.len().checked_div(self.transitions).unwrap_or(0);
        let mut out = Vec::new();
        for p in 0..places {
            for t in 0..self.transitions {
                if self.bits[p * self.transitions + t] {
                    out.push((PlaceId(p), TransId(t)));
                }
            }
        }
        out
    }
}

/// `(p, t)` with `p ∉ pre(t)` and some reachable marking containing `p`
/// that enables `t`.
pub fn co_marked(p: &PetriProgram, g: &ReachGraph) -> CoMarked {
    let nt = p.transitions.len();
    let mut bits = vec![false; p.places.len() * nt];
    for m in &g.markings {
        for t in p.trans_ids() {
            if !p.enabled(m, t) {
                continue;
            }
            for &q in m.places() {
                if !p.trans(t).pre.contains(&q) {
                    bits[q.0 * nt + t.0] = true;
                }
            }
        }
    }
    CoMarked { transitions: nt, bits }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    NoFeasibleErrorTrace,
    FeasibleErrorTrace(Vec<String>),
    Unknown(String),
}

fn step_name(v: &str, k: usize) -> String {
    format!("{v}!{k}")
}

/// `{true} λ(t1);…;λ(tn) {false}` fails, i.e. the sequence is executable.
/// Sequential SSA encoding, one solver query.
pub fn sequence_feasible(p: &PetriProgram, seq: &[TransId], solver: &mut dyn Solver) -> SatResult {
    let mut parts = Vec::new();
    for (k, t) in seq.iter().enumerate() {
        parts.push(p.trans(*t).stmt.relation(&p.decls, &|v| step_name(v, k), &|v| step_name(v, k + 1)));
    }
    solver.check(&Query::from_assertions(vec![Term::and(parts)]))
}

/// Bounded search for an executable firing sequence of length ≤ `max_len`
/// that reaches an error-marked marking.
///
/// The search is symbolic: one query over the explicit marking graph
/// unrolled `max_len` times, with a stutter step so that shorter sequences
/// are covered. A reported trace is re-checked with [`sequence_feasible`].
pub fn bounded_feasibility_oracle(p: &PetriProgram, max_len: usize, solver: &mut dyn Solver) -> Result<Feasibility, PetriError> {
    let g = explore(p, DEFAULT_MARKING_LIMIT)?;
    let error_states: Vec<usize> = (0..g.len()).filter(|i| p.is_error_marked(&g.markings[*i])).collect();
    if error_states.is_empty() {
        return Ok(Feasibility::NoFeasibleErrorTrace);
    }
    if error_states.contains(&0) {
        return Ok(Feasibility::FeasibleErrorTrace(Vec::new()));
    }
    if max_len == 0 {
        return Ok(Feasibility::NoFeasibleErrorTrace);
    }
    let st = |k: usize| Term::var(&format!("m!{k}"), Sort::Int);
    let ch = |k: usize| Term::var(&format!("c!{k}"), Sort::Int);
    let mut parts = vec![Term::eq(st(0), Term::int(0))];
    for k in 0..max_len {
        let frame = Term::and(
            p.decls
                .iter()
                .map(|(v, s)| Term::eq(Term::var(&step_name(v, k + 1), *s), Term::var(&step_name(v, k), *s)))
                .collect(),
        );
        let mut options = vec![Term::and(vec![
            Term::eq(ch(k), Term::int(-1)),
            Term::eq(st(k + 1), st(k)),
            frame,
        ])];
        for (e, (a, t, b)) in g.edges.iter().enumerate() {
            options.push(Term::and(vec![
                Term::eq(ch(k), Term::int(e as i64)),
                Term::eq(st(k), Term::int(*a as i64)),
                Term::eq(st(k + 1), Term::int(*b as i64)),
                p.trans(*t).stmt.relation(&p.decls, &|v| step_name(v, k), &|v| step_name(v, k + 1)),
            ]));
        }
        parts.push(Term::or(options));
    }
    parts.push(Term::or(
        error_states
            .iter()
            .map(|e| Term::eq(st(max_len), Term::int(*e as i64)))
            .collect(),
    ));
    match solver.check(&Query::from_assertions(vec![Term::and(parts)])) {
        SatResult::Unsat => Ok(Feasibility::NoFeasibleErrorTrace),
        SatResult::Unknown(r) => Ok(Feasibility::Unknown(r)),
        SatResult::Sat(model) => {
            let mut seq = Vec::new();
            for k in 0..max_len {
                let c = model.get(&format!("c!{k}")).and_then(|v| v.as_int()).unwrap_or(-1);
                if c >= 0 {
                    seq.push(g.edges[c as usize].1);
                }
            }
            match sequence_feasible(p, &seq, solver) {
                SatResult::Sat(_) => Ok(Feasibility::FeasibleErrorTrace(
                    seq.iter().map(|t| p.trans(*t).name.clone()).collect(),
                )),
                SatResult::Unsat => Ok(Feasibility::Unknown("decoded trace is infeasible".into())),
                SatResult::Unknown(r) => Ok(Feasibility::Unknown(r)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(places: &[&str], init: &[&str], ts: &[(&str, &[&str], &[&str])]) -> PetriProgram {
        let raw = ProgramJson {
            variables: vec![],
            places: places.iter().map(|s| s.to_string()).collect(),
            error_places: vec![],
            initial_marking: init.iter().map(|s| s.to_string()).collect(),
            transitions: ts
                .iter()
                .map(|(id, pre, succ)| TransitionJson {
                    id: id.to_string(),
                    pre: pre.iter().map(|s| s.to_string()).collect(),
                    succ: succ.iter().map(|s| s.to_string()).collect(),
                    assume: None,
                    assign: BTreeMap::new(),
                    havoc: vec![],
                })
                .collect(),
        };
        PetriProgram::from_raw(&raw).unwrap()
    }

    #[test]
    fn trivial_net_reaches_only_initial() {
        let p = net(&["a"], &["a"], &[]);
        assert_eq!(reachable_markings(&p).unwrap(), vec![p.initial.clone()]);
    }

    #[test]
    fn detects_double_token() {
        let p = net(&["a", "b"], &["a", "b"], &[("t", &["a"], &["b"])]);
        let d = validate_program(&p);
        assert_eq!(
            d,
            vec![Diagnostic::NotOneSafe {
                place: "b".into(),
                sequence: vec!["t".into()]
            }]
        );
    }

    #[test]
    fn detects_never_enabled() {
        let p = net(&["a", "b", "c"], &["a"], &[("t", &["a"], &["b"]), ("u", &["c"], &["b"])]);
        assert_eq!(validate_program(&p), vec![Diagnostic::NeverEnabled { transition: "u".into() }]);
    }

    #[test]
    fn rejects_bad_json() {
        let bad = r#"{"variables":[],"places":["a"],"initial_marking":["b"],"transitions":[]}"#;
        assert!(matches!(PetriProgram::from_json(bad), Err(PetriError::UnknownPlace { .. })));
        let clash = r#"{"variables":[],"places":["a"],"initial_marking":["a"],
            "transitions":[{"id":"a","pre":["a"],"succ":["a"]}]}"#;
        assert!(matches!(PetriProgram::from_json(clash), Err(PetriError::Duplicate(_))));
        let undeclared = r#"{"variables":[],"places":["a"],"initial_marking":["a"],
            "transitions":[{"id":"t","pre":["a"],"succ":["a"],"assume":"(> x 0)"}]}"#;
        assert!(matches!(PetriProgram::from_json(undeclared), Err(PetriError::Statement { .. })));
        let bang = r#"{"variables":[{"name":"x!post","sort":"Int"}],"places":["a"],"initial_marking":["a"],"transitions":[]}"#;
        assert!(matches!(PetriProgram::from_json(bang), Err(PetriError::BadName(_))));
    }

    #[test]
    fn empty_pre_is_diagnosed() {
        let p = net(&["a", "b"], &["a"], &[("t", &[], &["b"])]);
        assert!(validate_program(&p).contains(&Diagnostic::EmptyPre { transition: "t".into() }));
    }
}
