//! Invariant domains: finite formula sets with a post operator whose every
//! entry is a valid Hoare triple, combined as products of components.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{check_hoare, parse_formula, HoareResult, LogicError, Term, Valuation};
use crate::petri::{Marking, PetriProgram, TransId};
use crate::solver::{Query, SatResult, Solver};

/// Predicate-abstraction components enumerate subsets as bitmasks.
pub const MAX_PREDICATES: usize = 24;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid domain JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("component {component}: formula {index}: {source}")]
    Formula {
        component: usize,
        index: usize,
        #[source]
        source: LogicError,
    },
    #[error("component {0} must contain both `true` and `false`")]
    MissingLiterals(usize),
    #[error("component {component}: formula `{formula}` listed twice")]
    DuplicateFormula { component: usize, formula: String },
    #[error("component {component}: table entry references unknown transition `{transition}`")]
    UnknownTransition { component: usize, transition: String },
    #[error("component {component}: table index {index} out of range")]
    BadIndex { component: usize, index: usize },
    #[error("component {component}: {count} predicates exceed the limit of {MAX_PREDICATES}")]
    TooManyPredicates { component: usize, count: usize },
    #[error("component {component}: predicate components take no table")]
    TableWithPredicates { component: usize },
    #[error("domain has no components")]
    Empty,
    #[error("component {component}: no element is equivalent to the strongest post of `{from}` under `{transition}`")]
    NoRepresentative {
        component: usize,
        from: String,
        transition: String,
    },
    #[error("solver could not decide a post obligation: {0}")]
    Unknown(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PostMode {
    /// Lookup only; pairs missing from the table map to `true`.
    Table,
    /// Strongest element entailed by the Hoare triple; table entries override.
    Strongest,
    /// Subsets of the predicates, conjunctively interpreted.
    Predicates(Vec<Term>),
}

/// One factor of a product domain. Element indices are positions in
/// `formulas`, or subset bitmasks in predicate mode.
#[derive(Debug)]
pub struct DomainComponent {
    formulas: Vec<Term>,
    mode: PostMode,
    table: BTreeMap<(usize, TransId), usize>,
    top: usize,
    bottom: usize,
    memo: Mutex<HashMap<(usize, TransId), usize>>,
}

impl Clone for DomainComponent {
    fn clone(&self) -> Self {
        DomainComponent {
            formulas: self.formulas.clone(),
            mode: self.mode.clone(),
            table: self.table.clone(),
            top: self.top,
            bottom: self.bottom,
            memo: Mutex::new(self.memo.lock().unwrap_or_else(|e| e.into_inner()).clone()),
        }
    }
}

impl DomainComponent {
    /// A component over an explicit formula list, which must contain the
    /// `true` and `false` literals exactly once each.
    pub fn with_formulas(
        formulas: Vec<Term>,
        mode: PostMode,
        table: BTreeMap<(usize, TransId), usize>,
        component: usize,
    ) -> Result<DomainComponent, DomainError> {
        for (i, f) in formulas.iter().enumerate() {
            if formulas[..i].contains(f) {
                return Err(DomainError::DuplicateFormula {
                    component,
                    formula: f.to_string(),
                });
            }
        }
        let top = formulas.iter().position(Term::is_true);
        let bottom = formulas.iter().position(Term::is_false);
        let (Some(top), Some(bottom)) = (top, bottom) else {
            return Err(DomainError::MissingLiterals(component));
        };
        for (&(from, _), &to) in &table {
            for index in [from, to] {
                if index >= formulas.len() {
                    return Err(DomainError::BadIndex { component, index });
                }
            }
        }
        Ok(DomainComponent {
            formulas,
            mode,
            table,
            top,
            bottom,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn predicates(preds: Vec<Term>, component: usize) -> Result<DomainComponent, DomainError> {
        if preds.len() > MAX_PREDICATES {
            return Err(DomainError::TooManyPredicates {
                component,
                count: preds.len(),
            });
        }
        let n = preds.len();
        Ok(DomainComponent {
            formulas: Vec::new(),
            mode: PostMode::Predicates(preds),
            table: BTreeMap::new(),
            top: 0,
            bottom: 1 << n,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn mode(&self) -> &PostMode {
        &self.mode
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn bottom(&self) -> usize {
        self.bottom
    }

    pub fn is_bottom(&self, i: usize) -> bool {
        i == self.bottom
    }

    /// Number of elements; `2^|B| + 1` in predicate mode.
    pub fn size(&self) -> usize {
        match &self.mode {
            PostMode::Predicates(b) => (1usize << b.len()) + 1,
            _ => self.formulas.len(),
        }
    }

    pub fn formulas(&self) -> &[Term] {
        &self.formulas
    }

    pub fn table(&self) -> &BTreeMap<(usize, TransId), usize> {
        &self.table
    }

    pub fn formula(&self, i: usize) -> Term {
        match &self.mode {
            PostMode::Predicates(b) => {
                if i == self.bottom {
                    Term::ff()
                } else {
                    Term::and((0..b.len()).filter(|k| i & (1 << k) != 0).map(|k| b[k].clone()).collect())
                }
            }
            _ => self.formulas[i].clone(),
        }
    }

    /// Elements that certification visits: all of them for formula lists,
    /// the computed ones for predicate components.
    fn certification_elements(&self) -> Vec<usize> {
        match &self.mode {
            PostMode::Predicates(_) => {
                let memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
                let mut v: Vec<usize> = memo.keys().map(|k| k.0).chain(memo.values().copied()).collect();
                v.push(self.top);
                v.sort();
                v.dedup();
                v
            }
            _ => (0..self.formulas.len()).collect(),
        }
    }

    /// Post of element `i` under transition `t`.
    pub fn post(&self, p: &PetriProgram, i: usize, t: TransId, solver: &mut dyn Solver, component: usize) -> Result<usize, DomainError> {
        if i == self.bottom {
            return Ok(self.bottom);
        }
        if let Some(&j) = self.table.get(&(i, t)) {
            return Ok(j);
        }
        if self.mode == PostMode::Table {
            return Ok(self.top);
        }
        if let Some(&j) = self.memo.lock().unwrap_or_else(|e| e.into_inner()).get(&(i, t)) {
            return Ok(j);
        }
        let j = self.compute_post(p, i, t, solver, component)?;
        self.memo.lock().unwrap_or_else(|e| e.into_inner()).insert((i, t), j);
        Ok(j)
    }

    fn compute_post(&self, p: &PetriProgram, i: usize, t: TransId, solver: &mut dyn Solver, component: usize) -> Result<usize, DomainError> {
        let stmt = &p.trans(t).stmt;
        let pre = self.formula(i);
        let mut holds = |post: &Term| match check_hoare(&pre, stmt, post, &p.decls, solver) {
            HoareResult::Holds => Ok(true),
            HoareResult::Fails { .. } => Ok(false),
            HoareResult::Unknown(r) => Err(DomainError::Unknown(r)),
        };
        if holds(&Term::ff())? {
            return Ok(self.bottom);
        }
        match &self.mode {
            PostMode::Predicates(b) => {
                let mut mask = 0usize;
                for (k, psi) in b.iter().enumerate() {
                    if holds(psi)? {
                        mask |= 1 << k;
                    }
                }
                Ok(mask)
            }
            PostMode::Strongest => {
                let mut entailed = Vec::new();
                for (k, psi) in self.formulas.iter().enumerate() {
                    if k != self.bottom && holds(psi)? {
                        entailed.push(k);
                    }
                }
                let conj = Term::and(entailed.iter().map(|k| self.formulas[*k].clone()).collect());
                for &k in &entailed {
                    let q = Query::from_assertions(vec![self.formulas[k].clone(), Term::not(conj.clone())]);
                    match solver.check(&q) {
                        SatResult::Unsat => return Ok(k),
                        SatResult::Sat(_) => {}
                        SatResult::Unknown(r) => return Err(DomainError::Unknown(r)),
                    }
                }
                Err(DomainError::NoRepresentative {
                    component,
                    from: pre.to_string(),
                    transition: p.trans(t).name.clone(),
                })
            }
            PostMode::Table => unreachable!("table mode never computes"),
        }
    }
}

/// Element of a product domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LawVector {
    Bottom,
    Laws(Vec<usize>),
}

impl LawVector {
    pub fn is_bottom(&self) -> bool {
        matches!(self, LawVector::Bottom)
    }

    pub fn component(&self, i: usize) -> Option<usize> {
        match self {
            LawVector::Bottom => None,
            LawVector::Laws(v) => Some(v[i]),
        }
    }
}

impl fmt::Display for LawVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawVector::Bottom => f.write_str("⊥"),
            LawVector::Laws(v) => {
                let parts: Vec<String> = v.iter().map(usize::to_string).collect();
                write!(f, "({})", parts.join(","))
            }
        }
    }
}

/// Product of components with ⊥ absorption.
#[derive(Clone, Debug)]
pub struct InvariantDomain {
    pub components: Vec<DomainComponent>,
}

impl InvariantDomain {
    pub fn new(components: Vec<DomainComponent>) -> Result<InvariantDomain, DomainError> {
        if components.is_empty() {
            return Err(DomainError::Empty);
        }
        Ok(InvariantDomain { components })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn top(&self) -> LawVector {
        self.vector(self.components.iter().map(|c| c.top()).collect())
    }

    /// Builds a vector, collapsing to Bottom if any component is ⊥.
    pub fn vector(&self, v: Vec<usize>) -> LawVector {
        if v.iter().zip(&self.components).any(|(i, c)| c.is_bottom(*i)) {
            LawVector::Bottom
        } else {
            LawVector::Laws(v)
        }
    }

    /// `⋀ φi` in component order.
    pub fn formula(&self, law: &LawVector) -> Term {
        match law {
            LawVector::Bottom => Term::ff(),
            LawVector::Laws(v) => Term::and(v.iter().zip(&self.components).map(|(i, c)| c.formula(*i)).collect()),
        }
    }

    pub fn component_formula(&self, law: &LawVector, i: usize) -> Term {
        match law {
            LawVector::Bottom => Term::ff(),
            LawVector::Laws(v) => self.components[i].formula(v[i]),
        }
    }

    /// Componentwise post; Bottom if any component yields ⊥.
    pub fn post(&self, p: &PetriProgram, law: &LawVector, t: TransId, solver: &mut dyn Solver) -> Result<LawVector, DomainError> {
        let LawVector::Laws(v) = law else {
            return Ok(LawVector::Bottom);
        };
        let mut out = Vec::with_capacity(v.len());
        for (k, (i, c)) in v.iter().zip(&self.components).enumerate() {
            let j = c.post(p, *i, t, solver, k)?;
            if c.is_bottom(j) {
                return Ok(LawVector::Bottom);
            }
            out.push(j);
        }
        Ok(LawVector::Laws(out))
    }

    /// Component `k`'s post of the `k`-th entry; ⊥ stays ⊥.
    pub fn component_post_is_bottom(
        &self,
        p: &PetriProgram,
        law: &LawVector,
        k: usize,
        t: TransId,
        solver: &mut dyn Solver,
    ) -> Result<bool, DomainError> {
        match law {
            LawVector::Bottom => Ok(true),
            LawVector::Laws(v) => {
                let c = &self.components[k];
                Ok(c.is_bottom(c.post(p, v[k], t, solver, k)?))
            }
        }
    }

    pub fn from_json(text: &str, p: &PetriProgram) -> Result<InvariantDomain, DomainError> {
        let raw: DomainJson = serde_json::from_str(text)?;
        InvariantDomain::from_raw(&raw, p)
    }

    pub fn from_raw(raw: &DomainJson, p: &PetriProgram) -> Result<InvariantDomain, DomainError> {
        let mut comps = Vec::new();
        for (ci, c) in raw.components.iter().enumerate() {
            let parse = |i: usize, s: &str| {
                parse_formula(s, &p.decls).map_err(|source| DomainError::Formula {
                    component: ci,
                    index: i,
                    source,
                })
            };
            if c.post.mode == ModeJson::Predicates {
                if !c.post.table.is_empty() {
                    return Err(DomainError::TableWithPredicates { component: ci });
                }
                let preds = c
                    .post
                    .predicates
                    .iter()
                    .enumerate()
                    .map(|(i, s)| parse(i, s))
                    .collect::<Result<Vec<_>, _>>()?;
                comps.push(DomainComponent::predicates(preds, ci)?);
                continue;
            }
            let formulas = c
                .formulas
                .iter()
                .enumerate()
                .map(|(i, s)| parse(i, s))
                .collect::<Result<Vec<_>, _>>()?;
            let mut table = BTreeMap::new();
            for e in &c.post.table {
                let t = p.transition(&e.transition).ok_or_else(|| DomainError::UnknownTransition {
                    component: ci,
                    transition: e.transition.clone(),
                })?;
                table.insert((e.from, t), e.to);
            }
            let mode = match c.post.mode {
                ModeJson::Table => PostMode::Table,
                _ => PostMode::Strongest,
            };
            comps.push(DomainComponent::with_formulas(formulas, mode, table, ci)?);
        }
        InvariantDomain::new(comps)
    }

    pub fn to_raw(&self, p: &PetriProgram) -> DomainJson {
        DomainJson {
            components: self
                .components
                .iter()
                .map(|c| {
                    let table = c
                        .table
                        .iter()
                        .map(|(&(from, t), &to)| TableEntryJson {
                            from,
                            transition: p.trans(t).name.clone(),
                            to,
                        })
                        .collect();
                    match &c.mode {
                        PostMode::Predicates(b) => ComponentJson {
                            formulas: Vec::new(),
                            post: PostJson {
                                mode: ModeJson::Predicates,
                                table: Vec::new(),
                                predicates: b.iter().map(Term::to_string).collect(),
                            },
                        },
                        m => ComponentJson {
                            formulas: c.formulas.iter().map(Term::to_string).collect(),
                            post: PostJson {
                                mode: if *m == PostMode::Table { ModeJson::Table } else { ModeJson::Strongest },
                                table,
                                predicates: Vec::new(),
                            },
                        },
                    }
                })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeJson {
    Table,
    Strongest,
    Predicates,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct TableEntryJson {
    pub from: usize,
    pub transition: String,
    pub to: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct PostJson {
    pub mode: ModeJson,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<TableEntryJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicates: Vec<String>,
}

#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct ComponentJson {
    #[serde(default)]
    pub formulas: Vec<String>,
    pub post: PostJson,
}

/// On-disk domain format.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct DomainJson {
    pub components: Vec<ComponentJson>,
}

/// A predicate-abstraction component over `predicates`.
pub fn predicate_abstraction_domain(predicates: Vec<Term>) -> Result<DomainComponent, DomainError> {
    DomainComponent::predicates(predicates, 0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PostViolation {
    pub component: usize,
    pub from: String,
    pub transition: String,
    pub to: String,
    pub witness_pre: Valuation,
    pub witness_post: Valuation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CertificationReport {
    pub obligations: usize,
    pub violations: Vec<PostViolation>,
    pub unknown: Vec<String>,
}

impl CertificationReport {
    pub fn certified(&self) -> bool {
        self.violations.is_empty() && self.unknown.is_empty()
    }
}

/// Checks `{φ} λ(t) {post(φ,t)}` for every element and transition.
pub fn certify_domain(p: &PetriProgram, d: &InvariantDomain, solver: &mut dyn Solver) -> CertificationReport {
    let mut report = CertificationReport::default();
    for (k, c) in d.components.iter().enumerate() {
        for i in c.certification_elements() {
            for t in p.trans_ids() {
                let tname = &p.trans(t).name;
                let j = match c.post(p, i, t, solver, k) {
                    Ok(j) => j,
                    Err(e) => {
                        report.unknown.push(format!("component {k}, element {i}, {tname}: {e}"));
                        continue;
                    }
                };
                report.obligations += 1;
                match check_hoare(&c.formula(i), &p.trans(t).stmt, &c.formula(j), &p.decls, solver) {
                    HoareResult::Holds => {}
                    HoareResult::Fails { pre, post } => report.violations.push(PostViolation {
                        component: k,
                        from: c.formula(i).to_string(),
                        transition: tname.clone(),
                        to: c.formula(j).to_string(),
                        witness_pre: pre,
                        witness_post: post,
                    }),
                    HoareResult::Unknown(r) => report.unknown.push(format!("component {k}, element {i}, {tname}: {r}")),
                }
            }
        }
    }
    report
}

/// Reachable abstract configurations, in breadth-first order.
#[derive(Clone, Debug)]
pub struct AbstractReach {
    pub configs: Vec<(Marking, LawVector)>,
    pub index: HashMap<(Marking, LawVector), usize>,
}

impl AbstractReach {
    pub fn contains(&self, m: &Marking, law: &LawVector) -> bool {
        self.index.contains_key(&(m.clone(), law.clone()))
    }

    /// Distinct non-Bottom laws at marking `m`, in discovery order.
    pub fn laws_at(&self, m: &Marking) -> Vec<LawVector> {
        self.configs
            .iter()
            .filter(|(m2, l)| m2 == m && !l.is_bottom())
            .map(|(_, l)| l.clone())
            .collect()
    }
}

pub fn abstract_reach(p: &PetriProgram, d: &InvariantDomain, solver: &mut dyn Solver) -> Result<AbstractReach, DomainError> {
    let init = (p.initial.clone(), d.top());
    let mut r = AbstractReach {
        configs: vec![init.clone()],
        index: HashMap::from([(init, 0)]),
    };
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let (m, law) = r.configs[i].clone();
        for t in p.trans_ids() {
            if !p.enabled(&m, t) {
                continue;
            }
            let m2 = p.fire(&m, t).expect("enabled");
            let law2 = d.post(p, &law, t, solver)?;
            let key = (m2, law2);
            if !r.index.contains_key(&key) {
                r.index.insert(key.clone(), r.configs.len());
                queue.push_back(r.configs.len());
                r.configs.push(key);
            }
        }
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyReport {
    pub safe: bool,
    /// Error-marked configurations with a non-Bottom law.
    pub offending: Vec<(Marking, LawVector)>,
}

pub fn is_safe(p: &PetriProgram, reach: &AbstractReach) -> SafetyReport {
    let offending: Vec<_> = reach
        .configs
        .iter()
        .filter(|(m, l)| p.is_error_marked(m) && !l.is_bottom())
        .cloned()
        .collect();
    SafetyReport {
        safe: offending.is_empty(),
        offending,
    }
}
