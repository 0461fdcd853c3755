//! Owicki-Gries annotations: the naive marking-tracking baseline, the
//! imperial annotation driven by an empire, and its focused variant.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{abstract_reach, is_safe, DomainError, InvariantDomain, LawVector};
use crate::empire::Empire;
use crate::focus::{check_focus, Focus, FocusError};
use crate::logic::{is_valid_name, parse_term, Decls, LogicError, Op, Sort, Term, Value};
use crate::petri::{co_related, explore, Marking, PetriError, PetriProgram, DEFAULT_MARKING_LIMIT};
use crate::solver::Solver;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Focus(#[from] FocusError),
    #[error("domain is not safe: an error marking carries a non-bottom law")]
    Unsafe,
    #[error("focus fails {rule} at state {state} on `{transition}`")]
    BadFocus { rule: String, state: usize, transition: String },
    #[error("annotation JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("annotation: {0}")]
    Format(String),
    #[error("annotation formula: {0}")]
    Logic(#[from] LogicError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GhostDomain {
    Bool,
    /// Integer ghost ranging over `0..count`.
    State { count: usize },
}

impl GhostDomain {
    pub fn sort(&self) -> Sort {
        match self {
            GhostDomain::Bool => Sort::Bool,
            GhostDomain::State { .. } => Sort::Int,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ghost {
    pub name: String,
    pub domain: GhostDomain,
}

/// `omega` is indexed by place and `gamma` by transition; both are total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OgAnnotation {
    pub ghosts: Vec<Ghost>,
    pub rho: BTreeMap<String, Value>,
    pub omega: Vec<Term>,
    pub gamma: Vec<BTreeMap<String, Term>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub size: usize,
    pub ghost_updates: usize,
    pub ghost_vars: usize,
}

impl OgAnnotation {
    /// Program variables plus ghosts.
    pub fn decls(&self, p: &PetriProgram) -> Decls {
        let mut d = p.decls.clone();
        d.extend(self.ghosts.iter().map(|g| (g.name.clone(), g.domain.sort())));
        d
    }

    pub fn ghost_decls(&self) -> Decls {
        self.ghosts.iter().map(|g| (g.name.clone(), g.domain.sort())).collect()
    }

    pub fn metrics(&self) -> Metrics {
        let omega: usize = self.omega.iter().map(Term::dag_size).sum();
        let gamma: usize = self.gamma.iter().flat_map(|u| u.values()).map(Term::dag_size).sum();
        let rho: usize = self.rho.values().map(|v| v.to_term().dag_size()).sum();
        Metrics {
            size: omega + gamma + rho,
            ghost_updates: self.gamma.iter().filter(|u| !u.is_empty()).count(),
            ghost_vars: self.ghosts.len(),
        }
    }
}

/// First name of `base`, `base_1`, `base_2`, ... that is a valid name not
/// in `taken`.
fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    let ok = |n: &str| is_valid_name(n) && !taken.contains(n);
    if ok(base) {
        return base.to_string();
    }
    (1..).map(|k| format!("{base}_{k}")).find(|n| ok(n)).expect("unbounded supply")
}

/// Boolean ghost per place tracking its token; `ω(p)` is the disjunction of
/// `atMark(m) ∧ β(m)` over abstractly reachable markings containing `p`.
pub fn naive_og(p: &PetriProgram, d: &InvariantDomain, solver: &mut dyn Solver) -> Result<OgAnnotation, AnnotationError> {
    let reach = abstract_reach(p, d, solver)?;
    if !is_safe(p, &reach).safe {
        return Err(AnnotationError::Unsafe);
    }
    let mut taken: BTreeSet<String> = p.decls.keys().cloned().collect();
    let mut names = Vec::new();
    for place in &p.places {
        let n = fresh_name(&format!("g_{place}"), &taken);
        taken.insert(n.clone());
        names.push(n);
    }
    let gv = |i: usize| Term::var(&names[i], Sort::Bool);

    let mut beta: BTreeMap<Marking, Vec<LawVector>> = BTreeMap::new();
    for (m, _) in &reach.configs {
        beta.entry(m.clone()).or_insert_with(|| reach.laws_at(m));
    }
    let mut omega = vec![Vec::new(); p.places.len()];
    for (m, laws) in &beta {
        let at_mark = Term::and(
            p.place_ids()
                .map(|q| if m.contains(q) { gv(q.0) } else { Term::not(gv(q.0)) })
                .collect(),
        );
        let b = Term::or(laws.iter().map(|l| d.formula(l)).collect());
        let disjunct = Term::and(vec![at_mark, b]);
        for &q in m.places() {
            omega[q.0].push(disjunct.clone());
        }
    }
    let gamma = p
        .trans_ids()
        .map(|t| {
            let tr = p.trans(t);
            let mut u = BTreeMap::new();
            for q in tr.succ.iter().filter(|q| !tr.pre.contains(q)) {
                u.insert(names[q.0].clone(), Term::tt());
            }
            for q in tr.pre.iter().filter(|q| !tr.succ.contains(q)) {
                u.insert(names[q.0].clone(), Term::ff());
            }
            u
        })
        .collect();
    Ok(OgAnnotation {
        ghosts: names
            .iter()
            .map(|n| Ghost {
                name: n.clone(),
                domain: GhostDomain::Bool,
            })
            .collect(),
        rho: p
            .place_ids()
            .map(|q| (names[q.0].clone(), Value::Bool(p.initial.contains(q))))
            .collect(),
        omega: omega.into_iter().map(Term::or).collect(),
        gamma,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImperialOptions {
    /// Let states with pairwise distinct, never co-marked places share a
    /// ghost value, merging greedily along edges in construction order.
    pub share_ghost_values: bool,
}

impl Default for ImperialOptions {
    fn default() -> Self {
        ImperialOptions { share_ghost_values: true }
    }
}

/// Ghost value of each state: the least state id of its sharing class.
/// Two states of one class never mention equal or co-related places.
pub fn ghost_encoding(p: &PetriProgram, e: &Empire, share: bool) -> Result<Vec<usize>, AnnotationError> {
    let mut class: Vec<usize> = (0..e.len()).collect();
    if !share {
        return Ok(class);
    }
    let co = co_related(p, &explore(p, DEFAULT_MARKING_LIMIT)?);
    let mut members: Vec<BTreeSet<_>> = e.states.iter().map(|s| s.territory.places().collect()).collect();
    for (&(q, _), &q2) in &e.edges {
        let (a, b) = (class[q], class[q2]);
        if a == b {
            continue;
        }
        let clash = members[a]
            .iter()
            .any(|x| members[b].iter().any(|y| x == y || co.get(*x, *y)));
        if clash {
            continue;
        }
        let (keep, gone) = (a.min(b), a.max(b));
        for c in class.iter_mut() {
            if *c == gone {
                *c = keep;
            }
        }
        let moved = std::mem::take(&mut members[gone]);
        members[keep].extend(moved);
    }
    Ok(class)
}

fn empire_ghost(p: &PetriProgram, e: &Empire) -> Ghost {
    let taken: BTreeSet<String> = p.decls.keys().cloned().collect();
    Ghost {
        name: fresh_name("g", &taken),
        domain: GhostDomain::State { count: e.len() },
    }
}

/// `γ(t)(g)`: a conditional over the encoded states whose `t`-successor
/// has a different encoding, defaulting to `g`. Empty when no case exists.
fn empire_gamma(p: &PetriProgram, e: &Empire, enc: &[usize], g: &Term) -> Vec<BTreeMap<String, Term>> {
    let name = g.as_var().expect("ghost variable").to_string();
    p.trans_ids()
        .map(|t| {
            let cases: BTreeMap<usize, usize> = e
                .edges
                .iter()
                .filter(|((_, t2), _)| *t2 == t)
                .filter(|((q, _), q2)| enc[*q] != enc[**q2])
                .map(|((q, _), q2)| (enc[*q], enc[*q2]))
                .collect();
            let mut u = BTreeMap::new();
            if !cases.is_empty() {
                let mut expr = g.clone();
                for (from, to) in cases.iter().rev() {
                    expr = Term::ite(Term::eq(g.clone(), Term::int(*from as i64)), Term::int(*to as i64), expr);
                }
                u.insert(name.clone(), expr);
            }
            u
        })
        .collect()
}

fn empire_og(p: &PetriProgram, e: &Empire, enc: &[usize], law_at: &dyn Fn(usize, crate::petri::PlaceId) -> Term) -> OgAnnotation {
    let ghost = empire_ghost(p, e);
    let g = Term::var(&ghost.name, Sort::Int);
    let omega = p
        .place_ids()
        .map(|place| {
            Term::or(
                e.states_with(place)
                    .into_iter()
                    .map(|q| Term::and(vec![Term::eq(g.clone(), Term::int(enc[q] as i64)), law_at(q, place)]))
                    .collect(),
            )
        })
        .collect();
    OgAnnotation {
        gamma: empire_gamma(p, e, enc, &g),
        rho: BTreeMap::from([(ghost.name.clone(), Value::Int(enc[e.initial] as i64))]),
        ghosts: vec![ghost],
        omega,
    }
}

/// `ω(p) = ⋁_{q ∈ Q_p} (g = enc(q) ∧ law(q))`.
pub fn imperial_og(p: &PetriProgram, d: &InvariantDomain, e: &Empire, opts: ImperialOptions) -> Result<OgAnnotation, AnnotationError> {
    let enc = ghost_encoding(p, e, opts.share_ghost_values)?;
    Ok(empire_og(p, e, &enc, &|q, _| d.formula(&e.states[q].law)))
}

/// As [`imperial_og`] with `law(q)` cut down to the components focused on
/// some region of `q` containing the place.
pub fn focused_og(
    p: &PetriProgram,
    d: &InvariantDomain,
    e: &Empire,
    f: &Focus,
    opts: ImperialOptions,
    solver: &mut dyn Solver,
) -> Result<OgAnnotation, AnnotationError> {
    if let Some(v) = check_focus(p, d, e, f, solver)?.into_iter().next() {
        return Err(AnnotationError::BadFocus {
            rule: v.rule.to_string(),
            state: v.state,
            transition: v.transition,
        });
    }
    let enc = ghost_encoding(p, e, opts.share_ghost_values)?;
    let law_at = |q: usize, place| {
        let st = &e.states[q];
        let ri = st
            .territory
            .regions()
            .iter()
            .position(|r| r.contains(place))
            .expect("q is in Q_p");
        Term::and(f.indices(q, ri).into_iter().map(|i| d.component_formula(&st.law, i)).collect())
    };
    Ok(empire_og(p, e, &enc, &law_at))
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct UpdateJson {
    pub var: String,
    pub expr: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct GammaJson {
    pub transition: String,
    pub updates: Vec<UpdateJson>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct OmegaJson {
    pub place: String,
    pub formula: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct OgJson {
    pub ghosts: Vec<Ghost>,
    pub rho: BTreeMap<String, String>,
    pub gamma: Vec<GammaJson>,
    pub omega: Vec<OmegaJson>,
}

impl OgAnnotation {
    pub fn to_raw(&self, p: &PetriProgram) -> OgJson {
        OgJson {
            ghosts: self.ghosts.clone(),
            rho: self.rho.iter().map(|(k, v)| (k.clone(), v.to_term().to_string())).collect(),
            gamma: p
                .trans_ids()
                .filter(|t| !self.gamma[t.0].is_empty())
                .map(|t| GammaJson {
                    transition: p.trans(t).name.clone(),
                    updates: self.gamma[t.0]
                        .iter()
                        .map(|(v, e)| UpdateJson {
                            var: v.clone(),
                            expr: e.to_string(),
                        })
                        .collect(),
                })
                .collect(),
            omega: p
                .place_ids()
                .map(|q| OmegaJson {
                    place: p.place_name(q).to_string(),
                    formula: self.omega[q.0].to_string(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self, p: &PetriProgram) -> String {
        serde_json::to_string_pretty(&self.to_raw(p)).expect("serializable")
    }

    /// Parses and checks names, sorts and totality of `omega`.
    pub fn from_raw(raw: &OgJson, p: &PetriProgram) -> Result<OgAnnotation, AnnotationError> {
        let bad = |m: String| AnnotationError::Format(m);
        let mut decls = p.decls.clone();
        for g in &raw.ghosts {
            if !is_valid_name(&g.name) {
                return Err(bad(format!("invalid ghost name `{}`", g.name)));
            }
            if decls.insert(g.name.clone(), g.domain.sort()).is_some() {
                return Err(bad(format!("ghost `{}` clashes with another variable", g.name)));
            }
            if g.domain == (GhostDomain::State { count: 0 }) {
                return Err(bad(format!("ghost `{}` has an empty domain", g.name)));
            }
        }
        let ghost_sort = |n: &str| raw.ghosts.iter().find(|g| g.name == n).map(|g| g.domain.sort());

        let mut rho = BTreeMap::new();
        for g in &raw.ghosts {
            let text = raw.rho.get(&g.name).ok_or_else(|| bad(format!("no initial value for `{}`", g.name)))?;
            let t = parse_term(text, &Decls::new())?;
            let v = match (t.as_int(), t.as_bool(), g.domain) {
                (Some(i), _, GhostDomain::State { count }) if i >= 0 && (i as u64) < count as u64 => Value::Int(i),
                (_, Some(b), GhostDomain::Bool) => Value::Bool(b),
                _ => return Err(bad(format!("initial value `{text}` outside the domain of `{}`", g.name))),
            };
            rho.insert(g.name.clone(), v);
        }
        if let Some(extra) = raw.rho.keys().find(|k| ghost_sort(k).is_none()) {
            return Err(bad(format!("initial value for unknown ghost `{extra}`")));
        }

        let mut gamma = vec![BTreeMap::new(); p.transitions.len()];
        for entry in &raw.gamma {
            let t = p
                .transition(&entry.transition)
                .ok_or_else(|| bad(format!("unknown transition `{}`", entry.transition)))?;
            for u in &entry.updates {
                let sort = ghost_sort(&u.var).ok_or_else(|| bad(format!("update of non-ghost `{}`", u.var)))?;
                let e = parse_term(&u.expr, &decls)?;
                if e.sort() != sort {
                    return Err(bad(format!("update of `{}` has the wrong sort", u.var)));
                }
                if gamma[t.0].insert(u.var.clone(), e).is_some() {
                    return Err(bad(format!("`{}` updated twice by `{}`", u.var, entry.transition)));
                }
            }
        }

        let mut omega: Vec<Option<Term>> = vec![None; p.places.len()];
        for entry in &raw.omega {
            let q = p.place(&entry.place).ok_or_else(|| bad(format!("unknown place `{}`", entry.place)))?;
            let f = parse_term(&entry.formula, &decls)?;
            if f.sort() != Sort::Bool {
                return Err(bad(format!("annotation of `{}` is not a formula", entry.place)));
            }
            if omega[q.0].replace(f).is_some() {
                return Err(bad(format!("place `{}` annotated twice", entry.place)));
            }
        }
        let omega = omega
            .into_iter()
            .enumerate()
            .map(|(i, f)| f.ok_or_else(|| bad(format!("place `{}` has no annotation", p.places[i]))))
            .collect::<Result<_, _>>()?;
        Ok(OgAnnotation {
            ghosts: raw.ghosts.clone(),
            rho,
            omega,
            gamma,
        })
    }

    pub fn from_json(text: &str, p: &PetriProgram) -> Result<OgAnnotation, AnnotationError> {
        OgAnnotation::from_raw(&serde_json::from_str(text)?, p)
    }
}

/// States mentioned by an `ite` chain of the empire ghost, as `(from, to)`.
pub fn ghost_cases(update: &Term) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut cur = update.clone();
    while let crate::logic::Kind::App(Op::Ite, ch) = cur.kind() {
        let from = ch[0].children().get(1).and_then(Term::as_int);
        match (from, ch[1].as_int()) {
            (Some(a), Some(b)) => out.push((a, b)),
            _ => break,
        }
        cur = ch[2].clone();
    }
    out
}

/// Which law an empire state contributes for a set of places.
#[derive(Clone, Copy, Debug)]
pub enum LawSource<'a> {
    Imperial,
    Focused(&'a Focus),
}

/// `⋁_{q ∈ Q_P̂} (g = enc(q) ∧ law_P̂(q))`, built from the empire directly
/// for a set of places `P̂`.
pub fn subset_annotation(
    d: &InvariantDomain,
    e: &Empire,
    og: &OgAnnotation,
    enc: &[usize],
    src: LawSource<'_>,
    places: &[crate::petri::PlaceId],
) -> Term {
    let g = Term::var(&og.ghosts[0].name, Sort::Int);
    let mut disjuncts = Vec::new();
    for (q, st) in e.states.iter().enumerate() {
        let regions: Vec<usize> = st
            .territory
            .regions()
            .iter()
            .enumerate()
            .filter(|(_, r)| places.iter().any(|x| r.contains(*x)))
            .map(|(i, _)| i)
            .collect();
        if !places.iter().all(|x| st.territory.region_of(*x).is_some()) {
            continue;
        }
        let law = match src {
            LawSource::Imperial => d.formula(&st.law),
            LawSource::Focused(f) => {
                let mut comps = BTreeSet::new();
                for ri in regions {
                    comps.extend(f.indices(q, ri));
                }
                Term::and(comps.into_iter().map(|i| d.component_formula(&st.law, i)).collect())
            }
        };
        disjuncts.push(Term::and(vec![Term::eq(g.clone(), Term::int(enc[q] as i64)), law]));
    }
    Term::or(disjuncts)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctionFailure {
    pub places: Vec<String>,
    pub reason: String,
}

/// For every nonempty subset of at most `max_subset` places of every
/// reachable marking, checks `⋀ ω(p)` against [`subset_annotation`] by
/// SMT equivalence.
#[allow(clippy::too_many_arguments)]
pub fn check_place_conjunctions(
    p: &PetriProgram,
    d: &InvariantDomain,
    e: &Empire,
    og: &OgAnnotation,
    enc: &[usize],
    src: LawSource<'_>,
    max_subset: usize,
    solver: &mut dyn Solver,
) -> Result<Vec<ConjunctionFailure>, AnnotationError> {
    let g = explore(p, DEFAULT_MARKING_LIMIT)?;
    let mut subsets: BTreeSet<Vec<crate::petri::PlaceId>> = BTreeSet::new();
    for m in &g.markings {
        let ps = m.places();
        let n = ps.len();
        for mask in 1u64..(1u64 << n.min(63)) {
            if (mask.count_ones() as usize) <= max_subset {
                subsets.insert((0..n).filter(|i| mask & (1 << i) != 0).map(|i| ps[i]).collect());
            }
        }
    }
    let mut out = Vec::new();
    for s in subsets {
        let lhs = Term::and(s.iter().map(|x| og.omega[x.0].clone()).collect());
        let rhs = subset_annotation(d, e, og, enc, src, &s);
        let q = crate::solver::Query::from_assertions(vec![Term::not(Term::eq(lhs, rhs))]);
        let reason = match solver.check(&q) {
            crate::solver::SatResult::Unsat => continue,
            crate::solver::SatResult::Sat(m) => format!("differs at {m:?}"),
            crate::solver::SatResult::Unknown(r) => format!("unknown: {r}"),
        };
        out.push(ConjunctionFailure {
            places: s.iter().map(|x| p.place_name(*x).to_string()).collect(),
            reason,
        });
    }
    Ok(out)
}
