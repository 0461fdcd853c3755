//! Regions, territories and empires.
//!
//! An empire is a finite state machine whose states pair a territory (a set
//! of disjoint regions abstracting the control state) with a law vector.
//! Two builders are provided: the naive empire, whose territories are
//! singleton regions, and the saturated empire, whose territories absorb
//! law-preserving sequential steps so that loops collapse into self-loops.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, InvariantDomain, LawVector};
use crate::logic::{check_hoare, HoareResult, Term};
use crate::petri::{explore, CoRelation, Marking, PetriError, PetriProgram, PlaceId, ReachGraph, TransId, DEFAULT_MARKING_LIMIT};
use crate::solver::{Query, SatResult, Solver};

/// Treaty enumeration is skipped for territories with more selections.
pub const DEFAULT_TREATY_BOUND: usize = 4096;

#[derive(Debug, Error)]
pub enum EmpireError {
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("domain is unsafe: state with territory {territory} touches an error place with law {law}")]
    Unsafe { territory: String, law: String },
    #[error("transition `{0}` is not enabled in the territory")]
    NotEnabled(String),
    #[error("transition `{0}` does not extend the territory")]
    NotExtendable(String),
    #[error("constructed territory {territory} is invalid: {reason}")]
    NotATerritory { territory: String, reason: String },
    #[error("construction invariant violated: {0}")]
    Invariant(String),
    #[error("invalid empire JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empire JSON: {0}")]
    Format(String),
}

/// Nonempty sorted set of places.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Region(Vec<PlaceId>);

impl Region {
    pub fn new(mut places: Vec<PlaceId>) -> Region {
        places.sort();
        places.dedup();
        assert!(!places.is_empty(), "regions are nonempty");
        Region(places)
    }

    pub fn singleton(p: PlaceId) -> Region {
        Region(vec![p])
    }

    pub fn places(&self) -> &[PlaceId] {
        &self.0
    }

    pub fn contains(&self, p: PlaceId) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn intersects(&self, ps: &[PlaceId]) -> bool {
        ps.iter().any(|p| self.contains(*p))
    }

    fn with(&self, p: PlaceId) -> Region {
        let mut v = self.0.clone();
        v.push(p);
        Region::new(v)
    }
}

/// Set of regions, sorted by minimal place. Disjointness is checked by
/// [`check_territory`], not enforced by construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Territory(Vec<Region>);

impl Territory {
    pub fn new(mut regions: Vec<Region>) -> Territory {
        regions.sort();
        regions.dedup();
        Territory(regions)
    }

    pub fn regions(&self) -> &[Region] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The region holding `p`, if any.
    pub fn region_of(&self, p: PlaceId) -> Option<&Region> {
        self.0.iter().find(|r| r.contains(p))
    }

    pub fn places(&self) -> impl Iterator<Item = PlaceId> + '_ {
        self.0.iter().flat_map(|r| r.0.iter().copied())
    }

    pub fn from_marking(m: &Marking) -> Territory {
        Territory::new(m.places().iter().map(|p| Region::singleton(*p)).collect())
    }

    /// Number of markings in the treaty, saturating.
    pub fn treaty_size(&self) -> usize {
        self.0.iter().fold(1usize, |acc, r| acc.saturating_mul(r.0.len()))
    }

    pub fn show(&self, p: &PetriProgram) -> String {
        let rs: Vec<String> = self
            .0
            .iter()
            .map(|r| format!("{{{}}}", r.0.iter().map(|q| p.place_name(*q)).collect::<Vec<_>>().join(",")))
            .collect();
        format!("{{{}}}", rs.join(","))
    }
}

/// All markings choosing one place per region.
pub fn treaty(tau: &Territory) -> Vec<Marking> {
    let mut out: Vec<Vec<PlaceId>> = vec![Vec::new()];
    for r in tau.regions() {
        let mut next = Vec::with_capacity(out.len() * r.places().len());
        for partial in &out {
            for p in r.places() {
                let mut m = partial.clone();
                m.push(*p);
                next.push(m);
            }
        }
        out = next;
    }
    let mut ms: Vec<Marking> = out.into_iter().map(Marking::new).collect();
    ms.sort();
    ms
}

/// Each pre-place lies in a region, and distinct pre-places in distinct
/// regions.
pub fn enabled_in_territory(p: &PetriProgram, tau: &Territory, t: TransId) -> bool {
    let mut used = BTreeSet::new();
    for q in &p.trans(t).pre {
        match tau.0.iter().position(|r| r.contains(*q)) {
            Some(i) if used.insert(i) => {}
            _ => return false,
        }
    }
    true
}

pub fn bystanders(p: &PetriProgram, t: TransId, tau: &Territory) -> Vec<Region> {
    let pre = &p.trans(t).pre;
    tau.0.iter().filter(|r| !r.intersects(pre)).cloned().collect()
}

/// Bystanders plus one singleton region per successor place.
pub fn replaced(p: &PetriProgram, t: TransId, tau: &Territory) -> Result<Territory, EmpireError> {
    if !enabled_in_territory(p, tau, t) {
        return Err(EmpireError::NotEnabled(p.trans(t).name.clone()));
    }
    let mut rs = bystanders(p, t, tau);
    rs.extend(p.trans(t).succ.iter().map(|q| Region::singleton(*q)));
    Ok(Territory::new(rs))
}

fn sequential(p: &PetriProgram, t: TransId) -> Option<(PlaceId, PlaceId)> {
    let tr = p.trans(t);
    (tr.pre.len() == 1 && tr.succ.len() == 1).then(|| (tr.pre[0], tr.succ[0]))
}

/// `t` is sequential, enabled, and its successor place is co-related with
/// no place of the region holding its pre-place.
pub fn extendable(p: &PetriProgram, tau: &Territory, t: TransId, co: &CoRelation) -> bool {
    let Some((pre, succ)) = sequential(p, t) else {
        return false;
    };
    if !enabled_in_territory(p, tau, t) {
        return false;
    }
    let r = tau.region_of(pre).expect("enabled");
    r.places().iter().all(|q| !co.get(*q, succ))
}

/// Bystanders plus the pre-region grown by the successor place.
pub fn extended(p: &PetriProgram, t: TransId, tau: &Territory, co: &CoRelation) -> Result<Territory, EmpireError> {
    if !extendable(p, tau, t, co) {
        return Err(EmpireError::NotExtendable(p.trans(t).name.clone()));
    }
    let (pre, succ) = sequential(p, t).expect("extendable");
    let mut rs = bystanders(p, t, tau);
    rs.push(tau.region_of(pre).expect("enabled").with(succ));
    Ok(Territory::new(rs))
}

/// `tau ▷t tau2`: bystanders are kept, and the remaining regions of `tau2`
/// are distinct regions holding the successor places.
pub fn fires_territory(p: &PetriProgram, tau: &Territory, t: TransId, tau2: &Territory) -> bool {
    if !enabled_in_territory(p, tau, t) {
        return false;
    }
    let by = bystanders(p, t, tau);
    if !by.iter().all(|r| tau2.0.contains(r)) {
        return false;
    }
    let mut targets = BTreeSet::new();
    for q in &p.trans(t).succ {
        match tau2.0.iter().position(|r| r.contains(*q)) {
            Some(i) if targets.insert(i) => {}
            _ => return false,
        }
    }
    tau2.0
        .iter()
        .enumerate()
        .all(|(i, r)| targets.contains(&i) || by.contains(r))
}

/// Disjoint regions of pairwise non-co-related places whose treaty is
/// reachable. Treaties larger than `bound` are not enumerated.
pub fn check_territory(tau: &Territory, co: &CoRelation, reach: &ReachGraph, bound: usize) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for r in tau.regions() {
        for q in r.places() {
            if !seen.insert(*q) {
                return Err(format!("place {} lies in two regions", q.0));
            }
        }
        for a in r.places() {
            for b in r.places() {
                if a != b && co.get(*a, *b) {
                    return Err(format!("places {} and {} of one region are co-related", a.0, b.0));
                }
            }
        }
    }
    if tau.treaty_size() <= bound {
        for m in treaty(tau) {
            if !reach.contains(&m) {
                return Err(format!("treaty marking {:?} is unreachable", m.places()));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EmpireState {
    pub territory: Territory,
    pub law: LawVector,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Empire {
    /// In discovery order; index 0 is the initial state.
    pub states: Vec<EmpireState>,
    pub initial: usize,
    pub edges: BTreeMap<(usize, TransId), usize>,
    /// Non-fatal notes from construction (e.g. order-dependent saturation).
    pub diagnostics: Vec<String>,
}

impl Empire {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn delta(&self, q: usize, t: TransId) -> Option<usize> {
        self.edges.get(&(q, t)).copied()
    }

    pub fn state_of(&self, s: &EmpireState) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }

    /// `Q_p`: states with `p` in some region, ascending.
    pub fn states_with(&self, p: PlaceId) -> Vec<usize> {
        (0..self.states.len())
            .filter(|q| self.states[*q].territory.region_of(p).is_some())
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub treaty_bound: usize,
    /// Re-run saturation with the reverse transition order and record a
    /// diagnostic when the result differs.
    pub check_order: bool,
    /// Check the shortcut property on every extension step.
    pub check_lemmas: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            treaty_bound: DEFAULT_TREATY_BOUND,
            check_order: cfg!(debug_assertions),
            check_lemmas: true,
        }
    }
}

struct Ctx<'a> {
    p: &'a PetriProgram,
    d: &'a InvariantDomain,
    reach: ReachGraph,
    co: CoRelation,
    opts: BuildOptions,
    diagnostics: Vec<String>,
}

impl Ctx<'_> {
    fn new<'a>(p: &'a PetriProgram, d: &'a InvariantDomain, opts: BuildOptions) -> Result<Ctx<'a>, EmpireError> {
        let reach = explore(p, DEFAULT_MARKING_LIMIT)?;
        let co = crate::petri::co_related(p, &reach);
        Ok(Ctx {
            p,
            d,
            reach,
            co,
            opts,
            diagnostics: Vec::new(),
        })
    }

    fn checked(&self, tau: Territory) -> Result<Territory, EmpireError> {
        check_territory(&tau, &self.co, &self.reach, self.opts.treaty_bound).map_err(|reason| EmpireError::NotATerritory {
            territory: tau.show(self.p),
            reason,
        })?;
        Ok(tau)
    }

    /// Repeatedly extends `tau` along the first candidate in `order`.
    /// `entry` is the firing `(tau_prev, t')` that produced the start
    /// territory, for the shortcut check.
    fn saturate(
        &mut self,
        law: &LawVector,
        rb: &[Region],
        mut tau: Territory,
        solver: &mut dyn Solver,
        reverse: bool,
        entry: Option<(&Territory, TransId)>,
    ) -> Result<Territory, EmpireError> {
        let mut order: Vec<TransId> = self.p.trans_ids().collect();
        if reverse {
            order.reverse();
        }
        'outer: loop {
            for &t in &order {
                if !extendable(self.p, &tau, t, &self.co) {
                    continue;
                }
                let (pre, succ) = sequential(self.p, t).expect("extendable");
                if tau.region_of(pre).expect("enabled").contains(succ) {
                    continue;
                }
                let by = bystanders(self.p, t, &tau);
                if !rb.iter().all(|r| by.contains(r)) {
                    continue;
                }
                if self.d.post(self.p, law, t, solver)? != *law {
                    continue;
                }
                let next = extended(self.p, t, &tau, &self.co)?;
                if self.opts.check_lemmas {
                    if !fires_territory(self.p, &next, t, &next) {
                        return Err(EmpireError::Invariant(format!(
                            "extended territory {} does not self-fire under {}",
                            next.show(self.p),
                            self.p.trans(t).name
                        )));
                    }
                    if let Some((prev, t_in)) = entry {
                        if !fires_territory(self.p, prev, t_in, &next) {
                            return Err(EmpireError::Invariant(format!(
                                "{} no longer fires into {} under {}",
                                prev.show(self.p),
                                next.show(self.p),
                                self.p.trans(t_in).name
                            )));
                        }
                    }
                }
                tau = self.checked(next)?;
                continue 'outer;
            }
            return Ok(tau);
        }
    }

    fn saturated_successor(
        &mut self,
        law: &LawVector,
        rb: &[Region],
        tau: Territory,
        solver: &mut dyn Solver,
        entry: Option<(&Territory, TransId)>,
    ) -> Result<Territory, EmpireError> {
        let forward = self.saturate(law, rb, tau.clone(), solver, false, entry)?;
        if self.opts.check_order {
            let backward = self.saturate(law, rb, tau.clone(), solver, true, entry)?;
            if backward != forward {
                self.diagnostics.push(format!(
                    "saturation of {} is order-dependent: {} (declaration order) vs {} (reverse order)",
                    tau.show(self.p),
                    forward.show(self.p),
                    backward.show(self.p)
                ));
            }
        }
        Ok(forward)
    }

    fn ensure_safe(&self, s: &EmpireState) -> Result<(), EmpireError> {
        if !s.law.is_bottom() && s.territory.places().any(|q| self.p.errors.contains(&q)) {
            return Err(EmpireError::Unsafe {
                territory: s.territory.show(self.p),
                law: self.d.formula(&s.law).to_string(),
            });
        }
        Ok(())
    }
}

fn intern_state(states: &mut Vec<EmpireState>, index: &mut HashMap<EmpireState, usize>, queue: &mut VecDeque<usize>, s: EmpireState) -> usize {
    if let Some(&i) = index.get(&s) {
        return i;
    }
    let i = states.len();
    index.insert(s.clone(), i);
    states.push(s);
    queue.push_back(i);
    i
}

/// Saturated successor of `tau` under law `law`, with `rb` the regions that
/// must stay bystanders. Uses declaration order.
pub fn saturated_successor(
    p: &PetriProgram,
    d: &InvariantDomain,
    law: &LawVector,
    rb: &[Region],
    tau: Territory,
    solver: &mut dyn Solver,
) -> Result<Territory, EmpireError> {
    let mut ctx = Ctx::new(p, d, BuildOptions {
        check_order: false,
        ..BuildOptions::default()
    })?;
    ctx.saturate(law, rb, tau, solver, false, None)
}

/// Reachable part of the empire whose successors are replaced territories.
pub fn build_naive_empire(p: &PetriProgram, d: &InvariantDomain, solver: &mut dyn Solver) -> Result<Empire, EmpireError> {
    let ctx = Ctx::new(p, d, BuildOptions::default())?;
    let init = EmpireState {
        territory: ctx.checked(Territory::from_marking(&p.initial))?,
        law: d.top(),
    };
    ctx.ensure_safe(&init)?;
    let mut states = Vec::new();
    let mut index = HashMap::new();
    let mut queue = VecDeque::new();
    let mut edges = BTreeMap::new();
    intern_state(&mut states, &mut index, &mut queue, init);
    while let Some(q) = queue.pop_front() {
        let s = states[q].clone();
        for t in p.trans_ids() {
            if !enabled_in_territory(p, &s.territory, t) {
                continue;
            }
            let law = d.post(p, &s.law, t, solver)?;
            if law.is_bottom() {
                continue;
            }
            let next = EmpireState {
                territory: ctx.checked(replaced(p, t, &s.territory)?)?,
                law,
            };
            ctx.ensure_safe(&next)?;
            let j = intern_state(&mut states, &mut index, &mut queue, next);
            edges.insert((q, t), j);
        }
    }
    Ok(Empire {
        states,
        initial: 0,
        edges,
        diagnostics: Vec::new(),
    })
}

pub fn build_saturated_empire(p: &PetriProgram, d: &InvariantDomain, solver: &mut dyn Solver) -> Result<Empire, EmpireError> {
    build_saturated_empire_with(p, d, solver, BuildOptions::default())
}

pub fn build_saturated_empire_with(
    p: &PetriProgram,
    d: &InvariantDomain,
    solver: &mut dyn Solver,
    opts: BuildOptions,
) -> Result<Empire, EmpireError> {
    let mut ctx = Ctx::new(p, d, opts)?;
    let top = d.top();
    let tau0 = ctx.checked(Territory::from_marking(&p.initial))?;
    let init = EmpireState {
        territory: ctx.saturated_successor(&top, &[], tau0, solver, None)?,
        law: top,
    };
    ctx.ensure_safe(&init)?;
    let mut states = Vec::new();
    let mut index = HashMap::new();
    let mut queue = VecDeque::new();
    let mut edges = BTreeMap::new();
    intern_state(&mut states, &mut index, &mut queue, init);
    while let Some(q) = queue.pop_front() {
        let s = states[q].clone();
        for t in p.trans_ids() {
            if !enabled_in_territory(p, &s.territory, t) {
                continue;
            }
            let law = d.post(p, &s.law, t, solver)?;
            if law.is_bottom() {
                continue;
            }
            if law == s.law && fires_territory(p, &s.territory, t, &s.territory) {
                edges.insert((q, t), q);
                continue;
            }
            let rb = bystanders(p, t, &s.territory);
            let start = ctx.checked(replaced(p, t, &s.territory)?)?;
            let tau = ctx.saturated_successor(&law, &rb, start, solver, Some((&s.territory, t)))?;
            let next = EmpireState { territory: tau, law };
            ctx.ensure_safe(&next)?;
            let j = intern_state(&mut states, &mut index, &mut queue, next);
            edges.insert((q, t), j);
        }
    }
    Ok(Empire {
        states,
        initial: 0,
        edges,
        diagnostics: ctx.diagnostics,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpireCondition {
    InitialLaw,
    InitialTerritory,
    InductiveLaw,
    InductiveTerritory,
    Safe,
    Territory,
}

impl fmt::Display for EmpireCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EmpireCondition::InitialLaw => "initial-law",
            EmpireCondition::InitialTerritory => "initial-territory",
            EmpireCondition::InductiveLaw => "inductive-law",
            EmpireCondition::InductiveTerritory => "inductive-territory",
            EmpireCondition::Safe => "safe",
            EmpireCondition::Territory => "territory",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EmpireViolation {
    pub condition: EmpireCondition,
    pub state: usize,
    pub transition: Option<String>,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmpireReport {
    pub violations: Vec<EmpireViolation>,
    pub unknown: Vec<String>,
}

impl EmpireReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty() && self.unknown.is_empty()
    }

    pub fn violated(&self, c: EmpireCondition) -> bool {
        self.violations.iter().any(|v| v.condition == c)
    }
}

fn unsat(f: Term, solver: &mut dyn Solver) -> Result<bool, String> {
    match solver.check(&Query::from_assertions(vec![f])) {
        SatResult::Unsat => Ok(true),
        SatResult::Sat(_) => Ok(false),
        SatResult::Unknown(r) => Err(r),
    }
}

/// Checks the five validity conditions plus territory well-formedness.
pub fn check_empire_valid(p: &PetriProgram, d: &InvariantDomain, e: &Empire, solver: &mut dyn Solver) -> Result<EmpireReport, EmpireError> {
    let reach = explore(p, DEFAULT_MARKING_LIMIT)?;
    let co = crate::petri::co_related(p, &reach);
    let mut rep = EmpireReport::default();
    let violation = |rep: &mut EmpireReport, condition, state, t: Option<TransId>, detail: String| {
        rep.violations.push(EmpireViolation {
            condition,
            state,
            transition: t.map(|t| p.trans(t).name.clone()),
            detail,
        });
    };
    let q0 = e.initial;
    let init = &e.states[q0];
    match unsat(Term::not(d.formula(&init.law)), solver) {
        Ok(true) => {}
        Ok(false) => violation(&mut rep, EmpireCondition::InitialLaw, q0, None, format!("law {} is not valid", d.formula(&init.law))),
        Err(r) => rep.unknown.push(format!("initial-law: {r}")),
    }
    if !treaty_contains(&init.territory, &p.initial) {
        violation(
            &mut rep,
            EmpireCondition::InitialTerritory,
            q0,
            None,
            format!("{} not in treaty of {}", p.show_marking(&p.initial), init.territory.show(p)),
        );
    }
    for (q, s) in e.states.iter().enumerate() {
        if let Err(reason) = check_territory(&s.territory, &co, &reach, DEFAULT_TREATY_BOUND) {
            violation(&mut rep, EmpireCondition::Territory, q, None, reason);
        }
        let law = d.formula(&s.law);
        for t in p.trans_ids() {
            if !enabled_in_territory(p, &s.territory, t) {
                if e.delta(q, t).is_some() {
                    violation(&mut rep, EmpireCondition::InductiveTerritory, q, Some(t), "edge for a transition not enabled".into());
                }
                continue;
            }
            let stmt = &p.trans(t).stmt;
            let via_edge = match e.delta(q, t) {
                Some(q2) => check_hoare(&law, stmt, &d.formula(&e.states[q2].law), &p.decls, solver),
                None => HoareResult::Fails {
                    pre: Default::default(),
                    post: Default::default(),
                },
            };
            let ok = match via_edge {
                HoareResult::Holds => Ok(true),
                HoareResult::Unknown(r) => Err(r),
                HoareResult::Fails { .. } => match check_hoare(&law, stmt, &Term::ff(), &p.decls, solver) {
                    HoareResult::Holds => Ok(true),
                    HoareResult::Fails { .. } => Ok(false),
                    HoareResult::Unknown(r) => Err(r),
                },
            };
            match ok {
                Ok(true) => {}
                Ok(false) => violation(
                    &mut rep,
                    EmpireCondition::InductiveLaw,
                    q,
                    Some(t),
                    match e.delta(q, t) {
                        Some(q2) => format!("law of q{q} does not establish law of q{q2}"),
                        None => "no edge, and the transition is not infeasible".into(),
                    },
                ),
                Err(r) => rep.unknown.push(format!("inductive-law q{q} {}: {r}", p.trans(t).name)),
            }
            if let Some(q2) = e.delta(q, t) {
                if !fires_territory(p, &s.territory, t, &e.states[q2].territory) {
                    violation(
                        &mut rep,
                        EmpireCondition::InductiveTerritory,
                        q,
                        Some(t),
                        format!("{} does not fire into {}", s.territory.show(p), e.states[q2].territory.show(p)),
                    );
                }
            }
        }
        if s.territory.places().any(|x| p.errors.contains(&x)) {
            match unsat(law.clone(), solver) {
                Ok(true) => {}
                Ok(false) => violation(&mut rep, EmpireCondition::Safe, q, None, format!("error place with law {law}")),
                Err(r) => rep.unknown.push(format!("safe q{q}: {r}")),
            }
        }
    }
    Ok(rep)
}

fn treaty_contains(tau: &Territory, m: &Marking) -> bool {
    m.len() == tau.len()
        && tau
            .regions()
            .iter()
            .all(|r| m.places().iter().filter(|q| r.contains(**q)).count() == 1)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct StateJson {
    pub id: usize,
    pub regions: Vec<Vec<String>>,
    /// Component indices; `None` for the bottom vector.
    pub law: Option<Vec<usize>>,
    pub law_text: String,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct EdgeJson {
    pub from: usize,
    pub transition: String,
    pub to: usize,
}

/// On-disk empire format.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct EmpireJson {
    pub initial: usize,
    pub states: Vec<StateJson>,
    pub edges: Vec<EdgeJson>,
    /// Ghost value carried by each state in an imperial annotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ghost_values: Option<Vec<i64>>,
}

impl Empire {
    pub fn to_raw(&self, p: &PetriProgram, d: &InvariantDomain) -> EmpireJson {
        EmpireJson {
            initial: self.initial,
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, s)| StateJson {
                    id,
                    regions: s
                        .territory
                        .regions()
                        .iter()
                        .map(|r| r.places().iter().map(|q| p.place_name(*q).to_string()).collect())
                        .collect(),
                    law: match &s.law {
                        LawVector::Bottom => None,
                        LawVector::Laws(v) => Some(v.clone()),
                    },
                    law_text: d.formula(&s.law).to_string(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|(&(from, t), &to)| EdgeJson {
                    from,
                    transition: p.trans(t).name.clone(),
                    to,
                })
                .collect(),
            ghost_values: None,
        }
    }

    pub fn from_raw(raw: &EmpireJson, p: &PetriProgram, d: &InvariantDomain) -> Result<Empire, EmpireError> {
        let mut states = Vec::new();
        for (i, s) in raw.states.iter().enumerate() {
            if s.id != i {
                return Err(EmpireError::Format(format!("state ids must be 0..n in order, found {} at {i}", s.id)));
            }
            let mut regions = Vec::new();
            for r in &s.regions {
                let places = r
                    .iter()
                    .map(|n| p.place(n).ok_or_else(|| EmpireError::Format(format!("unknown place `{n}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if places.is_empty() {
                    return Err(EmpireError::Format("empty region".into()));
                }
                regions.push(Region::new(places));
            }
            let law = match &s.law {
                None => LawVector::Bottom,
                Some(v) => {
                    if v.len() != d.len() || v.iter().zip(&d.components).any(|(i, c)| *i >= c.size()) {
                        return Err(EmpireError::Format(format!("law of state {i} does not fit the domain")));
                    }
                    d.vector(v.clone())
                }
            };
            states.push(EmpireState {
                territory: Territory::new(regions),
                law,
            });
        }
        if raw.initial >= states.len() {
            return Err(EmpireError::Format("initial state out of range".into()));
        }
        let mut edges = BTreeMap::new();
        for e in &raw.edges {
            let t = p
                .transition(&e.transition)
                .ok_or_else(|| EmpireError::Format(format!("unknown transition `{}`", e.transition)))?;
            if e.from >= states.len() || e.to >= states.len() {
                return Err(EmpireError::Format("edge endpoint out of range".into()));
            }
            edges.insert((e.from, t), e.to);
        }
        Ok(Empire {
            states,
            initial: raw.initial,
            edges,
            diagnostics: Vec::new(),
        })
    }
}
