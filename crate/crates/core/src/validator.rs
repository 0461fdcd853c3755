//! Certificate checking. Each verification condition is a closed query
//! that must be unsatisfiable; it is discharged by an SMT solver or
//! refuted by bounded concrete execution.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::annotation::{GhostDomain, OgAnnotation};
use crate::logic::{eval_bool, Compiled, Decls, LogicError, Sort, Term, Valuation, Value, POST_SUFFIX};
use crate::petri::{co_marked, explore, CoMarked, PetriError, PetriProgram, DEFAULT_MARKING_LIMIT};
use crate::solver::{Query, SatResult, SmtSession, Solver, SolverConfig};

/// Suffix of the state between the statement and the ghost update.
pub const MID_SUFFIX: &str = "!mid";

/// Default value bound of the oracle.
pub const DEFAULT_ORACLE_BOUND: i64 = 4;

/// Valuations the oracle will try per VC before giving up on it.
pub const ORACLE_BUDGET: u64 = 1 << 24;

#[derive(Debug, Error)]
pub enum ValidatorError {
    #[error(transparent)]
    Petri(#[from] PetriError),
    #[error("annotation mentions `{0}`, which is neither a program variable nor a ghost")]
    Undeclared(String),
    #[error("annotation shape: {0}")]
    Shape(String),
    #[error("cannot write VC scripts: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VcKind {
    Initial,
    Inductive,
    InterferenceFree,
    Safe,
}

impl fmt::Display for VcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VcKind::Initial => "initial",
            VcKind::Inductive => "inductive",
            VcKind::InterferenceFree => "interference_free",
            VcKind::Safe => "safe",
        })
    }
}

/// What the oracle needs to replay a VC concretely.
#[derive(Clone, Debug)]
enum Shape {
    /// `pre` is unsatisfiable (Initial, Safe).
    State { pre: Term },
    /// `{pre} λ(t);γ(t) {post}`.
    Step { pre: Term, transition: usize, post: Term },
}

#[derive(Clone, Debug)]
pub struct Vc {
    pub kind: VcKind,
    /// Place, transition, or `place@transition`.
    pub subject: String,
    pub description: String,
    pub query: Query,
    shape: Shape,
}

impl Vc {
    pub fn name(&self) -> String {
        format!("vc_{}_{}", self.kind, self.subject)
    }

    /// The conjunction whose satisfiability refutes the VC.
    pub fn formula(&self) -> Term {
        Term::and(self.query.assertions.clone())
    }
}

fn suffixed(decls: &Decls, suffix: &str) -> BTreeMap<String, Term> {
    decls.iter().map(|(n, s)| (n.clone(), Term::var(&format!("{n}{suffix}"), *s))).collect()
}

/// `0 ≤ g < count` for every state ghost.
fn ghost_domain(og: &OgAnnotation) -> Term {
    Term::and(
        og.ghosts
            .iter()
            .filter_map(|g| match g.domain {
                GhostDomain::State { count } => {
                    let v = Term::var(&g.name, Sort::Int);
                    Some(Term::and(vec![
                        Term::le(Term::int(0), v.clone()),
                        Term::lt(v, Term::int(count as i64)),
                    ]))
                }
                GhostDomain::Bool => None,
            })
            .collect(),
    )
}

/// Relation from unprimed through `!mid` to `!post` copies: the statement
/// moves program variables while ghosts stay, then the update reads the
/// intermediate state and moves ghosts while program variables stay.
fn step_relation(p: &PetriProgram, og: &OgAnnotation, decls: &Decls, t: usize) -> Term {
    let mid = |n: &str| format!("{n}{MID_SUFFIX}");
    let post = |n: &str| format!("{n}{POST_SUFFIX}");
    let mut parts = vec![p.transitions[t].stmt.relation(&p.decls, &|n| n.to_string(), &mid)];
    for g in &og.ghosts {
        parts.push(Term::eq(Term::var(&mid(&g.name), g.domain.sort()), Term::var(&g.name, g.domain.sort())));
    }
    let at_mid = suffixed(decls, MID_SUFFIX);
    for (n, s) in decls {
        let rhs = match og.gamma[t].get(n) {
            Some(e) => e.substitute(&at_mid).expect("sort-preserving renaming"),
            None => at_mid[n].clone(),
        };
        parts.push(Term::eq(Term::var(&post(n), *s), rhs));
    }
    Term::and(parts)
}

fn check_symbols(og: &OgAnnotation, p: &PetriProgram, decls: &Decls) -> Result<(), ValidatorError> {
    if og.omega.len() != p.places.len() || og.gamma.len() != p.transitions.len() {
        return Err(ValidatorError::Shape("omega and gamma must be total".into()));
    }
    let terms = og.omega.iter().chain(og.gamma.iter().flat_map(|u| u.values()));
    for t in terms {
        for (n, s) in t.free_vars() {
            if decls.get(&n) != Some(&s) {
                return Err(ValidatorError::Undeclared(n));
            }
        }
    }
    for u in &og.gamma {
        if let Some(v) = u.keys().find(|v| !og.ghosts.iter().any(|g| g.name == **v)) {
            return Err(ValidatorError::Undeclared(v.clone()));
        }
    }
    Ok(())
}

/// Initial, Inductive, InterferenceFree and Safe conditions, in that order.
pub fn generate_vcs(p: &PetriProgram, og: &OgAnnotation, co: &CoMarked) -> Result<Vec<Vc>, ValidatorError> {
    let decls = og.decls(p);
    check_symbols(og, p, &decls)?;
    let dom = ghost_domain(og);
    let at_post = suffixed(&decls, POST_SUFFIX);
    let omega = |q: usize| og.omega[q].clone();
    let omega_post = |q: usize| og.omega[q].substitute(&at_post).expect("sort-preserving renaming");
    let mut out = Vec::new();

    let mut push = |kind, subject: String, description: String, assertions: Vec<Term>, shape| {
        let mut query = Query::from_assertions(assertions);
        query.decls.sort();
        out.push(Vc {
            kind,
            subject,
            description,
            query,
            shape,
        });
    };

    let rho = Term::and(og.rho.iter().map(|(g, v)| Term::eq(Term::var(g, v.sort()), v.to_term())).collect());
    for &q in p.initial.places() {
        let pre = Term::and(vec![rho.clone(), Term::not(omega(q.0))]);
        push(
            VcKind::Initial,
            p.place_name(q).to_string(),
            format!("initial ghost values establish the annotation of {}", p.place_name(q)),
            vec![pre.clone()],
            Shape::State { pre },
        );
    }
    for t in p.trans_ids() {
        let tr = p.trans(t);
        let pre = Term::and(std::iter::once(dom.clone()).chain(tr.pre.iter().map(|q| omega(q.0))).collect());
        let post = Term::and(tr.succ.iter().map(|q| omega(q.0)).collect());
        let negated = Term::not(Term::and(tr.succ.iter().map(|q| omega_post(q.0)).collect()));
        push(
            VcKind::Inductive,
            tr.name.clone(),
            format!("{} preserves the annotations of its pre- and post-places", tr.name),
            vec![pre.clone(), step_relation(p, og, &decls, t.0), negated],
            Shape::Step {
                pre,
                transition: t.0,
                post,
            },
        );
    }
    for (q, t) in co.pairs() {
        let tr = p.trans(t);
        let pre = Term::and(
            [dom.clone(), omega(q.0)]
                .into_iter()
                .chain(tr.pre.iter().map(|r| omega(r.0)))
                .collect(),
        );
        push(
            VcKind::InterferenceFree,
            format!("{}@{}", p.place_name(q), tr.name),
            format!("{} does not interfere with the annotation of {}", tr.name, p.place_name(q)),
            vec![pre.clone(), step_relation(p, og, &decls, t.0), Term::not(omega_post(q.0))],
            Shape::Step {
                pre,
                transition: t.0,
                post: omega(q.0),
            },
        );
    }
    for &q in &p.errors {
        let pre = Term::and(vec![dom.clone(), omega(q.0)]);
        push(
            VcKind::Safe,
            p.place_name(q).to_string(),
            format!("the annotation of error place {} is unsatisfiable", p.place_name(q)),
            vec![pre.clone()],
            Shape::State { pre },
        );
    }
    Ok(out)
}

/// VCs against the co-marking relation of the full reachability graph.
pub fn generate_vcs_for(p: &PetriProgram, og: &OgAnnotation) -> Result<Vec<Vc>, ValidatorError> {
    let g = explore(p, DEFAULT_MARKING_LIMIT)?;
    generate_vcs(p, og, &co_marked(p, &g))
}

pub fn dump_vcs(vcs: &[Vc], dir: &Path) -> Result<(), ValidatorError> {
    std::fs::create_dir_all(dir)?;
    for vc in vcs {
        let script = format!("; {}\n{}", vc.description, vc.query.to_script());
        std::fs::write(dir.join(format!("{}.smt2", vc.name())), script)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VcResult {
    /// Discharged.
    Unsat,
    /// Refuted; the model names unprimed, `!mid` and `!post` copies.
    Sat { model: Valuation },
    /// No counterexample with values in the oracle bound.
    BoundedUnsat,
    Unknown { reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    BoundedValid,
    Invalid,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Valid => "valid",
            Verdict::BoundedValid => "bounded_valid",
            Verdict::Invalid => "invalid",
            Verdict::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VcOutcome {
    pub name: String,
    pub kind: VcKind,
    #[serde(flatten)]
    pub result: VcResult,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub verdict: Verdict,
    pub vcs: Vec<VcOutcome>,
    pub timing_ms: u128,
}

impl Report {
    pub fn failed(&self) -> impl Iterator<Item = &VcOutcome> {
        self.vcs.iter().filter(|v| matches!(v.result, VcResult::Sat { .. }))
    }
}

/// Any refutation wins, then any unknown; bounded answers weaken the rest.
pub fn verdict_of(results: &[VcResult]) -> Verdict {
    if results.iter().any(|r| matches!(r, VcResult::Sat { .. })) {
        Verdict::Invalid
    } else if results.iter().any(|r| matches!(r, VcResult::Unknown { .. })) {
        Verdict::Unknown
    } else if results.iter().any(|r| matches!(r, VcResult::BoundedUnsat)) {
        Verdict::BoundedValid
    } else {
        Verdict::Valid
    }
}

pub fn discharge_smt(vc: &Vc, solver: &mut dyn Solver) -> VcResult {
    match solver.check(&vc.query) {
        SatResult::Unsat => VcResult::Unsat,
        SatResult::Sat(model) => VcResult::Sat { model },
        SatResult::Unknown(reason) => VcResult::Unknown { reason },
    }
}

/// Slot layout and value ranges for concrete replay.
struct Space {
    vars: Vec<String>,
    ranges: Vec<(i64, i64)>,
}

impl Space {
    fn new(decls: &Decls, og: &OgAnnotation, bound: i64, relevant: &BTreeSet<String>) -> Space {
        let mut vars = Vec::new();
        let mut ranges = Vec::new();
        for (n, s) in decls {
            vars.push(n.clone());
            let ghost = og.ghosts.iter().find(|g| g.name == *n);
            ranges.push(if !relevant.contains(n) {
                (0, 0)
            } else {
                match (ghost.map(|g| g.domain), s) {
                    (Some(GhostDomain::State { count }), _) => (0, count as i64 - 1),
                    (_, Sort::Bool) => (0, 1),
                    (_, Sort::Int) => (-bound, bound),
                }
            });
        }
        Space { vars, ranges }
    }

    fn count(&self) -> u64 {
        self.ranges
            .iter()
            .map(|(lo, hi)| (hi - lo + 1) as u64)
            .try_fold(1u64, |a, b| a.checked_mul(b))
            .unwrap_or(u64::MAX)
    }

    /// Advances `slots` in mixed radix; false after the last valuation.
    fn next(&self, slots: &mut [i64]) -> bool {
        for (i, (lo, hi)) in self.ranges.iter().enumerate() {
            if slots[i] < *hi {
                slots[i] += 1;
                return true;
            }
            slots[i] = *lo;
        }
        false
    }

    fn start(&self) -> Vec<i64> {
        self.ranges.iter().map(|r| r.0).collect()
    }

    fn valuation(&self, decls: &Decls, slots: &[i64], suffix: &str) -> Valuation {
        self.vars
            .iter()
            .zip(slots)
            .map(|(n, v)| {
                let value = match decls[n] {
                    Sort::Bool => Value::Bool(*v != 0),
                    Sort::Int => Value::Int(*v),
                };
                (format!("{n}{suffix}"), value)
            })
            .collect()
    }
}

/// Refutes a VC by enumerating pre-states (and havoc choices) with integer
/// values in `[-bound, bound]` and ghosts in their domains, executing the
/// transition concretely. Every witness is re-checked against the VC
/// formula before it is reported.
pub fn discharge_oracle(vc: &Vc, p: &PetriProgram, og: &OgAnnotation, bound: i64) -> VcResult {
    match oracle_search(vc, p, og, bound) {
        Ok(Some(model)) => match eval_bool(&vc.formula(), &model) {
            Ok(true) => VcResult::Sat { model },
            other => VcResult::Unknown {
                reason: format!("oracle witness not confirmed by the VC formula: {other:?}"),
            },
        },
        Ok(None) => VcResult::BoundedUnsat,
        Err(reason) => VcResult::Unknown { reason },
    }
}

fn oracle_search(vc: &Vc, p: &PetriProgram, og: &OgAnnotation, bound: i64) -> Result<Option<Valuation>, String> {
    let decls = og.decls(p);
    let err = |e: LogicError| e.to_string();
    let mut relevant: BTreeSet<String> = BTreeSet::new();
    let note = |r: &mut BTreeSet<String>, t: &Term| r.extend(t.free_vars().into_iter().map(|v| v.0));
    let (pre, step) = match &vc.shape {
        Shape::State { pre } => {
            note(&mut relevant, pre);
            (pre, None)
        }
        Shape::Step { pre, transition, post } => {
            note(&mut relevant, pre);
            note(&mut relevant, post);
            relevant.extend(p.transitions[*transition].stmt.vars());
            for e in og.gamma[*transition].values() {
                note(&mut relevant, e);
            }
            (pre, Some((*transition, post)))
        }
    };
    let space = Space::new(&decls, og, bound, &relevant);
    let compile = |t: &Term| Compiled::new(t, &space.vars).map_err(err);
    let slot = |n: &str| space.vars.iter().position(|v| v == n).expect("declared");

    // Ghost values are enumerated outermost; the precondition specialized
    // to each usually folds to false or to one state's law.
    let ghost_decls: Decls = og
        .ghosts
        .iter()
        .filter(|g| relevant.contains(&g.name))
        .map(|g| (g.name.clone(), g.domain.sort()))
        .collect();
    let ghost_space = Space::new(&ghost_decls, og, bound, &relevant);
    let ghost_slots: Vec<usize> = ghost_space.vars.iter().map(|g| slot(g)).collect();

    let compiled_step = match step {
        None => None,
        Some((t, post)) => {
            let st = &p.transitions[t].stmt;
            let assigns: Vec<(usize, Compiled)> =
                st.assigns.iter().map(|(v, e)| Ok((slot(v), compile(e)?))).collect::<Result<_, String>>()?;
            let gamma: Vec<(usize, Compiled)> =
                og.gamma[t].iter().map(|(v, e)| Ok((slot(v), compile(e)?))).collect::<Result<_, String>>()?;
            let havoc_vars: Decls = st.havocs.iter().map(|h| (h.clone(), decls[h])).collect();
            let havoc_space = Space::new(&havoc_vars, og, bound, &st.havocs);
            let havoc_slots: Vec<usize> = havoc_space.vars.iter().map(|h| slot(h)).collect();
            Some(StepCode {
                guard: compile(&st.guard)?,
                post: compile(post)?,
                assigns,
                gamma,
                havoc_space,
                havoc_slots,
            })
        }
    };

    let per_ghost = space
        .count()
        .checked_div(ghost_space.count().max(1))
        .unwrap_or(u64::MAX)
        .saturating_mul(compiled_step.as_ref().map_or(1, |c| c.havoc_space.count()));
    let pre_c = compile(pre)?;
    let mut budget = ORACLE_BUDGET;
    let mut scratch = Vec::new();
    let mut partial: Vec<Option<i64>> = vec![None; space.vars.len()];
    let mut gv = ghost_space.start();
    loop {
        for (k, s) in ghost_slots.iter().enumerate() {
            partial[*s] = Some(gv[k]);
        }
        let pre_k = pre_c.specialize(&partial);
        if pre_k.as_const() != Some(0) {
            if per_ghost > budget {
                return Err(format!("oracle space exceeds the budget of {ORACLE_BUDGET} valuations"));
            }
            budget -= per_ghost;
            let mut sub = Space {
                vars: space.vars.clone(),
                ranges: space.ranges.clone(),
            };
            for (k, s) in ghost_slots.iter().enumerate() {
                sub.ranges[*s] = (gv[k], gv[k]);
            }
            if let Some(model) = search_fixed(&sub, &decls, &pre_k, compiled_step.as_ref(), &mut scratch) {
                return Ok(Some(model));
            }
        }
        if !ghost_space.next(&mut gv) {
            return Ok(None);
        }
    }
}

struct StepCode {
    guard: Compiled,
    post: Compiled,
    assigns: Vec<(usize, Compiled)>,
    gamma: Vec<(usize, Compiled)>,
    havoc_space: Space,
    havoc_slots: Vec<usize>,
}

fn search_fixed(space: &Space, decls: &Decls, pre_c: &Compiled, step: Option<&StepCode>, scratch: &mut Vec<i64>) -> Option<Valuation> {
    let mut slots = space.start();
    let mut mid = slots.clone();
    let mut post_slots = slots.clone();
    loop {
        if pre_c.run(&slots, scratch) == Ok(1) {
            let Some(code) = step else {
                return Some(space.valuation(decls, &slots, ""));
            };
            if code.guard.run(&slots, scratch) == Ok(1) {
                let updates: Option<Vec<(usize, i64)>> =
                    code.assigns.iter().map(|(s, c)| c.run(&slots, scratch).ok().map(|v| (*s, v))).collect();
                if let Some(updates) = updates {
                    let mut h = code.havoc_space.start();
                    loop {
                        mid.copy_from_slice(&slots);
                        for (s, v) in &updates {
                            mid[*s] = *v;
                        }
                        for (k, s) in code.havoc_slots.iter().enumerate() {
                            mid[*s] = h[k];
                        }
                        post_slots.copy_from_slice(&mid);
                        let mut ok = true;
                        for (s, c) in &code.gamma {
                            match c.run(&mid, scratch) {
                                Ok(v) => post_slots[*s] = v,
                                Err(_) => ok = false,
                            }
                        }
                        if ok && code.post.run(&post_slots, scratch) == Ok(0) {
                            let mut model = space.valuation(decls, &slots, "");
                            model.extend(space.valuation(decls, &mid, MID_SUFFIX));
                            model.extend(space.valuation(decls, &post_slots, POST_SUFFIX));
                            return Some(model);
                        }
                        if !code.havoc_space.next(&mut h) {
                            break;
                        }
                    }
                }
            }
        }
        if !space.next(&mut slots) {
            return None;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Smt,
    Oracle { bound: i64 },
    /// Oracle as refuter, then SMT for whatever it could not refute.
    Both { bound: i64 },
}

/// Discharges `vcs` with up to `jobs` independent solver sessions. Results
/// are in VC order regardless of scheduling.
pub fn discharge_all(vcs: &[Vc], p: &PetriProgram, og: &OgAnnotation, mode: Mode, config: &SolverConfig, jobs: usize) -> Vec<VcResult> {
    let needs_smt = |r: &VcResult| !matches!(r, VcResult::Sat { .. });
    let mut results: Vec<Option<VcResult>> = vec![None; vcs.len()];
    if let Mode::Oracle { bound } | Mode::Both { bound } = mode {
        for (i, vc) in vcs.iter().enumerate() {
            results[i] = Some(discharge_oracle(vc, p, og, bound));
        }
    }
    if matches!(mode, Mode::Oracle { .. }) {
        return results.into_iter().map(|r| r.expect("filled")).collect();
    }
    let todo: Vec<usize> = (0..vcs.len()).filter(|i| results[*i].as_ref().is_none_or(needs_smt)).collect();
    let next = Mutex::new(0usize);
    let done = Mutex::new(Vec::new());
    let workers = jobs.max(1).min(todo.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut session = SmtSession::start(config.clone());
                loop {
                    let k = {
                        let mut n = next.lock().expect("unpoisoned");
                        let k = *n;
                        *n += 1;
                        k
                    };
                    let Some(&i) = todo.get(k) else { break };
                    let r = match &mut session {
                        Ok(s) => discharge_smt(&vcs[i], s),
                        Err(e) => VcResult::Unknown { reason: e.to_string() },
                    };
                    done.lock().expect("unpoisoned").push((i, r));
                }
            });
        }
    });
    for (i, r) in done.into_inner().expect("unpoisoned") {
        results[i] = Some(r);
    }
    results.into_iter().map(|r| r.expect("filled")).collect()
}

/// Full pipeline: VCs, discharge, verdict.
pub fn validate(p: &PetriProgram, og: &OgAnnotation, mode: Mode, config: &SolverConfig, jobs: usize) -> Result<Report, ValidatorError> {
    let start = Instant::now();
    let vcs = generate_vcs_for(p, og)?;
    let results = discharge_all(&vcs, p, og, mode, config, jobs);
    Ok(Report {
        verdict: verdict_of(&results),
        vcs: vcs
            .iter()
            .zip(results)
            .map(|(vc, result)| VcOutcome {
                name: vc.name(),
                kind: vc.kind,
                result,
            })
            .collect(),
        timing_ms: start.elapsed().as_millis(),
    })
}

/// Single-session variant for callers that already hold a solver.
pub fn validate_with(p: &PetriProgram, og: &OgAnnotation, solver: &mut dyn Solver) -> Result<Vec<(Vc, VcResult)>, ValidatorError> {
    let vcs = generate_vcs_for(p, og)?;
    Ok(vcs
        .into_iter()
        .map(|vc| {
            let r = discharge_smt(&vc, solver);
            (vc, r)
        })
        .collect())
}
