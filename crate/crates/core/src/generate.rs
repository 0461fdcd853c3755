//! Random one-safe fork/join programs, predicate domains for them, and
//! certificate mutations.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::annotation::{GhostDomain, OgAnnotation};
use crate::domain::{DomainComponent, InvariantDomain};
use crate::logic::{Kind, Op, Sort, Term, Value};
use crate::petri::{PetriProgram, ProgramJson, TransitionJson, VarJson};

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub min_threads: usize,
    pub max_threads: usize,
    pub max_places: usize,
    pub vars: usize,
    /// Steps per thread body.
    pub max_body: usize,
    pub max_const: i64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            min_threads: 2,
            max_threads: 3,
            max_places: 20,
            vars: 3,
            max_body: 4,
            max_const: 3,
        }
    }
}

const THREAD_PREFIX: [&str; 3] = ["a", "b", "c"];
const VARS: [&str; 3] = ["x", "y", "z"];

struct Builder {
    transitions: Vec<TransitionJson>,
}

impl Builder {
    fn add(&mut self, pre: &[&str], succ: &[&str], assume: Option<String>, assign: BTreeMap<String, String>) {
        self.transitions.push(TransitionJson {
            id: format!("t{}", self.transitions.len()),
            pre: pre.iter().map(|s| s.to_string()).collect(),
            succ: succ.iter().map(|s| s.to_string()).collect(),
            assume,
            assign,
            havoc: Vec::new(),
        });
    }
}

fn lit(c: i64) -> String {
    if c < 0 {
        format!("(- {})", -c)
    } else {
        c.to_string()
    }
}

fn atom<R: Rng>(rng: &mut R, vars: &[&str], cfg: &GenConfig) -> (String, String) {
    let v = *vars.choose(rng).expect("variables");
    let c = rng.random_range(-cfg.max_const..=cfg.max_const);
    match rng.random_range(0..4) {
        0 => (format!("(>= {v} {})", lit(c)), format!("(< {v} {})", lit(c))),
        1 => (format!("(<= {v} {})", lit(c)), format!("(> {v} {})", lit(c))),
        2 => (format!("(> {v} {})", lit(c)), format!("(<= {v} {})", lit(c))),
        _ => {
            let w = *vars.choose(rng).expect("variables");
            if w == v {
                (format!("(= {v} {})", lit(c)), format!("(distinct {v} {})", lit(c)))
            } else {
                (format!("(<= {v} {w})"), format!("(> {v} {w})"))
            }
        }
    }
}

fn error_guard<R: Rng>(rng: &mut R, vars: &[&str], cfg: &GenConfig) -> String {
    let (a, _) = atom(rng, vars, cfg);
    let (b, _) = atom(rng, vars, cfg);
    format!("(and {a} {b})")
}

fn update<R: Rng>(rng: &mut R, own: &str, vars: &[&str], cfg: &GenConfig) -> BTreeMap<String, String> {
    // Threads mostly write their own variable.
    let target = if rng.random_bool(0.8) { own } else { *vars.choose(rng).expect("variables") };
    let c = rng.random_range(-cfg.max_const..=cfg.max_const);
    let rhs = match rng.random_range(0..3) {
        0 => lit(c),
        1 => format!("(+ {target} {})", lit(c.abs().max(1))),
        _ => {
            let w = *vars.choose(rng).expect("variables");
            format!("(+ {w} {})", lit(c))
        }
    };
    BTreeMap::from([(target.to_string(), rhs)])
}

/// A fork of 2-3 threads with sequential bodies (assignments, assumptions,
/// branches, self-loops) joined at the end, plus guarded error exits from
/// thread ends and the join place. One-safe by construction.
pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> PetriProgram {
    let threads = rng.random_range(cfg.min_threads..=cfg.max_threads.min(3));
    // Every variable is some thread's own and is initialized by it.
    let vars: Vec<&str> = VARS[..cfg.vars.clamp(1, threads)].to_vec();
    // start, join, and up to two error places
    let budget = cfg.max_places.saturating_sub(4) / threads;
    let mut places = vec!["s".to_string()];
    let mut b = Builder {
        transitions: Vec::new(),
    };
    let mut bodies: Vec<Vec<String>> = Vec::new();
    for (k, prefix) in THREAD_PREFIX.iter().enumerate().take(threads) {
        let steps = rng.random_range(1..=cfg.max_body.min(budget.saturating_sub(1)).max(1));
        let body: Vec<String> = (0..=steps).map(|i| format!("{prefix}{i}")).collect();
        places.extend(body.iter().cloned());
        let own = vars[k % vars.len()];
        for i in 0..steps {
            let (from, to) = (body[i].as_str(), body[i + 1].as_str());
            if i == 0 {
                let init = BTreeMap::from([(own.to_string(), lit(rng.random_range(0..=cfg.max_const)))]);
                b.add(&[from], &[to], None, init);
                continue;
            }
            match rng.random_range(0..4) {
                0 => b.add(&[from], &[to], None, update(rng, own, &vars, cfg)),
                1 => {
                    let (g, _) = atom(rng, &vars, cfg);
                    b.add(&[from], &[to], Some(g), BTreeMap::new());
                }
                2 => {
                    let (g, ng) = atom(rng, &vars, cfg);
                    b.add(&[from], &[to], Some(g), update(rng, own, &vars, cfg));
                    b.add(&[from], &[to], Some(ng), update(rng, own, &vars, cfg));
                }
                _ => {
                    let (g, ng) = atom(rng, &vars, cfg);
                    b.add(&[from], &[from], Some(g), update(rng, own, &vars, cfg));
                    b.add(&[from], &[to], Some(ng), BTreeMap::new());
                }
            }
        }
        bodies.push(body);
    }
    let entries: Vec<&str> = bodies.iter().map(|b| b[0].as_str()).collect();
    let exits: Vec<&str> = bodies.iter().map(|b| b.last().expect("nonempty").as_str()).collect();
    b.add(&["s"], &entries, None, BTreeMap::new());
    places.push("j".into());
    b.add(&exits, &["j"], None, BTreeMap::new());

    let mut errors = vec!["e0".to_string()];
    let g = error_guard(rng, &vars, cfg);
    b.add(&["j"], &["e0"], Some(g), BTreeMap::new());
    if rng.random_bool(0.5) {
        errors.push("e1".into());
        let k = rng.random_range(0..threads);
        let g = error_guard(rng, &vars, cfg);
        b.add(&[exits[k]], &["e1"], Some(g), BTreeMap::new());
    }
    places.extend(errors.iter().cloned());

    let raw = ProgramJson {
        variables: vars
            .iter()
            .map(|v| VarJson {
                name: v.to_string(),
                sort: Sort::Int,
            })
            .collect(),
        places,
        error_places: errors,
        initial_marking: vec!["s".into()],
        transitions: b.transitions,
    };
    PetriProgram::from_raw(&raw).expect("generated programs are well-formed")
}

fn atoms_of(t: &Term, out: &mut Vec<Term>) {
    match t.kind() {
        Kind::App(Op::And | Op::Or | Op::Not | Op::Implies, cs) => cs.iter().for_each(|c| atoms_of(c, out)),
        Kind::App(Op::Lt | Op::Le | Op::Gt | Op::Ge | Op::Eq | Op::Distinct, _) => out.push(t.clone()),
        _ => {}
    }
}

/// `¬a` as an atom of the same variables.
fn negate(a: &Term) -> Term {
    let Kind::App(op, cs) = a.kind() else { return Term::not(a.clone()) };
    let flip = match op {
        Op::Lt => Op::Ge,
        Op::Le => Op::Gt,
        Op::Gt => Op::Le,
        Op::Ge => Op::Lt,
        Op::Eq => Op::Distinct,
        Op::Distinct => Op::Eq,
        _ => return Term::not(a.clone()),
    };
    Term::app(flip, cs.to_vec()).expect("same sorts")
}

/// One predicate-abstraction component per variable over the guard atoms,
/// their negations, and `v ≥ c` for assigned constants, in first-seen
/// order, at most `per_component` each.
pub fn predicate_domain(p: &PetriProgram, per_component: usize) -> InvariantDomain {
    let mut atoms = Vec::new();
    for t in &p.transitions {
        let mut a = Vec::new();
        atoms_of(&t.stmt.guard, &mut a);
        for x in a {
            atoms.push(x.clone());
            atoms.push(negate(&x));
        }
        for (v, e) in &t.stmt.assigns {
            if let Some(c) = e.as_int() {
                atoms.push(Term::app(Op::Ge, vec![Term::var(v, Sort::Int), Term::int(c)]).expect("ints"));
            }
        }
    }
    let mut groups: BTreeMap<String, Vec<Term>> = p.decls.keys().map(|v| (v.clone(), Vec::new())).collect();
    let mut seen = BTreeSet::new();
    for a in atoms {
        if !seen.insert(a.id()) {
            continue;
        }
        let Some((v, _)) = a.free_vars().into_iter().next() else { continue };
        let g = groups.get_mut(&v).expect("declared");
        if g.len() < per_component {
            g.push(a);
        }
    }
    let comps = groups
        .into_values()
        .filter(|g| !g.is_empty())
        .enumerate()
        .map(|(k, g)| DomainComponent::predicates(g, k).expect("bounded predicate count"))
        .collect::<Vec<_>>();
    let comps = if comps.is_empty() {
        vec![DomainComponent::predicates(Vec::new(), 0).expect("empty")]
    } else {
        comps
    };
    InvariantDomain::new(comps).expect("nonempty")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mutation {
    DropConjunct { place: usize },
    FlipUpdate { transition: usize },
    PerturbRho { ghost: String },
}

/// Rebuilds `t` with the node `target` replaced by `with`.
fn replace(t: &Term, target: &Term, with: &Term, memo: &mut BTreeMap<u64, Term>) -> Term {
    if t == target {
        return with.clone();
    }
    if let Some(r) = memo.get(&t.id()) {
        return r.clone();
    }
    let r = match t.kind() {
        Kind::App(op, cs) => {
            let cs2: Vec<Term> = cs.iter().map(|c| replace(c, target, with, memo)).collect();
            Term::app(*op, cs2).expect("sorts preserved")
        }
        _ => t.clone(),
    };
    memo.insert(t.id(), r.clone());
    r
}

/// Applies one random mutation, or `None` when the chosen kind has no
/// applicable site.
pub fn mutate<R: Rng>(og: &OgAnnotation, rng: &mut R) -> Option<(Mutation, OgAnnotation)> {
    let mut out = og.clone();
    match rng.random_range(0..3) {
        0 => {
            let place = rng.random_range(0..og.omega.len());
            let ands: Vec<Term> = og.omega[place]
                .post_order()
                .into_iter()
                .filter(|n| matches!(n.kind(), Kind::App(Op::And, cs) if cs.len() >= 2))
                .collect();
            let node = ands.choose(rng)?;
            let mut cs = node.children().to_vec();
            cs.remove(rng.random_range(0..cs.len()));
            out.omega[place] = replace(&og.omega[place], node, &Term::and(cs), &mut BTreeMap::new());
            Some((Mutation::DropConjunct { place }, out))
        }
        1 => {
            let sites: Vec<usize> = (0..og.gamma.len()).filter(|t| !og.gamma[*t].is_empty()).collect();
            let t = *sites.choose(rng)?;
            let (var, e) = og.gamma[t].iter().next().map(|(v, e)| (v.clone(), e.clone()))?;
            let ghost = og.ghosts.iter().find(|g| g.name == var)?;
            let flipped = match ghost.domain {
                GhostDomain::Bool => Term::not(e.clone()),
                GhostDomain::State { count } => {
                    // Redirect one case of the conditional to another state.
                    let ites: Vec<Term> = e
                        .post_order()
                        .into_iter()
                        .filter(|n| matches!(n.kind(), Kind::App(Op::Ite, cs) if cs[1].as_int().is_some()))
                        .collect();
                    let node = ites.choose(rng)?;
                    let to = node.children()[1].as_int().expect("literal");
                    let new_to = (to + rng.random_range(1..count.max(2) as i64)) % count.max(2) as i64;
                    let cs = node.children();
                    let rebuilt = Term::ite(cs[0].clone(), Term::int(new_to), cs[2].clone());
                    replace(&e, node, &rebuilt, &mut BTreeMap::new())
                }
            };
            if flipped == e {
                return None;
            }
            out.gamma[t].insert(var, flipped);
            Some((Mutation::FlipUpdate { transition: t }, out))
        }
        _ => {
            let g = og.ghosts.choose(rng)?;
            let v = match (g.domain, og.rho.get(&g.name)?) {
                (GhostDomain::Bool, Value::Bool(b)) => Value::Bool(!b),
                (GhostDomain::State { count }, Value::Int(i)) if count > 1 => {
                    Value::Int((i + rng.random_range(1..count as i64)) % count as i64)
                }
                _ => return None,
            };
            out.rho.insert(g.name.clone(), v);
            Some((Mutation::PerturbRho { ghost: g.name.clone() }, out))
        }
    }
}
