//! Focus functions: which product components each region of each empire
//! state must carry so that infeasible transitions stay refutable.
//!
//! Components are 0-based internally and 1-based in JSON.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DomainError, InvariantDomain};
use crate::empire::{bystanders, enabled_in_territory, Empire, Region};
use crate::petri::{PetriProgram, TransId};
use crate::solver::Solver;

/// Component sets are bitmasks.
pub const MAX_COMPONENTS: usize = 64;

#[derive(Debug, Error)]
pub enum FocusError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("domain has {0} components; at most {MAX_COMPONENTS} are supported")]
    TooManyComponents(usize),
    #[error("state {state}: transition `{transition}` has no edge but no component refutes it from a pre-region")]
    Inconsistent { state: usize, transition: String },
    #[error("focus JSON: {0}")]
    Format(String),
}

/// `F(q, r)` for every state `q` and region `r ∈ terr(q)`, indexed by the
/// region's position in the territory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Focus {
    pub components: usize,
    sets: Vec<Vec<u64>>,
}

impl Focus {
    pub fn empty(e: &Empire, components: usize) -> Focus {
        Focus {
            components,
            sets: e.states.iter().map(|s| vec![0; s.territory.len()]).collect(),
        }
    }

    /// Every region carries every component.
    pub fn trivial(e: &Empire, components: usize) -> Focus {
        let all = if components == 64 { u64::MAX } else { (1u64 << components) - 1 };
        Focus {
            components,
            sets: e.states.iter().map(|s| vec![all; s.territory.len()]).collect(),
        }
    }

    pub fn get(&self, q: usize, r: usize) -> u64 {
        self.sets[q][r]
    }

    pub fn contains(&self, q: usize, r: usize, i: usize) -> bool {
        self.sets[q][r] & (1 << i) != 0
    }

    /// Adds `i`; true if it was absent.
    pub fn insert(&mut self, q: usize, r: usize, i: usize) -> bool {
        let before = self.sets[q][r];
        self.sets[q][r] |= 1 << i;
        before != self.sets[q][r]
    }

    pub fn remove(&mut self, q: usize, r: usize, i: usize) {
        self.sets[q][r] &= !(1 << i);
    }

    /// 0-based component indices of `F(q, r)`.
    pub fn indices(&self, q: usize, r: usize) -> Vec<usize> {
        (0..self.components).filter(|i| self.contains(q, r, *i)).collect()
    }
}

fn region_index(e: &Empire, q: usize, r: &Region) -> usize {
    e.states[q]
        .territory
        .regions()
        .iter()
        .position(|x| x == r)
        .expect("region of the territory")
}

/// `(q, t, [(r, i)])`: `t` enabled without edge, `r` a pre-region of `t`,
/// and component `i` alone refutes `t`.
type Seeds = Vec<(usize, TransId, Vec<(usize, usize)>)>;

fn b1_obligations(
    p: &PetriProgram,
    d: &InvariantDomain,
    e: &Empire,
    solver: &mut dyn Solver,
) -> Result<Seeds, FocusError> {
    let mut out = Vec::new();
    for (q, s) in e.states.iter().enumerate() {
        for t in p.trans_ids() {
            if !enabled_in_territory(p, &s.territory, t) || e.delta(q, t).is_some() {
                continue;
            }
            let mut refuting = Vec::new();
            for k in 0..d.len() {
                if d.component_post_is_bottom(p, &s.law, k, t, solver)? {
                    refuting.push(k);
                }
            }
            let mut pairs = Vec::new();
            for (ri, r) in s.territory.regions().iter().enumerate() {
                if r.intersects(&p.trans(t).pre) {
                    pairs.extend(refuting.iter().map(|k| (ri, *k)));
                }
            }
            out.push((q, t, pairs));
        }
    }
    Ok(out)
}

/// Least focus containing every B1 seed and closed under the B2/B3
/// propagation rules, with all eligible pairs added at each step.
pub fn compute_focus(p: &PetriProgram, d: &InvariantDomain, e: &Empire, solver: &mut dyn Solver) -> Result<Focus, FocusError> {
    if d.len() > MAX_COMPONENTS {
        return Err(FocusError::TooManyComponents(d.len()));
    }
    let mut f = Focus::empty(e, d.len());
    for (q, t, pairs) in b1_obligations(p, d, e, solver)? {
        if pairs.is_empty() {
            return Err(FocusError::Inconsistent {
                state: q,
                transition: p.trans(t).name.clone(),
            });
        }
        for (r, i) in pairs {
            f.insert(q, r, i);
        }
    }
    let edges: Vec<(usize, TransId, usize)> = e.edges.iter().map(|(&(q, t), &q2)| (q, t, q2)).collect();
    loop {
        let mut changed = false;
        for &(q, t, q2) in &edges {
            let tr = p.trans(t);
            let from = &e.states[q].territory;
            let to = &e.states[q2].territory;
            let mut inherited = 0u64;
            for (ri, r) in to.regions().iter().enumerate() {
                if r.intersects(&tr.succ) {
                    inherited |= f.get(q2, ri);
                }
            }
            for (ri, r) in from.regions().iter().enumerate() {
                if r.intersects(&tr.pre) {
                    let before = f.sets[q][ri];
                    f.sets[q][ri] |= inherited;
                    changed |= before != f.sets[q][ri];
                }
            }
            for r in bystanders(p, t, from) {
                let ri = region_index(e, q, &r);
                let Some(ri2) = to.regions().iter().position(|x| *x == r) else {
                    continue;
                };
                let before = f.sets[q][ri];
                f.sets[q][ri] |= f.get(q2, ri2);
                changed |= before != f.sets[q][ri];
            }
        }
        if !changed {
            return Ok(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FocusViolation {
    pub rule: &'static str,
    pub state: usize,
    pub transition: String,
    pub detail: String,
}

/// Checks B1 (refutation), B2 (inductive edge) and B3 (bystanders) as
/// stated, returning every violated instance.
pub fn check_focus(p: &PetriProgram, d: &InvariantDomain, e: &Empire, f: &Focus, solver: &mut dyn Solver) -> Result<Vec<FocusViolation>, FocusError> {
    let mut out = Vec::new();
    if f.sets.len() != e.len() || f.sets.iter().zip(&e.states).any(|(v, s)| v.len() != s.territory.len()) {
        out.push(FocusViolation {
            rule: "shape",
            state: 0,
            transition: String::new(),
            detail: "focus is not defined on exactly the state/region pairs".into(),
        });
        return Ok(out);
    }
    for (q, t, pairs) in b1_obligations(p, d, e, solver)? {
        if !pairs.iter().any(|&(r, i)| f.contains(q, r, i)) {
            out.push(FocusViolation {
                rule: "B1",
                state: q,
                transition: p.trans(t).name.clone(),
                detail: "no pre-region carries a refuting component".into(),
            });
        }
    }
    for (&(q, t), &q2) in &e.edges {
        let tr = p.trans(t);
        let from = &e.states[q].territory;
        let to = &e.states[q2].territory;
        for (ri2, r2) in to.regions().iter().enumerate() {
            if !r2.intersects(&tr.succ) {
                continue;
            }
            for i in f.indices(q2, ri2) {
                let ok = from
                    .regions()
                    .iter()
                    .enumerate()
                    .any(|(ri, r)| r.intersects(&tr.pre) && f.contains(q, ri, i));
                if !ok {
                    out.push(FocusViolation {
                        rule: "B2",
                        state: q,
                        transition: tr.name.clone(),
                        detail: format!("component {} reaches state {q2} but no pre-region carries it", i + 1),
                    });
                }
            }
        }
        for r in bystanders(p, t, from) {
            let ri = region_index(e, q, &r);
            let Some(ri2) = to.regions().iter().position(|x| *x == r) else {
                continue;
            };
            for i in f.indices(q2, ri2) {
                if !f.contains(q, ri, i) {
                    out.push(FocusViolation {
                        rule: "B3",
                        state: q,
                        transition: tr.name.clone(),
                        detail: format!("bystander gains component {} in state {q2}", i + 1),
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct FocusEntryJson {
    pub state: usize,
    pub region: Vec<String>,
    /// 1-based component indices.
    pub indices: Vec<usize>,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq, Eq)]
pub struct FocusJson {
    pub components: usize,
    pub entries: Vec<FocusEntryJson>,
}

impl Focus {
    pub fn to_raw(&self, p: &PetriProgram, e: &Empire) -> FocusJson {
        let mut entries = Vec::new();
        for (q, s) in e.states.iter().enumerate() {
            for (ri, r) in s.territory.regions().iter().enumerate() {
                entries.push(FocusEntryJson {
                    state: q,
                    region: r.places().iter().map(|x| p.place_name(*x).to_string()).collect(),
                    indices: self.indices(q, ri).into_iter().map(|i| i + 1).collect(),
                });
            }
        }
        FocusJson {
            components: self.components,
            entries,
        }
    }

    pub fn from_raw(raw: &FocusJson, p: &PetriProgram, e: &Empire) -> Result<Focus, FocusError> {
        if raw.components > MAX_COMPONENTS {
            return Err(FocusError::TooManyComponents(raw.components));
        }
        let mut f = Focus::empty(e, raw.components);
        for entry in &raw.entries {
            let places = entry
                .region
                .iter()
                .map(|n| p.place(n).ok_or_else(|| FocusError::Format(format!("unknown place `{n}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if entry.state >= e.len() || places.is_empty() {
                return Err(FocusError::Format(format!("entry for state {} is out of range", entry.state)));
            }
            let r = Region::new(places);
            let ri = e.states[entry.state]
                .territory
                .regions()
                .iter()
                .position(|x| *x == r)
                .ok_or_else(|| FocusError::Format(format!("state {} has no such region", entry.state)))?;
            for &i in &entry.indices {
                if i == 0 || i > raw.components {
                    return Err(FocusError::Format(format!("component index {i} out of range")));
                }
                f.insert(entry.state, ri, i - 1);
            }
        }
        Ok(f)
    }
}
