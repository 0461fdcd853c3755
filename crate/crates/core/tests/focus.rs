use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ogre_core::domain::{predicate_abstraction_domain, InvariantDomain};
use ogre_core::empire::{build_saturated_empire, bystanders, enabled_in_territory, Empire};
use ogre_core::fixtures::{example_program, EXAMPLE_DOMAIN};
use ogre_core::focus::*;
use ogre_core::logic::{check_hoare, parse_formula, HoareResult, Term};
use ogre_core::petri::{PetriProgram, PlaceId};
use ogre_core::solver::{SmtSession, SolverConfig};

fn session() -> Option<SmtSession> {
    let s = SmtSession::start(SolverConfig::resolve(None, None)).ok();
    if s.is_none() {
        eprintln!("solver unavailable; skipping");
    }
    s
}

fn setup(s: &mut SmtSession) -> (PetriProgram, InvariantDomain, Empire) {
    let p = example_program();
    let d = InvariantDomain::from_json(EXAMPLE_DOMAIN, &p).unwrap();
    let e = build_saturated_empire(&p, &d, s).unwrap();
    (p, d, e)
}

fn region_ix(p: &PetriProgram, e: &Empire, q: usize, names: &[&str]) -> usize {
    let want: Vec<PlaceId> = {
        let mut v: Vec<_> = names.iter().map(|n| p.place(n).unwrap()).collect();
        v.sort();
        v
    };
    e.states[q].territory.regions().iter().position(|r| r.places() == want.as_slice()).unwrap()
}

fn state(p: &PetriProgram, e: &Empire, shown: &str) -> usize {
    (0..e.len()).find(|q| e.states[*q].territory.show(p) == shown).unwrap()
}

type Fact = (usize, Vec<PlaceId>, usize);

/// Random-order chaotic iteration over explicit facts, with refutation
/// decided by direct Hoare checks on the component formulas.
fn oracle(p: &PetriProgram, d: &InvariantDomain, e: &Empire, s: &mut SmtSession, seed: u64) -> BTreeSet<Fact> {
    let mut facts = BTreeSet::new();
    for (q, st) in e.states.iter().enumerate() {
        for t in p.trans_ids() {
            if !enabled_in_territory(p, &st.territory, t) || e.delta(q, t).is_some() {
                continue;
            }
            for k in 0..d.len() {
                let phi = d.component_formula(&st.law, k);
                if check_hoare(&phi, &p.trans(t).stmt, &Term::ff(), &p.decls, s) != HoareResult::Holds {
                    continue;
                }
                for r in st.territory.regions() {
                    if r.intersects(&p.trans(t).pre) {
                        facts.insert((q, r.places().to_vec(), k));
                    }
                }
            }
        }
    }
    let mut edges: Vec<_> = e.edges.iter().map(|(&(q, t), &q2)| (q, t, q2)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        edges.shuffle(&mut rng);
        let mut new = Vec::new();
        for &(q, t, q2) in &edges {
            let tr = p.trans(t);
            for (fq, fr, k) in &facts {
                if *fq != q2 {
                    continue;
                }
                if fr.iter().any(|x| tr.succ.contains(x)) {
                    for r in e.states[q].territory.regions() {
                        if r.intersects(&tr.pre) {
                            new.push((q, r.places().to_vec(), *k));
                        }
                    }
                }
                if bystanders(p, t, &e.states[q].territory).iter().any(|b| b.places() == fr.as_slice()) {
                    new.push((q, fr.clone(), *k));
                }
            }
        }
        let before = facts.len();
        facts.extend(new);
        if facts.len() == before {
            return facts;
        }
    }
}

fn as_facts(f: &Focus, e: &Empire) -> BTreeSet<Fact> {
    let mut out = BTreeSet::new();
    for (q, st) in e.states.iter().enumerate() {
        for (ri, r) in st.territory.regions().iter().enumerate() {
            for k in f.indices(q, ri) {
                out.insert((q, r.places().to_vec(), k));
            }
        }
    }
    out
}

#[test]
fn example_focus_splits_threads() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    let left: BTreeSet<_> = ["p0", "p1", "p2", "p3", "p4"].iter().map(|n| p.place(n).unwrap()).collect();
    for (q, st) in e.states.iter().enumerate() {
        for (ri, r) in st.territory.regions().iter().enumerate() {
            let want = if r.places().iter().any(|x| left.contains(x)) { vec![0, 1] } else { vec![1] };
            assert_eq!(f.indices(q, ri), want, "state {q} region {ri}");
        }
    }
    assert!(check_focus(&p, &d, &e, &f, &mut s).unwrap().is_empty());
}

#[test]
fn focus_matches_chaotic_iteration() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    for seed in 0..4 {
        assert_eq!(as_facts(&f, &e), oracle(&p, &d, &e, &mut s, seed));
    }
}

#[test]
fn trivial_focus_passes() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = Focus::trivial(&e, d.len());
    assert!(check_focus(&p, &d, &e, &f, &mut s).unwrap().is_empty());
}

#[test]
fn weakened_focus_is_rejected() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    let rules = |f: &Focus, s: &mut SmtSession| -> Vec<&'static str> {
        check_focus(&p, &d, &e, f, s).unwrap().iter().map(|v| v.rule).collect()
    };

    let q4 = state(&p, &e, "{{p4},{p5,p6}}");
    let mut g = f.clone();
    g.remove(q4, region_ix(&p, &e, q4, &["p4"]), 0);
    assert!(rules(&g, &mut s).contains(&"B1"));

    let q1 = state(&p, &e, "{{p1},{p5,p6}}");
    let mut g = f.clone();
    g.remove(q1, region_ix(&p, &e, q1, &["p5", "p6"]), 1);
    assert!(rules(&g, &mut s).contains(&"B2"));

    let q3 = state(&p, &e, "{{p1},{p7}}");
    let mut g = f.clone();
    g.remove(q3, region_ix(&p, &e, q3, &["p7"]), 1);
    assert_eq!(rules(&g, &mut s), vec!["B3"]);
}

#[test]
fn monolithic_domain_focuses_everything() {
    let Some(mut s) = session() else { return };
    let p = example_program();
    let preds = ["(<= y x)", "(< y x)", "(> x 0)", "(> x 1)", "(> x 2)"]
        .iter()
        .map(|t| parse_formula(t, &p.decls).unwrap())
        .collect();
    let d = InvariantDomain::new(vec![predicate_abstraction_domain(preds).unwrap()]).unwrap();
    assert_eq!(d.len(), 1);
    let e = build_saturated_empire(&p, &d, &mut s).unwrap();
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    for (q, st) in e.states.iter().enumerate() {
        for ri in 0..st.territory.len() {
            assert_eq!(f.indices(q, ri), vec![0]);
        }
    }
    assert!(check_focus(&p, &d, &e, &f, &mut s).unwrap().is_empty());
}

#[test]
fn focus_json_round_trip() {
    let Some(mut s) = session() else { return };
    let (p, d, e) = setup(&mut s);
    let f = compute_focus(&p, &d, &e, &mut s).unwrap();
    let raw = f.to_raw(&p, &e);
    assert!(raw.entries.iter().all(|x| x.indices.iter().all(|i| *i >= 1)));
    let text = serde_json::to_string(&raw).unwrap();
    let back = Focus::from_raw(&serde_json::from_str(&text).unwrap(), &p, &e).unwrap();
    assert_eq!(back, f);

    let mut bad = raw.clone();
    bad.entries[0].indices.push(0);
    assert!(matches!(Focus::from_raw(&bad, &p, &e), Err(FocusError::Format(_))));
}
