//! Pipeline invariants over generated programs.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ogre_core::annotation::{focused_og, ghost_encoding, imperial_og, naive_og, ImperialOptions, OgAnnotation};
use ogre_core::domain::{abstract_reach, is_safe, InvariantDomain};
use ogre_core::empire::{build_saturated_empire, check_empire_valid, Empire};
use ogre_core::focus::{check_focus, compute_focus, Focus};
use ogre_core::generate::{predicate_domain, random_program, GenConfig};
use ogre_core::petri::{co_marked, co_related, explore, PetriProgram, DEFAULT_MARKING_LIMIT};
use ogre_core::solver::{SmtSession, SolverConfig};

fn program(seed: u64) -> PetriProgram {
    random_program(&mut ChaCha8Rng::seed_from_u64(seed), &GenConfig::default())
}

struct Built {
    d: InvariantDomain,
    e: Empire,
    f: Focus,
    imperial: OgAnnotation,
    focused: OgAnnotation,
}

/// `None` when the solver is missing or the domain does not prove safety.
fn build(p: &PetriProgram, s: &mut SmtSession) -> Option<Built> {
    let d = predicate_domain(p, 6);
    if !is_safe(p, &abstract_reach(p, &d, s).unwrap()).safe {
        return None;
    }
    let e = build_saturated_empire(p, &d, s).unwrap();
    let f = compute_focus(p, &d, &e, s).unwrap();
    let imperial = imperial_og(p, &d, &e, ImperialOptions::default()).unwrap();
    let focused = focused_og(p, &d, &e, &f, ImperialOptions::default(), s).unwrap();
    Some(Built { d, e, f, imperial, focused })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_are_one_safe(seed in any::<u64>()) {
        let p = program(seed);
        let g = explore(&p, DEFAULT_MARKING_LIMIT).unwrap();
        let co = co_related(&p, &g);
        for a in p.place_ids() {
            prop_assert!(!co.get(a, a));
            for b in p.place_ids() {
                prop_assert_eq!(co.get(a, b), co.get(b, a));
            }
        }
        for m in &g.markings {
            let distinct: BTreeSet<_> = m.places().iter().collect();
            prop_assert_eq!(distinct.len(), m.len());
            for a in m.places() {
                for b in m.places() {
                    prop_assert!(a == b || co.get(*a, *b));
                }
            }
        }
        let cm = co_marked(&p, &g);
        for (q, t) in cm.pairs() {
            prop_assert!(!p.trans(t).pre.contains(&q));
            prop_assert!(g.markings.iter().any(|m| p.enabled(m, t) && m.contains(q)));
        }
    }

    #[test]
    fn program_json_round_trips(seed in any::<u64>()) {
        let p = program(seed);
        let text = serde_json::to_string(&p.to_raw()).unwrap();
        let back = PetriProgram::from_json(&text).unwrap();
        prop_assert_eq!(serde_json::to_string(&back.to_raw()).unwrap(), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn certificates_have_expected_shape(seed in 0u64..10_000) {
        let Ok(mut s) = SmtSession::start(SolverConfig::resolve(None, None)) else { return Ok(()) };
        let p = program(seed);
        let Some(b) = build(&p, &mut s) else { return Ok(()) };

        prop_assert!(check_empire_valid(&p, &b.d, &b.e, &mut s).unwrap().valid());
        prop_assert!(check_focus(&p, &b.d, &b.e, &b.f, &mut s).unwrap().is_empty());

        for og in [&b.imperial, &b.focused] {
            for e in &p.errors {
                prop_assert!(og.omega[e.0].is_false());
            }
            prop_assert_eq!(og.ghosts.len(), 1);
            prop_assert!(og.metrics().ghost_updates <= p.transitions.len());
            prop_assert_eq!(&OgAnnotation::from_json(&og.to_json(&p), &p).unwrap(), og);
        }
        prop_assert!(b.focused.metrics().size <= b.imperial.metrics().size);
        prop_assert_eq!(&b.focused.gamma, &b.imperial.gamma);

        let naive = naive_og(&p, &b.d, &mut s).unwrap();
        let moved = p.transitions.iter().filter(|t| t.pre != t.succ).count();
        prop_assert_eq!(naive.metrics().ghost_updates, moved);
        prop_assert_eq!(naive.metrics().ghost_vars, p.places.len());

        let enc = ghost_encoding(&p, &b.e, true).unwrap();
        prop_assert!(enc.iter().enumerate().all(|(q, v)| *v <= q && enc[*v] == *v));

        prop_assert_eq!(Empire::from_raw(&b.e.to_raw(&p, &b.d), &p, &b.d).unwrap(), b.e.clone());
        prop_assert_eq!(Focus::from_raw(&b.f.to_raw(&p, &b.e), &p, &b.e).unwrap(), b.f.clone());

        let again = build(&p, &mut s).unwrap();
        prop_assert_eq!(again.e, b.e);
        prop_assert_eq!(again.imperial.to_json(&p), b.imperial.to_json(&p));
        prop_assert_eq!(again.focused.to_json(&p), b.focused.to_json(&p));
    }
}
