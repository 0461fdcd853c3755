use ogre_core::fixtures::example_program;
use ogre_core::petri::*;
use ogre_core::solver::{SmtSession, SolverConfig};

#[test]
fn example_has_seventeen_markings() {
    let p = example_program();
    let ms = reachable_markings(&p).unwrap();
    assert_eq!(ms.len(), 17);
    assert!(ms.contains(&p.marking(&["p2", "p6"]).unwrap()));
    assert!(ms.contains(&p.marking(&["e1", "p7"]).unwrap()));
    let left: Vec<PlaceId> = ["p1", "p2", "p3", "p4", "e1"].iter().map(|n| p.place(n).unwrap()).collect();
    for m in &ms {
        assert!(m.places().iter().filter(|q| left.contains(q)).count() <= 1);
    }
    assert!(validate_program(&p).is_empty());
}

#[test]
fn firing() {
    let p = example_program();
    let t0 = p.transition("t0").unwrap();
    let te2 = p.transition("te2").unwrap();
    assert_eq!(p.fire(&p.marking(&["p0"]).unwrap(), t0).unwrap(), p.marking(&["p1", "p5"]).unwrap());
    assert_eq!(p.fire(&p.marking(&["p4", "p7"]).unwrap(), te2).unwrap(), p.marking(&["e2"]).unwrap());
    assert!(matches!(
        p.fire(&p.marking(&["p1", "p5"]).unwrap(), t0),
        Err(PetriError::NotEnabled { .. })
    ));
}

#[test]
fn co_relations() {
    let p = example_program();
    let g = explore(&p, DEFAULT_MARKING_LIMIT).unwrap();
    let co = co_related(&p, &g);
    let pl = |n| p.place(n).unwrap();
    assert!(co.get(pl("p1"), pl("p5")));
    assert!(!co.get(pl("p2"), pl("p3")));
    for a in p.place_ids() {
        assert!(!co.get(a, a));
        for b in p.place_ids() {
            assert_eq!(co.get(a, b), co.get(b, a));
        }
    }
    let cm = co_marked(&p, &g);
    assert!(cm.get(pl("p5"), p.transition("t4").unwrap()));
    assert!(!cm.get(pl("p2"), p.transition("te2").unwrap()));
    for t in p.trans_ids() {
        for q in &p.trans(t).pre {
            assert!(!cm.get(*q, t));
        }
    }
    // Closure: successors of reachable markings are reachable.
    for m in &g.markings {
        for t in p.trans_ids() {
            if p.enabled(m, t) {
                assert!(g.contains(&p.fire(m, t).unwrap()));
            }
        }
    }
}

#[test]
fn bounded_oracle() {
    let Ok(mut s) = SmtSession::start(SolverConfig::resolve(None, None)) else {
        eprintln!("solver unavailable; skipping");
        return;
    };
    let p = example_program();
    assert_eq!(
        bounded_feasibility_oracle(&p, 12, &mut s).unwrap(),
        Feasibility::NoFeasibleErrorTrace
    );
    assert_eq!(bounded_feasibility_oracle(&p, 0, &mut s).unwrap(), Feasibility::NoFeasibleErrorTrace);
    let mut raw = p.to_raw();
    for t in &mut raw.transitions {
        if t.id == "te2" {
            t.assume = Some("(< x 4)".into());
        }
    }
    let weak = PetriProgram::from_raw(&raw).unwrap();
    match bounded_feasibility_oracle(&weak, 12, &mut s).unwrap() {
        Feasibility::FeasibleErrorTrace(seq) => assert_eq!(seq.last().map(String::as_str), Some("te2")),
        other => panic!("{other:?}"),
    }
}
